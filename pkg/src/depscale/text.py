"""Transcript features: speaking rates, laughter / depression-word ratios and
word-level affect norms averaged over the participant's speech."""

from __future__ import annotations

import csv
import functools
import re
import string
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus.resources import data_path, load_depression_lexicon
from .corpus.tables import NamedVector
from .corpus.types import Speaker
from .errors import MissingInputError, ParseError, ValidationError

DEFAULT_LAUGHTER_MARKERS = ("<laughter>", "[laughter]", "laughter")

AFFECT_FIELDS = (
    "pleasure_mean", "pleasure_sd", "arousal_mean", "arousal_sd",
    "dominance_mean", "dominance_sd", "frequency",
)
COUNT_FIELDS = (
    "sentences_per_second", "words_per_second", "mean_words_per_sentence",
    "laughter_ratio", "depression_word_ratio",
)
TEXT_FIELDS = COUNT_FIELDS + tuple(f"affect_{f}" for f in AFFECT_FIELDS)

_ANNOTATION = re.compile(r"^(<[^<>]*>|\[[^\[\]]*\])$")
_STRIP = string.punctuation


class TextFeatureWarning(UserWarning):
    pass


@dataclass
class TokenizedSpeech:
    sentences: int
    words: list
    markers: list


def tokenize_participant(transcript):
    """Lowercased participant words plus any annotation markers found.

    Tokens of the form ``<...>`` or ``[...]`` are annotations, never words.
    """
    sentences = 0
    words, markers = [], []
    for entry in transcript:
        if entry.speaker is not Speaker.PARTICIPANT:
            continue
        sentences += 1
        for raw in entry.tokens:
            tok = raw.lower()
            if _ANNOTATION.match(tok):
                markers.append(tok)
                continue
            tok = tok.strip(_STRIP)
            if tok:
                words.append(tok)
    return TokenizedSpeech(sentences, words, markers)


@dataclass
class TextCounts:
    values: NamedVector
    warnings: list = field(default_factory=list)


def text_counts(transcript, duration, laughter_markers=DEFAULT_LAUGHTER_MARKERS,
                depression_lexicon=None):
    """Rates and ratios over the participant's turns.

    Sentences are participant turns.  Laughter markers are excluded from the
    word count; the ratios divide by that word count.
    """
    if not duration > 0:
        raise ValidationError("duration must be positive")
    lexicon = load_depression_lexicon() if depression_lexicon is None else depression_lexicon
    markers = {m.lower() for m in laughter_markers}
    speech = tokenize_participant(transcript)
    laughs = sum(1 for m in speech.markers if m in markers)
    words = []
    for w in speech.words:
        if w in markers:
            laughs += 1
        else:
            words.append(w)
    n_words = len(words)
    flags = []
    if n_words == 0:
        flags.append("no participant words; ratios set to 0")
        warnings.warn(flags[-1], TextFeatureWarning, stacklevel=2)
        laughter_ratio = dep_ratio = 0.0
    else:
        laughter_ratio = min(1.0, laughs / n_words)
        dep_ratio = sum(1 for w in words if w in lexicon) / n_words
    per_sentence = n_words / speech.sentences if speech.sentences else 0.0
    values = [speech.sentences / duration, n_words / duration, per_sentence,
              laughter_ratio, dep_ratio]
    return TextCounts(NamedVector(list(COUNT_FIELDS), values), flags)


@dataclass
class AffectLexicon:
    ratings: dict  # word -> 7-tuple

    def __len__(self):
        return len(self.ratings)

    def get(self, word):
        return self.ratings.get(word)


def read_affect_lexicon(path):
    """CSV ``word,<7 ratings>``; an optional header row is skipped."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "affect lexicon")
    ratings = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            if len(row) != 8:
                raise ParseError(f"expected 8 columns, found {len(row)}", path, lineno)
            try:
                vals = tuple(float(v) for v in row[1:])
            except ValueError:
                if lineno == 1:
                    continue
                raise ParseError("non-numeric rating", path, lineno) from None
            if not all(np.isfinite(vals)):
                raise ParseError("non-finite rating", path, lineno)
            ratings[row[0].strip().lower()] = vals
    if not ratings:
        raise ParseError("affect lexicon is empty", path)
    return AffectLexicon(ratings)


@functools.lru_cache(maxsize=None)
def _default_affect_lexicon():
    return read_affect_lexicon(data_path("affect_lexicon.csv"))


def load_affect_lexicon(path=None):
    """The shipped stand-in lexicon, or a user-supplied ANEW-format file."""
    return _default_affect_lexicon() if path is None else read_affect_lexicon(path)


@dataclass
class AffectFeatures:
    values: NamedVector
    hits: int
    warnings: list = field(default_factory=list)


def affect_features(transcript, lexicon=None):
    """Mean of the 7 affect ratings over participant words found in ``lexicon``."""
    lexicon = load_affect_lexicon() if lexicon is None else lexicon
    if len(lexicon) == 0:
        raise ValidationError("affect lexicon is empty")
    found = [lexicon.get(w) for w in tokenize_participant(transcript).words]
    found = [r for r in found if r is not None]
    names = [f"affect_{f}" for f in AFFECT_FIELDS]
    flags = []
    if not found:
        flags.append("no participant word found in affect lexicon; features set to 0")
        warnings.warn(flags[-1], TextFeatureWarning, stacklevel=2)
        return AffectFeatures(NamedVector(names, np.zeros(7)), 0, flags)
    return AffectFeatures(NamedVector(names, np.mean(np.array(found), axis=0)), len(found), flags)


@dataclass
class TextFeatureVector:
    values: NamedVector
    warnings: list


def text_feature_vector(transcript, duration, affect_lexicon=None,
                        depression_lexicon=None, laughter_markers=DEFAULT_LAUGHTER_MARKERS):
    """All 12 text features in :data:`TEXT_FIELDS` order."""
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always", TextFeatureWarning)
        counts = text_counts(transcript, duration, laughter_markers, depression_lexicon)
        affect = affect_features(transcript, affect_lexicon)
    return TextFeatureVector(NamedVector.concat([counts.values, affect.values]),
                             counts.warnings + affect.warnings)
