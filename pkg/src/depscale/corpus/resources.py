"""Access to the data files shipped with the package."""

from __future__ import annotations

import functools
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import MissingInputError, ParseError
from .types import N_LANDMARKS


def data_path(name):
    return Path(str(resources.files("depscale") / "data" / name))


def read_reference_face(path):
    """Read a ``point,x,y`` CSV of 68 landmarks into a (68, 2) array."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "reference face")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    except ValueError as exc:
        raise ParseError(str(exc), path) from None
    if data.shape != (N_LANDMARKS, 3):
        raise ParseError(f"expected 68 rows of point,x,y; got shape {data.shape}", path)
    order = np.argsort(data[:, 0])
    return data[order, 1:].copy()


@functools.lru_cache(maxsize=None)
def _default_face():
    return read_reference_face(data_path("reference_face.csv"))


def load_reference_face(path=None):
    """Canonical frontal face used as the alignment target."""
    if path is None:
        return _default_face().copy()
    return read_reference_face(path)


def read_word_list(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "word list")
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            w = line.strip().lower()
            if w and not w.startswith("#"):
                words.add(w)
    return frozenset(words)


@functools.lru_cache(maxsize=None)
def _default_depression_words():
    return read_word_list(data_path("depression_words.txt"))


def load_depression_lexicon(path=None, sorted_list=False):
    words = _default_depression_words() if path is None else read_word_list(path)
    return sorted(words) if sorted_list else words
