"""Participant-only statistics and DCT coefficients over low-level audio descriptors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .corpus.stats import AUDIO9, descriptive_stats
from .corpus.tables import NamedVector
from .corpus.types import Speaker
from .errors import ValidationError

N_DCT = 10

# channels that are meaningless on unvoiced frames
F0_FAMILY = ("F0",)


@dataclass
class ParticipantMask:
    selected: np.ndarray
    segments: list  # merged [start, stop) intervals in seconds

    @property
    def count(self):
        return int(self.selected.sum())


def merge_intervals(intervals):
    out = []
    for start, stop in sorted(intervals):
        if out and start <= out[-1][1]:
            out[-1][1] = max(out[-1][1], stop)
        else:
            out.append([start, stop])
    return [tuple(seg) for seg in out]


def participant_mask(transcript, series):
    """Select LLD frames whose centre time falls in a participant turn.

    Frame ``i`` is centred at ``(i + 0.5) * frame_period``; turns are treated
    as half-open ``[start, stop)`` intervals after merging overlaps.
    """
    if not transcript:
        raise ValidationError("transcript is empty")
    segments = merge_intervals(
        (e.start_time, e.stop_time) for e in transcript if e.speaker is Speaker.PARTICIPANT
    )
    centres = (np.arange(series.n_frames) + 0.5) * series.frame_period
    selected = np.zeros(series.n_frames, dtype=bool)
    for start, stop in segments:
        lo = np.searchsorted(centres, start, side="left")
        hi = np.searchsorted(centres, stop, side="left")
        selected[lo:hi] = True
    if not selected.any():
        raise ValidationError("no LLD frames fall inside participant speech")
    return ParticipantMask(selected, segments)


def _masked_channel(series, mask, j, exclude_unvoiced):
    sel = mask.selected
    if exclude_unvoiced and series.channels[j] in F0_FAMILY:
        sel = sel & series.voiced
    return series.values[sel, j]


def lld_statistics(series, mask, stats=AUDIO9, exclude_unvoiced=False):
    """Per-channel descriptive statistics over the masked frames."""
    if mask.count < 2:
        raise ValidationError("need at least 2 participant frames for statistics")
    parts = []
    for j, name in enumerate(series.channels):
        x = _masked_channel(series, mask, j, exclude_unvoiced)
        if x.size == 0:
            raise ValidationError(f"channel {name}: no voiced participant frames")
        parts.append(NamedVector.from_mapping(descriptive_stats(x, stats), prefix=f"{name}_"))
    return NamedVector.concat(parts)


def dct_coefficients(x, n_coeffs=N_DCT):
    """First ``n_coeffs`` orthonormal DCT-II coefficients, zero-padded."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValidationError("DCT of an empty sequence")
    full = dct(x, type=2, norm="ortho")
    out = np.zeros(n_coeffs)
    k = min(n_coeffs, full.size)
    out[:k] = full[:k]
    return out


def dct_features(series, mask, n_coeffs=N_DCT, exclude_unvoiced=False):
    """Leading DCT-II coefficients of each channel's masked sequence."""
    if mask.count < 1:
        raise ValidationError("empty participant mask")
    names, values = [], []
    for j, name in enumerate(series.channels):
        x = _masked_channel(series, mask, j, exclude_unvoiced)
        values.append(dct_coefficients(x, n_coeffs))
        names.extend(f"{name}_dct{k}" for k in range(n_coeffs))
    return NamedVector(names, np.concatenate(values))


def audio_feature_vector(series, transcript, n_coeffs=N_DCT, exclude_unvoiced=False):
    """Per channel: 9 statistics followed by ``n_coeffs`` DCT coefficients."""
    mask = participant_mask(transcript, series)
    stats = lld_statistics(series, mask, exclude_unvoiced=exclude_unvoiced)
    coeffs = dct_features(series, mask, n_coeffs, exclude_unvoiced=exclude_unvoiced)
    n_stats = len(AUDIO9)
    parts = []
    for j in range(len(series.channels)):
        parts.append(NamedVector(stats.names[j * n_stats:(j + 1) * n_stats],
                                 stats.values[j * n_stats:(j + 1) * n_stats]))
        parts.append(NamedVector(coeffs.names[j * n_coeffs:(j + 1) * n_coeffs],
                                 coeffs.values[j * n_coeffs:(j + 1) * n_coeffs]))
    return NamedVector.concat(parts)
