"""Landmark-derived visual features.

Landmarks use the 1-based iBUG-68 numbering throughout this module.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus.resources import load_reference_face
from .corpus.stats import HEAD3, VIDEO11, descriptive_stats, rounded_mode
from .corpus.tables import NamedVector
from .corpus.types import stack_points, valid_frames
from .errors import ValidationError

logger = logging.getLogger(__name__)

HEAD_POINTS = (2, 4, 14, 16)
HEAD_CHANNELS = ("dx", "dy", "dmag", "vx", "vy", "vmag")

LEFT_EYE = (37, 38, 39, 40, 41, 42)

# name -> list of point pairs whose distances are averaged
REGION_PAIRS = {
    "left_eye_h": [(37, 40)],
    "left_eye_v": [(38, 42)],
    "right_eye_h": [(43, 46)],
    "right_eye_v": [(44, 48)],
    "mouth_h": [(55, 49), (65, 61)],
    "mouth_v": [(52, 58)],
    "head_h": [(2, 16), (4, 14)],
    "head_v": [(22, 8), (23, 10)],
    "brow_h": [(22, 23), (27, 18)],
    "brow_v": [(31, 25), (31, 20)],
}
REGION_NAMES = tuple(REGION_PAIRS)

BLINK_RATIO = 0.9


def head_motion_displacements(frames):
    """Per-pair displacements of the head points over consecutive valid frames.

    Returns an array of shape (n_valid - 1, 4, 2).
    """
    pts = stack_points(valid_frames(frames))
    if pts.shape[0] < 2:
        raise ValidationError("head motion needs at least 2 valid frames")
    idx = [p - 1 for p in HEAD_POINTS]
    return np.diff(pts[:, idx, :], axis=0)


def head_motion_features(frames, fps=30.0):
    """Mean/median/mode of displacement and velocity for points 2, 4, 14, 16.

    Velocity is displacement times ``fps``.  Output has 4 x 6 x 3 = 72 values
    named ``p<point>_<channel>_<stat>``.
    """
    if not fps > 0:
        raise ValidationError("fps must be positive")
    disp = head_motion_displacements(frames)
    names, values = [], []
    for k, point in enumerate(HEAD_POINTS):
        dx = disp[:, k, 0]
        dy = disp[:, k, 1]
        mag = np.hypot(dx, dy)
        channels = (dx, dy, mag, dx * fps, dy * fps, mag * fps)
        for cname, series in zip(HEAD_CHANNELS, channels):
            for stat, v in descriptive_stats(series, HEAD3).items():
                names.append(f"p{point}_{cname}_{stat}")
                values.append(v)
    return NamedVector(names, values)


@dataclass
class AffineTransform:
    linear: np.ndarray
    translation: np.ndarray

    def apply(self, points):
        return np.asarray(points, dtype=float) @ self.linear.T + self.translation


def _design(points):
    pts = np.asarray(points, dtype=float)
    return np.concatenate([pts, np.ones(pts.shape[:-1] + (1,))], axis=-1)


def fit_affine(source, reference):
    """Least-squares affine map taking ``source`` points onto ``reference``.

    Minimises ``sum ||A s_i + t - r_i||^2`` through the normal equations of the
    linear system ``[x y 1] P = r``.
    """
    src = np.asarray(source, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if src.shape != ref.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValidationError("source and reference must both be (n, 2) point sets")
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(ref))):
        raise ValidationError("non-finite landmark coordinates")
    X = _design(src)
    if np.linalg.matrix_rank(X) < 3:
        raise ValidationError("degenerate (collinear) source configuration")
    P = np.linalg.solve(X.T @ X, X.T @ ref)
    return AffineTransform(linear=P[:2].T.copy(), translation=P[2].copy())


def align_frames(points, reference):
    """Affine-align a stack of (n, 68, 2) point sets to ``reference``."""
    X = _design(points)
    if np.any(np.linalg.matrix_rank(X) < 3):
        raise ValidationError("degenerate (collinear) landmark frame")
    Xt = np.swapaxes(X, 1, 2)
    P = np.linalg.solve(Xt @ X, Xt @ reference[None])
    return X @ P


@dataclass
class RegionDistanceSeries:
    names: tuple
    series: np.ndarray  # (10, n_retained), each row sums to 1

    def descriptors(self):
        """Per-retained-frame 10-vectors, shape (n_retained, 10)."""
        return self.series.T.copy()


def raw_region_distances(points):
    """Unnormalized (10, n) distance series from a (n, 68, 2) stack."""
    out = np.empty((len(REGION_PAIRS), points.shape[0]))
    for r, pairs in enumerate(REGION_PAIRS.values()):
        d = [np.linalg.norm(points[:, a - 1] - points[:, b - 1], axis=-1) for a, b in pairs]
        out[r] = np.mean(d, axis=0)
    return out


def region_distance_series(frames, reference=None, subsample=3):
    """The 10 sum-normalized facial region distance series.

    Invalid frames are dropped first; every ``subsample``-th remaining frame
    is kept, aligned to ``reference`` and measured.
    """
    if subsample < 1:
        raise ValidationError("subsample must be >= 1")
    ref = load_reference_face() if reference is None else np.asarray(reference, float)
    pts = stack_points(valid_frames(frames))
    if pts.shape[0] == 0:
        raise ValidationError("no valid frames")
    aligned = align_frames(pts[::subsample], ref)
    raw = raw_region_distances(aligned)
    totals = raw.sum(axis=1)
    if np.any(totals <= 0):
        bad = [REGION_NAMES[i] for i in np.flatnonzero(totals <= 0)]
        raise ValidationError(f"zero-sum distance series: {bad}")
    return RegionDistanceSeries(REGION_NAMES, raw / totals[:, None])


def polygon_area(points):
    """Absolute shoelace area of polygon(s); ``points`` is (..., n, 2)."""
    x = points[..., 0]
    y = points[..., 1]
    return 0.5 * np.abs(np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1))


def eye_areas(frames, eye=LEFT_EYE):
    pts = stack_points(valid_frames(frames))
    return polygon_area(pts[:, [p - 1 for p in eye], :])


def count_blinks(areas, open_area, ratio=BLINK_RATIO):
    """Number of maximal runs of frames with area below ``ratio * open_area``."""
    below = np.asarray(areas) < ratio * open_area
    if below.size == 0:
        return 0
    starts = below & ~np.concatenate([[False], below[:-1]])
    return int(starts.sum())


@dataclass
class BlinkFeatures:
    blink_count: int
    blink_frequency: float
    open_area: float
    closed_area: float

    def vector(self):
        return NamedVector(
            ["blink_count", "blink_frequency", "open_area", "closed_area"],
            [self.blink_count, self.blink_frequency, self.open_area, self.closed_area],
        )


def blink_features_from_areas(areas, duration, sample_count=1000, seed=0):
    areas = np.asarray(areas, dtype=float)
    if areas.size == 0:
        raise ValidationError("blink detection needs at least one valid frame")
    if not duration > 0:
        raise ValidationError("duration must be positive")
    open_area = rounded_mode(areas)
    if open_area <= 0:
        raise ValidationError("open-eye area is zero")
    rng = np.random.default_rng(seed)
    sample = rng.choice(areas.size, size=min(sample_count, areas.size), replace=False)
    closed_area = float(areas[sample].min())
    count = count_blinks(areas, open_area)
    return BlinkFeatures(count, count / duration, open_area, min(closed_area, open_area))


def blink_features(frames, duration, sample_count=1000, seed=0):
    """Blink count and rate from the left-eye polygon area trace.

    The open-eye area is the (rounded) mode of the trace; a blink is a maximal
    run of frames under 90% of it.  ``closed_area`` is the minimum over a
    seeded sample of ``sample_count`` frames and is reported only.
    """
    return blink_features_from_areas(eye_areas(frames), duration, sample_count, seed)


def channel_statistics(names, matrix, stats=VIDEO11):
    """Descriptive statistics of each column of ``matrix``, in column order."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] != len(names):
        raise ValidationError("channel matrix does not match channel names")
    if matrix.shape[0] == 0:
        raise ValidationError("channel statistics need at least one frame")
    parts = [
        NamedVector.from_mapping(descriptive_stats(matrix[:, j], stats), prefix=f"{name}_")
        for j, name in enumerate(names)
    ]
    return NamedVector.concat(parts)
