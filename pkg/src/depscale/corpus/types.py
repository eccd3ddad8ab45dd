"""Core data containers for interview sessions."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ValidationError

N_LANDMARKS = 68

PHQ8_ITEMS = (
    "NoInterest",
    "Depressed",
    "Sleep",
    "Tired",
    "Appetite",
    "Failure",
    "Concentrating",
    "Moving",
)

# PHQ-8 screening cutoff used for the binary flag.
PHQ8_BINARY_CUTOFF = 10


@dataclass(frozen=True)
class LandmarkFrame:
    """One frame of 68 2-D facial landmarks.

    ``points`` is a (68, 2) array indexed from 0; use :meth:`point` for the
    1-based iBUG numbering.
    """

    frame_index: int
    timestamp: float
    confidence: float
    valid: bool
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (N_LANDMARKS, 2):
            raise ValidationError(
                f"frame {self.frame_index}: expected (68, 2) points, got {pts.shape}"
            )
        object.__setattr__(self, "points", pts)

    def point(self, number: int) -> np.ndarray:
        """Landmark by 1-based iBUG-68 number."""
        return self.points[number - 1]


def valid_frames(frames):
    return [f for f in frames if f.valid]


def stack_points(frames) -> np.ndarray:
    """(n_frames, 68, 2) array of landmark coordinates."""
    if not frames:
        return np.zeros((0, N_LANDMARKS, 2))
    return np.stack([f.points for f in frames])


class Speaker(enum.Enum):
    PARTICIPANT = "Participant"
    INTERVIEWER = "Interviewer"

    @classmethod
    def from_label(cls, label: str) -> "Speaker":
        if label.strip().lower() == "participant":
            return cls.PARTICIPANT
        return cls.INTERVIEWER


@dataclass(frozen=True)
class TranscriptEntry:
    start_time: float
    stop_time: float
    speaker: Speaker
    tokens: tuple

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass
class LldFrameSeries:
    """Per-frame low-level audio descriptors (frames x channels)."""

    channels: list
    values: np.ndarray
    frame_period: float = 0.010
    voiced: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.channels):
            raise ValidationError(
                f"LLD matrix shape {self.values.shape} does not match "
                f"{len(self.channels)} channels"
            )
        if not self.frame_period > 0:
            raise ValidationError("frame_period must be positive")
        if self.voiced is None:
            self.voiced = np.ones(self.n_frames, dtype=bool)
        else:
            self.voiced = np.asarray(self.voiced, dtype=bool)
            if self.voiced.shape != (self.n_frames,):
                raise ValidationError("voiced flag length differs from frame count")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def span(self) -> float:
        """Covered time in seconds."""
        return self.n_frames * self.frame_period


@dataclass(frozen=True)
class Phq8Labels:
    items: tuple
    total: Optional[int] = None
    binary: Optional[bool] = None

    def __post_init__(self):
        items = tuple(int(v) for v in self.items)
        if len(items) != len(PHQ8_ITEMS):
            raise ValidationError(f"expected 8 PHQ-8 items, got {len(items)}")
        bad = [(PHQ8_ITEMS[i], v) for i, v in enumerate(items) if not 0 <= v <= 3]
        if bad:
            raise ValidationError(f"PHQ-8 item scores outside [0, 3]: {bad}")
        total = sum(items)
        if self.total is not None and int(self.total) != total:
            raise ValidationError(
                f"PHQ-8 total {self.total} does not equal item sum {total}"
            )
        binary = total >= PHQ8_BINARY_CUTOFF if self.binary is None else bool(self.binary)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "total", total)
        object.__setattr__(self, "binary", binary)


class Split(enum.Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


@dataclass(frozen=True)
class SessionManifest:
    """Files belonging to one interview session.

    ``channels`` is a tuple of AU/gaze/pose files (one combined file, or the
    challenge's three separate ones).
    """

    session_id: str
    duration: float
    landmarks: Path
    channels: tuple
    lld: Path
    transcript: Path
    labels: Optional[Path] = None
    split: Split = Split.TRAIN

    def __post_init__(self):
        if not self.duration > 0:
            raise ValidationError(f"session {self.session_id}: duration must be > 0")
        if isinstance(self.channels, (str, Path)):
            object.__setattr__(self, "channels", (Path(self.channels),))

    def all_paths(self):
        out = [self.landmarks, *self.channels, self.lld, self.transcript]
        if self.labels is not None:
            out.append(self.labels)
        return [Path(p) for p in out]
