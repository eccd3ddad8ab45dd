"""Session data model, file readers, statistics kernel and synthetic corpus."""

from .manifest import dump_manifest, load_manifest
from .parsing import (
    parse_channel_file,
    parse_labels,
    parse_landmark_file,
    parse_lld_file,
    parse_transcript,
)
from .stats import AUDIO9, HEAD3, VIDEO11, Stat, StatSet, descriptive_stats
from .synth import generate_corpus, generate_synthetic_session
from .types import (
    PHQ8_ITEMS,
    LandmarkFrame,
    LldFrameSeries,
    Phq8Labels,
    SessionManifest,
    Speaker,
    Split,
    TranscriptEntry,
)

__all__ = [
    "AUDIO9", "HEAD3", "VIDEO11", "PHQ8_ITEMS", "LandmarkFrame", "LldFrameSeries",
    "Phq8Labels", "SessionManifest", "Speaker", "Split", "Stat", "StatSet",
    "TranscriptEntry", "descriptive_stats", "dump_manifest", "generate_corpus",
    "generate_synthetic_session", "load_manifest", "parse_channel_file",
    "parse_labels", "parse_landmark_file", "parse_lld_file", "parse_transcript",
]
