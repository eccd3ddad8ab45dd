"""Multimodal PHQ-8 depression-severity estimation from interview recordings."""

__version__ = "0.1.0"
