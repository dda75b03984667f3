"""Gesture motion toolkit: pattern analysis, multi-codebook tokenization and evaluation metrics."""

__version__ = "0.1.0"
