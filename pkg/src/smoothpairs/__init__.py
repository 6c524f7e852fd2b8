"""Graph embeddings from frequency-smoothed skip-gram pair streams."""

__version__ = "0.1.0"
