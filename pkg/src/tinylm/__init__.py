"""tinylm: train and probe small language models on tiny speech corpora."""

__version__ = "0.1.0"
