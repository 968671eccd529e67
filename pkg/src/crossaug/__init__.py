"""Cross-dataset feature augmentation with encoder-decoder networks."""

__version__ = "0.1.0"
