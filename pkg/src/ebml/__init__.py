"""Energy-based machine learning toolkit built on a small reverse-mode autodiff engine."""

__version__ = "0.1.0"
