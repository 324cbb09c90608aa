"""Generalized inverses of singular sample covariance matrices."""

__version__ = "0.1.0"
