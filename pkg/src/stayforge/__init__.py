"""Imbalanced length-of-stay classification: preprocessing, resampling, feed-forward nets and Bayesian search."""

__version__ = "0.1.0"
