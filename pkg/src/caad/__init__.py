"""Contrastive adversarial anomaly detection for wireless spectrum grids."""

__version__ = "0.1.0"
