"""Noisy-label training with two jointly trained networks, small-loss
selection and intermittent label correction."""

__version__ = "0.1.0"
