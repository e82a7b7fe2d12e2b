"""Rare-event network reliability estimation with Bayesian improved cross entropy."""

__version__ = "1.0.0"
