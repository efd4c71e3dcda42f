"""Sampling-interval trade-off analysis for CAV safety monitoring."""

__version__ = "0.1.0"
