"""Multi-target tracking with coalescence-robust multi-Bernoulli reduction."""

__version__ = "0.1.0"
