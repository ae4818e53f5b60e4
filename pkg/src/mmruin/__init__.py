"""Exact and asymptotic ruin quantities for Markov-modulated risk processes."""

from . import asymptotics, claims, model, parisian, ruin, scale, simulate, spectral

__all__ = [
    "asymptotics",
    "claims",
    "model",
    "parisian",
    "ruin",
    "scale",
    "simulate",
    "spectral",
]
__version__ = "0.1.0"
