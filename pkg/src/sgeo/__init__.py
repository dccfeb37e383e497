"""Finite-rank spectral geometry toolkit: truncated Dirac-type triples,
numeric axiom checks, singular-trace estimators, and chart extraction."""

__version__ = "0.1.0"

from .geometries import build
from .report import CheckReport, AsymptoticEstimate
from .triple import TruncatedTriple, BandPolicy, BandExhausted

__all__ = [
    "build",
    "CheckReport",
    "AsymptoticEstimate",
    "TruncatedTriple",
    "BandPolicy",
    "BandExhausted",
    "__version__",
]
