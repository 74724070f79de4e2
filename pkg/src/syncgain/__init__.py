"""Synchronizing state-feedback gains for linear multi-agent networks."""

from .graph import WeightedDigraph, laplacian, nonzero_spectrum, preset
from .linalg import Plant
from .synth import METHODS, AlgorithmConfig, SynthesisResult, design
from .verify import check_mu_uges, estimate_rate

__all__ = [
    "AlgorithmConfig",
    "METHODS",
    "Plant",
    "SynthesisResult",
    "WeightedDigraph",
    "check_mu_uges",
    "design",
    "estimate_rate",
    "laplacian",
    "nonzero_spectrum",
    "preset",
]
__version__ = "0.1.0"
