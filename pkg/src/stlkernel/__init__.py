"""Kernels on Signal Temporal Logic formulae and regression in formula space."""

__version__ = "0.1.0"

from .formula import ParseError, parse_formula, print_formula
from .kernel import KernelSample, gram, normalized_kernel, gaussian_kernel, raw_kernel
from .monitor import boolean_sat, robustness
from .trajectories import Mu0Config, Trajectory, sample_mu0

__all__ = [
    "__version__",
    "ParseError",
    "parse_formula",
    "print_formula",
    "KernelSample",
    "gram",
    "raw_kernel",
    "normalized_kernel",
    "gaussian_kernel",
    "robustness",
    "boolean_sat",
    "Mu0Config",
    "Trajectory",
    "sample_mu0",
]
