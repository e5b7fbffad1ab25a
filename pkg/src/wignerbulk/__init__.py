"""Bulk universality experiments for Wigner Hermitian random matrices."""

__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig, load_config, parse_config  # noqa: E402
from .eigensolver import ConvergenceError, Spectrum, eigenvalues  # noqa: E402
from .ensemble import (  # noqa: E402
    AtomDistribution,
    WignerMatrix,
    make_atom,
    make_truncated,
    ou_atom_moments,
    ou_interpolate,
    sample_gue,
    sample_wigner,
    truncate_atom,
)
from .gapstats import correlation_statistic, gap_curve, gap_statistic  # noqa: E402
from .predict import fredholm_det, gap_density, gap_limit_cdf, sine_correlation_integral, sine_det, sine_kernel  # noqa: E402
from .spectral import EnergyWindow, classical_location, local_law_check, rho_sc, semicircle_cdf  # noqa: E402
from .testfunctions import make_bump, make_pair_bump  # noqa: E402

__all__ = [
    "AtomDistribution",
    "ConfigError",
    "ConvergenceError",
    "EnergyWindow",
    "ExperimentConfig",
    "Spectrum",
    "WignerMatrix",
    "classical_location",
    "correlation_statistic",
    "eigenvalues",
    "fredholm_det",
    "gap_curve",
    "gap_density",
    "gap_limit_cdf",
    "gap_statistic",
    "load_config",
    "local_law_check",
    "make_atom",
    "make_bump",
    "make_pair_bump",
    "make_truncated",
    "ou_atom_moments",
    "ou_interpolate",
    "parse_config",
    "rho_sc",
    "sample_gue",
    "sample_wigner",
    "semicircle_cdf",
    "sine_correlation_integral",
    "sine_det",
    "sine_kernel",
    "truncate_atom",
]
