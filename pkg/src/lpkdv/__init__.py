"""Numerical workbench for the lattice potential KdV equation."""

__version__ = "0.1.0"

from .quad import LatticeField, LpkdvParams, CarrierWave, corner_solve, dispersion, evolve_ivp, quad_residual
from .reduction import ReductionCoefficients, compute_coefficients, group_velocity
from .nls import Envelope, NlsCoefficients, nls_evolve, nls_rhs

__all__ = [
    "LatticeField", "LpkdvParams", "CarrierWave", "corner_solve", "dispersion",
    "evolve_ivp", "quad_residual", "ReductionCoefficients", "compute_coefficients",
    "group_velocity", "Envelope", "NlsCoefficients", "nls_evolve", "nls_rhs",
    "__version__",
]
