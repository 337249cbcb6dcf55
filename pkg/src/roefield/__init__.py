"""Numerical lab for hat-function compressions of operators on the line.

Subpackages are organised by layer: :mod:`piecewise` and :mod:`quadrature`
hold exact arithmetic on piecewise polynomials, :mod:`lattice_basis` and
:mod:`toeplitz` the hat family and its transition coefficients,
:mod:`line_operators` the generators and their grid oracle,
:mod:`compression` the maps between band matrices and operators on the
line, and :mod:`field_lab` the scans over the scale parameter.
"""

from .compression import PsiFrame, approx_alpha, beta, roundtrip
from .field_lab import FieldElement, continuity_scan, dyadic_limit, field_norm, norm_profile
from .line_operators import ConvKernelOp, GeneratorSum, norm_oracle
from .piecewise import PiecewisePolynomial
from .toeplitz import CoeffSequence, inv_sqrt_coeffs, truncate
from .window import WindowMatrix

__version__ = "0.1.0"

__all__ = [
    "CoeffSequence",
    "ConvKernelOp",
    "FieldElement",
    "GeneratorSum",
    "PiecewisePolynomial",
    "PsiFrame",
    "WindowMatrix",
    "approx_alpha",
    "beta",
    "continuity_scan",
    "dyadic_limit",
    "field_norm",
    "inv_sqrt_coeffs",
    "norm_oracle",
    "norm_profile",
    "roundtrip",
    "truncate",
]
