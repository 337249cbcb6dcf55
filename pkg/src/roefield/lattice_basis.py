"""Scaled hat functions on the lattice tZ.

``phi_n^t(x) = t**-0.5 * phi_0(x / t - n)`` where ``phi_0`` is the unit tent
on ``[-1, 1]``. Everything is expressed through :class:`PiecewisePolynomial`
so that products and integrals stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .piecewise import PiecewisePolynomial
from .quadrature import composite_rule

HAT_NORM = math.sqrt(2.0 / 3.0)
GRAM_DIAG = 2.0 / 3.0
GRAM_OFFDIAG = 1.0 / 6.0

SQRT2 = math.sqrt(2.0)
# phi_n^{2t} in terms of phi^t, forced by matching values at the nodes
REFINEMENT = ((0, SQRT2 / 2), (-1, SQRT2 / 4), (1, SQRT2 / 4))
# the coefficients as printed in the source construction (twice too large)
DISPLAYED_REFINEMENT = ((0, SQRT2), (-1, SQRT2 / 2), (1, SQRT2 / 2))


def check_scale(t):
    t = float(t)
    if not (0.0 < t <= 1.0):
        raise ValueError(f"lattice scale must lie in (0, 1], got {t!r}")
    return t


@dataclass(frozen=True)
class LatticeScale:
    t: float

    def __post_init__(self):
        check_scale(self.t)


def hat_eval(n, t, x):
    """Value of ``phi_n^t`` at ``x`` (vectorised in ``x``)."""
    t = check_scale(t)
    u = np.asarray(x, dtype=float) / t - n
    return np.clip(1.0 - np.abs(u), 0.0, None) / math.sqrt(t)


def hat(n, t):
    """``phi_n^t`` as a piecewise polynomial on ``[t(n-1), t(n+1)]``."""
    t = check_scale(t)
    h = 1.0 / math.sqrt(t)
    return PiecewisePolynomial.from_values([t * (n - 1), t * n, t * (n + 1)], [0.0, h, 0.0])


def hat_inner(n, m):
    """Closed-form Gram entry; independent of ``t``."""
    d = abs(int(n) - int(m))
    if d == 0:
        return GRAM_DIAG
    if d == 1:
        return GRAM_OFFDIAG
    return 0.0


def hat_inner_quadrature(n, m, t):
    """Gram entry by Gauss rules split at the breakpoints of both hats."""
    t = check_scale(t)
    if abs(n - m) >= 2:
        return 0.0
    lo, hi = t * (max(n, m) - 1), t * (min(n, m) + 1)
    edges = np.arange(max(n, m) - 1, min(n, m) + 2) * t
    edges = edges[(edges >= lo) & (edges <= hi)]
    x, w = composite_rule(edges)
    return float(np.dot(w, hat_eval(n, t, x) * hat_eval(m, t, x)))


def refine(n, coefficients=REFINEMENT):
    """Expansion of ``phi_n^{2t}`` in the family ``phi^t`` as (index, coeff) pairs."""
    return [(2 * n + off, c) for off, c in coefficients]


def refinement_residual(n, t, coefficients=REFINEMENT, samples=4001):
    """Max pointwise gap of the refinement identity on a dense grid over the support."""
    t = check_scale(t)
    if 2 * t > 1.0:
        raise ValueError("refinement needs 2t <= 1")
    x = np.linspace(2 * t * (n - 1) - t, 2 * t * (n + 1) + t, samples)
    lhs = hat_eval(n, 2 * t, x)
    rhs = sum(c * hat_eval(k, t, x) for k, c in refine(n, coefficients))
    return float(np.max(np.abs(lhs - rhs)))


class LatticeFunction:
    """Finite combination ``sum_j c_j phi_j^t`` with ``j`` from ``offset``."""

    def __init__(self, t, offset, coeffs):
        self.t = check_scale(t)
        self.offset = int(offset)
        self.coeffs = np.asarray(coeffs, dtype=float)

    @property
    def indices(self):
        return np.arange(self.offset, self.offset + self.coeffs.size)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = x / self.t
        j = np.floor(u).astype(int)
        frac = u - j
        out = np.zeros_like(x)
        for node, weight in ((j, 1.0 - frac), (j + 1, frac)):
            k = node - self.offset
            ok = (k >= 0) & (k < self.coeffs.size)
            out += np.where(ok, self.coeffs[np.clip(k, 0, max(self.coeffs.size - 1, 0))] * weight, 0.0)
        return out / math.sqrt(self.t)

    def to_piecewise(self):
        if self.coeffs.size == 0:
            return PiecewisePolynomial.zero()
        nodes = self.t * np.arange(self.offset - 1, self.offset + self.coeffs.size + 1)
        values = np.concatenate([[0.0], self.coeffs, [0.0]]) / math.sqrt(self.t)
        return PiecewisePolynomial.from_values(nodes, values)

    def l2_norm(self):
        c = self.coeffs
        sq = GRAM_DIAG * np.dot(c, c) + 2 * GRAM_OFFDIAG * np.dot(c[:-1], c[1:])
        return float(np.sqrt(max(sq, 0.0)))


def lattice_range(support, t):
    """Indices ``n`` whose hat ``phi_n^t`` overlaps the open interval ``support``."""
    a, b = support
    lo = math.floor(a / t - 1.0 + 1e-9) + 1
    hi = math.ceil(b / t + 1.0 - 1e-9) - 1
    return lo, hi


def hat_lattice_coefficients(f, t):
    """Coefficients ``sqrt(t) f(tn)`` of the lattice interpolant, as a LatticeFunction."""
    t = check_scale(t)
    a, b = f.support
    n_lo = math.ceil(a / t - 1e-12)
    n_hi = math.floor(b / t + 1e-12)
    n = np.arange(n_lo, max(n_hi, n_lo - 1) + 1)
    # nodes may overshoot the support by rounding
    x = np.clip(t * n, a, b)
    return LatticeFunction(t, n_lo, math.sqrt(t) * f(x))


def interpolate_on_lattice(f, t):
    """Piecewise-linear ``g_t = sum_n sqrt(t) f(tn) phi_n^t`` so that ``g_t(tn) = f(tn)``."""
    coeffs = hat_lattice_coefficients(f, t)
    if coeffs.coeffs.size == 0:
        return PiecewisePolynomial.zero()
    return coeffs.to_piecewise().trimmed()
