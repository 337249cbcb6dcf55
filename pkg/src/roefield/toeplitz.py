"""Symmetric bi-infinite Toeplitz operators through their symbols.

A symmetric Toeplitz matrix with entries ``a_{|n-m|}`` acts on l2(Z) as
multiplication by the even symbol ``a_0 + 2 sum_k a_k cos(kx)``. The Gram
matrix of the hat family has symbol ``2/3 + cos(x)/3`` and the transition
operator ``C = G^{-1/2}`` has its reciprocal square root.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, toeplitz

from .lattice_basis import GRAM_DIAG, GRAM_OFFDIAG
from .window import WindowMatrix

TAIL_SAFETY = 10.0
FIT_FLOOR = 1e-14


class TruncationError(ValueError):
    """The requested accuracy is below what the stored coefficients certify."""


class DecayFitError(ValueError):
    pass


@dataclass(frozen=True)
class CoeffSequence:
    """One side ``a_0..a_K`` of a symmetric sequence, plus a certified tail.

    ``tail_bound`` bounds ``sum_{k>K} |a_k|`` (one side); ``None`` means
    no certificate is available.
    """

    coeffs: np.ndarray = field(repr=False)
    tail_bound: float | None = None

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        if self.tail_bound is not None and self.tail_bound < 0:
            raise ValueError("tail_bound must be non-negative")

    @property
    def K(self):
        return self.coeffs.size - 1

    def at(self, k):
        k = abs(int(k))
        return float(self.coeffs[k]) if k <= self.K else 0.0

    def two_sided(self):
        """Entries at offsets ``-K..K``."""
        return np.concatenate([self.coeffs[:0:-1], self.coeffs])

    def block(self, lo, hi, col_lo=None, col_hi=None):
        """Dense matrix ``(a_{|n-m|})`` for rows ``[lo, hi]`` and columns ``[col_lo, col_hi]``."""
        col_lo = lo if col_lo is None else col_lo
        col_hi = hi if col_hi is None else col_hi
        rows = np.arange(lo, hi + 1)[:, None]
        cols = np.arange(col_lo, col_hi + 1)[None, :]
        d = np.abs(rows - cols)
        padded = np.concatenate([self.coeffs, [0.0]])
        return padded[np.minimum(d, self.K + 1)]

    def shifted(self, c):
        """Sequence of ``T(a) - c I``."""
        arr = self.coeffs.copy()
        arr[0] -= c
        return CoeffSequence(arr, self.tail_bound)

    def to_dict(self):
        return {"coeffs": [float(v) for v in self.coeffs], "tail_bound": self.tail_bound}

    def to_text(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        return cls(np.array([float(v) for v in data["coeffs"]]), data.get("tail_bound"))


@dataclass(frozen=True)
class BandToeplitz:
    """Banded symmetric Toeplitz operator of propagation ``propagation``.

    ``error`` is a certified bound on the operator-norm distance to the
    sequence it was cut from.
    """

    base: CoeffSequence
    propagation: int
    error: float = 0.0

    def __post_init__(self):
        if self.propagation < 0:
            raise ValueError("propagation must be non-negative")
        if np.any(self.base.coeffs[self.propagation + 1 :] != 0.0):
            raise ValueError("entries beyond the propagation must vanish")

    @property
    def coeffs(self):
        return self.base.coeffs

    def block(self, lo, hi, col_lo=None, col_hi=None):
        return self.base.block(lo, hi, col_lo, col_hi)


class SymbolFunction:
    """Even 2pi-periodic symbol ``a_0 + 2 sum_k a_k cos(kx)``."""

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs.coeffs if isinstance(coeffs, (CoeffSequence, BandToeplitz)) else coeffs, dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.arange(1, self.coeffs.size)
        out = np.full(x.shape, self.coeffs[0] if self.coeffs.size else 0.0)
        if k.size:
            out = out + 2.0 * np.cos(np.multiply.outer(x, k)) @ self.coeffs[1:]
        return out


def gram_coeffs():
    return CoeffSequence(np.array([GRAM_DIAG, GRAM_OFFDIAG]), tail_bound=0.0)


def symbol_of(c):
    return SymbolFunction(c)


def gram_symbol(x):
    return GRAM_DIAG + 2 * GRAM_OFFDIAG * np.cos(x)


def _check_quad_points(K, quad_points):
    if K < 0:
        raise ValueError("K must be non-negative")
    if quad_points < 4 * K:
        raise ValueError(f"quad_points={quad_points} < 4K={4 * K}: aliasing risk")
    if quad_points < 64 or quad_points & (quad_points - 1):
        raise ValueError("quad_points must be a power of two >= 64")


def symbol_fourier_coeffs(fn, quad_points):
    """Cosine coefficients ``a_0..a_{N/2}`` of an even symbol by the periodic trapezoid rule."""
    x = 2 * np.pi * np.arange(quad_points) / quad_points
    return np.fft.rfft(fn(x)).real / quad_points


def _geometric_fit(a):
    k = np.nonzero(np.abs(a) > FIT_FLOOR)[0]
    if k.size < 3:
        raise DecayFitError(f"only {k.size} coefficients above {FIT_FLOOR:g}; cannot fit decay")
    slope, intercept = np.polyfit(k, np.log(np.abs(a[k])), 1)
    return math.exp(intercept), math.exp(slope)


def _certified_tail(a_all, K, safety=TAIL_SAFETY):
    """Bound on ``sum_{k>K} |a_k|`` from the computed coefficients.

    Coefficients up to ``N/4`` are summed explicitly; beyond that a fitted
    geometric tail is added with a safety factor.
    """
    k_fit = a_all.size // 2  # rfft length N/2+1 -> stop at N/4
    explicit = float(np.sum(np.abs(a_all[K + 1 : k_fit + 1])))
    amp, ratio = _geometric_fit(a_all[: k_fit + 1])
    if ratio >= 1.0:
        raise DecayFitError(f"fitted ratio {ratio:.3f} >= 1")
    extrapolated = amp * ratio ** (k_fit + 1) / (1.0 - ratio)
    return explicit + safety * extrapolated


def inv_sqrt_coeffs(K=64, quad_points=4096):
    """Coefficients of ``C = G^{-1/2}``, i.e. of the symbol ``(2/3 + cos(x)/3)^{-1/2}``."""
    _check_quad_points(K, quad_points)
    a_all = symbol_fourier_coeffs(lambda x: gram_symbol(x) ** -0.5, quad_points)
    return CoeffSequence(a_all[: K + 1], _certified_tail(a_all, K))


def sqrt_coeffs(K=64, quad_points=4096):
    """Coefficients of ``G^{1/2}`` (the inverse of the transition operator)."""
    _check_quad_points(K, quad_points)
    a_all = symbol_fourier_coeffs(lambda x: gram_symbol(x) ** 0.5, quad_points)
    return CoeffSequence(a_all[: K + 1], _certified_tail(a_all, K))


def dense_inv_sqrt_oracle(N):
    """``G_N^{-1/2}`` on the window ``[-N, N]`` by symmetric eigendecomposition.

    Entries farther than ``N/2`` from the edge form the certified interior.
    """
    if N < 8:
        raise ValueError("N must be at least 8")
    size = 2 * N + 1
    w, V = eigh_tridiagonal(np.full(size, GRAM_DIAG), np.full(size - 1, GRAM_OFFDIAG))
    if w.min() <= 0:
        raise np.linalg.LinAlgError("Gram truncation is numerically singular")
    entries = (V * w**-0.5) @ V.T
    return WindowMatrix((-N, N), entries, pad=N // 2)


def truncation_error(c, M, method="sharp"):
    """Certified l1 bound on ``||T(c) - T(c_M)||`` for the given cut."""
    a = np.abs(c.coeffs)
    tail = 2.0 * c.tail_bound
    k = np.arange(a.size)
    if method == "sharp":
        return 2.0 * float(np.sum(a[M + 1 :])) + tail
    if method == "fejer":
        w = np.where(k < M, k / M, 1.0)
        return 2.0 * float(np.sum(w[1:] * a[1:])) + tail
    raise ValueError(f"unknown truncation method {method!r}")


def truncate(c, eps, method="sharp", max_propagation=1 << 20):
    """Banded approximant with certified ``||C - C_eps|| < eps``.

    ``method="sharp"`` drops every offset beyond the minimal ``M``.
    ``method="fejer"`` uses Cesaro weights ``1 - k/M`` instead, whose error
    shrinks like ``1/M`` with a fixed leading shape.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if c.tail_bound is None:
        raise ValueError("sequence carries no tail certificate")
    if 2.0 * c.tail_bound >= eps:
        raise TruncationError(
            f"eps={eps:.3e} is below the tail certificate {2 * c.tail_bound:.3e}; increase K"
        )
    if method == "sharp":
        for M in range(c.K + 1):
            err = truncation_error(c, M, "sharp")
            if err < eps:
                return BandToeplitz(CoeffSequence(c.coeffs[: M + 1], 0.0), M, err)
        raise TruncationError(f"eps={eps:.3e} not reached within K={c.K}; increase K")
    if method == "fejer":
        lo, hi = 1, max_propagation
        if truncation_error(c, hi, "fejer") >= eps:
            raise TruncationError(f"eps={eps:.3e} needs propagation beyond {max_propagation}")
        while lo < hi:
            mid = (lo + hi) // 2
            if truncation_error(c, mid, "fejer") < eps:
                hi = mid
            else:
                lo = mid + 1
        M = lo
        kk = np.arange(min(M, c.K + 1))
        b = c.coeffs[: kk.size] * (1.0 - kk / M)
        prop = max(int(np.max(np.nonzero(b)[0], initial=0)), 0)
        return BandToeplitz(CoeffSequence(b[: prop + 1], 0.0), prop, truncation_error(c, M, "fejer"))
    raise ValueError(f"unknown truncation method {method!r}")


def toeplitz_norm(c, grid=20001):
    """Lower and upper bounds on the operator norm of ``T(c)``.

    The lower bound is the maximum of the symbol on a grid over ``[0, pi]``
    (the norm equals the symbol's sup); the upper bound is the l1 sum.
    """
    x = np.linspace(0.0, np.pi, grid)
    lower = float(np.max(np.abs(symbol_of(c)(x))))
    tail = 0.0 if c.tail_bound is None else 2.0 * c.tail_bound
    upper = float(abs(c.coeffs[0]) + 2.0 * np.sum(np.abs(c.coeffs[1:])) + tail)
    return lower, upper


def decay_fit(c):
    """Least-squares fit ``|a_k| ~ amplitude * ratio**k``; requires ``K >= 16``."""
    if c.K < 16:
        raise DecayFitError(f"K={c.K} < 16: too few coefficients for a decay fit")
    amp, ratio = _geometric_fit(c.coeffs)
    if ratio >= 1.0:
        raise DecayFitError(f"fitted ratio {ratio:.4f} >= 1: no decay")
    return amp, ratio


def coeff_product(a, b):
    """Coefficients of ``T(a) T(b)`` for symmetric sequences (exact convolution)."""
    a = a.coeffs if isinstance(a, CoeffSequence) else np.asarray(a, float)
    b = b.coeffs if isinstance(b, CoeffSequence) else np.asarray(b, float)
    two_a = np.concatenate([a[:0:-1], a])
    two_b = np.concatenate([b[:0:-1], b])
    full = np.convolve(two_a, two_b)
    centre = full.size // 2
    return CoeffSequence(full[centre:])


def dense_toeplitz(c, size):
    col = np.zeros(size)
    n = min(size, c.coeffs.size)
    col[:n] = c.coeffs[:n]
    return toeplitz(col)
