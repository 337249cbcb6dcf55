"""Finite-propagation operators on L2(R) and a fine-grid discretization oracle.

The generators are ``S_{f,g} u(x) = f(x) int g(y) u(x - y) dy`` with
compactly supported piecewise polynomials ``f`` and ``g``. Norms that have
no closed form are measured on a midpoint grid; the value is always paired
with the increment seen when the grid is halved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .piecewise import PiecewisePolynomial, convolve


class PowerIterationError(RuntimeError):
    def __init__(self, message, iterate, estimate):
        super().__init__(message)
        self.iterate = iterate
        self.estimate = estimate


class IntervalTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class ConvKernelOp:
    """``u -> f * (g convolved with u)``; propagation is ``max |y|`` over ``supp g``."""

    f: PiecewisePolynomial
    g: PiecewisePolynomial

    @property
    def propagation(self):
        lo, hi = self.g.support
        return max(abs(lo), abs(hi))

    def terms(self):
        return ((1.0, self),)

    def kernel(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.f(x) * self.g(x - y)

    def to_dict(self):
        return {"f": self.f.to_dict(), "g": self.g.to_dict()}


@dataclass(frozen=True)
class MultiplicationOp:
    f: PiecewisePolynomial

    def __call__(self, x):
        return self.f(x)


@dataclass(frozen=True)
class GeneratorSum:
    """Finite linear combination ``sum_i c_i S_{f_i, g_i}``."""

    items: tuple = ()

    def terms(self):
        return tuple((float(c), op) for c, op in self.items)

    @property
    def propagation(self):
        return max((op.propagation for _, op in self.items), default=0.0)

    def kernel(self, x, y):
        out = 0.0
        for c, op in self.terms():
            out = out + c * op.kernel(x, y)
        return out

    def __add__(self, other):
        return GeneratorSum(self.terms() + as_terms(other))

    def __mul__(self, scalar):
        return GeneratorSum(tuple((scalar * c, op) for c, op in self.terms()))

    __rmul__ = __mul__


def as_terms(S):
    """Normalise ``None``, a generator, or a combination into ``(coef, op)`` pairs."""
    if S is None:
        return ()
    terms = S.terms()
    return tuple((c, op) for c, op in terms if c != 0.0 and not (op.f.is_zero() or op.g.is_zero()))


def required_interval(S):
    """Smallest interval holding ``supp f`` and ``supp f - supp g`` for every term."""
    terms = as_terms(S)
    if not terms:
        return None
    lo = min(min(op.f.support[0], op.f.support[0] - op.g.support[1]) for _, op in terms)
    hi = max(max(op.f.support[1], op.f.support[1] - op.g.support[0]) for _, op in terms)
    return lo, hi


def conv_apply(S, u, max_degree=3, tol=1e-10):
    """``S u`` as a piecewise polynomial.

    The convolution is exact; with ``max_degree`` set, the final product is
    re-approximated piecewise to that degree with sup error below ``tol``.
    """
    result = None
    for c, op in as_terms(S):
        part = (op.f * convolve(op.g, u)).trimmed() * c
        result = part if result is None else result + part
    if result is None:
        return PiecewisePolynomial.zero()
    result = result.trimmed()
    if max_degree is None:
        return result
    reduced, _ = result.reduce_degree(max_degree, tol)
    return reduced


@dataclass(frozen=True)
class GridOperator:
    """Operator sampled on midpoints ``x_i = a + (i + 1/2) h`` with weight ``h``."""

    interval: tuple
    h: float
    matrix: np.ndarray = field(repr=False)

    @property
    def nodes(self):
        return grid_nodes(self.interval, self.h)

    def apply(self, u):
        """Act on sampled grid functions (vector or column matrix)."""
        return self.matrix @ u

    def to_csv(self):
        lines = [f"# interval={self.interval[0]!r},{self.interval[1]!r} h={self.h!r}"]
        lines += [",".join(repr(float(v)) for v in row) for row in self.matrix]
        return "\n".join(lines) + "\n"

    def save(self, path):
        np.savez(path, interval=np.array(self.interval), h=self.h, matrix=self.matrix)

    @classmethod
    def load(cls, path):
        data = np.load(path)
        return cls(tuple(float(v) for v in data["interval"]), float(data["h"]), data["matrix"])


def grid_nodes(interval, h):
    a, b = interval
    n = int(math.ceil((b - a) / h - 1e-9))
    return a + (np.arange(n) + 0.5) * h


def grid_discretize(S, interval=None, h=1.0 / 256):
    """Nystrom matrix ``f(x_i) g(x_i - x_j) h`` summed over the terms of ``S``.

    Without ``interval`` the required one (inflated by ``2h``) is used.
    """
    need = required_interval(S)
    if interval is None:
        interval = (-1.0, 1.0) if need is None else (need[0] - 2 * h, need[1] + 2 * h)
    a, b = interval
    if need is not None and (a > need[0] - 2 * h + 1e-12 or b < need[1] + 2 * h - 1e-12):
        raise IntervalTooSmall(
            f"interval [{a:g}, {b:g}] must contain [{need[0] - 2 * h:g}, {need[1] + 2 * h:g}]"
        )
    x = grid_nodes(interval, h)
    mat = np.zeros((x.size, x.size))
    diff = x[:, None] - x[None, :]
    for c, op in as_terms(S):
        rows = np.nonzero(op.f(x))[0]
        if rows.size:
            mat[rows] += c * h * op.f(x[rows])[:, None] * op.g(diff[rows])
    return GridOperator((float(a), float(b)), float(h), mat)


def power_norm(A, tol=1e-10, max_iter=100_000):
    """Largest singular value by power iteration on ``A^T A`` from the all-ones vector."""
    A = np.asarray(A, dtype=float)
    x = np.ones(A.shape[1]) / math.sqrt(A.shape[1])
    sigma = 0.0
    for _ in range(max_iter):
        y = A @ x
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0
        z = A.T @ y
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            return new
        x = z / nz
        if abs(new - sigma) <= tol * new:
            return new
        sigma = new
    raise PowerIterationError(f"no convergence in {max_iter} iterations", x, sigma)


def op_norm_oracle(G, tol=1e-10, max_iter=100_000):
    M = G.matrix if isinstance(G, GridOperator) else G
    return power_norm(M, tol, max_iter)


@dataclass(frozen=True)
class NormOracle:
    """Grid-oracle norm at the finest spacing with its halving increment."""

    value: float
    increment: float
    h: float
    history: tuple

    @property
    def extrapolated(self):
        if len(self.history) < 2:
            return self.value
        return self.value + (self.history[-1][1] - self.history[-2][1]) / 3.0

    def to_dict(self):
        return {
            "value": self.value,
            "increment": self.increment,
            "h": self.h,
            "extrapolated": self.extrapolated,
            "history": [list(p) for p in self.history],
        }


def norm_oracle(S, h=1.0 / 512, levels=2):
    """Grid norm of ``S`` at spacings ``h * 2**(levels-1) .. h``; reports the last increment."""
    if not as_terms(S):
        return NormOracle(0.0, 0.0, h, ((h, 0.0),))
    history = []
    for k in range(levels - 1, -1, -1):
        hk = h * 2**k
        history.append((hk, op_norm_oracle(grid_discretize(S, h=hk))))
    inc = abs(history[-1][1] - history[-2][1]) if len(history) > 1 else float("inf")
    return NormOracle(history[-1][1], inc, h, tuple(history))


def tent_bumps(width=0.25):
    """Tents of total width ``width`` used by the propagation probe."""
    return PiecewisePolynomial.tent(0.0, width / 2.0)


def propagation_probe(S, L, h=1.0 / 256, width=0.25):
    """Max grid norm of ``pi(phi) S pi(psi)`` over bump pairs at support distance ``L``.

    Bumps are translated tents of width ``width``; the pairs sweep every
    position where ``phi`` meets a multiplier support, with ``psi`` on
    either side.
    """
    if L <= 0:
        raise ValueError("separation must be positive")
    terms = as_terms(S)
    if not terms:
        return 0.0
    lo = min(op.f.support[0] for _, op in terms) - width
    hi = max(op.f.support[1] for _, op in terms)
    starts = np.arange(lo, hi + width / 2, width / 2)
    local = (np.arange(int(round(width / h))) + 0.5) * h
    bump = tent_bumps(width).shift(width / 2)
    weights = bump(local)
    best = 0.0
    for c0 in starts:
        x = c0 + local
        for sign in (1.0, -1.0):
            d0 = c0 + width + L if sign > 0 else c0 - L - width
            y = d0 + local
            K = sum(c * op.kernel(x[:, None], y[None, :]) for c, op in terms)
            block = weights[:, None] * K * weights[None, :] * h
            if np.any(block):
                best = max(best, float(np.linalg.norm(block, 2)))
    return best


def numerical_rank(matrix, rank_tol):
    s = np.linalg.svd(matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def local_compactness_probe(op, f, rank_tol=1e-8, side="right"):
    """Numerical rank of ``op pi(f)`` (``side="right"``) or ``pi(f) op`` on the grid of ``op``."""
    fn = f.f if isinstance(f, MultiplicationOp) else f
    x = op.nodes
    fx = fn(x)
    if not np.any(fx):
        return 0
    if side == "right":
        cols = np.nonzero(fx)[0]
        M = op.matrix[:, cols] * fx[cols][None, :]
    elif side == "left":
        rows = np.nonzero(fx)[0]
        M = fx[rows][:, None] * op.matrix[rows, :]
    else:
        raise ValueError("side must be 'left' or 'right'")
    return numerical_rank(M, rank_tol)
