"""Compactly supported piecewise polynomials on the real line.

Each piece is stored in the local variable ``s = x - b_i`` where ``b_i`` is
the left breakpoint of the piece, with ascending coefficients. The text
format accepts either local or global coefficients (see :func:`from_dict`).
"""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as P

from .quadrature import composite_rule

MAX_INPUT_DEGREE = 3


def _as_number(value):
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


def _shift_local(coeffs, delta):
    """Coefficients of ``p(s + delta)`` given those of ``p(s)``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if delta == 0.0 or coeffs.size <= 1:
        return coeffs.copy()
    out = np.zeros_like(coeffs)
    power = np.array([1.0])
    base = np.array([delta, 1.0])
    for c in coeffs:
        out[: power.size] += c * power
        power = P.polymul(power, base)
    return out


class PiecewisePolynomial:
    """Piecewise polynomial with compact support ``[b_0, b_m]``.

    Evaluation at an interior breakpoint uses the piece to its right; the
    last breakpoint uses the left limit; points outside the support give 0.
    """

    __slots__ = ("breakpoints", "coeffs")

    def __init__(self, breakpoints, coeffs):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(coeffs) != bp.size - 1:
            raise ValueError(
                f"{bp.size - 1} pieces expected, got {len(coeffs)} coefficient lists"
            )
        width = max(1, max(len(np.atleast_1d(c)) for c in coeffs))
        arr = np.zeros((bp.size - 1, width))
        for i, c in enumerate(coeffs):
            c = np.atleast_1d(np.asarray(c, dtype=float))
            arr[i, : c.size] = c
        bp.setflags(write=False)
        arr.setflags(write=False)
        self.breakpoints = bp
        self.coeffs = arr

    # -- construction -----------------------------------------------------

    @classmethod
    def from_global(cls, breakpoints, pieces):
        """Build from per-piece coefficients in the global variable ``x``."""
        bp = np.asarray(breakpoints, dtype=float)
        local = [_shift_local(np.atleast_1d(np.asarray(p, float)), bp[i]) for i, p in enumerate(pieces)]
        return cls(bp, local)

    @classmethod
    def from_values(cls, nodes, values):
        """Continuous piecewise-linear interpolant of ``values`` at ``nodes``."""
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.diff(values) / np.diff(nodes)
        return cls(nodes, [[v, s] for v, s in zip(values[:-1], slopes)])

    @classmethod
    def zero(cls):
        return cls([0.0, 1.0], [[0.0]])

    @classmethod
    def tent(cls, center=0.0, half_width=1.0, height=1.0):
        """Symmetric tent of the given height peaking at ``center``."""
        return cls.from_values(
            [center - half_width, center, center + half_width], [0.0, height, 0.0]
        )

    # -- basic properties -------------------------------------------------

    @property
    def degree(self):
        nz = np.nonzero(np.any(self.coeffs != 0.0, axis=0))[0]
        return int(nz[-1]) if nz.size else 0

    @property
    def support(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def n_pieces(self):
        return self.coeffs.shape[0]

    def is_zero(self):
        return not np.any(self.coeffs)

    def __repr__(self):
        a, b = self.support
        return f"PiecewisePolynomial(support=[{a:g}, {b:g}], pieces={self.n_pieces}, degree={self.degree})"

    def _locate(self, x):
        bp = self.breakpoints
        idx = np.searchsorted(bp, x, side="right") - 1
        idx = np.where(x == bp[-1], bp.size - 2, idx)
        inside = (idx >= 0) & (idx < bp.size - 1)
        return np.clip(idx, 0, bp.size - 2), inside

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx, inside = self._locate(x)
        s = x - self.breakpoints[idx]
        c = self.coeffs[idx]
        out = np.zeros_like(x)
        for k in range(c.shape[-1] - 1, -1, -1):
            out = out * s + c[..., k]
        return np.where(inside, out, 0.0)

    # -- algebra ----------------------------------------------------------

    def on_partition(self, edges):
        """Local coefficients of ``self`` on a partition ``edges``.

        ``edges`` must contain every breakpoint of ``self`` that lies in
        its own range. Cells outside the support get zero coefficients.
        """
        edges = np.asarray(edges, dtype=float)
        left = edges[:-1]
        mid = 0.5 * (edges[:-1] + edges[1:])
        idx, inside = self._locate(mid)
        out = np.zeros((left.size, self.coeffs.shape[1]))
        for j in np.nonzero(inside)[0]:
            i = idx[j]
            out[j] = _shift_local(self.coeffs[i], left[j] - self.breakpoints[i])
        return out

    def _binary(self, other, op):
        edges = np.union1d(self.breakpoints, other.breakpoints)
        a = self.on_partition(edges)
        b = other.on_partition(edges)
        return PiecewisePolynomial(edges, [op(x, y) for x, y in zip(a, b)])

    def __add__(self, other):
        if not isinstance(other, PiecewisePolynomial):
            return NotImplemented
        return self._binary(other, P.polyadd)

    def __sub__(self, other):
        if not isinstance(other, PiecewisePolynomial):
            return NotImplemented
        return self._binary(other, P.polysub)

    def __neg__(self):
        return PiecewisePolynomial(self.breakpoints, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, PiecewisePolynomial):
            return self._binary(other, P.polymul)
        return PiecewisePolynomial(self.breakpoints, float(other) * self.coeffs)

    __rmul__ = __mul__

    def shift(self, c):
        """The translate ``x -> self(x - c)``."""
        return PiecewisePolynomial(self.breakpoints + c, self.coeffs)

    def reflect(self):
        """The reflection ``x -> self(-x)``."""
        bp = self.breakpoints
        widths = np.diff(bp)
        pieces = []
        for i in range(self.n_pieces - 1, -1, -1):
            # p_i(w - s) on the mirrored cell
            c = _shift_local(self.coeffs[i], widths[i])
            sign = (-1.0) ** np.arange(c.size)
            pieces.append(c * sign)
        return PiecewisePolynomial(-bp[::-1], pieces)

    def derivative(self):
        return PiecewisePolynomial(
            self.breakpoints, [P.polyder(c) if c.size > 1 else [0.0] for c in self.coeffs]
        )

    def trimmed(self):
        """Drop identically-zero pieces at both ends."""
        nz = np.nonzero(np.any(self.coeffs != 0.0, axis=1))[0]
        if nz.size == 0:
            return PiecewisePolynomial.zero()
        lo, hi = nz[0], nz[-1]
        return PiecewisePolynomial(self.breakpoints[lo : hi + 2], self.coeffs[lo : hi + 1])

    # -- integration ------------------------------------------------------

    def integral(self):
        """Exact integral over the support."""
        w = np.diff(self.breakpoints)
        k = np.arange(self.coeffs.shape[1])
        return float(np.sum(self.coeffs * w[:, None] ** (k + 1) / (k + 1)))

    def inner(self, other):
        """L2 inner product, Gauss rules on the union of breakpoints."""
        lo = max(self.support[0], other.support[0])
        hi = min(self.support[1], other.support[1])
        if lo >= hi:
            return 0.0
        edges = np.union1d(self.breakpoints, other.breakpoints)
        edges = edges[(edges >= lo) & (edges <= hi)]
        x, w = composite_rule(edges)
        return float(np.dot(w, self(x) * other(x)))

    def l2_norm(self):
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def sup_norm(self):
        """Upper bound on ``max |self|`` from local coefficient sums."""
        w = np.diff(self.breakpoints)
        k = np.arange(self.coeffs.shape[1])
        return float(np.max(np.sum(np.abs(self.coeffs) * w[:, None] ** k, axis=1)))

    def l1_bound(self):
        """Upper bound on ``int |self|``: width times coefficient-sum bound per piece."""
        w = np.diff(self.breakpoints)
        k = np.arange(self.coeffs.shape[1])
        return float(np.sum(w * np.sum(np.abs(self.coeffs) * w[:, None] ** k, axis=1)))

    def lipschitz_constant(self, jump_tol=1e-12):
        """Largest slope over all pieces; ``inf`` if the function jumps.

        The support endpoints count as jumps when the function does not
        vanish there.
        """
        bp = self.breakpoints
        w = np.diff(bp)
        vals_left = np.array([c[0] for c in self.coeffs])
        vals_right = np.array([P.polyval(wi, c) for wi, c in zip(w, self.coeffs)])
        jumps = np.concatenate(
            [[vals_left[0]], vals_left[1:] - vals_right[:-1], [vals_right[-1]]]
        )
        if np.max(np.abs(jumps)) > jump_tol:
            return np.inf
        best = 0.0
        for wi, c in zip(w, self.coeffs):
            d = P.polyder(c) if c.size > 1 else np.array([0.0])
            cand = [0.0, wi]
            if d.size > 1:
                r = P.polyroots(P.polyder(d)) if d.size > 2 else np.array([])
                cand += [float(z.real) for z in np.atleast_1d(r) if abs(z.imag) < 1e-12 and 0 < z.real < wi]
            best = max(best, float(np.max(np.abs(P.polyval(np.array(cand), d)))))
        return best

    # -- degree control ---------------------------------------------------

    def reduce_degree(self, max_degree=MAX_INPUT_DEGREE, tol=1e-10, max_depth=40):
        """Re-approximate pieces to ``max_degree`` with sup error <= ``tol``.

        Pieces above the degree cap are replaced by Chebyshev interpolants
        on bisected sub-cells until the coefficient-sum bound on the
        difference is below ``tol``. Returns ``(result, error_bound)``.
        """
        if self.degree <= max_degree:
            return PiecewisePolynomial(self.breakpoints, self.coeffs[:, : max_degree + 1]), 0.0
        new_bp = [self.breakpoints[0]]
        new_coeffs = []
        worst = 0.0
        cheb = 0.5 * (1 - np.cos(np.pi * (2 * np.arange(max_degree + 1) + 1) / (2 * max_degree + 2)))

        def fit(c, a, w, depth):
            nonlocal worst
            sub = _shift_local(c, a)
            xs = w * cheb
            vals = P.polyval(xs, sub)
            # solve in scaled variable s / w for conditioning
            V = np.vander(cheb, max_degree + 1, increasing=True)
            q = np.linalg.solve(V, vals) / w ** np.arange(max_degree + 1)
            diff = P.polysub(sub, q)
            bound = float(np.sum(np.abs(diff) * w ** np.arange(diff.size)))
            if bound <= tol or depth >= max_depth:
                worst = max(worst, bound)
                new_coeffs.append(q)
                new_bp.append(new_bp[-1] + w)
                return
            fit(c, a, w / 2, depth + 1)
            fit(c, a + w / 2, w / 2, depth + 1)

        for i, c in enumerate(self.coeffs):
            w = self.breakpoints[i + 1] - self.breakpoints[i]
            if np.all(c[max_degree + 1 :] == 0):
                new_coeffs.append(c[: max_degree + 1])
                new_bp.append(self.breakpoints[i + 1])
            else:
                fit(c, 0.0, w, 0)
            new_bp[-1] = self.breakpoints[i + 1]  # kill drift from repeated halving
        if worst > tol:
            raise ArithmeticError(f"degree reduction reached only {worst:.3e} > {tol:.1e}")
        return PiecewisePolynomial(new_bp, new_coeffs), worst

    # -- serialization ----------------------------------------------------

    def to_dict(self):
        return {
            "breakpoints": [float(b) for b in self.breakpoints],
            "basis": "local",
            "pieces": [[float(v) for v in c] for c in self.coeffs],
        }

    def to_text(self):
        return json.dumps(self.to_dict())

    def __eq__(self, other):
        if not isinstance(other, PiecewisePolynomial):
            return NotImplemented
        return (
            self.breakpoints.shape == other.breakpoints.shape
            and np.array_equal(self.breakpoints, other.breakpoints)
            and self.coeffs.shape == other.coeffs.shape
            and np.array_equal(self.coeffs, other.coeffs)
        )

    __hash__ = None


def from_dict(data, max_degree=MAX_INPUT_DEGREE):
    """Parse the structured form ``{"breakpoints": [...], "pieces": [[...]]}``.

    Numbers may be given as decimal or rational strings (``"1/3"``). The
    optional ``"basis"`` key selects ``"global"`` (default, coefficients in
    ``x``) or ``"local"`` (coefficients in ``x - b_i``).
    """
    try:
        bp = [_as_number(b) for b in data["breakpoints"]]
        pieces = [[_as_number(c) for c in piece] for piece in data["pieces"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed piecewise polynomial: {exc}") from exc
    if max_degree is not None and any(len(p) > max_degree + 1 for p in pieces):
        raise ValueError(f"piece degree exceeds {max_degree}")
    basis = data.get("basis", "global")
    if basis == "global":
        return PiecewisePolynomial.from_global(bp, pieces)
    if basis == "local":
        return PiecewisePolynomial(bp, pieces)
    raise ValueError(f"unknown basis {basis!r}")


def from_text(text, max_degree=MAX_INPUT_DEGREE):
    return from_dict(json.loads(text), max_degree=max_degree)


def _conv_point(p, q, x):
    lo = max(p.support[0], x - q.support[1])
    hi = min(p.support[1], x - q.support[0])
    if lo >= hi:
        return 0.0
    edges = np.concatenate([p.breakpoints, x - q.breakpoints, [lo, hi]])
    edges = edges[(edges >= lo) & (edges <= hi)]
    y, w = composite_rule(edges)
    return float(np.dot(w, p(y) * q(x - y)))


def convolve(p, q):
    """Exact convolution ``(p * q)(x) = int p(y) q(x - y) dy``.

    The result is piecewise polynomial of degree ``deg p + deg q + 1`` with
    breakpoints at all sums of breakpoints. Each piece is recovered by
    interpolation at Chebyshev points of values computed with Gauss rules
    that are exact for the integrand.
    """
    if p.is_zero() or q.is_zero():
        return PiecewisePolynomial.zero()
    edges = np.unique(np.add.outer(p.breakpoints, q.breakpoints).ravel())
    d = p.degree + q.degree + 1
    cheb = 0.5 * (1 - np.cos(np.pi * (2 * np.arange(d + 1) + 1) / (2 * d + 2)))
    V = np.vander(cheb, d + 1, increasing=True)
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        w = b - a
        vals = np.array([_conv_point(p, q, a + w * s) for s in cheb])
        pieces.append(np.linalg.solve(V, vals) / w ** np.arange(d + 1))
    return PiecewisePolynomial(edges, pieces)
