"""Experiments over the field parameter t.

The fiber at ``t > 0`` is represented by window matrices; the fiber at 0
by the generator itself, with its norm taken from the grid oracle.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .compression import PsiFrame, beta, beta_support
from .line_operators import NormOracle, as_terms, norm_oracle
from .window import WindowMatrix

MAX_WINDOW = 1025


class ResourceCapError(RuntimeError):
    """A requested t needs a window larger than the configured cap."""


def _map(fn, items, threads=0):
    items = list(items)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def schur_bound(S):
    """``sum |c| ||f||_inf ||g||_1``, an upper bound on ``||S||``."""
    return sum(abs(c) * op.f.sup_norm() * op.g.l1_bound() for c, op in as_terms(S))


def beta_certificate(S, frame):
    """Operator-norm bound on the effect of cutting ``C`` at order K."""
    tail = 2.0 * (frame.coeffs.tail_bound or 0.0)
    return schur_bound(S) * (2.0 * math.sqrt(3.0) + tail) * tail


def _checked_window(S, t, K, max_window):
    need = beta_support(S, t, K)
    if need is not None and need[1] - need[0] + 1 > max_window:
        raise ResourceCapError(
            f"t={t:g} needs a window of {need[1] - need[0] + 1} > cap {max_window}"
        )
    return need


@dataclass
class NormProfile:
    samples: list
    oracle: NormOracle | None = None

    @property
    def t(self):
        return np.array([s[0] for s in self.samples])

    @property
    def values(self):
        return np.array([s[1] for s in self.samples])

    def is_nondecreasing(self, slack=1e-10):
        """Along decreasing t (the dyadic direction)."""
        order = np.argsort(-self.t, kind="stable")
        v = self.values[order]
        return bool(np.all(np.diff(v) >= -slack))

    def gaps(self):
        if self.oracle is None:
            return None
        return self.oracle.value - self.values

    def to_csv(self):
        buf = io.StringIO()
        buf.write("t,value,certificate\n")
        for t, v, c in self.samples:
            buf.write(f"{t!r},{v!r},{c!r}\n")
        return buf.getvalue()

    def summary(self):
        out = {
            "samples": [list(s) for s in self.samples],
            "nondecreasing_as_t_halves": self.is_nondecreasing(),
        }
        if self.oracle is not None:
            out["oracle"] = self.oracle.to_dict()
            out["gaps"] = [float(g) for g in self.gaps()]
        return out


def norm_profile(S, t_grid, frame=None, max_window=MAX_WINDOW, oracle_h=1.0 / 512, threads=0, with_oracle=True):
    """Interior norms of ``beta_t(S)`` over ``t_grid`` with the grid oracle for ``||S||``."""
    t_grid = [float(t) for t in t_grid]
    if not t_grid:
        raise ValueError("empty t grid")
    if any(not 0 < t <= 1 for t in t_grid):
        raise ValueError("t grid must lie in (0, 1]")
    frame = PsiFrame.standard(1.0) if frame is None else frame
    for t in t_grid:
        _checked_window(S, t, frame.K, max_window)
    cert = beta_certificate(S, frame)

    def one(t):
        return (t, beta(S, t, frame).norm() if as_terms(S) else 0.0, cert)

    samples = _map(one, t_grid, threads)
    oracle = norm_oracle(S, h=oracle_h) if with_oracle else None
    return NormProfile(samples, oracle)


def dyadic_limit(S, k_max=6, frame=None, **kwargs):
    return norm_profile(S, [2.0**-k for k in range(k_max + 1)], frame, **kwargs)


@dataclass
class ContinuityReport:
    t0: float
    deltas: list
    differences: list
    fitted_modulus: tuple
    certificate: float = 0.0

    def is_decreasing(self):
        d = np.asarray(self.differences)
        return bool(np.all(np.diff(d) < 0))

    def to_csv(self):
        buf = io.StringIO()
        buf.write("delta,value,certificate\n")
        for dl, v in zip(self.deltas, self.differences):
            buf.write(f"{dl!r},{v!r},{self.certificate!r}\n")
        return buf.getvalue()

    def summary(self):
        return {
            "t0": self.t0,
            "deltas": list(self.deltas),
            "differences": list(self.differences),
            "fitted_modulus": {"constant": self.fitted_modulus[0], "exponent": self.fitted_modulus[1]},
            "monotone_decreasing": self.is_decreasing(),
        }


def fit_modulus(deltas, values):
    """Least squares ``value ~ constant * delta**exponent`` over positive samples."""
    d = np.asarray(deltas, float)
    v = np.asarray(values, float)
    ok = (d > 0) & (v > 0)
    if ok.sum() < 2:
        return (float("nan"), float("nan"))
    slope, icpt = np.polyfit(np.log(d[ok]), np.log(v[ok]), 1)
    return (float(math.exp(icpt)), float(slope))


def continuity_scan(S, t0, deltas, frame=None, threads=0):
    """``||beta_{t0+delta}(S) - beta_{t0}(S)||`` on a common window for each delta."""
    t0 = float(t0)
    if not 0.25 <= t0 <= 1.0:
        raise ValueError("t0 must lie in [1/4, 1]")
    deltas = [float(d) for d in deltas]
    if any(d < 0 or d > t0 / 2 for d in deltas):
        raise ValueError("deltas must lie in [0, t0/2]")
    frame = PsiFrame.standard(1.0) if frame is None else frame
    K = frame.K
    ts = [t0 + d if t0 + d <= 1.0 else t0 - d for d in deltas]
    windows = [beta_support(S, t, K) for t in ts + [t0]]
    windows = [w for w in windows if w is not None]
    if not windows:
        return ContinuityReport(t0, deltas, [0.0] * len(deltas), (float("nan"), float("nan")))
    common = (min(w[0] for w in windows), max(w[1] for w in windows))
    base = beta(S, t0, frame, window=common)

    def diff(t):
        if t == t0:
            return 0.0
        return (beta(S, t, frame, window=common) - base).norm()

    values = _map(diff, ts, threads)
    return ContinuityReport(t0, deltas, values, fit_modulus(deltas, values), 2 * beta_certificate(S, frame))


# -- field elements ----------------------------------------------------------


@dataclass(frozen=True)
class ScaledPath:
    """``t -> h(t) T0`` with ``h`` piecewise linear through ``(knots, values)``, ``h(0) = 0``."""

    knots: tuple
    values: tuple
    T0: WindowMatrix

    def __post_init__(self):
        if self.knots[0] != 0.0 or self.values[0] != 0.0:
            raise ValueError("path must start at h(0) = 0")

    def h(self, t):
        return float(np.interp(t, self.knots, self.values))

    def __call__(self, t):
        return self.T0 * self.h(t)


@dataclass(frozen=True)
class InterpolatedPath:
    """Piecewise-linear interpolation in t of matrices given at knots (value 0 at t=0)."""

    knots: tuple
    matrices: tuple

    def __call__(self, t):
        knots = (0.0,) + tuple(self.knots)
        mats = (None,) + tuple(self.matrices)
        if t >= knots[-1]:
            return mats[-1]
        i = int(np.searchsorted(knots, t, side="right")) - 1
        lam = (t - knots[i]) / (knots[i + 1] - knots[i])
        left, right = mats[i], mats[i + 1]
        out = right * lam
        if left is not None and lam < 1.0:
            out = out + left * (1.0 - lam)
        return out


class FieldElement:
    """``a = path + beta^S``: a continuous path vanishing at 0 plus a generator."""

    def __init__(self, path=None, S=None, frame=None, oracle_h=1.0 / 512):
        self.path = path
        self.S = S
        self.frame = PsiFrame.standard(1.0) if frame is None else frame
        self.oracle_h = oracle_h
        self._oracle = None

    @property
    def oracle(self):
        if self._oracle is None:
            self._oracle = norm_oracle(self.S, h=self.oracle_h)
        return self._oracle

    def fiber(self, t):
        """``pi_t(a)`` for ``t > 0`` as a window matrix (None if zero)."""
        out = beta(self.S, t, self.frame) if as_terms(self.S) else None
        if self.path is not None:
            p = self.path(t)
            if p is not None:
                out = p if out is None else out + p
        return out

    def path_norm(self, t):
        if self.path is None or t == 0:
            return 0.0
        p = self.path(t)
        return 0.0 if p is None else p.norm()


def field_norm(a, t):
    """``||pi_t(a)||``; at ``t = 0`` the grid-oracle norm of the generator."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 0.0:
        return a.oracle.value
    fib = a.fiber(t)
    return 0.0 if fib is None else fib.norm()


def field_norm_profile(a, t_grid, threads=0):
    return _map(lambda t: (float(t), field_norm(a, t)), t_grid, threads)


def recover_generator_norm(a, t_grid):
    """Limit extraction: field norm at the smallest positive grid t."""
    t_min = min(float(t) for t in t_grid if t > 0)
    return field_norm(a, t_min)


def faithfulness_check(a, t_grid, tol=1e-8, include_zero=True):
    """True iff vanishing of all sampled fiber norms forces both components to vanish.

    With ``include_zero`` the fiber at 0 (the generator) is part of the
    sample; without it, a path cancelling ``beta^S`` on the grid goes
    unnoticed and the check reports False.
    """
    ts = [float(t) for t in t_grid if t > 0]
    norms = [field_norm(a, t) for t in ts]
    if include_zero:
        norms.append(field_norm(a, 0.0))
    if max(norms, default=0.0) > tol:
        return True
    s_small = (a.oracle.value if as_terms(a.S) else 0.0) <= tol
    path_small = max((a.path_norm(t) for t in ts), default=0.0) <= tol
    return bool(s_small and path_small)


def profile_summary_json(obj):
    return json.dumps(obj.summary(), sort_keys=True, indent=2)
