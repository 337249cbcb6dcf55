"""The orthonormal frame psi^t, the compression beta_t and the embedding alpha_t.

Operators on ``H_t = span{phi_n^t}`` are handled in phi-coefficients:
``psi_n = sum_m C_{mn} phi_m`` with ``C = G^{-1/2}`` truncated at order K.
A bi-infinite matrix is represented on a finite :class:`WindowMatrix`; all
windows are padded so that truncation only touches the certified tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, eigh_tridiagonal

from .lattice_basis import LatticeFunction, check_scale, hat, hat_inner_quadrature, lattice_range
from .line_operators import GridOperator, as_terms, grid_nodes
from .piecewise import convolve
from .quadrature import composite_rule
from .toeplitz import BandToeplitz, CoeffSequence, inv_sqrt_coeffs, truncate
from .window import WindowMatrix

SQRT3 = math.sqrt(3.0)
INV_GRAM_RATIO = 2.0 - SQRT3  # G^{-1}_k = sqrt(3) * (-(2 - sqrt 3))**|k|
DECAY_SLACK = 48  # extra indices for inverses of banded Toeplitz blocks


class WindowTooSmall(ValueError):
    def __init__(self, window, required):
        super().__init__(f"window {tuple(window)} too small; need at least {tuple(required)}")
        self.window = tuple(window)
        self.required = tuple(required)


class SupportError(ValueError):
    pass


def _coeff_seq(c):
    return c.base if isinstance(c, BandToeplitz) else c


@dataclass(frozen=True)
class PsiFrame:
    """Transition data ``C`` at scale ``t``; ``window`` limits the phi indices in use."""

    t: float
    coeffs: CoeffSequence
    window: tuple | None = None

    def __post_init__(self):
        check_scale(self.t)
        object.__setattr__(self, "coeffs", _coeff_seq(self.coeffs))

    @classmethod
    def standard(cls, t, K=64, quad_points=4096, window=None):
        return cls(t, inv_sqrt_coeffs(K, quad_points), window)

    @classmethod
    def identity(cls, t, window=None):
        return cls(t, CoeffSequence(np.array([1.0]), 0.0), window)

    @property
    def K(self):
        return self.coeffs.K

    @property
    def pad(self):
        return self.K

    @property
    def interior(self):
        if self.window is None:
            return None
        lo, hi = self.window[0] + self.K, self.window[1] - self.K
        if lo > hi:
            raise ValueError("frame window leaves no interior")
        return lo, hi

    def with_scale(self, t):
        return PsiFrame(t, self.coeffs, self.window)

    def transition(self, rows, cols):
        """Block of ``C_{kn}`` for phi rows ``rows=(lo, hi)`` and psi cols ``cols``."""
        return self.coeffs.block(rows[0], rows[1], cols[0], cols[1])

    def psi(self, n):
        if self.window is not None:
            lo, hi = self.interior
            if not lo <= n <= hi:
                raise SupportError(f"psi_{n} outside the certified interior [{lo}, {hi}]")
        return LatticeFunction(self.t, n - self.K, self.coeffs.two_sided())

    def truncation_certificate(self):
        """Bound on ``||psi_n - psi_n^{(K)}||_{L2}`` from the tail certificate."""
        tail = self.coeffs.tail_bound or 0.0
        return 2.0 * tail * math.sqrt(2.0 / 3.0) * 3.0

    def to_dict(self):
        return {
            "t": self.t,
            "K": self.K,
            "window": None if self.window is None else list(self.window),
            "pad": self.pad,
            "coeffs": self.coeffs.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        w = data.get("window")
        return cls(float(data["t"]), CoeffSequence.from_dict(data["coeffs"]), None if w is None else tuple(w))


def psi_eval(frame, n, x):
    return frame.psi(n)(x)


def mass_matrix(lo, hi, t):
    """Gram matrix of ``phi_lo..phi_hi`` assembled by Gauss quadrature."""
    size = hi - lo + 1
    diag = np.array([hat_inner_quadrature(j, j, t) for j in range(lo, hi + 1)])
    off = np.array([hat_inner_quadrature(j, j + 1, t) for j in range(lo, hi)])
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1) if size > 1 else np.diag(diag)


def psi_gram(frame, window):
    """``<psi_n, psi_m>`` for ``n, m`` in ``window``."""
    lo, hi = window
    K = frame.K
    C = frame.transition((lo - K, hi + K), (lo, hi))
    M = mass_matrix(lo - K, hi + K, frame.t)
    return WindowMatrix((lo, hi), C.T @ M @ C, pad=0)


# -- gamma: A acting on phi-coefficients ------------------------------------


def gamma_apply(A, x):
    """``gamma_t(A) x`` for ``x`` a :class:`LatticeFunction`.

    ``x`` must be supported inside the window shrunk by the bandwidth of A.
    """
    bw = A.bandwidth()
    idx = x.indices[np.abs(x.coeffs) > 0]
    if idx.size and (idx.min() < A.lo + bw or idx.max() > A.hi - bw):
        raise SupportError(
            f"coefficients on [{idx.min()}, {idx.max()}] leave [{A.lo + bw}, {A.hi - bw}]"
        )
    full = np.zeros(A.size)
    a, b = max(x.offset, A.lo), min(x.offset + x.coeffs.size - 1, A.hi)
    if a <= b:
        full[a - A.lo : b - A.lo + 1] = x.coeffs[a - x.offset : b - x.offset + 1]
    return LatticeFunction(x.t, A.lo, A.entries @ full)


def gamma_norm_sq_formula(A, x):
    """``(2/3)||A x||^2 + (1/6)<A x, (S + S*) A x>`` in coefficient space."""
    y = gamma_apply(A, x).coeffs
    return float(2.0 / 3.0 * y @ y + 1.0 / 6.0 * 2.0 * y[:-1] @ y[1:])


def inverse_gram_block(lo, hi):
    k = np.abs(np.arange(lo, hi + 1)[:, None] - np.arange(lo, hi + 1)[None, :])
    return SQRT3 * (-INV_GRAM_RATIO) ** k


def _gram_sqrt(size):
    w, V = eigh_tridiagonal(np.full(size, 2.0 / 3.0), np.full(size - 1, 1.0 / 6.0))
    return (V * np.sqrt(w)) @ V.T


def gamma_operator_norm(Y, lo=0):
    """Norm of ``gamma_t(Y) p_t`` on L2 for a matrix ``Y`` supported on ``[lo, lo+n-1]``.

    Exact: ``|| G_W^{1/2} Y L ||`` with ``L L^T`` the window block of the
    bi-infinite ``G^{-1}``.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    L = cholesky(inverse_gram_block(lo, lo + n - 1), lower=True)
    return float(np.linalg.norm(_gram_sqrt(n) @ Y @ L, 2))


# -- beta: compression of generators ----------------------------------------


def _partition(f_support, g_breakpoints, f_breakpoints, t):
    a, b = f_support
    pts = [np.asarray(f_breakpoints, float)]
    j = np.arange(math.floor(a / t) - 1, math.ceil(b / t) + 2)
    pts.append(t * j)
    residues = np.unique(np.round(np.mod(g_breakpoints, t), 14))
    for r in residues:
        pts.append(r + t * j)
    edges = np.unique(np.concatenate(pts))
    edges = edges[(edges >= a) & (edges <= b)]
    # merge near-duplicates produced by rounding
    keep = np.concatenate([[True], np.diff(edges) > 1e-13 * max(1.0, abs(b - a))])
    edges = edges[keep]
    edges[0], edges[-1] = a, b
    return edges


def phi_pairings(op, t):
    """``P_{kl} = <phi_k^t, S_{f,g} phi_l^t>`` with the index ranges of k and l.

    ``S phi_l = f * (g conv phi_0^t)(. - tl)``; the x-integral is split at every
    kink and done with Gauss rules exact for the degree-9 integrand.
    """
    f, g = op.f, op.g
    k_lo, k_hi = lattice_range(f.support, t)
    l_lo, l_hi = lattice_range((f.support[0] - g.support[1], f.support[1] - g.support[0]), t)
    h0 = convolve(g, hat(0, t))
    edges = _partition(f.support, g.breakpoints, f.breakpoints, t)
    x, w = composite_rule(edges)
    ks = np.arange(k_lo, k_hi + 1)
    ls = np.arange(l_lo, l_hi + 1)
    Phi = np.clip(1.0 - np.abs(x[None, :] / t - ks[:, None]), 0.0, None) / math.sqrt(t)
    H = h0(x[None, :] - t * ls[:, None])
    P = (Phi * (f(x) * w)[None, :]) @ H.T
    return P, (k_lo, k_hi), (l_lo, l_hi)


def beta_support(S, t, K):
    """Index window outside which ``beta_t(S)`` is below the tail certificate."""
    lo, hi = None, None
    for _, op in as_terms(S):
        k = lattice_range(op.f.support, t)
        l = lattice_range((op.f.support[0] - op.g.support[1], op.f.support[1] - op.g.support[0]), t)
        a, b = min(k[0], l[0]) - K, max(k[1], l[1]) + K
        lo = a if lo is None else min(lo, a)
        hi = b if hi is None else max(hi, b)
    return None if lo is None else (lo, hi)


def beta(S, t, frame=None, window=None):
    """``(beta_t(S))_{nm} = <psi_n^t, S psi_m^t>`` on an index window.

    Without ``window`` the smallest window carrying the matrix (up to the
    tail certificate) is used. A given window must contain it.
    """
    t = check_scale(t)
    frame = PsiFrame.standard(t) if frame is None else frame.with_scale(t)
    K = frame.K
    need = beta_support(S, t, K)
    if window is None:
        window = need if need is not None else (0, 0)
    elif need is not None and (window[0] > need[0] or window[1] < need[1]):
        raise WindowTooSmall(window, need)
    lo, hi = window
    out = np.zeros((hi - lo + 1, hi - lo + 1))
    for c, op in as_terms(S):
        P, krange, lrange = phi_pairings(op, t)
        Ck = frame.transition(krange, (lo, hi))
        Cl = frame.transition(lrange, (lo, hi))
        out += c * (Ck.T @ P @ Cl)
    return WindowMatrix((lo, hi), out, pad=0)


def beta_tail_certificate(frame, S_bound):
    """Entrywise bound on what the order-K truncation of C misses in beta."""
    tail = frame.coeffs.tail_bound or 0.0
    row = float(np.sum(np.abs(frame.coeffs.coeffs))) * 2.0
    return S_bound * (2.0 / 3.0 + 1.0 / 3.0) * 2.0 * tail * (2.0 * row + 2.0 * tail)


# -- alpha: embedding band matrices -----------------------------------------


def phi_moments(u, lo, hi, t):
    """``<phi_j^t, u>`` for ``j`` in ``[lo, hi]`` by exact piecewise Gauss rules."""
    a, b = u.support
    j = np.arange(lo, hi + 1)
    edges = np.union1d(u.breakpoints, t * np.arange(lo - 1, hi + 2))
    edges = edges[(edges >= a) & (edges <= b)]
    x, w = composite_rule(edges)
    Phi = np.clip(1.0 - np.abs(x[None, :] / t - j[:, None]), 0.0, None) / math.sqrt(t)
    return Phi @ (u(x) * w)


def alpha_apply(T, t, frame, u):
    """``alpha_t(T) u = sum T_{nm} psi_n <psi_m, u>`` as a lattice function.

    ``u`` is a piecewise polynomial or lattice function; ``T`` is read on
    its whole window.
    """
    frame = frame.with_scale(t)
    if isinstance(u, LatticeFunction):
        u = u.to_piecewise()
    lo, hi = T.window
    K = frame.K
    moments = phi_moments(u, lo - K, hi + K, t)
    C = frame.transition((lo - K, hi + K), (lo, hi))
    coeffs = C @ (T.entries @ (C.T @ moments))
    return LatticeFunction(t, lo - K, coeffs)


def alpha_grid_operator(T, frame, interval, h):
    """Grid discretization ``Psi T Psi^T h`` of ``alpha_t(T)``."""
    x = grid_nodes(interval, h)
    lo, hi = T.window
    K = frame.K
    j = np.arange(lo - K, hi + K + 1)
    Phi = np.clip(1.0 - np.abs(x[:, None] / frame.t - j[None, :]), 0.0, None) / math.sqrt(frame.t)
    Psi = Phi @ frame.transition((lo - K, hi + K), (lo, hi))
    return GridOperator(tuple(interval), h, Psi @ T.entries @ Psi.T * h)


def roundtrip(T, t, frame):
    """Norm of ``beta_t(alpha_t(T)) - T`` over the window of ``T`` padded by K.

    ``beta(alpha(T))_{ab} = sum <psi_a, psi_n> T_{nm} <psi_m, psi_b>`` with
    the psi Gram from quadrature.
    """
    frame = frame.with_scale(t)
    K = frame.K
    lo, hi = T.lo - K, T.hi + K
    gram = psi_gram(frame, (lo, hi)).entries
    Tw = T.block(lo, hi)
    return float(np.linalg.norm(gram @ Tw @ gram - Tw, 2))


def lattice_rank_bound(support, t, propagation=0):
    """``#{n : [t(n-1-M), t(n+1+M)]`` meets the open interval ``support``}."""
    a, b = support
    lo = math.floor(a / t - 1 - propagation + 1e-9) + 1
    hi = math.ceil(b / t + 1 + propagation - 1e-9) - 1
    return max(hi - lo + 1, 0)


@dataclass(frozen=True)
class AlphaApproximation:
    """``T~_eps = gamma(C_eps) gamma(T) gamma(C_eps)^{-1}`` on a padded window."""

    window: tuple
    matrix: np.ndarray
    band: BandToeplitz
    defect: float

    def apply(self, x):
        return gamma_apply(WindowMatrix(self.window, self.matrix), x)


def _windowed_similarity(Cblock, T):
    return Cblock @ T @ np.linalg.solve(Cblock, np.eye(Cblock.shape[0]))


def approx_alpha(T, t, frame, eps=None, band=None, method="fejer"):
    """Finite-propagation realisation of ``alpha_t(T)`` and its measured defect.

    ``band`` overrides the truncation; otherwise ``C_eps = truncate(C, eps,
    method)``. The defect is the exact L2 norm of ``alpha_t(T) - T~_eps``
    restricted to ``H_t``.
    """
    frame = frame.with_scale(t)
    if band is None:
        band = truncate(frame.coeffs, eps, method=method)
    reach = max(frame.K, band.propagation) + DECAY_SLACK
    lo, hi = T.lo - reach, T.hi + reach
    Tw = T.block(lo, hi)
    C = frame.coeffs.block(lo, hi)
    Ce = band.block(lo, hi)
    exact = _windowed_similarity(C, Tw)
    approx = _windowed_similarity(Ce, Tw)
    defect = gamma_operator_norm(exact - approx, lo)
    return AlphaApproximation((lo, hi), approx, band, defect)


def alpha_in_phi_coordinates(T, frame, pad=None):
    """Matrix ``C T C^{-1}`` so that ``alpha_t(T) = gamma_t(C T C^{-1}) p_t``."""
    reach = frame.K + DECAY_SLACK if pad is None else pad
    lo, hi = T.lo - reach, T.hi + reach
    C = frame.coeffs.block(lo, hi)
    return WindowMatrix((lo, hi), _windowed_similarity(C, T.block(lo, hi)), pad=0)


def gamma_grid_operator(Y, t, interval, h):
    """Grid discretization of ``gamma_t(Y) p_t`` (kernel ``Phi Y G^{-1} Phi^T``)."""
    x = grid_nodes(interval, h)
    lo, hi = Y.window
    pad = DECAY_SLACK
    j = np.arange(lo - pad, hi + pad + 1)
    Phi = np.clip(1.0 - np.abs(x[:, None] / t - j[None, :]), 0.0, None) / math.sqrt(t)
    Yw = Y.block(lo - pad, hi + pad)
    return GridOperator(tuple(interval), h, Phi @ Yw @ inverse_gram_block(lo - pad, hi + pad) @ Phi.T * h)


# -- projections p_t ---------------------------------------------------------


def project(u, t, frame):
    """``p_t u`` as a lattice function, through psi-coefficients."""
    frame = frame.with_scale(t)
    K = frame.K
    a, b = u.support
    j_lo, j_hi = lattice_range((a, b), t)
    moments = phi_moments(u, j_lo, j_hi, t)
    m_lo, m_hi = j_lo - K, j_hi + K
    c = frame.transition((j_lo, j_hi), (m_lo, m_hi)).T @ moments
    d = frame.transition((m_lo - K, m_hi + K), (m_lo, m_hi)) @ c
    return LatticeFunction(t, m_lo - K, d)


def projection_residual(u, t, frame):
    """``||u - p_t u||_{L2}`` by exact quadrature of the difference."""
    pu = project(u, t, frame).to_piecewise()
    return (u - pu).l2_norm()
