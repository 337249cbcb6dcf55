"""The eleven acceptance criteria, each at its stated tolerance and time budget.

Every test records one ``criterion N: PASS|FAIL`` line; the lines are
printed in the terminal summary and by running this file directly.
"""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES, random_band, random_pp
from roefield.compression import (
    PsiFrame,
    alpha_grid_operator,
    approx_alpha,
    gamma_operator_norm,
    lattice_rank_bound,
    psi_gram,
    roundtrip,
)
from roefield.field_lab import (
    FieldElement,
    ScaledPath,
    continuity_scan,
    dyadic_limit,
    field_norm,
)
from roefield.lattice_basis import DISPLAYED_REFINEMENT, REFINEMENT, hat_eval, hat_inner_quadrature, refinement_residual
from roefield.line_operators import ConvKernelOp, local_compactness_probe, norm_oracle, propagation_probe
from roefield.piecewise import PiecewisePolynomial
from roefield.toeplitz import coeff_product, decay_fit, dense_inv_sqrt_oracle, gram_coeffs, inv_sqrt_coeffs, toeplitz_norm
from roefield.window import WindowMatrix

REFERENCE = ConvKernelOp(PiecewisePolynomial.tent(), PiecewisePolynomial.tent())


def report(number, title, checks, elapsed, budget):
    """Record the verdict line and return whether every check (and the budget) held."""
    checks = dict(checks)
    checks[f"runtime {elapsed:.2f}s < {budget:g}s"] = elapsed < budget
    ok = all(checks.values())
    failed = [name for name, good in checks.items() if not good]
    detail = "all checks hold" if ok else "failed: " + "; ".join(failed)
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok, failed


def test_criterion_01_gram_constants():
    start = time.perf_counter()
    expected = {0: 2 / 3, 1: 1 / 6, 2: 0.0, 3: 0.0}
    err = max(
        abs(hat_inner_quadrature(n, n + d, t) - v)
        for t in (1.0, 0.5, 0.25, 0.125, 0.3)
        for n in (-7, 0, 4)
        for d, v in expected.items()
    )
    lo, hi = toeplitz_norm(gram_coeffs().shifted(2 / 3))
    elapsed = time.perf_counter() - start
    ok, failed = report(1, "Gram constants", {
        f"quadrature error {err:.1e} <= 1e-12": err <= 1e-12,
        f"||2/3 I - G|| = 1/3 exactly (got {lo!r}, {hi!r})": lo == 1 / 3 and hi == 1 / 3,
    }, elapsed, 1.0)
    assert ok, failed


def test_criterion_02_symbol_calculus():
    start = time.perf_counter()
    c = inv_sqrt_coeffs(64)
    oracle = dense_inv_sqrt_oracle(256)
    lo, hi = oracle.interior
    disc = float(np.max(np.abs(oracle.interior_block() - c.block(lo, hi))))
    _, ratio = decay_fit(c)
    ident = coeff_product(coeff_product(c, c), gram_coeffs()).coeffs
    ident_err = max(abs(ident[0] - 1.0), float(np.max(np.abs(ident[1:]))))
    elapsed = time.perf_counter() - start
    ok, failed = report(2, "symbol calculus", {
        f"oracle discrepancy {disc:.1e} <= 1e-10": disc <= 1e-10,
        f"decay ratio {ratio:.4f} < 1": ratio < 1,
        f"C*C*G identity error {ident_err:.1e} <= 1e-8": ident_err <= 1e-8,
    }, elapsed, 10.0)
    assert ok, failed


def test_criterion_03_orthonormality():
    start = time.perf_counter()
    frame = PsiFrame.standard(1.0)
    dev = {}
    for t in (1.0, 0.5, 0.25, 0.125):
        G = psi_gram(frame.with_scale(t), (-16, 16)).entries
        dev[t] = float(np.max(np.abs(G - np.eye(G.shape[0]))))
    elapsed = time.perf_counter() - start
    ok, failed = report(3, "orthonormality", {
        f"psi Gram deviation at t={t:g}: {d:.1e} <= 1e-8": d <= 1e-8 for t, d in dev.items()
    }, elapsed, 30.0)
    assert ok, failed


def test_criterion_04_frame_bounds():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    ratios = []
    for _ in range(50):
        size = int(rng.integers(10, 60))
        band = int(rng.integers(0, 6))
        A = random_band(rng, size, band)
        ratios.append(gamma_operator_norm(A) / np.linalg.norm(A, 2))
    lo_b, hi_b = 1 / math.sqrt(3) - 0.02, math.sqrt(3) + 0.02
    elapsed = time.perf_counter() - start
    ok, failed = report(4, "frame bounds", {
        f"min ratio {min(ratios):.4f} >= {lo_b:.4f}": min(ratios) >= lo_b,
        f"max ratio {max(ratios):.4f} <= {hi_b:.4f}": max(ratios) <= hi_b,
    }, elapsed, 60.0)
    assert ok, failed


def test_criterion_05_round_trip():
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    frame = PsiFrame.standard(1.0)
    errs = {
        "identity": roundtrip(WindowMatrix.identity(-8, 8), 0.5, frame),
        "shift": roundtrip(WindowMatrix((-8, 8), np.eye(17, k=1)), 0.5, frame),
    }
    band = 0.0
    for i in range(50):
        T = WindowMatrix((-8, 8), random_band(rng, 17, 3))
        band = max(band, roundtrip(T, (1.0, 0.5, 0.25)[i % 3], frame))
    errs["random band-3 (max of 50)"] = band
    elapsed = time.perf_counter() - start
    ok, failed = report(5, "round trip", {f"{k} error {v:.1e} <= 1e-8": v <= 1e-8 for k, v in errs.items()},
                        elapsed, 60.0)
    assert ok, failed


def test_criterion_06_linear_defect():
    start = time.perf_counter()
    frame = PsiFrame.standard(1.0)
    eps_grid = (1e-2, 5e-3, 2.5e-3)
    halving, per_eps = [], []
    for seed in (0, 1, 2):
        T = WindowMatrix((-10, 10), random_band(np.random.default_rng(seed), 21, 3))
        for t in (1.0, 0.5, 0.25):
            for eps in eps_grid:
                d = approx_alpha(T, t, frame, eps=eps).defect
                d_half = approx_alpha(T, t, frame, eps=eps / 2).defect
                halving.append(d_half / d)
                per_eps.append(d / eps)
    const = max(per_eps)
    elapsed = time.perf_counter() - start
    ok, failed = report(6, "linear defect", {
        f"halving ratios in [{min(halving):.3f}, {max(halving):.3f}] within [0.3, 0.7]":
            min(halving) >= 0.3 and max(halving) <= 0.7,
        f"defect/eps <= {const:.3f} over the grid (spread {const / min(per_eps):.2f})":
            np.isfinite(const) and const / min(per_eps) <= 2.0,
    }, elapsed, 120.0)
    assert ok, failed


def test_criterion_07_propagation_and_rank():
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        fa, fb = np.sort(rng.uniform(-1.5, 1.5, 2))
        ga, gb = np.sort(rng.uniform(-1.0, 1.0, 2))
        S = ConvKernelOp(random_pp(rng, fa, fb + 0.05, pieces=2), random_pp(rng, ga, gb + 0.05, pieces=2))
        worst = max(worst, propagation_probe(S, S.propagation + 1e-3, h=1 / 128))
    t = 0.25
    T = random_band(rng, 41, 1)
    TN = WindowMatrix((-20, 20), np.linalg.matrix_power(T, 3))
    f = PiecewisePolynomial.tent(0.3, 0.6)
    frame = PsiFrame.standard(t, K=24)
    ranks = [
        local_compactness_probe(alpha_grid_operator(TN, frame, (-12.0, 12.0), h), f, rank_tol=1e-8)
        for h in (t / 16, t / 32)
    ]
    bound = lattice_rank_bound(f.support, t)
    elapsed = time.perf_counter() - start
    ok, failed = report(7, "propagation and rank", {
        f"probe beyond propagation {worst:.1e} <= 1e-12": worst <= 1e-12,
        f"rank {ranks[0]} vs lattice count {bound} (+-2)": abs(ranks[0] - bound) <= 2,
        f"rank stable under refinement {ranks}": ranks[0] == ranks[1],
    }, elapsed, 120.0)
    assert ok, failed


def test_criterion_08_dyadic_limit():
    start = time.perf_counter()
    p = dyadic_limit(REFERENCE, 6)
    gaps = p.gaps()
    tol = 2 * p.oracle.increment
    elapsed = time.perf_counter() - start
    ok, failed = report(8, "dyadic limit", {
        "profile nondecreasing within 1e-10": p.is_nondecreasing(1e-10),
        f"samples <= oracle {p.oracle.value:.10f} + {tol:.1e}": bool(np.all(p.values <= p.oracle.value + tol)),
        f"gap strictly decreasing (final {gaps[-1]:.2e})": bool(np.all(np.diff(gaps) < 0)),
    }, elapsed, 300.0)
    assert ok, failed


def test_criterion_09_continuity():
    start = time.perf_counter()
    t0 = 0.5
    deltas = [2.0**-k * t0 for k in range(3, 10)]
    r = continuity_scan(REFERENCE, t0, deltas)
    target = 1e-3 * norm_oracle(REFERENCE).value
    final = r.differences[-1]
    elapsed = time.perf_counter() - start
    ok, failed = report(9, "continuity", {
        "differences monotone decreasing": r.is_decreasing(),
        f"final difference {final:.3e} < 1e-3 * ||S|| = {target:.3e}": final < target,
    }, elapsed, 300.0)
    assert ok, failed


def test_criterion_10_field_axiom():
    start = time.perf_counter()
    ts = [2.0**-k for k in range(7)]
    path = ScaledPath((0.0, 1.0), (0.0, 1.0), WindowMatrix.identity(-3, 3))
    elements = {
        "path-only": FieldElement(path=path),
        "generator-only": FieldElement(S=REFERENCE),
        "mixed": FieldElement(path=path, S=REFERENCE),
    }
    checks = {}
    for name, a in elements.items():
        vals = [field_norm(a, t) for t in ts]
        jumps = np.abs(np.diff(vals))
        checks[f"{name}: adjacent jumps decreasing (last {jumps[-1]:.1e})"] = bool(np.all(np.diff(jumps) < 0))
    gen = elements["generator-only"]
    at0 = field_norm(gen, 0.0)
    gap = abs(field_norm(gen, ts[-1]) - at0)
    checks[f"generator-only gap {gap:.1e} <= 5% of {at0:.6f}"] = gap <= 0.05 * at0
    checks[f"5% band {0.05 * at0:.1e} exceeds oracle increment {gen.oracle.increment:.1e}"] = (
        0.05 * at0 > gen.oracle.increment
    )
    elapsed = time.perf_counter() - start
    ok, failed = report(10, "field axiom", checks, elapsed, 300.0)
    assert ok, failed


def test_criterion_11_refinement():
    start = time.perf_counter()
    good = max(refinement_residual(n, t, REFINEMENT) for n in (-3, 0, 5) for t in (0.5, 0.25, 1 / 32))
    t = 0.25
    bad = refinement_residual(0, t, DISPLAYED_REFINEMENT)
    scale = float(hat_eval(0, 2 * t, 0.0))  # peak of the refined hat
    elapsed = time.perf_counter() - start
    ok, failed = report(11, "refinement", {
        f"residual {good:.1e} <= 1e-12": good <= 1e-12,
        f"displayed coefficients residual {bad:.3f} ~ hat scale {scale:.3f}": abs(bad / scale - 1) < 1e-6,
    }, elapsed, 1.0)
    assert ok, failed


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
