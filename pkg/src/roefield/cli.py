"""Command-line entry point.

Every run reads one JSON config (``--config``), writes its tables to
``--out`` and prints one line per check. Exit codes: 0 all checks pass,
1 some check fails, 2 usage or config error (including tolerances below
what double precision can certify), 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import field_lab
from .compression import (
    PsiFrame,
    beta,
    gamma_apply,
    gamma_norm_sq_formula,
    gamma_operator_norm,
    psi_gram,
    roundtrip,
)
from .lattice_basis import (
    DISPLAYED_REFINEMENT,
    GRAM_DIAG,
    GRAM_OFFDIAG,
    REFINEMENT,
    LatticeFunction,
    hat_inner_quadrature,
    refinement_residual,
)
from .line_operators import ConvKernelOp, GeneratorSum, as_terms, norm_oracle
from .piecewise import PiecewisePolynomial, from_dict as pp_from_dict
from .toeplitz import (
    DecayFitError,
    coeff_product,
    decay_fit,
    dense_inv_sqrt_oracle,
    gram_coeffs,
    inv_sqrt_coeffs,
    symbol_of,
)
from .window import WindowMatrix

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3

# Smallest tolerance each residual check can certify in double precision.
FLOORS = {
    "gram_constants": 1e-15,
    "gram_gap": 1e-15,
    "gram_identity": 1e-15,
    "inv_sqrt_oracle": 1e-13,
    "psi_orthonormality": 1e-14,
    "gamma_formula": 1e-13,
    "roundtrip": 1e-13,
    "refinement": 1e-15,
}

DEFAULT_TOLERANCES = {
    "gram_constants": 1e-12,
    "gram_gap": 1e-12,
    "gram_identity": 1e-8,
    "inv_sqrt_oracle": 1e-10,
    "psi_orthonormality": 1e-8,
    "gamma_formula": 1e-10,
    "roundtrip": 1e-8,
    "refinement": 1e-12,
}


class UsageError(ValueError):
    pass


@dataclass
class Check:
    name: str
    measured: float
    bound: str
    status: str  # "pass", "fail" or "infeasible"

    def line(self):
        return f"{self.name:<22} measured={self.measured:.6e}  bound={self.bound:<24} {self.status.upper()}"

    def record(self):
        return {"name": self.name, "measured": self.measured, "bound": self.bound, "status": self.status}


def _residual(name, measured, tol):
    if tol < FLOORS.get(name, 0.0):
        status = "infeasible"
    else:
        status = "pass" if measured <= tol else "fail"
    return Check(name, float(measured), f"<= {tol:.3e}", status)


def _condition(name, measured, ok, bound):
    return Check(name, float(measured), bound, "pass" if ok else "fail")


# -- config parsing ----------------------------------------------------------


def reference_operator():
    """The tent pair used whenever a config names no operator."""
    return ConvKernelOp(PiecewisePolynomial.tent(), PiecewisePolynomial.tent())


def parse_operator(desc):
    if desc is None:
        return None
    if desc == "reference":
        return reference_operator()
    if not isinstance(desc, dict):
        raise UsageError("operator must be an object, null or \"reference\"")
    if "terms" in desc:
        items = []
        for term in desc["terms"]:
            op = ConvKernelOp(pp_from_dict(term["f"]), pp_from_dict(term["g"]))
            items.append((float(term.get("coef", 1.0)), op))
        return GeneratorSum(tuple(items))
    return ConvKernelOp(pp_from_dict(desc["f"]), pp_from_dict(desc["g"]))


def _window_matrix(desc):
    lo, hi = (int(v) for v in desc["window"])
    if "identity" in desc:
        return WindowMatrix.identity(lo, hi) * float(desc["identity"])
    return WindowMatrix((lo, hi), np.asarray(desc["entries"], dtype=float))


def parse_element(desc, frame):
    path = None
    if desc.get("path") is not None:
        p = desc["path"]
        path = field_lab.ScaledPath(
            tuple(float(v) for v in p["knots"]),
            tuple(float(v) for v in p["values"]),
            _window_matrix(p["T0"]),
        )
    return field_lab.FieldElement(path, parse_operator(desc.get("operator")), frame)


def default_elements():
    ident = {"window": [-3, 3], "identity": 1.0}
    path = {"knots": [0.0, 1.0], "values": [0.0, 1.0], "T0": ident}
    return [
        {"name": "path_only", "path": path, "operator": None},
        {"name": "generator_only", "path": None, "operator": "reference"},
        {"name": "mixed", "path": path, "operator": "reference"},
    ]


def _positive(cfg, key, default):
    value = float(cfg.get(key, default))
    if not value > 0:
        raise UsageError(f"{key} must be positive")
    return value


def _int(cfg, key, default, minimum=0):
    value = cfg.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise UsageError(f"{key} must be an integer >= {minimum}")
    return value


ALLOWED_KEYS = {
    "coeffs": {"K", "quad_points", "oracle_N", "tolerance"},
    "verify": {"tolerance", "tolerances", "refinement", "samples", "t_grid", "K"},
    "beta": {"operator", "t", "K", "window", "max_window"},
    "scan": {"operator", "t_grid", "t0", "deltas", "K", "max_window", "oracle_h", "continuity_rel_tol"},
    "limit": {"operator", "k_max", "K", "max_window", "oracle_h"},
    "field": {"elements", "k_max", "K", "max_window", "oracle_h", "limit_rel_tol"},
}


def load_config(path, command):
    if path is None:
        cfg = {}
    else:
        try:
            cfg = json.loads(Path(path).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(cfg) - ALLOWED_KEYS[command]
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
    return cfg


# -- output ------------------------------------------------------------------


def _write(out, name, text):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / name, "w", newline="\n") as fh:
        fh.write(text)


def _write_json(out, name, obj):
    _write(out, name, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _csv(header, rows):
    lines = [",".join(header)]
    lines += [",".join(v if isinstance(v, str) else repr(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# -- commands ----------------------------------------------------------------


def cmd_coeffs(cfg, args):
    K = _int(cfg, "K", 64)
    quad = _int(cfg, "quad_points", 4096, 1)
    N = _int(cfg, "oracle_N", 256, 8)
    tol = _positive(cfg, "tolerance", 1e-10)
    if tol < FLOORS["inv_sqrt_oracle"]:
        return [Check("inv_sqrt_oracle", float("nan"), f"<= {tol:.3e}", "infeasible")]
    try:
        c = inv_sqrt_coeffs(K, quad)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    oracle = dense_inv_sqrt_oracle(N)
    lo, hi = oracle.interior
    diff = np.abs(oracle.interior_block() - c.block(lo, hi))
    offsets = np.abs(np.arange(lo, hi + 1)[:, None] - np.arange(lo, hi + 1)[None, :])
    rows = []
    for k in range(K + 1):
        mask = offsets == k
        disc = float(diff[mask].max()) if mask.any() else float("nan")
        ref = float(oracle.entry(0, k)) if k <= N else float("nan")
        rows.append((str(k), c.coeffs[k], ref, disc))
    _write(args.out, "coeffs.csv", _csv(["k", "value", "oracle", "discrepancy"], rows))
    inside = offsets <= K
    disc = float(diff[inside].max())
    beyond = float(diff[~inside].max(initial=0.0))
    checks = [
        _residual("inv_sqrt_oracle", disc, tol),
        _condition("tail_certificate", beyond, beyond <= c.tail_bound + tol, f"<= {c.tail_bound + tol:.3e}"),
    ]
    summary = {"K": K, "quad_points": quad, "oracle_N": N, "tail_bound": c.tail_bound,
               "max_discrepancy": disc, "max_beyond_K": beyond, "decay": None}
    try:
        amp, ratio = decay_fit(c)
        summary["decay"] = {"amplitude": amp, "ratio": ratio}
        checks.append(_condition("decay_ratio", ratio, ratio < 1.0, "< 1"))
    except DecayFitError as exc:
        summary["decay_note"] = str(exc)
    _write_json(args.out, "coeffs.json", summary)
    return checks


def _refinement_table(choice):
    if choice in (None, "correct"):
        return REFINEMENT
    if choice == "displayed":
        return DISPLAYED_REFINEMENT
    try:
        return tuple((int(o), float(v)) for o, v in choice)
    except (TypeError, ValueError) as exc:
        raise UsageError("refinement must be \"correct\", \"displayed\" or [[offset, coef], ...]") from exc


def cmd_verify(cfg, args):
    tols = dict(DEFAULT_TOLERANCES)
    if "tolerance" in cfg:
        tols = dict.fromkeys(tols, _positive(cfg, "tolerance", 1.0))
    for name, value in cfg.get("tolerances", {}).items():
        if name not in tols:
            raise UsageError(f"unknown tolerance {name!r}")
        tols[name] = _positive({name: value}, name, 1.0)
    samples = _int(cfg, "samples", 10, 1)
    K = _int(cfg, "K", 64, 1)
    t_grid = [float(t) for t in cfg.get("t_grid", [1.0, 0.5, 0.25, 0.125])]
    if not t_grid or any(not 0 < t <= 1 for t in t_grid):
        raise UsageError("t_grid must be a nonempty subset of (0, 1]")
    coeffs_table = _refinement_table(cfg.get("refinement"))
    rng = np.random.default_rng(0)
    checks = []

    expected = {0: GRAM_DIAG, 1: GRAM_OFFDIAG, 2: 0.0}
    gram_err = max(abs(hat_inner_quadrature(0, d, t) - v) for t in t_grid for d, v in expected.items())
    checks.append(_residual("gram_constants", gram_err, tols["gram_constants"]))

    x = np.linspace(0.0, np.pi, 4097)
    gap = float(np.max(np.abs(GRAM_DIAG - symbol_of(gram_coeffs())(x))))
    checks.append(_residual("gram_gap", abs(gap - 1.0 / 3.0), tols["gram_gap"]))

    c = inv_sqrt_coeffs(K)
    ident = coeff_product(coeff_product(c, c), gram_coeffs()).coeffs
    ident_err = abs(ident[0] - 1.0) + float(np.max(np.abs(ident[1:]), initial=0.0))
    checks.append(_residual("gram_identity", ident_err, tols["gram_identity"]))

    oracle = dense_inv_sqrt_oracle(256)
    lo, hi = oracle.interior
    oracle_err = float(np.max(np.abs(oracle.interior_block() - c.block(lo, hi))))
    checks.append(_residual("inv_sqrt_oracle", oracle_err, tols["inv_sqrt_oracle"]))

    frame = PsiFrame(1.0, c)
    ortho = 0.0
    for t in t_grid:
        G = psi_gram(frame.with_scale(t), (-8, 8)).entries
        ortho = max(ortho, float(np.max(np.abs(G - np.eye(G.shape[0])))))
    checks.append(_residual("psi_orthonormality", ortho, tols["psi_orthonormality"]))

    formula, ratio_lo, ratio_hi = 0.0, math.inf, 0.0
    for _ in range(samples):
        A = WindowMatrix((0, 29), np.triu(np.tril(rng.standard_normal((30, 30)), 3), -3))
        xc = np.zeros(30)
        xc[5:25] = rng.standard_normal(20)
        xf = LatticeFunction(0.5, 0, xc)
        direct = gamma_apply(A, xf).l2_norm() ** 2
        formula = max(formula, abs(direct - gamma_norm_sq_formula(A, xf)) / max(direct, 1.0))
        r = gamma_operator_norm(A.entries, 0) / np.linalg.norm(A.entries, 2)
        ratio_lo, ratio_hi = min(ratio_lo, r), max(ratio_hi, r)
    checks.append(_residual("gamma_formula", formula, tols["gamma_formula"]))
    lo_b, hi_b = 1 / math.sqrt(3) - 0.02, math.sqrt(3) + 0.02
    checks.append(_condition("frame_ratio_min", ratio_lo, ratio_lo >= lo_b, f">= {lo_b:.6f}"))
    checks.append(_condition("frame_ratio_max", ratio_hi, ratio_hi <= hi_b, f"<= {hi_b:.6f}"))

    rt = 0.0
    for T in [WindowMatrix.identity(-5, 5), WindowMatrix((-5, 5), np.eye(11, k=1))]:
        rt = max(rt, roundtrip(T, 1.0, frame))
    for _ in range(samples):
        T = WindowMatrix((-5, 5), np.triu(np.tril(rng.standard_normal((11, 11)), 3), -3))
        rt = max(rt, roundtrip(T, 0.5, frame))
    checks.append(_residual("roundtrip", rt, tols["roundtrip"]))

    ref = max(refinement_residual(n, 0.25, coeffs_table) for n in (-2, 0, 3))
    checks.append(_residual("refinement", ref, tols["refinement"]))

    _write(args.out, "verify.csv", _csv(["name", "measured", "bound", "status"],
                                       [(ch.name, ch.measured, ch.bound, ch.status) for ch in checks]))
    return checks


def _frame(cfg):
    return PsiFrame.standard(1.0, K=_int(cfg, "K", 64, 1))


def _max_window(cfg):
    return _int(cfg, "max_window", field_lab.MAX_WINDOW, 1)


def cmd_beta(cfg, args):
    S = parse_operator(cfg.get("operator", "reference"))
    t = float(cfg.get("t", 0.5))
    if not 0 < t <= 1:
        raise UsageError("t must lie in (0, 1]")
    frame = _frame(cfg)
    window = cfg.get("window")
    window = None if window is None else tuple(int(v) for v in window)
    if window is None:
        field_lab._checked_window(S, t, frame.K, _max_window(cfg))
    B = beta(S, t, frame, window=window) if as_terms(S) else WindowMatrix.zeros(0, 0)
    _write(args.out, "beta.csv", B.to_csv())
    cert = field_lab.beta_certificate(S, frame)
    _write_json(args.out, "beta.json", {"t": t, "window": list(B.window), "norm": B.norm(), "certificate": cert})
    return [_condition("beta_finite", B.norm(), bool(np.all(np.isfinite(B.entries))), "finite")]


def _profile_checks(profile, dyadic):
    checks = []
    if profile.oracle is not None:
        bound = profile.oracle.value + 2 * profile.oracle.increment
        worst = float(np.max(profile.values - bound))
        checks.append(_condition("profile_upper_bound", worst, worst <= 0.0, "<= 0 (sample - oracle bound)"))
    if dyadic:
        diffs = np.diff(profile.values[np.argsort(-profile.t, kind="stable")])
        worst = float(-np.min(diffs, initial=0.0))
        checks.append(_condition("profile_monotone", worst, profile.is_nondecreasing(), "<= 1e-10 (largest drop)"))
    return checks


def _is_dyadic_chain(ts):
    s = sorted(ts, reverse=True)
    return len(s) > 1 and all(abs(b - a / 2) <= 1e-15 * a for a, b in zip(s, s[1:]))


def cmd_scan(cfg, args):
    S = parse_operator(cfg.get("operator", "reference"))
    frame = _frame(cfg)
    oracle_h = _positive(cfg, "oracle_h", 1.0 / 512)
    if "t0" in cfg:
        deltas = cfg.get("deltas")
        if not deltas:
            raise UsageError("continuity scan needs a nonempty deltas list")
        try:
            report = field_lab.continuity_scan(S, cfg["t0"], deltas, frame, threads=args.threads)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        oracle = norm_oracle(S, h=oracle_h)
        rel = _positive(cfg, "continuity_rel_tol", 1e-3)
        summary = report.summary()
        summary["oracle"] = oracle.to_dict()
        _write(args.out, "continuity.csv", report.to_csv())
        _write_json(args.out, "continuity.json", summary)
        final = report.differences[-1]
        return [
            _condition("continuity_monotone", final, report.is_decreasing(), "strictly decreasing"),
            _condition("continuity_final", final, final < rel * oracle.value, f"< {rel * oracle.value:.6e}"),
        ]
    t_grid = cfg.get("t_grid")
    if not t_grid:
        raise UsageError("scan needs a nonempty t_grid (or t0 and deltas)")
    try:
        profile = field_lab.norm_profile(S, t_grid, frame, _max_window(cfg), oracle_h, threads=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write(args.out, "profile.csv", profile.to_csv())
    _write_json(args.out, "profile.json", profile.summary())
    return _profile_checks(profile, _is_dyadic_chain(profile.t.tolist()))


def cmd_limit(cfg, args):
    S = parse_operator(cfg.get("operator", "reference"))
    k_max = _int(cfg, "k_max", 6)
    profile = field_lab.dyadic_limit(S, k_max, _frame(cfg), max_window=_max_window(cfg),
                                     oracle_h=_positive(cfg, "oracle_h", 1.0 / 512), threads=args.threads)
    _write(args.out, "limit.csv", profile.to_csv())
    _write_json(args.out, "limit.json", profile.summary())
    checks = _profile_checks(profile, True)
    gaps = profile.gaps()
    if as_terms(S):
        ok = bool(np.all(np.diff(gaps) < 0))
        checks.append(_condition("gap_decreasing", float(gaps[-1]), ok, "strictly decreasing in k"))
    return checks


def cmd_field(cfg, args):
    frame = _frame(cfg)
    k_max = _int(cfg, "k_max", 6)
    rel = _positive(cfg, "limit_rel_tol", 0.05)
    oracle_h = _positive(cfg, "oracle_h", 1.0 / 512)
    descs = cfg.get("elements", default_elements())
    if not descs:
        raise UsageError("elements must be nonempty")
    ts = [2.0**-k for k in range(k_max + 1)]
    rows, checks = [], []
    for i, desc in enumerate(descs):
        name = str(desc.get("name", f"element{i}"))
        a = parse_element(desc, frame)
        a.oracle_h = oracle_h
        for t in ts:
            field_lab._checked_window(a.S, t, frame.K, _max_window(cfg))
        values = [v for _, v in field_lab.field_norm_profile(a, ts, threads=args.threads)]
        zero = field_lab.field_norm(a, 0.0)
        cert = field_lab.beta_certificate(a.S, frame)
        rows += [(name, t, v, cert) for t, v in zip(ts, values)]
        rows.append((name, 0.0, zero, a.oracle.increment if as_terms(a.S) else 0.0))
        jumps = np.abs(np.diff(values))
        ok = bool(np.all(np.diff(jumps) < 0)) if jumps.size > 1 else True
        checks.append(_condition(f"{name}:jumps_decreasing", float(jumps.max(initial=0.0)), ok, "strictly decreasing"))
        if as_terms(a.S) and a.path is None:
            gap = abs(values[-1] - zero)
            meaningful = rel * zero > a.oracle.increment
            checks.append(_condition(f"{name}:limit", gap, gap <= rel * zero and meaningful,
                                     f"<= {rel * zero:.6e} (> increment {a.oracle.increment:.1e})"))
    _write(args.out, "field.csv", _csv(["element", "t", "value", "certificate"], rows))
    return checks


COMMANDS = {
    "coeffs": cmd_coeffs,
    "verify": cmd_verify,
    "beta": cmd_beta,
    "scan": cmd_scan,
    "limit": cmd_limit,
    "field": cmd_field,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="roefield", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, default=None, help="JSON experiment config")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--threads", type=int, default=0, help="worker threads; 0 runs sequentially")
    parser.add_argument("--seed", type=int, default=None, help="reserved; all engines are deterministic")
    return parser


def _fail_record(command, code, checks=(), error=None):
    rec = {"command": command, "exit_code": code, "failures": [ch.record() for ch in checks]}
    if error is not None:
        rec["error"] = error
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads < 0:
        _fail_record(args.command, EXIT_USAGE, error="--threads must be >= 0")
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, args.command)
        checks = COMMANDS[args.command](cfg, args)
    except field_lab.ResourceCapError as exc:
        _fail_record(args.command, EXIT_CAP, error=str(exc))
        return EXIT_CAP
    except (UsageError, KeyError, TypeError, ValueError) as exc:
        _fail_record(args.command, EXIT_USAGE, error=f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE
    for ch in checks:
        print(ch.line())
    infeasible = [ch for ch in checks if ch.status == "infeasible"]
    failed = [ch for ch in checks if ch.status == "fail"]
    if infeasible:
        _fail_record(args.command, EXIT_USAGE, infeasible, error="tolerance below certifiable floor")
        return EXIT_USAGE
    if failed:
        _fail_record(args.command, EXIT_FAIL, failed)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
