import json
import shutil
import subprocess

import pytest

from roefield.cli import EXIT_CAP, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main


def run(tmp_path, command, cfg=None, out="out", extra=()):
    argv = [command, "--out", str(tmp_path / out), *extra]
    if cfg is not None:
        path = tmp_path / f"{out}.json"
        path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
        argv += ["--config", str(path)]
    return main(argv)


def test_coeffs_default(tmp_path):
    assert run(tmp_path, "coeffs") == EXIT_OK
    lines = (tmp_path / "out" / "coeffs.csv").read_text().split("\n")
    assert lines[0] == "k,value,oracle,discrepancy"
    assert len(lines) == 65 + 2
    assert max(float(line.split(",")[3]) for line in lines[1:-1]) < 1e-10
    summary = json.loads((tmp_path / "out" / "coeffs.json").read_text())
    assert summary["decay"]["ratio"] < 1


def test_coeffs_degenerate_K(tmp_path):
    assert run(tmp_path, "coeffs", {"K": 0}) == EXIT_OK
    rows = (tmp_path / "out" / "coeffs.csv").read_text().splitlines()
    assert len(rows) == 2
    assert json.loads((tmp_path / "out" / "coeffs.json").read_text())["decay"] is None


def test_malformed_config(tmp_path, capsys):
    assert run(tmp_path, "coeffs", "{not json") == EXIT_USAGE
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["exit_code"] == EXIT_USAGE and "malformed" in record["error"]
    assert run(tmp_path, "coeffs", {"bogus": 1}) == EXIT_USAGE
    assert run(tmp_path, "coeffs", {"K": -3}) == EXIT_USAGE
    assert main(["nonsense"]) == EXIT_USAGE
    assert main(["coeffs", "--config", str(tmp_path / "missing.json")]) == EXIT_USAGE


def test_verify_default_passes(tmp_path, capsys):
    assert run(tmp_path, "verify") == EXIT_OK
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 10 and all(line.endswith("PASS") for line in out)


def test_verify_displayed_refinement_fails(tmp_path, capsys):
    assert run(tmp_path, "verify", {"refinement": "displayed"}) == EXIT_FAIL
    captured = capsys.readouterr()
    record = json.loads(captured.err.strip().splitlines()[-1])
    assert [f["name"] for f in record["failures"]] == ["refinement"]
    assert record["failures"][0]["measured"] > 1.0


def test_verify_infeasible_tolerance(tmp_path, capsys):
    assert run(tmp_path, "verify", {"tolerance": 1e-16}) == EXIT_USAGE
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["failures"] and all(f["status"] == "infeasible" for f in record["failures"])


def test_beta_outputs(tmp_path):
    assert run(tmp_path, "beta", {"t": 0.5}) == EXIT_OK
    text = (tmp_path / "out" / "beta.csv").read_text()
    assert text.startswith("# window=")
    summary = json.loads((tmp_path / "out" / "beta.json").read_text())
    assert summary["norm"] == pytest.approx(0.6026232406, abs=1e-9)


def test_scan_profile_monotone_column(tmp_path, capsys):
    cfg = {"t_grid": [1.0, 0.5, 0.25, 0.125]}
    assert run(tmp_path, "scan", cfg) == EXIT_OK
    assert "profile_monotone" in capsys.readouterr().out
    summary = json.loads((tmp_path / "out" / "profile.json").read_text())
    assert summary["nondecreasing_as_t_halves"] is True


def test_scan_empty_grid(tmp_path):
    assert run(tmp_path, "scan", {"t_grid": []}) == EXIT_USAGE


def test_scan_resource_cap(tmp_path, capsys):
    assert run(tmp_path, "scan", {"t_grid": [0.001]}) == EXIT_CAP
    assert "cap" in json.loads(capsys.readouterr().err.strip())["error"]


def test_scan_deterministic_and_thread_independent(tmp_path):
    cfg = {"t_grid": [1.0, 0.5, 0.25, 0.125, 0.0625]}
    assert run(tmp_path, "scan", cfg, out="a") == EXIT_OK
    assert run(tmp_path, "scan", cfg, out="b") == EXIT_OK
    assert run(tmp_path, "scan", cfg, out="c", extra=("--threads", "4")) == EXIT_OK
    a = (tmp_path / "a" / "profile.csv").read_bytes()
    assert a == (tmp_path / "b" / "profile.csv").read_bytes() == (tmp_path / "c" / "profile.csv").read_bytes()
    assert b"\r" not in a


def test_scan_continuity(tmp_path):
    cfg = {"t0": 0.5, "deltas": [0.0625, 0.03125, 0.015625]}
    code = run(tmp_path, "scan", cfg)
    # the final difference at these coarse deltas is far above 1e-3 of the norm
    assert code == EXIT_FAIL
    lines = (tmp_path / "out" / "continuity.csv").read_text().splitlines()
    assert lines[0] == "delta,value,certificate" and len(lines) == 4


def test_limit_command(tmp_path):
    assert run(tmp_path, "limit", {"k_max": 5}) == EXIT_OK
    assert (tmp_path / "out" / "limit.csv").read_text().count("\n") == 7


def test_field_command(tmp_path):
    assert run(tmp_path, "field") == EXIT_OK
    rows = (tmp_path / "out" / "field.csv").read_text().splitlines()
    assert rows[0] == "element,t,value,certificate"
    assert len(rows) == 1 + 3 * 8


def test_custom_operator(tmp_path):
    op = {"terms": [{"coef": 2.0, "f": {"breakpoints": ["-1/2", "1/2"], "pieces": [["1"]]},
                     "g": {"breakpoints": [-1, 0, 1], "pieces": [[1, 1], [1, -1]]}}]}
    assert run(tmp_path, "beta", {"operator": op, "t": 1.0}) == EXIT_OK


def test_console_script(tmp_path):
    exe = shutil.which("roefield")
    if exe is None:
        pytest.skip("console script not installed")
    res = subprocess.run([exe, "coeffs", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    assert "inv_sqrt_oracle" in res.stdout
