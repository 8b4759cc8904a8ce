"""End-to-end tests of the command-line interface.

Each test drives `main` in-process with a temporary output directory and
checks the exit code contract (0 pass, 1 fail, 2 bad config), the CSV
schemas, and byte-level determinism of data files for a fixed seed.
"""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from betacount.cli import configure_threads, main
from betacount.equilibrium import PolynomialPotential
from betacount.fredholm import char_functional_beta2
from betacount.orthopoly import build_system


def _read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def _summary(outdir):
    with open(outdir / "summary.json") as fh:
        return json.load(fh)


def test_equilibrium_roundtrip(tmp_path):
    out = tmp_path / "eq"
    assert main(["equilibrium", "--out", str(out), "--points", "101"]) == 0
    header, rows = _read_csv(out / "equilibrium.csv")
    assert header == ["lambda", "rho", "v"]
    assert len(rows) == 101
    lam = np.array([float(r[0]) for r in rows])
    rho = np.array([float(r[1]) for r in rows])
    assert np.all(rho >= 0)
    # density vanishes outside the support [-2, 2]
    assert np.all(rho[np.abs(lam) > 2.0] == 0)
    s = _summary(out)
    assert s["pass"] is True
    assert s["support"] == [-2.0, 2.0]
    assert json.loads(json.dumps(s)) == s  # report round-trips through parse


def test_missing_config_exits_2(tmp_path):
    code = main(["equilibrium", "--out", str(tmp_path), "--config", "/no/such.json"])
    assert code == 2


def test_invalid_config_exits_2(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"coeffs": "not-a-list"}')
    assert main(["equilibrium", "--out", str(tmp_path), "--config", str(cfg)]) == 2
    cfg.write_text('{"coeffs": [0, 0, -1]}')  # unconfined potential
    assert main(["equilibrium", "--out", str(tmp_path), "--config", str(cfg)]) == 2
    cfg.write_text('{"coeffs": [0, 0, 0, 1]}')  # odd degree
    assert main(["equilibrium", "--out", str(tmp_path), "--config", str(cfg)]) == 2


def test_variance_scan(tmp_path):
    out = tmp_path / "vs"
    code = main(
        [
            "variance-scan",
            "--out",
            str(out),
            "--sizes",
            "20,40,80,160",
            "--interval=-1,1",
        ]
    )
    assert code == 0
    header, rows = _read_csv(out / "variance.csv")
    assert header == ["n", "mean", "variance"]
    assert [int(r[0]) for r in rows] == [20, 40, 80, 160]
    variances = [float(r[2]) for r in rows]
    assert variances == sorted(variances)  # grows with n
    s = _summary(out)
    assert 0.8 <= s["slope_times_pi_squared"] <= 1.2


def test_variance_scan_preconditions(tmp_path):
    # fewer than four sizes is a configuration error
    code = main(
        ["variance-scan", "--out", str(tmp_path), "--sizes", "20,40,80"]
    )
    assert code == 2
    # interval must sit inside the support with the 5% margin
    code = main(
        [
            "variance-scan",
            "--out",
            str(tmp_path),
            "--sizes",
            "20,40,80,160",
            "--interval=-1.99,1.99",
        ]
    )
    assert code == 2


def test_variance_scan_threadpool_deterministic(tmp_path):
    argv = ["variance-scan", "--sizes", "20,40,80,160", "--interval=-1,1"]
    out1, out2 = tmp_path / "t1", tmp_path / "t2"
    assert main(argv + ["--out", str(out1), "--threads", "1"]) == 0
    assert main(argv + ["--out", str(out2), "--threads", "2"]) == 0
    assert (out1 / "variance.csv").read_bytes() == (out2 / "variance.csv").read_bytes()


def test_variance_scan_slope_independent_of_interval(tmp_path):
    from betacount.cli import run_variance_scan
    from betacount.equilibrium import PolynomialPotential as P

    pot = P((0.0, 0.0, 0.5))
    slopes = {}
    for tag, interval in (("half", (-0.5, 0.5)), ("full", (-1.0, 1.0))):
        d = tmp_path / tag
        d.mkdir()
        s = run_variance_scan(pot, str(d), (50, 100, 200, 400), interval)
        slopes[tag] = s["slope"]
    # leading log-n coefficient does not depend on the interval length
    assert abs(slopes["half"] - slopes["full"]) / slopes["full"] < 0.25


def test_clt_matches_library(tmp_path):
    out = tmp_path / "clt"
    code = main(
        [
            "clt",
            "--out",
            str(out),
            "--size",
            "20",
            "--beta",
            "2",
            "--xs",
            "0.5,1.0",
            "--interval=-1,1",
            "--num-samples",
            "1500",
            "--seed",
            "11",
        ]
    )
    assert code == 0
    header, rows = _read_csv(out / "clt.csv")
    assert header == [
        "x",
        "x_n",
        "log_phi_det",
        "mean_count",
        "log_phi_mc",
        "se_mc",
        "limit",
        "method",
        "n",
        "beta",
        "a",
        "b",
    ]
    system = build_system(PolynomialPotential([0.0, 0.0, 0.5]), 20)
    ref = char_functional_beta2(system, (-1.0, 1.0), [0.5, 1.0])
    got = np.array([float(r[2]) for r in rows])
    assert np.max(np.abs(got - ref.log_phi)) < 1e-10
    # limit column carries x^2 / 2 for the unitary class
    assert float(rows[1][6]) == 0.5
    s = _summary(out)
    assert s["mc_within_3se"] is True
    assert s["mc_worst_sigma"] < 3.0
    assert "ks_p_value" in s


def test_clt_without_monte_carlo(tmp_path):
    out = tmp_path / "cltnomc"
    code = main(
        [
            "clt",
            "--out",
            str(out),
            "--size",
            "20",
            "--beta",
            "2",
            "--xs",
            "1.0",
            "--num-samples",
            "0",
        ]
    )
    assert code == 0
    _, rows = _read_csv(out / "clt.csv")
    assert rows[0][4] == "nan"  # no MC column content
    s = _summary(out)
    assert "log_phi_mc" not in s


def test_clt_odd_n_for_beta1_exits_2(tmp_path):
    code = main(
        ["clt", "--out", str(tmp_path), "--size", "15", "--beta", "1"]
    )
    assert code == 2


@pytest.mark.parametrize("beta,method", [(1, "block"), (4, "scalar")])
def test_clt_matrix_cases(tmp_path, beta, method):
    out = tmp_path / f"clt{beta}"
    code = main(
        [
            "clt",
            "--out",
            str(out),
            "--size",
            "16",
            "--beta",
            str(beta),
            "--xs",
            "1.0",
            "--interval=-1,1",
            "--method",
            method,
            "--num-samples",
            "0",
        ]
    )
    assert code == 0
    _, rows = _read_csv(out / "clt.csv")
    assert np.isfinite(float(rows[0][2]))
    assert rows[0][8] == "16" and rows[0][9] == str(beta)


def test_verify_identities_size_guard(tmp_path):
    assert main(["verify-identities", "--out", str(tmp_path), "--size", "70"]) == 2


def test_verify_identities_with_dumps(tmp_path):
    out = tmp_path / "vi"
    code = main(
        [
            "verify-identities",
            "--out",
            str(out),
            "--size",
            "8",
            "--dump-matrices",
        ]
    )
    assert code == 0
    s = _summary(out)
    assert s["pass"] is True
    assert all(v < 1e-8 for v in s["checks"].values())
    for name in (
        "recurrence.csv",
        "kernel_S_beta1.csv",
        "kernel_S_beta4.csv",
        "kernel_beta2.csv",
        "D.csv",
        "M.csv",
        "Tn.csv",
        "F_beta1.csv",
        "F_beta4.csv",
    ):
        assert (out / name).exists(), name
    # M dump reconstructs an antisymmetric matrix
    _, rows = _read_csv(out / "M.csv")
    size = int(rows[-1][0]) + 1
    M = np.zeros((size, size))
    for i, j, v in rows:
        M[int(i), int(j)] = float(v)
    assert np.max(np.abs(M + M.T)) < 1e-8
    # quadratic potential: half-degree 1, so the corner block is 1 x 1
    _, trows = _read_csv(out / "Tn.csv")
    assert len(trows) == 1
    header, krows = _read_csv(out / "kernel_S_beta1.csv")
    assert header == ["i", "j", "t_i", "t_j", "K"]


def test_sample_deterministic_bytes(tmp_path):
    def args(seed):
        return [
            "sample",
            "--beta",
            "2",
            "--size",
            "40",
            "--num-samples",
            "300",
            "--seed",
            seed,
            "--interval=-1,1",
        ]

    out1, out2, out3 = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(args("42") + ["--out", str(out1)]) == 0
    assert main(args("42") + ["--out", str(out2)]) == 0
    assert (out1 / "counts.csv").read_bytes() == (out2 / "counts.csv").read_bytes()
    assert main(args("43") + ["--out", str(out3)]) == 0
    assert (out1 / "counts.csv").read_bytes() != (out3 / "counts.csv").read_bytes()
    s = _summary(out1)
    assert s["sampler"] == "tridiagonal"
    assert s["pass"] is True


def test_sample_mcmc_for_general_potential(tmp_path):
    cfg = tmp_path / "quartic.json"
    cfg.write_text('{"coeffs": [0, 0, -1, 0, 1]}')
    out = tmp_path / "mc"
    code = main(
        [
            "sample",
            "--config",
            str(cfg),
            "--out",
            str(out),
            "--beta",
            "1",
            "--size",
            "30",
            "--num-samples",
            "150",
            "--seed",
            "7",
            "--interval=-1,1",
        ]
    )
    assert code == 0
    s = _summary(out)
    assert s["sampler"] == "mcmc"
    assert 0.1 <= s["acceptance_rate"] <= 0.9
    # asking for the tridiagonal sampler with a quartic potential is an error
    code = main(
        [
            "sample",
            "--config",
            str(cfg),
            "--out",
            str(tmp_path / "x"),
            "--sampler",
            "tridiagonal",
        ]
    )
    assert code == 2


def test_report_merge(tmp_path):
    eq = tmp_path / "eq"
    assert main(["equilibrium", "--out", str(eq), "--points", "51"]) == 0
    good = eq / "summary.json"
    bad = tmp_path / "failing.json"
    bad.write_text('{"command": "clt", "pass": false}')
    merged = tmp_path / "merged.json"
    assert main(["report-merge", "--out", str(merged), str(good)]) == 0
    report = json.loads(merged.read_text())
    assert report["pass"] is True and report["num_reports"] == 1
    assert main(["report-merge", "--out", str(merged), str(good), str(bad)]) == 1
    report = json.loads(merged.read_text())
    assert report["pass"] is False
    assert main(["report-merge", "--out", str(merged), "/no/such.json"]) == 2


def test_threads_resolution(monkeypatch):
    monkeypatch.delenv("BETACOUNT_THREADS", raising=False)
    assert configure_threads(None) == 0
    monkeypatch.setenv("BETACOUNT_THREADS", "1")
    assert configure_threads(None) == 1
    assert configure_threads(2) == 2


def test_console_script_installed():
    exe = shutil.which("betacount")
    assert exe is not None
    proc = subprocess.run(
        [exe, "--help"], capture_output=True, text=True, timeout=60
    )
    assert proc.returncode == 0
    assert "variance-scan" in proc.stdout


def test_module_invocation_help():
    proc = subprocess.run(
        [sys.executable, "-m", "betacount.cli", "--help"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
