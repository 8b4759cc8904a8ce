"""Command-line interface for the counting-statistics laboratory.

Subcommands
-----------
equilibrium        density, support and effective potential for a potential
variance-scan      projection-kernel number variance across ensemble sizes
clt                characteristic functional of the centered count
verify-identities  exact finite-n structure checks with optional matrix dumps
sample             Monte Carlo eigenvalue counts
report-merge       combine summary JSON files into one report

Every run writes CSV data plus a `summary.json` carrying a boolean `pass`;
the process exits 0 exactly when the summary passes.  All CSV output is
byte-identical for a fixed configuration and seed.  The potential comes
from a JSON config `{"coeffs": [c0, c1, ...]}` (ascending powers, default
quadratic [0, 0, 0.5]); threads are set by --threads or BETACOUNT_THREADS.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from concurrent.futures import ThreadPoolExecutor

from .equilibrium import (
    PolynomialPotential,
    effective_potential,
    equilibrium_density,
    solve_one_cut_support,
)
from .fredholm import (
    char_functional_beta2,
    char_functional_block,
    char_functional_scalar_reduced,
    variance_trace,
)
from .matrix_kernels import (
    build_operator_matrices,
    build_S1,
    build_S4,
    identity_residuals,
    rank_one_P,
    widom_decompose,
)
from .orthopoly import build_system, kernel_cd, project_kernel
from .sampler import (
    count_in_interval,
    empirical_char_functional,
    integrated_autocorrelation,
    mcmc_sample,
    normality_test,
    tridiag_gaussian_sample,
)


class ConfigError(ValueError):
    pass


def load_config(path):
    """Potential configuration: {"coeffs": [...]} with ascending powers."""
    if path is None:
        data = {"coeffs": [0.0, 0.0, 0.5]}
    else:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict) or "coeffs" not in data:
        raise ConfigError('config must be a JSON object with a "coeffs" list')
    coeffs = data["coeffs"]
    if not isinstance(coeffs, list) or not all(
        isinstance(c, (int, float)) and not isinstance(c, bool) for c in coeffs
    ):
        raise ConfigError('"coeffs" must be a list of numbers')
    try:
        pot = PolynomialPotential([float(c) for c in coeffs])
    except ValueError as exc:
        raise ConfigError(f"invalid potential: {exc}") from exc
    return pot, data


def configure_threads(requested):
    """Resolve the thread count from the flag or BETACOUNT_THREADS."""
    if requested is None:
        env = os.environ.get("BETACOUNT_THREADS", "").strip()
        requested = int(env) if env else None
    if requested is None:
        return 0  # leave library defaults alone
    n = max(1, int(requested))
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        import warnings

        import numba

        with warnings.catch_warnings():
            # thread-layer selection falls back on its own; the fallback
            # notice is not actionable for the user
            warnings.simplefilter("ignore")
            numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except (ImportError, ValueError):
        pass
    return n


def _parse_interval(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2 or not parts[1] > parts[0]:
        raise ConfigError(f"interval must be 'a,b' with a < b, got {text!r}")
    return parts[0], parts[1]


def _require_interval_in_support(pot, interval):
    """Counting intervals must sit strictly inside the support, 5% margin."""
    a, b = solve_one_cut_support(pot).endpoints
    margin = 0.025 * (b - a)
    if not (a + margin <= interval[0] and interval[1] <= b - margin):
        raise ConfigError(
            f"interval [{interval[0]}, {interval[1]}] must lie inside the "
            f"support [{a:.6g}, {b:.6g}] with a 5% margin"
        )


def _parse_float_list(text):
    vals = [float(p) for p in text.split(",") if p.strip()]
    if not vals:
        raise ConfigError(f"empty list: {text!r}")
    return vals


def _parse_int_list(text):
    return [int(round(v)) for v in _parse_float_list(text)]


def _fmt(value):
    return f"{value:.17g}"


def _write_rows(path, header, rows):
    """Deterministic CSV: fixed float format, '\n' endings, header row."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row)
                + "\n"
            )


def _write_matrix(path, mat, labels=("i", "j", "value")):
    rows = [
        (int(i), int(j), float(mat[i, j]))
        for i in range(mat.shape[0])
        for j in range(mat.shape[1])
    ]
    _write_rows(path, labels, rows)


def _write_kernel_dump(path, t, K):
    rows = []
    for i in range(t.size):
        for j in range(t.size):
            rows.append((int(i), int(j), float(t[i]), float(t[j]), float(K[i, j])))
    _write_rows(path, ("i", "j", "t_i", "t_j", "K"), rows)


def _write_summary(outdir, summary):
    path = os.path.join(outdir, "summary.json")
    with open(path, "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# -- subcommand implementations ---------------------------------------------


def run_equilibrium(pot, outdir, points=401):
    measure = equilibrium_density(pot)
    eff = effective_potential(pot, measure)
    (a, b) = measure.support.intervals[0]
    pad = 0.25 * (b - a)
    lam = np.linspace(a - pad, b + pad, points)
    rho = measure.rho(lam)
    v = eff(lam)
    _write_rows(
        os.path.join(outdir, "equilibrium.csv"),
        ("lambda", "rho", "v"),
        zip(lam.tolist(), rho.tolist(), v.tolist()),
    )
    mass = float(np.sum(measure.interval_masses()))
    gap_probe = np.array([a - 0.5 * pad, b + 0.5 * pad])
    min_gap = float(np.min(eff.off_support_gap(gap_probe)))
    summary = {
        "command": "equilibrium",
        "coeffs": list(map(float, pot.coeffs)),
        "support": [float(a), float(b)],
        "total_mass_error": abs(mass - 1.0),
        "effective_potential_deviation": eff.on_support_deviation,
        "min_off_support_gap": min_gap,
        "pass": bool(
            abs(mass - 1.0) < 1e-6
            and eff.on_support_deviation < 1e-5
            and min_gap > 0.0
        ),
    }
    return summary


def run_variance_scan(pot, outdir, sizes, interval, workers=1, options=None):
    if len(sizes) < 4:
        raise ConfigError("variance-scan needs at least 4 ensemble sizes")
    _require_interval_in_support(pot, interval)
    options = options or {}
    tol = {"slope_lo": 0.8, "slope_hi": 1.2}
    tol.update(options.get("tolerances", {}))
    num_nodes = options.get("quadrature_nodes")

    def one(n):
        system = build_system(pot, n)
        disc = project_kernel(system, interval, num_nodes=num_nodes)
        return float(disc.trace), float(variance_trace(disc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, sizes))
    else:
        results = [one(n) for n in sizes]
    rows = [(int(n), r[0], r[1]) for n, r in zip(sizes, results)]
    _write_rows(os.path.join(outdir, "variance.csv"), ("n", "mean", "variance"), rows)
    logs = np.log([r[0] for r in rows])
    variances = np.array([r[2] for r in rows])
    slope, intercept = np.polyfit(logs, variances, 1)
    residuals = variances - (slope * logs + intercept)
    slope_pi2 = float(slope * np.pi**2)
    summary = {
        "command": "variance-scan",
        "coeffs": list(map(float, pot.coeffs)),
        "interval": [float(interval[0]), float(interval[1])],
        "sizes": [int(n) for n in sizes],
        "variances": variances.tolist(),
        "slope": float(slope),
        "intercept": float(intercept),
        "fit_residuals": residuals.tolist(),
        "slope_times_pi_squared": slope_pi2,
        "tolerances": tol,
        "pass": bool(tol["slope_lo"] <= slope_pi2 <= tol["slope_hi"]),
    }
    return summary


def run_clt(
    pot, outdir, n, beta, xs, interval, method="auto", num_samples=2000, seed=0
):
    """Characteristic-functional comparison table: determinant, MC, limit.

    num_samples = 0 disables the Monte Carlo columns.
    """
    _require_interval_in_support(pot, interval)
    if beta in (1, 4) and n % 2:
        raise ConfigError(f"beta={beta} requires even n, got {n}")
    system = build_system(pot, n)
    xs = np.asarray(xs, dtype=float)
    if beta == 2:
        if method not in ("auto", "eigen"):
            raise ConfigError(f"method {method!r} is not available for beta=2")
        result = char_functional_beta2(system, interval, xs)
    else:
        matrices = build_operator_matrices(system)
        kernel = build_S1(system, matrices) if beta == 1 else build_S4(system, matrices)
        if method in ("auto", "block"):
            result = char_functional_block(kernel, interval, xs)
        elif method == "scalar":
            P = rank_one_P(kernel, interval)
            result = char_functional_scalar_reduced(kernel, P, interval, xs)
        else:
            raise ConfigError(f"unknown method {method!r}")

    emp = None
    ks = None
    if num_samples:
        if _is_standard_quadratic(pot):
            sample = tridiag_gaussian_sample(beta, n, num_samples, seed=seed)
        else:
            sample = mcmc_sample(pot, beta, n, num_samples, seed=seed)
        counts = count_in_interval(sample, interval)
        emp = empirical_char_functional(counts, xs, n)
        if counts.var() > 0:
            ks = normality_test(counts)

    limit_coeff = {1: 1.0, 2: 0.5, 4: 0.25}[beta]
    rows = []
    for i in range(xs.size):
        rows.append(
            (
                float(result.x[i]),
                float(result.x_n[i]),
                float(result.log_phi[i]),
                float(result.mean),
                float(emp.log_phi[i]) if emp else float("nan"),
                float(emp.std_error[i]) if emp else float("nan"),
                float(limit_coeff * xs[i] ** 2),
                result.method,
                int(n),
                int(beta),
                float(interval[0]),
                float(interval[1]),
            )
        )
    _write_rows(
        os.path.join(outdir, "clt.csv"),
        (
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
        ),
        rows,
    )
    ok = bool(np.all(np.isfinite(result.log_phi)))
    summary = {
        "command": "clt",
        "coeffs": list(map(float, pot.coeffs)),
        "n": int(n),
        "beta": int(beta),
        "interval": [float(interval[0]), float(interval[1])],
        "method": result.method,
        "x": xs.tolist(),
        "log_phi_det": [float(v) for v in result.log_phi],
        "mean_count": float(result.mean),
        "limit_values": [float(limit_coeff * x * x) for x in xs],
        "gaussian_limit_coefficient": limit_coeff,
        "tolerances": {"mc_sigma": 3.0},
    }
    if emp is not None:
        devs = np.abs(emp.log_phi - result.log_phi) / emp.std_error
        summary["log_phi_mc"] = [float(v) for v in emp.log_phi]
        summary["se_mc"] = [float(v) for v in emp.std_error]
        summary["mc_num_samples"] = int(num_samples)
        summary["mc_seed"] = int(seed)
        summary["mc_worst_sigma"] = float(np.max(devs))
        summary["mc_within_3se"] = bool(np.max(devs) <= 3.0)
        ok = ok and summary["mc_within_3se"]
        if ks is not None:
            summary["ks_stat"] = ks.ks_stat
            summary["ks_p_value"] = ks.p_value
    summary["pass"] = ok
    return summary


def run_verify_identities(pot, outdir, n, interval, dump_matrices=False):
    if n > 64:
        raise ConfigError("verify-identities works with dense blocks; use n <= 64")
    system = build_system(pot, n)
    matrices = build_operator_matrices(system)
    _write_rows(
        os.path.join(outdir, "recurrence.csv"),
        ("l", "a_l", "b_l"),
        [
            (int(l), float(system.a[l]), float(system.b[l]))
            for l in range(system.lmax + 1)
        ],
    )
    checks = {
        "orthonormality_residual": system.ortho_residual,
        "pairing_antisymmetry_residual": matrices.antisym_residual,
    }
    for beta, build in ((1, build_S1), (4, build_S4)):
        kernel = build(system, matrices)
        res = identity_residuals(kernel)
        for name, value in res.items():
            checks[f"beta{beta}_{name}"] = value
        trace = kernel.one_point_trace()
        checks[f"beta{beta}_trace_error"] = abs(trace - n) / n
        wid = widom_decompose(kernel)
        checks[f"beta{beta}_finite_rank_residual"] = wid.rel_residual
        # kernel dump on a short interval grid
        t = np.linspace(interval[0], interval[1], 24)
        _write_kernel_dump(
            os.path.join(outdir, f"kernel_S_beta{beta}.csv"), t, kernel.S(t, t)
        )
        if dump_matrices:
            _write_matrix(os.path.join(outdir, f"F_beta{beta}.csv"), wid.F)
    t2 = np.linspace(interval[0], interval[1], 24)
    _write_kernel_dump(
        os.path.join(outdir, "kernel_beta2.csv"), t2, kernel_cd(system, t2, t2)
    )
    if dump_matrices:
        _write_matrix(os.path.join(outdir, "D.csv"), matrices.D)
        _write_matrix(os.path.join(outdir, "M.csv"), matrices.M)
        m = pot.half_degree
        _write_matrix(os.path.join(outdir, "Tn.csv"), matrices.corner_of(m))
    tolerances = {
        "orthonormality_residual": 1e-8,
        "pairing_antisymmetry_residual": 1e-8,
        "identity": 1e-8,
        "trace": 1e-8,
        "finite_rank": 1e-6,
    }
    ok = checks["orthonormality_residual"] < tolerances["orthonormality_residual"]
    ok &= (
        checks["pairing_antisymmetry_residual"]
        < tolerances["pairing_antisymmetry_residual"]
    )
    for key, value in checks.items():
        if "eps" in key or "minus" in key:
            ok &= value < tolerances["identity"]
        if key.endswith("trace_error"):
            ok &= value < tolerances["trace"]
        if key.endswith("finite_rank_residual"):
            ok &= value < tolerances["finite_rank"]
    summary = {
        "command": "verify-identities",
        "coeffs": list(map(float, pot.coeffs)),
        "n": int(n),
        "checks": {k: float(v) for k, v in checks.items()},
        "tolerances": tolerances,
        "pass": bool(ok),
    }
    return summary


def _is_standard_quadratic(pot):
    c = np.asarray(pot.coeffs, dtype=float)
    return c.size == 3 and c[2] == 0.5 and c[1] == 0.0


def run_sample(pot, outdir, beta, n, num_samples, seed, interval, sampler="auto"):
    if sampler == "auto":
        sampler = "tridiagonal" if _is_standard_quadratic(pot) else "mcmc"
    if sampler == "tridiagonal":
        if not _is_standard_quadratic(pot):
            raise ConfigError(
                "the tridiagonal sampler is exact only for coeffs [c0, 0, 0.5]"
            )
        sample = tridiag_gaussian_sample(beta, n, num_samples, seed=seed)
    elif sampler == "mcmc":
        sample = mcmc_sample(pot, beta, n, num_samples, seed=seed)
    else:
        raise ConfigError(f"unknown sampler {sampler!r}")
    counts = count_in_interval(sample, interval)
    _write_rows(
        os.path.join(outdir, "counts.csv"),
        ("index", "count"),
        [(int(i), int(c)) for i, c in enumerate(counts)],
    )
    tau = integrated_autocorrelation(counts)
    ess = counts.size / (1.0 + 2.0 * tau)
    summary = {
        "command": "sample",
        "coeffs": list(map(float, pot.coeffs)),
        "beta": int(beta),
        "n": int(n),
        "num_samples": int(num_samples),
        "seed": int(seed),
        "sampler": sample.method,
        "interval": [float(interval[0]), float(interval[1])],
        "acceptance_rate": float(sample.acceptance_rate),
        "count_mean": float(counts.mean()),
        "count_variance": float(counts.var(ddof=1)),
        "tau": float(tau),
        "ess": float(ess),
        "pass": bool(sample.healthy and ess >= 100.0),
    }
    if counts.size >= 20 and counts.var() > 0:
        rep = normality_test(counts)
        summary["ks_stat"] = rep.ks_stat
        summary["ks_p_value"] = rep.p_value
    return summary


def run_report_merge(inputs, outpath):
    reports = []
    for path in inputs:
        try:
            with open(path) as fh:
                reports.append(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {path}: {exc}") from exc
    merged = {
        "command": "report-merge",
        "num_reports": len(reports),
        "commands": [r.get("command", "?") for r in reports],
        "reports": reports,
        "pass": bool(reports) and all(bool(r.get("pass")) for r in reports),
    }
    with open(outpath, "w", newline="\n") as fh:
        json.dump(merged, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return merged


# -- argument parsing ---------------------------------------------------------


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config with a 'coeffs' list")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=lambda s: int(s, 0), default=0)
    common.add_argument("--threads", type=int, default=None)

    parser = argparse.ArgumentParser(
        prog="betacount",
        description="counting statistics for beta = 1, 2, 4 eigenvalue ensembles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium", parents=[common])
    p.add_argument("--points", type=int, default=401)

    p = sub.add_parser("variance-scan", parents=[common])
    p.add_argument("--sizes", type=_parse_int_list, default=[50, 100, 200, 400])
    p.add_argument("--interval", type=_parse_interval, default=(-1.0, 1.0))

    p = sub.add_parser("clt", parents=[common])
    p.add_argument("--size", type=int, default=100)
    p.add_argument("--beta", type=int, choices=(1, 2, 4), default=2)
    p.add_argument("--xs", type=_parse_float_list, default=[-1.0, -0.5, 0.5, 1.0])
    p.add_argument("--interval", type=_parse_interval, default=(-1.0, 1.0))
    p.add_argument(
        "--method", choices=("auto", "eigen", "block", "scalar"), default="auto"
    )
    p.add_argument(
        "--num-samples",
        type=int,
        default=2000,
        help="Monte Carlo cross-check sample count (0 disables)",
    )

    p = sub.add_parser("verify-identities", parents=[common])
    p.add_argument("--size", type=int, default=12)
    p.add_argument("--interval", type=_parse_interval, default=(-1.0, 1.0))
    p.add_argument("--dump-matrices", action="store_true")

    p = sub.add_parser("sample", parents=[common])
    p.add_argument("--size", type=int, default=100)
    p.add_argument("--beta", type=int, choices=(1, 2, 4), default=2)
    p.add_argument("--num-samples", type=int, default=1000)
    p.add_argument("--interval", type=_parse_interval, default=(-1.0, 1.0))
    p.add_argument(
        "--sampler", choices=("auto", "tridiagonal", "mcmc"), default="auto"
    )

    p = sub.add_parser("report-merge")
    p.add_argument("--out", required=True, help="merged report file")
    p.add_argument("inputs", nargs="+", help="summary JSON files to merge")

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report-merge":
            merged = run_report_merge(args.inputs, args.out)
            return 0 if merged["pass"] else 1

        workers = configure_threads(args.threads)
        pot, options = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        if args.command == "equilibrium":
            summary = run_equilibrium(pot, args.out, points=args.points)
        elif args.command == "variance-scan":
            summary = run_variance_scan(
                pot,
                args.out,
                args.sizes,
                args.interval,
                workers=max(workers, 1),
                options=options,
            )
        elif args.command == "clt":
            summary = run_clt(
                pot,
                args.out,
                args.size,
                args.beta,
                args.xs,
                args.interval,
                method=args.method,
                num_samples=args.num_samples,
                seed=args.seed,
            )
        elif args.command == "verify-identities":
            summary = run_verify_identities(
                pot,
                args.out,
                args.size,
                args.interval,
                dump_matrices=args.dump_matrices,
            )
        elif args.command == "sample":
            summary = run_sample(
                pot,
                args.out,
                args.beta,
                args.size,
                args.num_samples,
                args.seed,
                args.interval,
                sampler=args.sampler,
            )
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError, RuntimeError) as exc:
        # configuration problems and numerical failures (multi-cut support,
        # coarse quadrature, branch-tracking breakdown) all report cleanly
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write_summary(args.out, summary)
    return 0 if summary["pass"] else 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
