"""Command-line front end.

Subcommands: ``simulate`` (LRD path generation), ``coeffs`` (Hermite
coefficient tables), ``limit`` (limit-law critical values), ``detect``
(change-point test on a data file) and ``verify`` (Monte Carlo checks of
the asymptotics).  Exit codes: 0 success, 1 internal/numeric failure,
2 user/config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import hermite, limit_law, lrd_sim, ustat, verify
from .errors import ParameterError

CACHE_ENV = "LRDUSTAT_CACHE"


def _cache_dir() -> Path:
    root = os.environ.get(CACHE_ENV)
    if root:
        return Path(root)
    return Path.home() / ".cache" / "lrdustat"


def _write_sidecar(out_path: Path, config: dict) -> None:
    sidecar = out_path.with_suffix(out_path.suffix + ".json")
    with open(sidecar, "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)


def _parse_levels(text: str):
    return [float(x) for x in text.split(",") if x]


def _load_data(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(16)
    if magic == lrd_sim.PATH_MAGIC:
        return lrd_sim.read_path_binary(path)
    return lrd_sim.read_path_csv(path)


def _resolve_kernel(name: str) -> ustat.Kernel:
    return ustat.builtin_kernel(name)


def _kernel_diagonal(kernel: ustat.Kernel, m: int = 1) -> tuple:
    if kernel.coeff_provider is not None:
        table = hermite.closed_form_table(kernel.coeff_provider, max(m, 2))
    else:
        table = hermite.coeffs_2d(kernel, max(m, 2))
    if table.rank is None:
        raise ParameterError(f"cannot detect rank of kernel {kernel.name!r}")
    return table.diagonal(table.rank), table.rank, table.a00


def limit_table(kernel: ustat.Kernel, family: str, d_exp: float,
                reps: int, grid_size: int, seed: int, levels,
                use_cache: bool = True):
    """Critical-value table for the kernel's rank-diagonal limit functional,
    cached on disk keyed by (kernel, family, D, m, reps, grid)."""
    entries, m, _ = _kernel_diagonal(kernel)
    key_src = json.dumps({
        "kernel": kernel.name, "family": family, "D": d_exp, "m": m,
        "reps": reps, "grid_size": grid_size, "seed": seed,
        "levels": sorted(levels),
    }, sort_keys=True)
    key = hashlib.sha256(key_src.encode()).hexdigest()[:24]
    cache_file = _cache_dir() / f"cv_{key}.json"
    if use_cache and cache_file.exists():
        with open(cache_file) as fh:
            return limit_law.CriticalValueTable.from_json_dict(json.load(fh))
    ensemble = limit_law.limit_thm1(
        entries, d_exp, grid=limit_law.default_grid(grid_size),
        reps=reps, seed=seed)
    table = limit_law.critical_values(ensemble, sorted(levels))
    if use_cache:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        table.dump(cache_file)
    return table


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    params = lrd_sim.LrdParams(D=args.D, family=args.family)
    path = lrd_sim.simulate_gaussian(params, args.n, args.seed)
    values = path.values
    if args.transform == "exp":
        from scipy.stats import expon

        values = lrd_sim.subordinate(path, lrd_sim.Subordinator.from_distribution(expon()))
    out = Path(args.out)
    if args.binary:
        lrd_sim.write_path_binary(values, out)
    else:
        lrd_sim.write_path_csv(values, out)
    _write_sidecar(out, {"subcommand": "simulate", "family": args.family,
                         "D": args.D, "n": args.n, "seed": args.seed,
                         "transform": args.transform, "binary": args.binary,
                         "out": str(out)})
    return 0


def cmd_coeffs(args) -> int:
    kernel = _resolve_kernel(args.kernel)
    if kernel.coeff_provider is not None and args.source == "auto":
        table = hermite.closed_form_table(kernel.coeff_provider, args.Q)
    elif args.source == "montecarlo":
        table, _ = hermite.coeffs_2d_montecarlo(kernel, args.Q,
                                                pairs=args.pairs,
                                                seed=args.seed)
    else:
        table = hermite.coeffs_2d(kernel, args.Q, quad_order=args.quad_order)
    payload = table.to_json_dict()
    payload["kernel"] = kernel.name
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        _write_sidecar(Path(args.out), {"subcommand": "coeffs",
                                        "kernel": args.kernel, "Q": args.Q,
                                        "source": args.source,
                                        "quad_order": args.quad_order,
                                        "seed": args.seed})
    else:
        print(text)
    return 0


def cmd_limit(args) -> int:
    kernel = _resolve_kernel(args.kernel)
    levels = _parse_levels(args.levels)
    table = limit_table(kernel, args.family, args.D, args.reps,
                        args.grid_size, args.seed, levels,
                        use_cache=not args.no_cache)
    text = json.dumps(table.to_json_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        _write_sidecar(Path(args.out), {"subcommand": "limit",
                                        "kernel": args.kernel, "D": args.D,
                                        "family": args.family,
                                        "reps": args.reps,
                                        "grid_size": args.grid_size,
                                        "levels": levels, "seed": args.seed})
    else:
        print(text)
    return 0


def cmd_detect(args) -> int:
    if args.D is None:
        raise ParameterError(
            "D must be supplied with --D: the detector normalizes with the "
            "LRD exponent and estimating D from data is out of scope")
    data = _load_data(args.input)
    if data.size < 2:
        raise ParameterError("need at least 2 observations (no admissible split)")
    kernel = _resolve_kernel(args.kernel)
    levels = _parse_levels(args.levels)
    entries, m, a00 = _kernel_diagonal(kernel)
    n = data.size
    sc = hermite.scaling(args.D, m, n,
                         lrd_sim.asymptotic_L(
                             lrd_sim.LrdParams(D=args.D, family=args.family), n))
    path = ustat.ustat_fast(data, kernel)
    norm_path = ustat.normalize(path, sc, ustat.NORM_THM2, center=a00) \
        if args.thm2 else _thm1_centered(path, sc, a00)
    stat, k_star = ustat.changepoint_statistic(norm_path)
    table = limit_table(kernel, args.family, args.D, args.reps,
                        args.grid_size, args.seed, levels,
                        use_cache=not args.no_cache)
    decisions = {repr(lv): {"critical_value": table.value_at(lv),
                            "reject": stat > table.value_at(lv)}
                 for lv in levels}
    report = {"subcommand": "detect", "input": args.input,
              "kernel": kernel.name, "D": args.D, "family": args.family,
              "n": int(n), "statistic": stat, "k_star": k_star,
              "k_star_fraction": k_star / n, "levels": decisions,
              "table_reps": table.reps, "seed": args.seed}
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _thm1_centered(path: ustat.UStatPath, sc, a00: float) -> ustat.UStatPath:
    """Rank-diagonal normalization of a centered kernel: subtract the
    per-pair mean a00 and divide by d'_n n."""
    from dataclasses import replace

    k = np.arange(1, path.n, dtype=float)
    values = (path.raw - k * (path.n - k) * a00) / (sc.d_n_prime * path.n)
    return replace(path, normalization=ustat.NORM_THM1, centering=a00,
                   normalized=values)


def cmd_verify(args) -> int:
    params = lrd_sim.LrdParams(D=args.D, family=args.family)
    if args.experiment == "variance":
        report = verify.check_variance(args.k, params, args.n_list,
                                       reps=args.reps, seed=args.seed)
    elif args.experiment == "reduction":
        kernel = _resolve_kernel(args.kernel)
        report = verify.check_reduction(kernel, params, args.n_list,
                                        reps=args.reps, seed=args.seed)
    else:  # weak
        kernel = _resolve_kernel(args.kernel)
        entries, m, a00 = _kernel_diagonal(kernel)
        ensemble = limit_law.limit_thm1(
            entries, args.D, grid=limit_law.default_grid(args.grid_size),
            reps=args.limit_reps, seed=args.seed + 1)
        report = verify.check_weak_convergence(kernel, params,
                                               args.n_list[0], args.reps,
                                               ensemble, seed=args.seed,
                                               m=m, center=a00)
    print(report.summary_text())
    if args.out:
        report.dump(args.out)
        _write_sidecar(Path(args.out), {"subcommand": "verify",
                                        "experiment": args.experiment,
                                        "D": args.D, "family": args.family,
                                        "reps": args.reps, "seed": args.seed})
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrdustat",
        description="Two-sample U-statistic processes for LRD time series")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--reps", type=int, default=limit_law.DEFAULT_REPS)
        p.add_argument("--threads", type=int, default=0,
                       help="cap worker parallelism (0 = library default)")
        p.add_argument("--levels", default="0.9,0.95,0.99")

    p = sub.add_parser("simulate", help="simulate an LRD Gaussian path")
    common(p)
    p.add_argument("--family", choices=[lrd_sim.FGN, lrd_sim.TWEAKED_POWER_LAW],
                   default=lrd_sim.FGN)
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--transform", choices=["identity", "exp"],
                   default="identity")
    p.add_argument("--binary", action="store_true")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coeffs", help="Hermite coefficient table of a kernel")
    common(p)
    p.add_argument("--kernel", required=True)
    p.add_argument("--Q", type=int, default=4)
    p.add_argument("--quad-order", type=int, default=hermite.DEFAULT_QUAD_ORDER)
    p.add_argument("--source", choices=["auto", "quadrature", "montecarlo"],
                   default="auto")
    p.add_argument("--pairs", type=int, default=10 ** 6)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("limit", help="simulate limit law, tabulate quantiles")
    common(p)
    p.add_argument("--kernel", required=True)
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--family", default=lrd_sim.FGN)
    p.add_argument("--grid-size", type=int, default=limit_law.DEFAULT_GRID_SIZE)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("detect", help="change-point test on a data file")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--kernel", default="wilcoxon")
    p.add_argument("--D", type=float, default=None)
    p.add_argument("--family", default=lrd_sim.FGN)
    p.add_argument("--grid-size", type=int, default=limit_law.DEFAULT_GRID_SIZE)
    p.add_argument("--thm2", action="store_true",
                   help="normalize by n d_n instead of n d'_n")
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("verify", help="Monte Carlo checks of the asymptotics")
    common(p)
    p.add_argument("experiment", choices=["variance", "reduction", "weak"])
    p.add_argument("--k", type=int, default=1,
                   help="Hermite degree for the variance experiment")
    p.add_argument("--kernel", default="cusum")
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--family", default=lrd_sim.FGN)
    p.add_argument("--n", dest="n_list", type=int, action="append",
                   required=True, help="sample size; repeatable")
    p.add_argument("--limit-reps", type=int, default=limit_law.DEFAULT_REPS)
    p.add_argument("--grid-size", type=int, default=limit_law.DEFAULT_GRID_SIZE)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numeric/internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
