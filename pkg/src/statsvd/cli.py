"""Command-line interface.

Subcommands:

* ``simulate``        -- run a JSON-specified experiment grid, write CSV + summary
* ``fit``             -- fit a tensor file, with optional data-driven hyperparameters
* ``estimate-params`` -- noise level and rank estimation only
* ``pipeline``        -- secondary-difference preprocessing + fit + back-transform
* ``bench``           -- median wall times of selected methods on one setting

Exit codes: 0 success, 1 usage error, 2 unreadable/invalid data,
3 completed with numerical-degeneracy flags.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import pipeline as pl
from . import simbench
from .estimator import StatSvdConfig, fit as fit_tensor
from .hyperparam import (
    estimate_hyperparameters,
    estimate_ranks_cpv,
    estimate_ranks_spectral,
    estimate_sigma_median,
    estimate_sigma_trimmed,
)
from .tnsio import atomic_write, read_long_csv, read_tns, write_tns

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DEGENERATE = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; the documented contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_int_list(text, what):
    try:
        return tuple(int(v) for v in text.split(",") if v != "")
    except ValueError:
        raise ValueError(f"{what} must be a comma-separated integer list, got {text!r}")


def _load_tensor(path):
    if path.endswith(".csv"):
        tensor, _ = read_long_csv(path)
        return tensor
    return read_tns(path)


def _write_json(path, payload):
    def body(fh):
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    atomic_write(path, body, mode="w")


def scale_params(p, s, r, lam, factor):
    """Shrink a grid cell for quick runs: p and s scale directly (with small
    floors), ranks shrink gently, and lambda keeps lambda/sqrt(s*log p) fixed
    (s, p the products)."""
    if factor == 1.0:
        return tuple(p), tuple(s), tuple(r), lam
    p2 = tuple(max(4, round(v * factor)) for v in p)
    s2 = tuple(max(2, round(v * factor)) for v in s)
    r2 = tuple(min(rv, round(rv * factor) + 1) for rv in r)
    s2 = tuple(min(max(sv, rv), pv) for sv, rv, pv in zip(s2, r2, p2))
    old = math.sqrt(float(np.prod(s)) * math.log(float(np.prod(p))))
    new = math.sqrt(float(np.prod(s2)) * math.log(float(np.prod(p2))))
    return p2, s2, r2, lam * new / old


def _cmd_simulate(args):
    with open(args.config) as fh:
        spec = json.load(fh)
    cells = []
    for cell in spec["cells"]:
        p, s, r, lam = scale_params(
            cell["p"], cell["s"], cell["r"], float(cell["lambda"]), args.scale
        )
        cells.append(
            simbench.SimParams(
                p=p, r=r, s=s, lam=lam,
                sigma=float(cell.get("sigma", 1.0)),
                noise=cell.get("noise", "gaussian"),
            )
        )
    methods = spec.get("methods", list(simbench.METHODS))
    for m in methods:
        if m not in simbench.METHODS:
            raise ValueError(f"unknown method {m!r}; known: {', '.join(simbench.METHODS)}")
    base_seed = args.seed if args.seed is not None else int(spec.get("seed", 0))
    report = simbench.run_grid(
        cells,
        methods,
        replications=int(spec.get("replications", 1)),
        base_seed=base_seed,
        sigma_mode=spec.get("sigma_mode", "median"),
        t_max=spec.get("t_max"),
        eps_tol=spec.get("eps_tol"),
    )
    os.makedirs(args.out, exist_ok=True)
    report.write_csv(os.path.join(args.out, "report.csv"))
    report.write_summary_json(os.path.join(args.out, "summary.json"))
    print(f"wrote {len(report.rows)} rows to {os.path.join(args.out, 'report.csv')}")
    return EXIT_OK


def _resolve_hyperparams(y, args):
    """(ranks, sigma, notes) honoring the auto settings."""
    notes = {}
    if args.sigma == "auto":
        sigma = estimate_sigma_median(y)
        notes["sigma_estimator"] = "median"
        if sigma <= 0:
            raise ValueError("median noise estimate is 0; pass --sigma explicitly")
    else:
        sigma = float(args.sigma)
        if sigma <= 0:
            raise ValueError(f"--sigma must be positive, got {sigma}")
        notes["sigma_estimator"] = "explicit"
    sparse = frozenset(_parse_int_list(args.sparse_modes, "--sparse-modes")) if args.sparse_modes else frozenset()
    if args.ranks == "auto":
        ranks, _ = estimate_ranks_spectral(y, sigma, sparse)
        notes["rank_estimator"] = "spectral"
    else:
        ranks = _parse_int_list(args.ranks, "--ranks")
        notes["rank_estimator"] = "explicit"
    return ranks, sigma, sparse, notes


def _cmd_fit(args):
    y = _load_tensor(args.tensor)
    ranks, sigma, sparse, notes = _resolve_hyperparams(y, args)
    cfg = StatSvdConfig(
        ranks=ranks, sigma=sigma, sparse_modes=sparse, t_max=args.tmax, eps_tol=args.eps_tol
    )
    result = fit_tensor(y, cfg)
    os.makedirs(args.out, exist_ok=True)
    payload = result.to_json_dict()
    payload["hyperparameters"] = {
        "ranks": list(ranks),
        "sigma": sigma,
        "sparse_modes": sorted(sparse),
        **notes,
    }
    _write_json(os.path.join(args.out, "fit.json"), payload)
    if args.write_denoised:
        write_tns(os.path.join(args.out, "denoised.tns"), result.denoised)
    print(
        f"fit: ranks={list(ranks)} sigma={sigma:.6g} sweeps={result.iterations_run} "
        f"converged={result.converged} degenerate={result.degenerate}"
    )
    return EXIT_DEGENERATE if result.degenerate else EXIT_OK


def _cmd_estimate_params(args):
    y = _load_tensor(args.tensor)
    sparse = frozenset(_parse_int_list(args.sparse_modes, "--sparse-modes")) if args.sparse_modes else frozenset()
    est = estimate_hyperparameters(
        y,
        sparse,
        sigma_method=args.sigma_method,
        rank_method=args.rank_method,
        trim_fraction=args.trim,
        rho=args.rho,
    )
    payload = {
        "sigma_hat": est.sigma_hat,
        "ranks_hat": list(est.ranks_hat),
        "sigma_method": est.sigma_method,
        "rank_method": est.rank_method,
        "support_sizes": list(est.support_sizes),
        "flags": list(est.flags),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "estimates.json"), payload)
    print(text)
    return EXIT_DEGENERATE if est.flags else EXIT_OK


def _cmd_pipeline(args):
    y = _load_tensor(args.tensor)
    sparse = (
        frozenset(_parse_int_list(args.sparse_modes, "--sparse-modes"))
        if args.sparse_modes
        else frozenset({args.difference_mode})
    )
    spec = pl.PipelineSpec(
        difference_mode=args.difference_mode,
        rho=args.rho,
        trim_fraction=args.trim,
        sparse_modes=sparse,
        pre=args.pre,
        t_max=args.tmax,
        eps_tol=args.eps_tol,
    )
    result = pl.run_pipeline(y, spec)
    os.makedirs(args.out, exist_ok=True)
    report = {
        "sigma_hat": result.sigma_hat,
        "ranks_hat": list(result.ranks_hat),
        "difference_mode": result.difference_mode,
        "iterations_run": result.fit.iterations_run,
        "converged": result.fit.converged,
        "degenerate": result.fit.degenerate,
        "flags": list(result.fit.flags),
        "supports": {
            str(k): [int(i) for i in s.selected] for k, s in sorted(result.fit.supports.items())
        },
    }
    _write_json(os.path.join(args.out, "pipeline.json"), report)
    for k, u in enumerate(result.fit.loadings, start=1):
        if k == args.difference_mode:
            _write_vectors_csv(os.path.join(args.out, f"mode{k}_loading_back.csv"), result.back_loading)
            _write_vectors_csv(
                os.path.join(args.out, f"mode{k}_loading_back_orthonormal.csv"),
                result.back_loading_orthonormal,
            )
        _write_vectors_csv(os.path.join(args.out, f"mode{k}_loading.csv"), u)
    print(
        f"pipeline: sigma_hat={result.sigma_hat:.6g} ranks_hat={list(result.ranks_hat)} "
        f"degenerate={result.fit.degenerate}"
    )
    return EXIT_DEGENERATE if result.fit.degenerate else EXIT_OK


def _write_vectors_csv(path, mat):
    def body(fh):
        cols = mat.shape[1]
        fh.write("index," + ",".join(f"v{j + 1}" for j in range(cols)) + "\n")
        for i, row in enumerate(mat, start=1):
            fh.write(str(i) + "," + ",".join(repr(float(v)) for v in row) + "\n")

    atomic_write(path, body, mode="w")


def _cmd_bench(args):
    p, s, r, lam = scale_params(args.p, args.s, args.r, args.lam, args.scale)
    cell = simbench.SimParams(p=p, r=r, s=s, lam=lam, sigma=args.sigma_value)
    methods = tuple(args.methods.split(","))
    for m in methods:
        if m not in simbench.METHODS:
            raise ValueError(f"unknown method {m!r}; known: {', '.join(simbench.METHODS)}")
    medians = simbench.benchmark_runtimes(
        cell, methods, runs=args.runs, base_seed=args.seed if args.seed is not None else 0
    )
    if args.out:
        os.makedirs(args.out, exist_ok=True)

        def body(fh):
            fh.write("method,median_wall_time_s\n")
            for m in methods:
                fh.write(f"{m},{medians[m]!r}\n")

        atomic_write(os.path.join(args.out, "bench.csv"), body, mode="w")
    for m in methods:
        print(f"{m}: {medians[m]:.4f} s")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="statsvd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an experiment grid from a JSON spec")
    sim.add_argument("config", help="JSON grid spec")
    sim.add_argument("--scale", type=float, default=1.0, help="shrink factor for p, s, r, lambda")
    sim.add_argument("--seed", type=int, default=None, help="override the spec's base seed")
    sim.add_argument("--out", default=".", help="output directory")
    sim.set_defaults(func=_cmd_simulate)

    fit_p = sub.add_parser("fit", help="fit a .tns or long-format .csv tensor")
    fit_p.add_argument("tensor")
    fit_p.add_argument("--ranks", default="auto", help="comma-separated ranks or 'auto'")
    fit_p.add_argument("--sigma", default="auto", help="noise level or 'auto'")
    fit_p.add_argument("--sparse-modes", default="", help="e.g. '1,3'; empty for none")
    fit_p.add_argument("--tmax", type=int, default=None)
    fit_p.add_argument("--eps-tol", type=float, default=None)
    fit_p.add_argument("--out", default=".", help="output directory")
    fit_p.add_argument("--write-denoised", action="store_true", help="also write denoised.tns")
    fit_p.set_defaults(func=_cmd_fit)

    est = sub.add_parser("estimate-params", help="estimate noise level and ranks")
    est.add_argument("tensor")
    est.add_argument("--sigma-method", choices=("median", "trimmed"), default="median")
    est.add_argument("--rank-method", choices=("spectral", "cpv"), default="spectral")
    est.add_argument("--trim", type=float, default=0.15)
    est.add_argument("--rho", type=float, default=0.5)
    est.add_argument("--sparse-modes", default="")
    est.add_argument("--out", default=None, help="optional output directory")
    est.set_defaults(func=_cmd_estimate_params)

    pipe = sub.add_parser("pipeline", help="difference-transform preprocessing + fit")
    pipe.add_argument("tensor", help=".tns or long-format .csv")
    pipe.add_argument("--difference-mode", type=int, required=True)
    pipe.add_argument("--rho", type=float, default=0.5)
    pipe.add_argument("--trim", type=float, default=0.15)
    pipe.add_argument("--sparse-modes", default="", help="defaults to the differenced mode")
    pipe.add_argument("--pre", choices=("none", "log"), default="none")
    pipe.add_argument("--tmax", type=int, default=None)
    pipe.add_argument("--eps-tol", type=float, default=None)
    pipe.add_argument("--out", default=".", help="output directory")
    pipe.set_defaults(func=_cmd_pipeline)

    bench = sub.add_parser("bench", help="median wall times on one synthetic setting")
    bench.add_argument("--p", type=lambda v: _parse_int_list(v, "--p"), default=(50, 50, 50))
    bench.add_argument("--r", type=lambda v: _parse_int_list(v, "--r"), default=(5, 5, 5))
    bench.add_argument("--s", type=lambda v: _parse_int_list(v, "--s"), default=(10, 10, 10))
    bench.add_argument("--lambda", dest="lam", type=float, default=70.0)
    bench.add_argument("--sigma", dest="sigma_value", type=float, default=1.0)
    bench.add_argument("--runs", type=int, default=5)
    bench.add_argument("--methods", default="stat_svd,hosvd,hooi,s_hosvd,s_hooi")
    bench.add_argument("--scale", type=float, default=1.0)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--out", default=None)
    bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"statsvd: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
