"""Synthetic instances, evaluation metrics, experiment grids, and timing.

Instance recipe: a core with i.i.d. standard normal entries is rescaled so
the smallest of its matricization r_k-th singular values equals the signal
strength lambda; sparse loadings embed a Haar-random s_k x r_k frame at a
uniformly random row subset; noise is entrywise Gaussian or uniform on
[-sigma*sqrt(3), sigma*sqrt(3)] (both have standard deviation sigma).

Randomness discipline: every instance derives from a SeedSequence with
entropy (base_seed, cell_index, replication); the per-instance sequence is
split into four role streams (core=0, frames=1, supports=2, noise=3), and the
frames/supports streams are consumed in mode order. Any cell of a grid is
therefore reproducible in isolation.
"""

import csv
import json
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import baselines
from .estimator import StatSvdConfig, denoise, fit
from .hyperparam import estimate_sigma_median
from .tensor import matricize, multi_mode_product, qr_orthonormalize, sin_theta_fro
from .tnsio import atomic_write

__all__ = [
    "SimParams",
    "SimInstance",
    "ReportRow",
    "ExperimentReport",
    "METHODS",
    "gen_core",
    "gen_sparse_frame",
    "gen_instance",
    "gen_weak_row_instance",
    "score",
    "run_grid",
    "run_method",
    "benchmark_runtimes",
]

ROLE_CORE, ROLE_FRAMES, ROLE_SUPPORTS, ROLE_NOISE = 0, 1, 2, 3

REPORT_COLUMNS = [
    "method",
    "p",
    "r",
    "s",
    "lambda",
    "sigma",
    "noise",
    "seed",
    "l2_subspace",
    "l_recovery",
    "wall_time_s",
    "flags",
]


@dataclass(frozen=True)
class SimParams:
    """One grid cell: dimensions, ranks, sparsities, signal and noise levels."""

    p: tuple
    r: tuple
    s: tuple
    lam: float
    sigma: float
    noise: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(int(v) for v in self.p))
        object.__setattr__(self, "r", tuple(int(v) for v in self.r))
        object.__setattr__(self, "s", tuple(int(v) for v in self.s))
        if not len(self.p) == len(self.r) == len(self.s):
            raise ValueError("p, r, s must have one entry per mode")
        for p_k, r_k, s_k in zip(self.p, self.r, self.s):
            if not 1 <= r_k <= s_k <= p_k:
                raise ValueError(f"need 1 <= r <= s <= p per mode, got ({p_k}, {r_k}, {s_k})")
        if self.noise not in ("gaussian", "uniform"):
            raise ValueError(f"unknown noise family {self.noise!r}")

    @property
    def sparse_modes(self):
        """Modes with a real sparsity constraint (s_k < p_k)."""
        return frozenset(k for k in range(1, len(self.p) + 1) if self.s[k - 1] < self.p[k - 1])


@dataclass
class SimInstance:
    """Ground truth (core, loadings, supports, signal tensor) plus the
    observation and per-mode signal strengths."""

    params: SimParams
    core: np.ndarray
    loadings: list
    supports: list
    x: np.ndarray
    y: np.ndarray
    lambdas: tuple
    seed_entropy: tuple


def _role_rngs(seed_entropy):
    root = np.random.SeedSequence(tuple(int(v) for v in seed_entropy))
    children = root.spawn(4)
    return [np.random.default_rng(c) for c in children]


def gen_core(r, lam, rng):
    """Gaussian core rescaled so min_k sigma_{r_k}(matricization_k) == lam."""
    core = rng.standard_normal(tuple(r))
    smallest = min(
        np.linalg.svd(matricize(core, k), compute_uv=False)[r[k - 1] - 1]
        for k in range(1, len(r) + 1)
    )
    if smallest <= 0:
        raise ValueError("degenerate random core (rank-deficient draw)")
    return core * (lam / smallest)


def gen_sparse_frame(p, r, s, frame_rng, support_rng):
    """Frame with exactly ``s`` nonzero rows: a Haar s x r block embedded at a
    uniform random s-subset of the p rows (in sorted position order).

    Returns (frame, support).
    """
    if not 1 <= r <= s <= p:
        raise ValueError(f"need 1 <= r <= s <= p, got ({p}, {r}, {s})")
    block = qr_orthonormalize(frame_rng.standard_normal((s, r)))
    support = np.sort(support_rng.choice(p, size=s, replace=False))
    frame = np.zeros((p, r))
    frame[support] = block
    return frame, support


def gen_instance(params, seed):
    """Draw one instance; ``seed`` is an int or an entropy tuple."""
    entropy = (seed,) if np.isscalar(seed) else tuple(seed)
    rng_core, rng_frames, rng_supports, rng_noise = _role_rngs(entropy)
    core = gen_core(params.r, params.lam, rng_core)
    loadings, supports = [], []
    for k in range(1, len(params.p) + 1):
        frame, support = gen_sparse_frame(
            params.p[k - 1], params.r[k - 1], params.s[k - 1], rng_frames, rng_supports
        )
        loadings.append(frame)
        supports.append(support)
    x = multi_mode_product(core, loadings)
    z = _draw_noise(params, x.shape, rng_noise)
    # Orthonormal factors leave the core's matricization spectra unchanged,
    # so the per-mode signal strengths can be read off the core.
    lambdas = tuple(
        float(np.linalg.svd(matricize(core, k), compute_uv=False)[params.r[k - 1] - 1])
        for k in range(1, len(params.p) + 1)
    )
    return SimInstance(
        params=params,
        core=core,
        loadings=loadings,
        supports=supports,
        x=x,
        y=x + z,
        lambdas=lambdas,
        seed_entropy=entropy,
    )


def _draw_noise(params, shape, rng):
    if params.sigma == 0:
        return np.zeros(shape)
    if params.noise == "gaussian":
        return rng.standard_normal(shape) * params.sigma
    half = params.sigma * math.sqrt(3.0)
    return rng.uniform(-half, half, size=shape)


def gen_weak_row_instance(p, r, s1, lam, sigma, seed):
    """Instance with a block of barely-detectable rows on mode 1.

    The mode-1 loading holds r_1 - 1 standard basis columns plus one column
    spreading mass tau over rows r_1+1 .. s_1, with tau sized so each weak
    row of the signal matricization carries energy about
    sqrt(r_{-1} * log p) / 3 -- below a wide-level row test but visible to the
    lower select-level one. Other modes carry identity-embedded loadings.
    Sparse on mode 1 only.
    """
    p = tuple(int(v) for v in p)
    r = tuple(int(v) for v in r)
    d = len(p)
    r1 = r[0]
    if not r1 + 1 <= s1 <= p[0]:
        raise ValueError(f"need r_1 < s_1 <= p_1, got r_1={r1}, s_1={s1}, p_1={p[0]}")
    entropy = (seed,) if np.isscalar(seed) else tuple(seed)
    rng_core, _, _, rng_noise = _role_rngs(entropy)
    core = gen_core(r, lam, rng_core)
    r_rest = int(np.prod(r)) // r1
    log_p = math.log(float(np.prod(p)))
    spec_norm = np.linalg.svd(matricize(core, 1), compute_uv=False)[0]
    tau_sq = math.sqrt(r_rest * log_p) / (3.0 * spec_norm * spec_norm)
    if (s1 - r1) * tau_sq >= 1.0:
        raise ValueError("weak block too heavy; raise lam or shrink s1")
    u1 = np.zeros((p[0], r1))
    u1[: r1 - 1, : r1 - 1] = np.eye(r1 - 1)
    u1[r1 - 1, r1 - 1] = math.sqrt(1.0 - (s1 - r1) * tau_sq)
    u1[r1 : s1, r1 - 1] = math.sqrt(tau_sq)
    loadings = [u1]
    supports = [np.arange(s1)]
    for k in range(2, d + 1):
        frame = np.zeros((p[k - 1], r[k - 1]))
        frame[: r[k - 1], :] = np.eye(r[k - 1])
        loadings.append(frame)
        supports.append(np.arange(r[k - 1]))
    x = multi_mode_product(core, loadings)
    params = SimParams(p=p, r=r, s=(s1,) + tuple(r[1:]), lam=lam, sigma=sigma, noise="gaussian")
    z = _draw_noise(params, x.shape, rng_noise)
    lambdas = tuple(
        float(np.linalg.svd(matricize(x, k), compute_uv=False)[r[k - 1] - 1])
        for k in range(1, d + 1)
    )
    return SimInstance(
        params=params,
        core=core,
        loadings=loadings,
        supports=supports,
        x=x,
        y=x + z,
        lambdas=lambdas,
        seed_entropy=entropy,
    )


def score(loadings, x_hat, instance):
    """(mean per-mode Frobenius sin-theta to the truth, |x_hat - x|_F)."""
    d = len(instance.loadings)
    l2 = sum(sin_theta_fro(loadings[k], instance.loadings[k]) for k in range(d)) / d
    return float(l2), float(np.linalg.norm(x_hat - instance.x))


METHODS = ("stat_svd", "hosvd", "hooi", "s_hosvd", "s_hooi", "stat_svd_single")


def run_method(method, instance, sigma_fit, t_max=None, eps_tol=None):
    """Fit one method to one instance; returns (loadings, x_hat, flags)."""
    y = instance.y
    params = instance.params
    ranks = params.r
    sparse = params.sparse_modes
    if method in ("stat_svd", "stat_svd_single"):
        cfg = StatSvdConfig(
            ranks=ranks, sigma=sigma_fit, sparse_modes=sparse, t_max=t_max, eps_tol=eps_tol
        )
        result = fit(y, cfg) if method == "stat_svd" else baselines.stat_svd_single_threshold(y, cfg)
        return result.loadings, result.denoised, list(result.flags)
    if method == "hosvd":
        result = baselines.hosvd(y, ranks)
    elif method == "hooi":
        result = baselines.hooi(y, ranks, t_max=t_max or 50, eps_tol=1e-6 if eps_tol is None else eps_tol)
    elif method in ("s_hosvd", "s_hooi"):
        cfg = baselines.BaselineConfig(
            ranks=ranks,
            sparse_modes=sparse,
            sigma=sigma_fit,
            t_max=t_max or 50,
            eps_tol=1e-6 if eps_tol is None else eps_tol,
        )
        result = baselines.s_hosvd(y, cfg) if method == "s_hosvd" else baselines.s_hooi(y, cfg)
    else:
        raise ValueError(f"unknown method {method!r}")
    return result.loadings, denoise(y, result.loadings), list(result.flags)


@dataclass
class ReportRow:
    method: str
    p: tuple
    r: tuple
    s: tuple
    lam: float
    sigma: float
    noise: str
    seed: str
    l2_subspace: float
    l_recovery: float
    wall_time_s: float
    flags: str = ""


@dataclass
class ExperimentReport:
    """All rows of a grid run plus the inputs that produced them."""

    rows: list
    base_seed: int
    cells: list
    methods: tuple
    replications: int

    def summary(self):
        """Mean/sd of both metrics and of wall time per (cell, method)."""
        groups = {}
        for row in self.rows:
            key = (row.p, row.r, row.s, row.lam, row.sigma, row.noise, row.method)
            groups.setdefault(key, []).append(row)
        out = []
        for key, rows in sorted(groups.items(), key=lambda kv: (kv[0][:-1], kv[0][-1])):
            p, r, s, lam, sigma, noise, method = key
            ok = [row for row in rows if not row.flags.startswith("error:")]
            entry = {
                "p": list(p), "r": list(r), "s": list(s),
                "lambda": lam, "sigma": sigma, "noise": noise, "method": method,
                "replications": len(rows), "failures": len(rows) - len(ok),
            }
            for name in ("l2_subspace", "l_recovery", "wall_time_s"):
                vals = np.array([getattr(row, name) for row in ok], dtype=float)
                entry[f"{name}_mean"] = float(vals.mean()) if vals.size else float("nan")
                entry[f"{name}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            out.append(entry)
        return out

    def write_csv(self, path):
        def body(fh):
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for row in self.rows:
                writer.writerow(
                    [
                        row.method,
                        "x".join(str(v) for v in row.p),
                        "x".join(str(v) for v in row.r),
                        "x".join(str(v) for v in row.s),
                        repr(float(row.lam)),
                        repr(float(row.sigma)),
                        row.noise,
                        row.seed,
                        repr(float(row.l2_subspace)),
                        repr(float(row.l_recovery)),
                        repr(float(row.wall_time_s)),
                        row.flags,
                    ]
                )

        atomic_write(path, body, mode="w")

    def write_summary_json(self, path):
        payload = {
            "base_seed": self.base_seed,
            "methods": list(self.methods),
            "replications": self.replications,
            "cells": [asdict(c) for c in self.cells],
            "summary": self.summary(),
        }

        def body(fh):
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

        atomic_write(path, body, mode="w")


def run_grid(cells, methods, replications, base_seed, sigma_mode="median", t_max=None, eps_tol=None):
    """Run every method on every cell x replication with shared instances.

    ``sigma_mode`` picks the noise level handed to sigma-dependent methods:
    "median" (estimate per instance), "true" (the cell's sigma), or a number.
    Method failures are recorded in the row's flags, not raised.
    """
    cells = list(cells)
    methods = tuple(methods)
    rows = []
    for cell_index, cell in enumerate(cells):
        for rep in range(replications):
            entropy = (base_seed, cell_index, rep)
            instance = gen_instance(cell, entropy)
            sigma_fit = _pick_sigma(sigma_mode, instance)
            seed_label = ":".join(str(v) for v in entropy)
            for method in methods:
                rows.append(
                    _score_one(method, instance, sigma_fit, seed_label, t_max, eps_tol)
                )
    return ExperimentReport(
        rows=rows, base_seed=base_seed, cells=cells, methods=methods, replications=replications
    )


def _pick_sigma(sigma_mode, instance):
    if sigma_mode == "median":
        est = estimate_sigma_median(instance.y)
        return est if est > 0 else max(instance.params.sigma, 1e-12)
    if sigma_mode == "true":
        return max(instance.params.sigma, 1e-12)
    return float(sigma_mode)


def _score_one(method, instance, sigma_fit, seed_label, t_max, eps_tol):
    params = instance.params
    start = time.perf_counter()
    try:
        loadings, x_hat, flags = run_method(method, instance, sigma_fit, t_max, eps_tol)
        elapsed = time.perf_counter() - start
        l2, rec = score(loadings, x_hat, instance)
        flag_text = "; ".join(flags)
    except Exception as exc:  # recorded per cell, run continues
        elapsed = time.perf_counter() - start
        l2, rec = float("nan"), float("nan")
        flag_text = f"error: {exc}"
    return ReportRow(
        method=method,
        p=params.p,
        r=params.r,
        s=params.s,
        lam=params.lam,
        sigma=params.sigma,
        noise=params.noise,
        seed=seed_label,
        l2_subspace=l2,
        l_recovery=rec,
        wall_time_s=elapsed,
        flags=flag_text,
    )


def benchmark_runtimes(cell, methods, runs=5, base_seed=0, sigma_mode="median"):
    """Median wall time per method over ``runs`` fresh instances, after one
    untimed warm-up fit per method. Single-threaded timing responsibility is
    the caller's (set BLAS thread env vars before importing numpy)."""
    methods = tuple(methods)
    warm = gen_instance(cell, (base_seed, 0, 10**6))
    sigma_warm = _pick_sigma(sigma_mode, warm)
    for method in methods:
        run_method(method, warm, sigma_warm)
    times = {m: [] for m in methods}
    for rep in range(runs):
        instance = gen_instance(cell, (base_seed, 0, rep))
        sigma_fit = _pick_sigma(sigma_mode, instance)
        for method in methods:
            start = time.perf_counter()
            run_method(method, instance, sigma_fit)
            times[method].append(time.perf_counter() - start)
    return {m: float(np.median(v)) for m, v in times.items()}
