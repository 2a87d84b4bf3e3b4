"""Reference decompositions the main estimator is benchmarked against.

* ``hosvd`` / ``hooi`` — classical per-mode truncated SVD and its alternating
  refinement.
* ``ssvd_rank_r`` — a sparse matrix SVD: thresholded power iteration that
  zeroes weak rows of the projected left factor each step. It stands in for
  dedicated sparse-SVD routines inside the sparse baselines.
* ``s_hosvd`` / ``s_hooi`` — HOSVD/HOOI with ``ssvd_rank_r`` substituted on
  the sparse modes.
* ``stat_svd_single_threshold`` — the main estimator with its sparse-mode
  update replaced by a single thresholding & projection step (one row test at
  the wide level, then a truncated SVD).

All methods are deterministic in their inputs.
"""

import math
from dataclasses import dataclass

import numpy as np

from .estimator import (
    StatSvdConfig,
    _check_input,
    _dense_update,
    _largest_rows,
    _project_except,
    _run_alternating,
    noise_energy_bound,
)
from .tensor import (
    complete_with_standard_basis,
    matricize,
    multi_mode_product,
    qr_orthonormalize,
    sin_theta_fro,
    svd_leading,
)

__all__ = [
    "BaselineConfig",
    "BaselineFit",
    "SsvdResult",
    "hosvd",
    "hooi",
    "ssvd_rank_r",
    "s_hosvd",
    "s_hooi",
    "stat_svd_single_threshold",
]

# Power-iteration guards for the sparse matrix SVD.
SSVD_MAX_ITER = 100
SSVD_TOL = 1e-9


@dataclass(frozen=True)
class BaselineConfig:
    """Inputs shared by the sparse baselines (mirrors StatSvdConfig)."""

    ranks: tuple
    sparse_modes: frozenset = frozenset()
    sigma: float = 1.0
    t_max: int = 50
    eps_tol: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        object.__setattr__(self, "sparse_modes", frozenset(int(k) for k in self.sparse_modes))

    def validate(self, shape):
        StatSvdConfig(
            ranks=self.ranks, sigma=self.sigma, sparse_modes=self.sparse_modes,
            t_max=self.t_max, eps_tol=self.eps_tol,
        ).validate(shape)


@dataclass
class BaselineFit:
    """Per-mode frames plus the projected core, with degeneracy flags."""

    loadings: list
    core: np.ndarray
    iterations_run: int = 0
    flags: tuple = ()


def _project_core(y, loadings):
    return multi_mode_product(y, loadings, transpose=True)


def hosvd(y, ranks):
    """Truncated SVD of each matricization independently."""
    y = _check_input(y)
    if len(ranks) != y.ndim:
        raise ValueError(f"expected {y.ndim} ranks, got {len(ranks)}")
    loadings = []
    for k in range(1, y.ndim + 1):
        if not 1 <= ranks[k - 1] <= y.shape[k - 1]:
            raise ValueError(f"rank r_{k}={ranks[k - 1]} out of range 1..{y.shape[k - 1]}")
        loadings.append(svd_leading(matricize(y, k), ranks[k - 1]).u)
    return BaselineFit(loadings=loadings, core=_project_core(y, loadings))


def hooi(y, ranks, t_max=50, eps_tol=1e-6):
    """Alternating projection + truncated SVD sweeps, initialized by HOSVD.

    Stops at ``t_max`` sweeps or when the relative change of the captured core
    energy falls below ``eps_tol`` (0 disables early stopping).
    """
    y = _check_input(y)
    start = hosvd(y, ranks)
    loadings = list(start.loadings)
    energy_prev = None
    sweeps = 0
    for t in range(t_max):
        energy = 0.0
        for k in range(1, y.ndim + 1):
            loadings[k - 1], energy = _dense_update(y, k, loadings, ranks[k - 1])
        sweeps = t + 1
        if energy_prev is not None and abs(energy - energy_prev) < eps_tol * max(energy, 1e-300):
            energy_prev = energy
            break
        energy_prev = energy
    return BaselineFit(loadings=loadings, core=_project_core(y, loadings), iterations_run=sweeps)


@dataclass(frozen=True)
class SsvdResult:
    """Sparse left singular frame with the rows it kept."""

    frame: np.ndarray
    support: np.ndarray
    iterations_run: int
    flags: tuple = ()


def ssvd_rank_r(m, r, sigma):
    """Rank-``r`` sparse left singular frame of ``m`` by thresholded power
    iteration.

    Starting from the leading right singular frame of ``m``, each step forms
    the projected left factor ``m @ V``, hard-thresholds its *entries* at the
    extreme-value level 2*sigma*sqrt(log(rows*cols)), re-orthonormalizes, and
    refreshes ``V`` by a power step; it stops when the left subspace is
    stationary or after 100 iterations. Clipping the factors entrywise (the
    style of sparse matrix SVD routines) finds the row support but biases the
    basis, which is exactly what makes this a baseline rather than a
    competitor. A threshold that clips everything falls back to the ``r``
    strongest rows and sets a flag.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if not 1 <= r <= min(m.shape):
        raise ValueError(f"rank {r} out of range for a {m.shape} matrix")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    level = 2.0 * sigma * math.sqrt(math.log(float(m.shape[0]) * float(m.shape[1])))
    flags = []
    v = svd_leading(m, r).v
    frame = None
    kept = None
    iterations = 0
    for it in range(SSVD_MAX_ITER):
        iterations = it + 1
        left = m @ v
        kept = np.where(np.abs(left) >= level, left, 0.0)
        if not kept.any():
            rows = _largest_rows(np.einsum("ij,ij->i", m, m), r)
            kept = np.zeros_like(left)
            kept[rows] = left[rows]
            if not flags:
                flags.append("threshold clipped every entry, fell back to the strongest rows")
        new_frame = qr_orthonormalize(kept)
        if frame is not None and sin_theta_fro(new_frame, frame) < SSVD_TOL:
            frame = new_frame
            break
        frame = new_frame
        v = qr_orthonormalize(m.T @ frame)
    else:
        flags.append(f"no convergence within {SSVD_MAX_ITER} iterations")
    support = np.flatnonzero(np.any(kept != 0.0, axis=1))
    return SsvdResult(frame=frame, support=support, iterations_run=iterations, flags=tuple(flags))


def s_hosvd(y, cfg):
    """HOSVD with the sparse matrix SVD on the modes listed in
    ``cfg.sparse_modes``; identical to :func:`hosvd` when that set is empty."""
    y = _check_input(y)
    cfg.validate(y.shape)
    loadings = []
    flags = []
    for k in range(1, y.ndim + 1):
        if k in cfg.sparse_modes:
            res = ssvd_rank_r(matricize(y, k), cfg.ranks[k - 1], cfg.sigma)
            loadings.append(res.frame)
            flags.extend(f"mode {k}: {f}" for f in res.flags)
        else:
            loadings.append(svd_leading(matricize(y, k), cfg.ranks[k - 1]).u)
    return BaselineFit(loadings=loadings, core=_project_core(y, loadings), flags=tuple(flags))


def s_hooi(y, cfg):
    """HOOI with the sparse matrix SVD on sparse modes, initialized by
    S-HOSVD; identical to :func:`hooi` when ``cfg.sparse_modes`` is empty."""
    y = _check_input(y)
    cfg.validate(y.shape)
    start = s_hosvd(y, cfg)
    loadings = list(start.loadings)
    flags = list(start.flags)
    energy_prev = None
    sweeps = 0
    for t in range(cfg.t_max):
        energy = 0.0
        for k in range(1, y.ndim + 1):
            if k in cfg.sparse_modes:
                panel = matricize(_project_except(y, loadings, k), k)
                r_eff = min(cfg.ranks[k - 1], panel.shape[1])
                res = ssvd_rank_r(panel, r_eff, cfg.sigma)
                frame = res.frame
                if frame.shape[1] < cfg.ranks[k - 1]:
                    frame = complete_with_standard_basis(frame, cfg.ranks[k - 1], frame.shape[0])
                loadings[k - 1] = frame
                flags.extend(f"sweep {t + 1} mode {k}: {f}" for f in res.flags)
                projected = panel.T @ frame
                energy = float(np.sum(projected * projected))
            else:
                loadings[k - 1], energy = _dense_update(y, k, loadings, cfg.ranks[k - 1])
        sweeps = t + 1
        if energy_prev is not None and abs(energy - energy_prev) < cfg.eps_tol * max(energy, 1e-300):
            break
        energy_prev = energy
    flags = list(dict.fromkeys(flags))
    return BaselineFit(
        loadings=loadings, core=_project_core(y, loadings), iterations_run=sweeps, flags=tuple(flags)
    )


def stat_svd_single_threshold(y, cfg):
    """The main estimator with single thresholding & projection on sparse
    modes (wide-level row test with log p_k in the bound, then truncated SVD);
    same driver, initialization, and stopping rule otherwise."""
    return _run_alternating(_check_input(y), cfg, variant="single")
