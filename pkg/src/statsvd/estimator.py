"""Sparse tensor SVD by alternating projection and row thresholding (STAT-SVD).

The estimator runs in two phases:

1. *Screened spectral initialization.* Rows of each sparse-mode matricization
   are kept when their energy clears a chi-square-style noise bound or a
   single entry clears an extreme-value bound; the tensor restricted to the
   selected index block seeds per-mode truncated SVDs.
2. *Alternating refinement.* Dense modes take a projection + truncated SVD
   update. Sparse modes take the double projection & thresholding update:
   project to a ``p_k x r_(-k)`` panel, zero rows below the wide *screen*
   level, rotate onto the leading right singular frame of the screened panel,
   zero rows below the much smaller *select* level, and orthonormalize.

Both row tests compare the energy of the first-projection row against their
respective levels. Iteration stops at ``t_max`` sweeps or once the kept-energy
trace is flat over a 5-sweep lag simultaneously on every mode.

The denoised tensor is the observation projected onto the fitted multilinear
subspace (full size, with the compressed core retained alongside).
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .tensor import (
    complete_with_standard_basis,
    is_orthonormal,
    matricize,
    multi_mode_product,
    qr_orthonormalize,
    svd_leading,
)

__all__ = [
    "StatSvdConfig",
    "ThresholdLevels",
    "ModeSupport",
    "TuckerFit",
    "threshold_levels",
    "noise_energy_bound",
    "init_support",
    "init_loadings",
    "dense_mode_update",
    "sparse_mode_update",
    "fit",
    "denoise",
]

# Sweep cap used when the config leaves t_max unset.
MAX_SWEEPS = 50

# Lag of the flat-trace stopping rule; it only fires from sweep CONVERGENCE_LAG on.
CONVERGENCE_LAG = 5


@dataclass(frozen=True)
class StatSvdConfig:
    """Inputs of the estimator.

    ranks        -- multilinear ranks (r_1, ..., r_d), r_k <= p_k
    sigma        -- entrywise noise standard deviation, > 0
    sparse_modes -- 1-based modes carrying row-sparse loadings
    t_max        -- sweep cap; None picks ceil(5*log(d*s*log p)) capped at 50,
                    with s the product of the initial selected support sizes
    eps_tol      -- flat-trace tolerance; None picks 1e-6 * sigma^2 * prod(r);
                    0 disables early stopping
    """

    ranks: tuple
    sigma: float
    sparse_modes: frozenset = frozenset()
    t_max: int = None
    eps_tol: float = None

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        object.__setattr__(self, "sparse_modes", frozenset(int(k) for k in self.sparse_modes))

    def validate(self, shape):
        d = len(shape)
        if len(self.ranks) != d:
            raise ValueError(f"{len(self.ranks)} ranks given for an order-{d} tensor")
        for k, (r, p) in enumerate(zip(self.ranks, shape), start=1):
            if not 1 <= r <= p:
                raise ValueError(f"rank r_{k}={r} out of range 1..{p}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.sparse_modes <= set(range(1, d + 1)):
            raise ValueError(f"sparse modes {sorted(self.sparse_modes)} not within 1..{d}")
        if self.t_max is not None and self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")
        if self.eps_tol is not None and self.eps_tol < 0:
            raise ValueError(f"eps_tol must be >= 0, got {self.eps_tol}")


@dataclass(frozen=True)
class ThresholdLevels:
    """Row-energy levels used by the updates, one per mode.

    screen     -- wide-panel row test (dof = r_(-k)); the "single" variant uses
                  log p_k in place of log p inside this bound
    select     -- rotated-panel row test (dof = r_k)
    init_row   -- initialization row test on the raw matricization (dof = p_(-k))
    init_entry -- initialization single-entry test, 2*sigma*sqrt(log p)
    """

    screen: tuple
    select: tuple
    init_row: tuple
    init_entry: float


def noise_energy_bound(dof, log_card):
    """High-probability bound on a chi-square_dof variable under a union over
    exp(log_card) trials: dof + 2*sqrt(dof*log_card) + 2*log_card."""
    return dof + 2.0 * math.sqrt(dof * log_card) + 2.0 * log_card


def threshold_levels(shape, ranks, sigma, variant="double"):
    """Levels for every row test, scaled by sigma^2.

    ``variant="double"`` is the standard scheme; ``variant="single"`` swaps the
    screen level's log p for log p_k, matching the single-thresholding update.
    """
    if variant not in ("double", "single"):
        raise ValueError(f"unknown variant {variant!r}")
    shape = tuple(int(p) for p in shape)
    ranks = tuple(int(r) for r in ranks)
    log_p = math.log(float(np.prod(shape)))
    var = sigma * sigma
    screen, select, init_row = [], [], []
    for k, (p_k, r_k) in enumerate(zip(shape, ranks)):
        p_rest = int(np.prod(shape)) // p_k
        r_rest = int(np.prod(ranks)) // r_k
        log_screen = math.log(p_k) if variant == "single" else log_p
        screen.append(var * noise_energy_bound(r_rest, log_screen))
        select.append(var * noise_energy_bound(r_k, log_p))
        init_row.append(var * noise_energy_bound(p_rest, log_p))
    return ThresholdLevels(
        screen=tuple(screen),
        select=tuple(select),
        init_row=tuple(init_row),
        init_entry=2.0 * sigma * math.sqrt(log_p),
    )


def _check_input(y):
    y = np.asarray(y, dtype=float)
    if y.ndim < 2:
        raise ValueError("expected a tensor of order >= 2")
    if not np.isfinite(y).all():
        raise ValueError("input tensor contains non-finite entries")
    return y


def _row_stats(y, axis):
    """Row energies and row max |entry| of the mode-(axis+1) matricization,
    computed without materializing it."""
    other = tuple(a for a in range(y.ndim) if a != axis)
    return np.sum(y * y, axis=other), np.max(np.abs(y), axis=other)


def init_support(y, sigma, sparse_modes):
    """Initial per-mode index sets.

    Sparse modes keep rows whose matricization row energy reaches the
    init_row level or whose largest entry reaches the init_entry level; dense
    modes keep everything. Returned as sorted index arrays, possibly empty.
    """
    y = _check_input(y)
    total = int(np.prod(y.shape))
    log_p = math.log(float(total))
    entry_level = 2.0 * sigma * math.sqrt(log_p)
    supports = []
    for k in range(1, y.ndim + 1):
        if k in sparse_modes:
            row_level = sigma * sigma * noise_energy_bound(total // y.shape[k - 1], log_p)
            energy, peak = _row_stats(y, k - 1)
            keep = (energy >= row_level) | (peak >= entry_level)
            supports.append(np.flatnonzero(keep))
        else:
            supports.append(np.arange(y.shape[k - 1]))
    return supports


def _largest_rows(row_energy, count):
    order = np.argsort(-row_energy, kind="stable")
    return np.sort(order[: min(count, row_energy.size)])


def _embedded_svd_frame(block, rows, dim, rank):
    """Left frame of a matrix whose only nonzero rows are ``rows`` holding
    ``block``; degenerate spectra are completed with standard basis columns.

    Returns (frame, spectrum_is_zero)."""
    r_eff = min(rank, *block.shape) if block.size else 0
    frame = np.zeros((dim, 0))
    zero_spectrum = True
    if r_eff > 0:
        top = svd_leading(block, r_eff)
        keep = int(np.sum(top.s > 0))
        zero_spectrum = keep == 0
        frame = np.zeros((dim, keep))
        frame[rows] = top.u[:, :keep]
    if frame.shape[1] < rank:
        frame = complete_with_standard_basis(frame, rank, dim)
    return frame, zero_spectrum


def init_loadings(y, supports, ranks):
    """Screened spectral initialization.

    Zeroes everything outside the tensor block selected by ``supports`` and
    takes per-mode leading left singular frames (computed on the block, which
    is exactly the SVD of the zero-padded matricization). Empty sparse-mode
    supports fall back to the highest-energy rows; both that and an all-zero
    block are reported in the returned flags.

    Returns (loadings, effective_supports, flags).
    """
    y = _check_input(y)
    d = y.ndim
    flags = []
    eff = []
    for k, rows in enumerate(supports, start=1):
        rows = np.asarray(rows, dtype=int)
        if rows.size == 0:
            energy, _ = _row_stats(y, k - 1)
            rows = _largest_rows(energy, ranks[k - 1])
            flags.append(f"init: empty support on mode {k}, kept {rows.size} strongest rows")
        eff.append(rows)
    block = y[np.ix_(*eff)]
    loadings = []
    for k in range(1, d + 1):
        frame, zero_spectrum = _embedded_svd_frame(
            matricize(block, k), eff[k - 1], y.shape[k - 1], ranks[k - 1]
        )
        if zero_spectrum:
            flags.append(f"init: screened tensor has no energy on mode {k}")
        loadings.append(frame)
    return loadings, eff, flags


def _project_except(y, loadings, k):
    """Contract every mode but ``k`` with its loading transposed, skipping
    rows where the loading is exactly zero (modes ascending, so the result is
    deterministic)."""
    out = y
    for j, u in enumerate(loadings, start=1):
        if j == k:
            continue
        axis = j - 1
        rows = np.flatnonzero(np.any(u != 0.0, axis=1))
        if rows.size < u.shape[0]:
            contracted = np.tensordot(np.take(out, rows, axis=axis), u[rows], axes=(axis, 0))
        else:
            contracted = np.tensordot(out, u, axes=(axis, 0))
        out = np.moveaxis(contracted, -1, axis)
    return out


def _dense_update(y, k, loadings, r_k):
    panel = matricize(_project_except(y, loadings, k), k)
    top = svd_leading(panel, min(r_k, *panel.shape))
    frame = top.u
    if frame.shape[1] < r_k:
        frame = complete_with_standard_basis(frame, r_k, frame.shape[0])
    return frame, float(np.sum(top.s * top.s))


def dense_mode_update(y, k, loadings, cfg):
    """Projection + truncated SVD update for a non-sparse mode ``k``."""
    y = _check_input(y)
    frame, _ = _dense_update(y, k, loadings, cfg.ranks[k - 1])
    return frame


@dataclass(frozen=True)
class SparseModeUpdate:
    """Outcome of one sparse-mode update."""

    frame: np.ndarray
    screened: np.ndarray  # rows passing the wide screen level
    selected: np.ndarray  # rows passing the select level (support of frame)
    kept_energy: float  # squared Frobenius norm of the kept panel
    flags: tuple = ()


def sparse_mode_update(y, k, loadings, cfg, levels=None):
    """Double projection & thresholding update for sparse mode ``k``.

    Projection panel -> screen rows by energy -> rotate onto the screened
    panel's leading right singular frame -> re-test the same row energies at
    the select level -> QR. Tests that keep no rows fall back to the r_k
    highest-energy rows and set a flag. Passing explicit ``levels`` (e.g. all
    zero) overrides the config-derived ones; with zero levels the update is a
    plain projection followed by an exact rotation.
    """
    y = _check_input(y)
    r_k = cfg.ranks[k - 1]
    if levels is None:
        levels = threshold_levels(y.shape, cfg.ranks, cfg.sigma)
    flags = []
    panel = matricize(_project_except(y, loadings, k), k)
    row_energy = np.einsum("ij,ij->i", panel, panel)

    screened = np.flatnonzero(row_energy >= levels.screen[k - 1])
    if screened.size == 0:
        screened = _largest_rows(row_energy, r_k)
        flags.append(f"mode {k}: screen kept no rows, fell back to {screened.size} strongest")
    wide = np.zeros_like(panel)
    wide[screened] = panel[screened]

    r_eff = min(r_k, panel.shape[1])
    rotation = svd_leading(wide.T, r_eff).u  # leading right singular frame of the screened panel
    rotated = panel @ rotation

    selected = np.flatnonzero(row_energy >= levels.select[k - 1])
    if selected.size == 0:
        selected = _largest_rows(row_energy, r_k)
        flags.append(f"mode {k}: select kept no rows, fell back to {selected.size} strongest")
    kept = np.zeros_like(rotated)
    kept[selected] = rotated[selected]

    frame = qr_orthonormalize(kept)
    if frame.shape[1] < r_k:
        frame = complete_with_standard_basis(frame, r_k, frame.shape[0])
        flags.append(f"mode {k}: rank capped by panel width {panel.shape[1]}")
    return SparseModeUpdate(
        frame=frame,
        screened=screened,
        selected=selected,
        kept_energy=float(np.sum(kept * kept)),
        flags=tuple(flags),
    )


def _single_threshold_update(y, k, loadings, cfg, levels):
    """Single thresholding & projection update (comparison variant): one row
    test at the wide level, then a truncated SVD of the kept panel."""
    r_k = cfg.ranks[k - 1]
    flags = []
    panel = matricize(_project_except(y, loadings, k), k)
    row_energy = np.einsum("ij,ij->i", panel, panel)
    kept_rows = np.flatnonzero(row_energy >= levels.screen[k - 1])
    if kept_rows.size == 0:
        kept_rows = _largest_rows(row_energy, r_k)
        flags.append(f"mode {k}: threshold kept no rows, fell back to {kept_rows.size} strongest")
    kept = np.zeros_like(panel)
    kept[kept_rows] = panel[kept_rows]
    frame, _ = _embedded_svd_frame(kept[kept_rows], kept_rows, panel.shape[0], r_k)
    return SparseModeUpdate(
        frame=frame,
        screened=kept_rows,
        selected=kept_rows,
        kept_energy=float(np.sum(kept * kept)),
        flags=tuple(flags),
    )


@dataclass
class ModeSupport:
    """Index sets a sparse-mode update settled on."""

    screened: np.ndarray
    selected: np.ndarray


@dataclass
class TuckerFit:
    """Fitted decomposition plus diagnostics.

    loadings       -- per-mode orthonormal frames (p_k x r_k)
    core           -- observation projected to r_1 x ... x r_d
    denoised       -- core expanded back through the loadings (shape of y)
    supports       -- final ModeSupport per sparse mode
    trace          -- kept-energy per sweep and mode, shape (sweeps, d)
    degenerate     -- True when any fallback path fired (see flags)
    """

    loadings: list
    core: np.ndarray
    denoised: np.ndarray
    supports: dict
    iterations_run: int
    converged: bool
    trace: np.ndarray
    degenerate: bool = False
    flags: tuple = ()

    def to_json_dict(self):
        return {
            "shape": [int(p) for p in self.denoised.shape],
            "ranks": [int(u.shape[1]) for u in self.loadings],
            "loadings": [u.tolist() for u in self.loadings],
            "supports": {
                str(k): {
                    "screened": [int(i) for i in s.screened],
                    "selected": [int(i) for i in s.selected],
                }
                for k, s in sorted(self.supports.items())
            },
            "iterations_run": self.iterations_run,
            "converged": self.converged,
            "trace": self.trace.tolist(),
            "degenerate": self.degenerate,
            "flags": list(self.flags),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_json_dict(), **kwargs)


def default_t_max(shape, support_sizes):
    """ceil(5 * log(d * s * log p)) capped at MAX_SWEEPS, with s the product
    of the selected support sizes (at least 1 per mode)."""
    d = len(shape)
    log_p = math.log(float(np.prod(shape)))
    s = 1.0
    for n in support_sizes:
        s *= max(int(n), 1)
    return min(MAX_SWEEPS, max(1, math.ceil(5.0 * math.log(max(d * s * log_p, math.e)))))


def _run_alternating(y, cfg, variant):
    cfg.validate(y.shape)
    d = y.ndim
    levels = threshold_levels(y.shape, cfg.ranks, cfg.sigma, variant=variant)
    supports0 = init_support(y, cfg.sigma, cfg.sparse_modes)
    loadings, eff_supports, flags = init_loadings(y, supports0, cfg.ranks)
    flags = list(flags)

    t_max = cfg.t_max
    if t_max is None:
        t_max = default_t_max(y.shape, [rows.size for rows in eff_supports])
    eps_tol = cfg.eps_tol
    if eps_tol is None:
        eps_tol = 1e-6 * cfg.sigma**2 * float(np.prod(cfg.ranks))

    sparse_update = sparse_mode_update if variant == "double" else _single_threshold_update
    trace = []
    supports = {}
    converged = False
    sweeps = 0
    for t in range(t_max):
        row = np.empty(d)
        for k in range(1, d + 1):
            if k in cfg.sparse_modes:
                upd = sparse_update(y, k, loadings, cfg, levels)
                loadings[k - 1] = upd.frame
                supports[k] = ModeSupport(screened=upd.screened, selected=upd.selected)
                flags.extend(upd.flags)
                row[k - 1] = upd.kept_energy
            else:
                loadings[k - 1], row[k - 1] = _dense_update(y, k, loadings, cfg.ranks[k - 1])
        trace.append(row)
        sweeps = t + 1
        if t >= CONVERGENCE_LAG and np.all(
            np.abs(trace[t] - trace[t - CONVERGENCE_LAG]) < eps_tol
        ):
            converged = True
            break

    core = multi_mode_product(y, loadings, transpose=True)
    denoised = multi_mode_product(core, loadings)
    flags = list(dict.fromkeys(flags))
    return TuckerFit(
        loadings=loadings,
        core=core,
        denoised=denoised,
        supports=supports,
        iterations_run=sweeps,
        converged=converged,
        trace=np.asarray(trace),
        degenerate=bool(flags),
        flags=tuple(flags),
    )


def fit(y, cfg):
    """Run the full estimator on observation ``y``; deterministic in (y, cfg)."""
    return _run_alternating(_check_input(y), cfg, variant="double")


def denoise(y, loadings):
    """Project ``y`` onto the multilinear subspace spanned by ``loadings``."""
    y = _check_input(y)
    if len(loadings) != y.ndim:
        raise ValueError(f"expected {y.ndim} loadings, got {len(loadings)}")
    for k, u in enumerate(loadings, start=1):
        if u.shape[0] != y.shape[k - 1]:
            raise ValueError(f"loading {k} has {u.shape[0]} rows, mode has {y.shape[k - 1]}")
        if not is_orthonormal(u):
            raise ValueError(f"loading {k} is not orthonormal")
    return multi_mode_product(multi_mode_product(y, loadings, transpose=True), loadings)
