"""Data-driven choices of the noise level and the multilinear ranks.

Noise level:

* median estimator — most entries of a sparse low-rank signal are pure noise,
  so Median(|Y|)/0.6744 is consistent for sigma (0.6744 being the 75% quantile
  of the standard normal);
* trimmed estimator — drop a fraction of the largest |entries| and take the
  sample standard deviation of the rest; more robust off-Gaussian.

Ranks:

* spectral — count the singular values of the screened tensor's
  matricizations that clear a noise level calibrated to the selected support
  sizes;
* cumulative percentage of variation — smallest r whose leading singular
  values carry more than a fraction rho of the matricization energy.
"""

import math
from dataclasses import dataclass

import numpy as np

from .estimator import init_support
from .tensor import matricize

__all__ = [
    "MEDIAN_TO_SIGMA",
    "HyperEstimates",
    "estimate_sigma_median",
    "estimate_sigma_trimmed",
    "estimate_ranks_spectral",
    "estimate_ranks_cpv",
    "spectral_noise_level",
    "estimate_hyperparameters",
]

# 75% quantile of the standard normal, the calibration of the median estimator.
MEDIAN_TO_SIGMA = 0.6744


@dataclass
class HyperEstimates:
    """Estimated noise level and ranks, with how they were obtained."""

    sigma_hat: float
    ranks_hat: tuple
    sigma_method: str  # "median" | "trimmed"
    rank_method: str  # "spectral" | "cpv"
    support_sizes: tuple = ()
    singular_values: tuple = ()  # per mode, the inspected leading spectra
    levels: tuple = ()  # per mode, the spectral cut level (spectral method)
    flags: tuple = ()


def estimate_sigma_median(y):
    """Median(|Y|)/0.6744 with the lower-median convention for even counts.

    An all-zero tensor yields 0.0, which downstream fitting rejects.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty tensor")
    flat = np.abs(y).ravel()
    k = (flat.size - 1) // 2  # lower median
    return float(np.partition(flat, k)[k]) / MEDIAN_TO_SIGMA


def estimate_sigma_trimmed(y, trim_fraction=0.15):
    """Sample standard deviation after dropping the ceil(trim_fraction * n)
    entries largest in absolute value."""
    y = np.asarray(y, dtype=float)
    if not 0 <= trim_fraction < 1:
        raise ValueError(f"trim_fraction must be in [0, 1), got {trim_fraction}")
    flat = y.ravel()
    drop = math.ceil(trim_fraction * flat.size)
    if flat.size - drop < 2:
        raise ValueError(f"trimming {drop} of {flat.size} entries leaves fewer than 2")
    order = np.argsort(np.abs(flat), kind="stable")
    kept = flat[order[: flat.size - drop]]
    return float(np.std(kept, ddof=1))


def spectral_noise_level(i, j, dim_rows, dim_cols, c=1.02):
    """Expected top singular value of an i x j Gaussian submatrix selected out
    of a dim_rows x dim_cols matrix (unit noise), with union-bound slack:

    c * (sqrt(i) + sqrt(j) + sqrt(2i log(e*dim_rows/i) + 2j log(e*dim_cols/j)
    + 4 log dim_rows)).
    """
    if i < 1 or j < 1:
        raise ValueError("support sizes must be positive")
    inner = (
        2.0 * i * math.log(math.e * dim_rows / i)
        + 2.0 * j * math.log(math.e * dim_cols / j)
        + 4.0 * math.log(dim_rows)
    )
    return c * (math.sqrt(i) + math.sqrt(j) + math.sqrt(inner))


def _screened_spectrum(y, supports, k):
    """Singular values of the mode-k matricization of the screened tensor
    (zero outside the support block); computed on the block itself."""
    block = y[np.ix_(*supports)]
    if block.size == 0:
        return np.zeros(0)
    return np.linalg.svd(matricize(block, k), compute_uv=False)


def estimate_ranks_spectral(y, sigma_hat, sparse_modes, c=1.02):
    """Rank per mode: the number of screened-matricization singular values at
    or above sigma_hat times the support-calibrated noise level.

    Empty supports or empty cut sets give rank 1 with a flag. Returns
    (ranks, diagnostics) where diagnostics is a HyperEstimates without the
    sigma fields filled in by the caller.
    """
    y = np.asarray(y, dtype=float)
    if not sigma_hat > 0:
        raise ValueError(f"sigma_hat must be positive, got {sigma_hat}")
    d = y.ndim
    supports = init_support(y, sigma_hat, sparse_modes)
    sizes = [int(rows.size) for rows in supports]
    flags = []
    ranks = []
    spectra = []
    levels = []
    for k in range(1, d + 1):
        i = sizes[k - 1]
        j = 1
        for l in range(d):
            if l != k - 1:
                j *= sizes[l]
        if i == 0 or j == 0:
            flags.append(f"mode {k}: empty screened support, rank defaulted to 1")
            ranks.append(1)
            spectra.append(())
            levels.append(float("nan"))
            continue
        p_k = y.shape[k - 1]
        p_rest = int(np.prod(y.shape)) // p_k
        level = sigma_hat * spectral_noise_level(i, j, p_k, p_rest, c=c)
        spectrum = _screened_spectrum(y, supports, k)
        r = int(np.sum(spectrum >= level))
        if r == 0:
            flags.append(f"mode {k}: no singular value above the cut, rank defaulted to 1")
            r = 1
        ranks.append(r)
        spectra.append(tuple(float(s) for s in spectrum[: min(spectrum.size, 10)]))
        levels.append(float(level))
    diag = HyperEstimates(
        sigma_hat=float(sigma_hat),
        ranks_hat=tuple(ranks),
        sigma_method="given",
        rank_method="spectral",
        support_sizes=tuple(sizes),
        singular_values=tuple(spectra),
        levels=tuple(levels),
        flags=tuple(flags),
    )
    return tuple(ranks), diag


def estimate_ranks_cpv(y, rho):
    """Smallest r per mode with cumulative singular-value energy share > rho."""
    y = np.asarray(y, dtype=float)
    if not 0 < rho < 1:
        raise ValueError(f"rho must be in (0, 1), got {rho}")
    if not np.any(y):
        raise ValueError("cannot rank a zero tensor by variation shares")
    ranks = []
    for k in range(1, y.ndim + 1):
        s = np.linalg.svd(matricize(y, k), compute_uv=False)
        shares = np.cumsum(s * s) / np.sum(s * s)
        ranks.append(int(np.argmax(shares > rho)) + 1)
    return tuple(ranks)


def estimate_hyperparameters(
    y,
    sparse_modes,
    sigma_method="median",
    rank_method="spectral",
    trim_fraction=0.15,
    rho=0.5,
):
    """Convenience composition: estimate sigma, then the ranks, and report
    which estimators ran."""
    if sigma_method == "median":
        sigma_hat = estimate_sigma_median(y)
    elif sigma_method == "trimmed":
        sigma_hat = estimate_sigma_trimmed(y, trim_fraction)
    else:
        raise ValueError(f"unknown sigma_method {sigma_method!r}")
    flags = []
    if sigma_hat <= 0:
        flags.append("estimated sigma is not positive; fitting requires sigma > 0")
    if rank_method == "spectral":
        if sigma_hat > 0:
            ranks, diag = estimate_ranks_spectral(y, sigma_hat, sparse_modes)
            return HyperEstimates(
                sigma_hat=sigma_hat,
                ranks_hat=ranks,
                sigma_method=sigma_method,
                rank_method="spectral",
                support_sizes=diag.support_sizes,
                singular_values=diag.singular_values,
                levels=diag.levels,
                flags=tuple(flags) + diag.flags,
            )
        ranks = (1,) * np.asarray(y).ndim
        flags.append("spectral rank estimation skipped (sigma_hat == 0)")
    elif rank_method == "cpv":
        ranks = estimate_ranks_cpv(y, rho)
    else:
        raise ValueError(f"unknown rank_method {rank_method!r}")
    return HyperEstimates(
        sigma_hat=sigma_hat,
        ranks_hat=tuple(ranks),
        sigma_method=sigma_method,
        rank_method=rank_method,
        flags=tuple(flags),
    )
