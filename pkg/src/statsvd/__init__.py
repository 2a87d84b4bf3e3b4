"""Sparse tensor SVD: alternating projection & thresholding estimation of
row-sparse Tucker decompositions, with data-driven hyperparameters, reference
baselines, and a reproducible simulation harness."""

from .baselines import (
    BaselineConfig,
    SsvdResult,
    hooi,
    hosvd,
    s_hooi,
    s_hosvd,
    ssvd_rank_r,
    stat_svd_single_threshold,
)
from .estimator import (
    ModeSupport,
    SparseModeUpdate,
    StatSvdConfig,
    ThresholdLevels,
    TuckerFit,
    denoise,
    dense_mode_update,
    fit,
    init_loadings,
    init_support,
    noise_energy_bound,
    sparse_mode_update,
    threshold_levels,
)
from .hyperparam import (
    HyperEstimates,
    estimate_hyperparameters,
    estimate_ranks_cpv,
    estimate_ranks_spectral,
    estimate_sigma_median,
    estimate_sigma_trimmed,
)
from .pipeline import (
    PipelineSpec,
    gen_longitudinal_smoke,
    make_secondary_difference,
    run_pipeline,
)
from .simbench import (
    ExperimentReport,
    SimInstance,
    SimParams,
    benchmark_runtimes,
    gen_core,
    gen_instance,
    gen_sparse_frame,
    gen_weak_row_instance,
    run_grid,
    score,
)
from .tensor import (
    TruncatedSvd,
    fold,
    is_orthonormal,
    kron_chain,
    matricize,
    mode_product,
    multi_mode_product,
    qr_orthonormalize,
    sin_theta_fro,
    sin_theta_op,
    svd_leading,
)
from .tnsio import read_long_csv, read_tns, write_long_csv, write_tns

__version__ = "0.1.0"
