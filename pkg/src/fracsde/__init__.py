"""Learning drift and diffusion of rough-noise-driven SDEs from path data.

The package simulates stochastic differential equations driven by fractional
Brownian motion, estimates the Hurst exponent from discrete observations,
fits neural drift and diffusion coefficients by minimizing a fractional
Sobolev path loss, and measures how the three error sources (network width,
Hurst fitting, time discretization) each scale.
"""

__version__ = "0.1.0"

from .estimator import DriftDiffusionLearner, IncrementRatioHurst
from .experiments import (
    SweepTable,
    fitting_sweep,
    loglog_slope,
    time_sweep,
    width_sweep,
    write_sweep,
)
from .fields import CoefficientField, benchmark_1d, benchmark_2d, constant_field
from .hurst import DegenerateSeriesError, HurstEstimate, estimate_hurst
from .metrics import (
    PathDiff,
    RecoveryReport,
    batch_loss,
    default_alpha,
    frac_norm_subgradient,
    frac_path_norm,
    holder_diff_seminorm,
    recovery_metrics,
    uniform_eval_points,
)
from .net import (
    AdamState,
    NetGrads,
    NetParams,
    adam_step,
    clip_params,
    config_hash,
    init_adam,
    init_params,
    load_checkpoint,
    net_forward,
    net_vjp,
    neural_field,
    positive_diffusion,
    save_checkpoint,
)
from .noise import (
    CirculantEmbeddingError,
    CoupledPair,
    FbmPath,
    MvnCoupledSampler,
    cholesky_paths,
    circulant_eigenvalues,
    covariance_zscores,
    cross_factor,
    cross_increment_variance,
    davies_harte_increments,
    fbm_cholesky,
    fbm_covariance,
    fbm_davies_harte,
    fgn_autocovariance,
    mvn_constant,
    mvn_coupled_pair,
)
from .sde import (
    Dataset,
    Observations,
    Sample,
    Trajectory,
    downsample,
    euler_rollout,
    generate_dataset,
    load_dataset,
    rollout_vjp,
    save_dataset,
)
from .seeding import derive_rng, derive_seed
from .selftest import run_selftest
from .train import (
    EvalReport,
    TrainConfig,
    TrainHistory,
    TrainResult,
    evaluate,
    train,
)

__all__ = [
    "__version__",
    "AdamState",
    "CirculantEmbeddingError",
    "CoefficientField",
    "CoupledPair",
    "Dataset",
    "DegenerateSeriesError",
    "DriftDiffusionLearner",
    "EvalReport",
    "FbmPath",
    "HurstEstimate",
    "IncrementRatioHurst",
    "MvnCoupledSampler",
    "NetGrads",
    "NetParams",
    "Observations",
    "PathDiff",
    "RecoveryReport",
    "Sample",
    "SweepTable",
    "Trajectory",
    "TrainConfig",
    "TrainHistory",
    "TrainResult",
    "adam_step",
    "batch_loss",
    "benchmark_1d",
    "benchmark_2d",
    "cholesky_paths",
    "circulant_eigenvalues",
    "clip_params",
    "config_hash",
    "constant_field",
    "covariance_zscores",
    "cross_factor",
    "cross_increment_variance",
    "davies_harte_increments",
    "default_alpha",
    "derive_rng",
    "derive_seed",
    "downsample",
    "estimate_hurst",
    "euler_rollout",
    "evaluate",
    "fbm_cholesky",
    "fbm_covariance",
    "fbm_davies_harte",
    "fgn_autocovariance",
    "fitting_sweep",
    "frac_norm_subgradient",
    "frac_path_norm",
    "generate_dataset",
    "holder_diff_seminorm",
    "init_adam",
    "init_params",
    "load_checkpoint",
    "load_dataset",
    "loglog_slope",
    "mvn_constant",
    "mvn_coupled_pair",
    "net_forward",
    "net_vjp",
    "neural_field",
    "positive_diffusion",
    "recovery_metrics",
    "rollout_vjp",
    "run_selftest",
    "save_checkpoint",
    "save_dataset",
    "time_sweep",
    "train",
    "uniform_eval_points",
    "width_sweep",
    "write_sweep",
]
