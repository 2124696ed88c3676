"""driftlab: a desk-scale lab for diffusion generative sampling.

The forward Ornstein-Uhlenbeck process carries data to near-standard noise;
the reverse-time sampler carries noise back using a score drift that may be
a closed-form reference target or a small trained network in one of three
parameterizations (score, noise predictor, conditional data mean).
"""

from .core import (
    ConfigError,
    DegenerateEstimateError,
    DriftLabError,
    NonFiniteDriftError,
    RunConfig,
    Schedule,
    StepQuantities,
    TargetKind,
    TrainingDiverged,
    UnsupportedDistributionError,
    build_exp_schedule,
    step_quantities,
    sub_rng,
)
from .distributions import (
    DataDistribution,
    IsotropicGaussian,
    LineGaussian,
    PointCloud,
    SmoothedCloud,
    SpiralCurve,
    data_mean,
    dist_from_config,
    dist_to_config,
    five_point_cloud,
    four_point_cloud,
    load_pointcloud_csv,
    nearest_manifold_point,
    sample_data,
    twenty_point_cloud,
)
from .diffusion import (
    TrainingBatch,
    as_score,
    backward_sample,
    ddpm_step,
    forward_sample,
    lambda_weight,
    make_target,
    make_training_batch,
    splitting_step,
    train,
)
from .metrics import (
    ErrorCurve,
    absorption_frequencies,
    fit_lambda_constant,
    l2_error_over_p,
    lambda_true_estimate,
    pointwise_error,
    sample_moments,
    singularity_profile,
)
from .mlp import (
    AdamState,
    MlpModel,
    adam_step,
    init_adam,
    init_mlp,
    load_checkpoint,
    mlp_forward,
    mlp_loss_grad,
    param_count,
    save_checkpoint,
)
from .oracles import (
    McEstimate,
    OracleTargets,
    analytic_score_fn,
    analytic_target_fn,
    analytic_targets,
    eps_from_score,
    f_from_score,
    mc_oracle_f,
    oracle_f_pointcloud,
    oracle_score_gaussian,
    oracle_score_pointcloud,
    oracle_score_smoothed,
    oracle_targets_line,
    score_from_eps,
    score_from_f,
)

__version__ = "0.1.0"
