"""Candidate-pool Bayesian optimization with superlevel-set ROI filtering."""

from .bench import (
    CandidatePool,
    ExperimentConfig,
    ObjectiveSpec,
    TrialTrace,
    aggregate,
    generate_pool,
    hdbo_eval,
    load_pool_csv,
    run_trial,
    toy1d_eval,
)
from .core import (
    AcquisitionSpec,
    ConfidenceBounds,
    IntersectedBounds,
    LoopConfig,
    LoopState,
    PoolExhaustedError,
    RegionOfInterest,
    acquisition_scores,
    beta_schedule,
    ci_width_estimate,
    confidence_bounds,
    filter_roi,
    intersect_bounds,
    intersect_bounds_historical,
    loop_step,
    partition_observations,
    select_next,
)
from .gp import (
    GPHyperparams,
    GPModel,
    GPNumericalError,
    LinearKernel,
    OptimizerBudget,
    PosteriorSummary,
    RBFKernel,
    fit_posterior,
    kernel_eval,
    kernel_matrix,
    neg_log_marginal_likelihood,
    optimize_hyperparams,
    posterior_cov,
    posterior_mean_var,
    sample_posterior,
)

__version__ = "0.1.0"
