"""Bayesian structured additive regression for under- and over-dispersed
counts, built on a gamma-count likelihood with penalized-complexity and
scale-dependent hyperpriors and a nested Laplace approximation."""

from .errors import (
    CalibrationError,
    ConfigError,
    ConvergenceError,
    DataFormatError,
    DesignError,
    DomainError,
    GcstarError,
    GraphFormatError,
)
from .specfun import digamma, log_gamma, reg_lower_gamma, reg_upper_gamma, trigamma
from .gammacount import (
    GcDerivs,
    GcMoments,
    GcParams,
    gc_log_pmf,
    gc_loglik_derivs,
    gc_mean,
    gc_pmf,
    gc_sample,
)
from .priors import (
    DistanceValue,
    GammaPrior,
    PcAlphaPrior,
    VariancePrior,
    kld_gamma,
    pc_alpha_calibrate,
    pc_alpha_density,
    pc_distance,
    scale_dependent_calibrate,
    scale_dependent_density,
    variance_prior_logdensity,
)
from .predictor import (
    LatentModel,
    PredictorComponent,
    joint_prior_logdensity,
    make_icar,
    make_iid,
    make_linear,
    make_rw2,
    read_graph_file,
)
from .inference import (
    FitResult,
    GaussianApprox,
    GridSettings,
    HyperPoint,
    fit_latent_model,
    gaussian_approx,
    hyper_grid,
    latent_marginal,
    predictive_draw,
)
from .evaluation import (
    PointwiseTable,
    Scores,
    SimCriteria,
    compute_cpo_logscore,
    compute_dic,
    compute_q_criteria,
    compute_scores,
    compute_waic,
    pointwise_predictive,
)
from .config import RunConfig, load_config
from .simulate import ScenarioResult, run_simulation_scenario, simulate_dataset
from .harness import calibrate_prior_cmd, compare_cmd, fit_from_files

__version__ = "0.1.0"

__all__ = [
    "GcstarError",
    "ConvergenceError",
    "CalibrationError",
    "DesignError",
    "GraphFormatError",
    "DataFormatError",
    "ConfigError",
    "DomainError",
    "log_gamma",
    "digamma",
    "trigamma",
    "reg_lower_gamma",
    "reg_upper_gamma",
    "GcParams",
    "GcMoments",
    "GcDerivs",
    "gc_pmf",
    "gc_log_pmf",
    "gc_mean",
    "gc_sample",
    "gc_loglik_derivs",
    "kld_gamma",
    "pc_distance",
    "DistanceValue",
    "PcAlphaPrior",
    "pc_alpha_density",
    "pc_alpha_calibrate",
    "scale_dependent_density",
    "scale_dependent_calibrate",
    "GammaPrior",
    "VariancePrior",
    "variance_prior_logdensity",
    "PredictorComponent",
    "LatentModel",
    "make_linear",
    "make_rw2",
    "make_icar",
    "make_iid",
    "joint_prior_logdensity",
    "read_graph_file",
    "GaussianApprox",
    "HyperPoint",
    "GridSettings",
    "FitResult",
    "gaussian_approx",
    "hyper_grid",
    "fit_latent_model",
    "latent_marginal",
    "predictive_draw",
    "PointwiseTable",
    "Scores",
    "SimCriteria",
    "pointwise_predictive",
    "compute_waic",
    "compute_cpo_logscore",
    "compute_dic",
    "compute_scores",
    "compute_q_criteria",
    "RunConfig",
    "load_config",
    "simulate_dataset",
    "run_simulation_scenario",
    "ScenarioResult",
    "fit_from_files",
    "compare_cmd",
    "calibrate_prior_cmd",
    "__version__",
]
