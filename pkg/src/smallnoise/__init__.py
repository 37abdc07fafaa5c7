"""Simulation and verification lab for one-dimensional diffusions with
small noise escaping an unstable equilibrium at the origin.

Core pieces: model definitions with assumption checking (models),
deterministic flow machinery and the rescaled-flow limit profile (flow),
a stochastic path engine with exact endpoint sampling for the linear
companion process (sde), the compound-Poisson limit law (limitlaw),
distribution distances (stats), named verification experiments
(experiment), and an HTTP service plus CLI (service, cli).
"""

__version__ = "0.1.0"

from .experiment import (
    EXPERIMENT_NAMES,
    ExperimentConfig,
    ExperimentReport,
    MetricRow,
    metrics_csv_text,
    run_experiment,
    write_report,
)
from .flow import (
    FlowSolverConfig,
    FlowSolverError,
    FlowTable,
    PrecisionError,
    ProfileLimitResult,
    flow_map,
    flow_map_grid,
    flow_time,
    flow_time_inverse,
    limit_profile,
    limit_profile_batch,
    limit_profile_via_flow,
)
from .limitlaw import (
    LimitLaw,
    laplace_transform,
    sample_compound_poisson,
    sample_initial_conditions,
    sample_limit,
)
from .models import (
    BUILTIN_MODEL_NAMES,
    ModelSpec,
    ValidationReport,
    builtin_model,
    validate_model,
)
from .sde import (
    CoupledPair,
    Path,
    PathEnsemble,
    SimConfig,
    SimulationError,
    exact_feller_endpoint,
    simulate_X,
    simulate_coupled,
    simulate_coupled_ensemble,
    simulate_ensemble,
)
from .stats import (
    QUANTILE_LEVELS,
    SampleSummary,
    binomial_ci,
    empirical_laplace,
    ks_pvalue,
    ks_statistic,
    summarize,
    wasserstein1,
    wasserstein1_bootstrap_stderr,
    wasserstein1_fixed_reference_stderr,
    wasserstein1_subsample_stderr,
)

__all__ = [
    "__version__",
    "BUILTIN_MODEL_NAMES",
    "ModelSpec",
    "ValidationReport",
    "builtin_model",
    "validate_model",
    "FlowSolverConfig",
    "FlowSolverError",
    "FlowTable",
    "PrecisionError",
    "ProfileLimitResult",
    "flow_map",
    "flow_map_grid",
    "flow_time",
    "flow_time_inverse",
    "limit_profile",
    "limit_profile_batch",
    "limit_profile_via_flow",
    "LimitLaw",
    "laplace_transform",
    "sample_compound_poisson",
    "sample_initial_conditions",
    "sample_limit",
    "CoupledPair",
    "Path",
    "PathEnsemble",
    "SimConfig",
    "SimulationError",
    "exact_feller_endpoint",
    "simulate_X",
    "simulate_coupled",
    "simulate_coupled_ensemble",
    "simulate_ensemble",
    "QUANTILE_LEVELS",
    "SampleSummary",
    "binomial_ci",
    "empirical_laplace",
    "ks_pvalue",
    "ks_statistic",
    "summarize",
    "wasserstein1",
    "wasserstein1_bootstrap_stderr",
    "wasserstein1_fixed_reference_stderr",
    "wasserstein1_subsample_stderr",
    "EXPERIMENT_NAMES",
    "ExperimentConfig",
    "ExperimentReport",
    "MetricRow",
    "metrics_csv_text",
    "run_experiment",
    "write_report",
]
