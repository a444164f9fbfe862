"""Toolkit for studying labor market effects of a border migration shock.

The package combines a small general-equilibrium wage model, a seeded
worker-panel generator with recorded ground truth, fixed-effects and
doubly robust difference-in-differences estimators, synthetic control
and synthetic DiD on state aggregates, and a command-line pipeline that
runs the whole analysis reproducibly.
"""

from .economy import (
    BorderTownEquilibrium,
    BorderTownParams,
    ComparativeStaticsReport,
    EconomyParams,
    EquilibriumState,
    ImmigrationShock,
    ParameterError,
    comparative_statics_report,
    implied_delta,
    shock_multipliers,
    shocked_equilibrium,
    solve_baseline,
    solve_border_town,
    solve_border_town_bisection,
)
from .panel import (
    CSV_COLUMNS,
    EDUCATION_LEVELS,
    DesignMatrix,
    Observation,
    Panel,
    PanelError,
    PanelFormatError,
    apply_sample_rules,
    build_design,
    load_csv,
    load_ratio_csv,
    nearest_rank_quantile,
    two_way_demean,
    write_csv,
    write_ratio_csv,
)
from .dgp import (
    DgpConfig,
    DgpError,
    EDUCATION_COHORT_DEFAULTS,
    GroundTruth,
    generate,
    generate_shock_consistent,
    summary_stats,
)
from .did import (
    DEFAULT_PROPENSITY_COVARIATES,
    EstimateResult,
    EstimationError,
    EstimationSpec,
    cluster_robust_se,
    doubly_robust_did,
    event_study,
    event_study_post_mean,
    heterogeneity_split,
    mover_lpm,
    mover_outcome,
    placebo_suite,
    pooled_ols_did,
    propensity_weights,
    retention_lpm,
    trim_mask,
    twfe_did,
)
from .numerics import (
    CollinearityError,
    ConvergenceError,
    SeparationError,
    SimplexQpProblem,
    WlsProblem,
    WlsSolution,
    bisect_root,
    logit_fit,
    logit_gradient,
    simplex_qp_solve,
    wls_solve,
)
from .synth import (
    AggregatePanel,
    ScmPlaceboReport,
    ScmSolution,
    SdidSolution,
    SynthError,
    aggregate_states,
    scm_fit,
    scm_placebo,
    sdid_fit,
)

__version__ = "0.1.0"

__all__ = [
    "AggregatePanel",
    "BorderTownEquilibrium",
    "BorderTownParams",
    "CollinearityError",
    "ComparativeStaticsReport",
    "ConvergenceError",
    "CSV_COLUMNS",
    "DesignMatrix",
    "DgpConfig",
    "DgpError",
    "DEFAULT_PROPENSITY_COVARIATES",
    "EconomyParams",
    "EDUCATION_COHORT_DEFAULTS",
    "EDUCATION_LEVELS",
    "EquilibriumState",
    "EstimateResult",
    "EstimationError",
    "EstimationSpec",
    "GroundTruth",
    "ImmigrationShock",
    "Observation",
    "Panel",
    "PanelError",
    "PanelFormatError",
    "ParameterError",
    "ScmPlaceboReport",
    "ScmSolution",
    "SdidSolution",
    "SeparationError",
    "SimplexQpProblem",
    "SynthError",
    "WlsProblem",
    "WlsSolution",
    "aggregate_states",
    "apply_sample_rules",
    "bisect_root",
    "build_design",
    "cluster_robust_se",
    "comparative_statics_report",
    "doubly_robust_did",
    "event_study",
    "event_study_post_mean",
    "generate",
    "generate_shock_consistent",
    "heterogeneity_split",
    "implied_delta",
    "load_csv",
    "load_ratio_csv",
    "logit_fit",
    "logit_gradient",
    "mover_lpm",
    "mover_outcome",
    "nearest_rank_quantile",
    "placebo_suite",
    "pooled_ols_did",
    "propensity_weights",
    "retention_lpm",
    "scm_fit",
    "scm_placebo",
    "sdid_fit",
    "shock_multipliers",
    "shocked_equilibrium",
    "simplex_qp_solve",
    "solve_baseline",
    "solve_border_town",
    "solve_border_town_bisection",
    "summary_stats",
    "trim_mask",
    "twfe_did",
    "two_way_demean",
    "wls_solve",
    "write_csv",
    "write_ratio_csv",
]
