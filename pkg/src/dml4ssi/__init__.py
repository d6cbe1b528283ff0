"""Debiased treatment-effect estimation with a shared Markov state.

Simulators, nuisance learners, debiased estimators, long-run variance
estimators, and a Monte Carlo harness for average-direct-effect and
switchback global-effect inference when outcomes are coupled through a
serially dependent shared state.
"""

from .core import (
    EstimateReport,
    Observation,
    Regime,
    SwitchbackDesign,
    Trajectory,
    TrajectoryFormatError,
    geometric_ergodic,
    m_dependent,
    read_trajectory_csv,
    validate_trajectory,
    write_trajectory_csv,
)
from .dgp import (
    AdeDgpConfig,
    SwitchbackDgpConfig,
    TruthSpec,
    oracle_true_ade,
    oracle_true_gate,
    simulate_ade_dgp,
    simulate_switchback_dgp,
    switchback_window_prob,
    true_ade,
    true_gate,
)
from .estimators import (
    ALL_ESTIMATORS,
    DML4SSI,
    DML_NAIVE,
    HT_NAIVE,
    PLUGIN,
    SB_HT,
    SSAC,
    PhiSeries,
    phi_ade,
    phi_gate,
    psi_ade_dml,
    psi_dml_naive,
    psi_gate_dml,
    psi_gate_plugin,
    psi_ht_naive,
    psi_plugin,
    psi_sb_ht,
    psi_ssac,
)
from .forest import (
    ForestParams,
    RegressionForest,
    fit_regression_forest,
    predict_forest,
)
from .harness import (
    ExperimentReport,
    Scenario,
    coverage_sweep,
    emit_csv,
    run_experiment,
    run_replication,
)
from .nuisance import (
    NuisanceSet,
    fit_outcome_model,
    fit_propensity_model,
    oracle_nuisances,
)
from .orthogonality import OrthogonalityReport, orthogonality_check
from .rng import RngStream, Sampler, derive_stream, norm_ppf, z_quantile
from .variance import (
    VarianceMethod,
    confidence_interval,
    var_batch_means,
    var_ht,
    var_iid_plugin,
    var_mdep,
    variance_for,
)

__all__ = [
    "ALL_ESTIMATORS",
    "AdeDgpConfig",
    "DML4SSI",
    "DML_NAIVE",
    "EstimateReport",
    "ExperimentReport",
    "ForestParams",
    "HT_NAIVE",
    "NuisanceSet",
    "Observation",
    "OrthogonalityReport",
    "PLUGIN",
    "PhiSeries",
    "RegressionForest",
    "Regime",
    "RngStream",
    "SB_HT",
    "SSAC",
    "Sampler",
    "Scenario",
    "SwitchbackDesign",
    "SwitchbackDgpConfig",
    "Trajectory",
    "TrajectoryFormatError",
    "TruthSpec",
    "VarianceMethod",
    "confidence_interval",
    "coverage_sweep",
    "derive_stream",
    "emit_csv",
    "fit_outcome_model",
    "fit_propensity_model",
    "fit_regression_forest",
    "geometric_ergodic",
    "m_dependent",
    "norm_ppf",
    "oracle_nuisances",
    "oracle_true_ade",
    "oracle_true_gate",
    "orthogonality_check",
    "phi_ade",
    "phi_gate",
    "predict_forest",
    "psi_ade_dml",
    "psi_dml_naive",
    "psi_gate_dml",
    "psi_gate_plugin",
    "psi_ht_naive",
    "psi_plugin",
    "psi_sb_ht",
    "psi_ssac",
    "read_trajectory_csv",
    "run_experiment",
    "run_replication",
    "simulate_ade_dgp",
    "simulate_switchback_dgp",
    "switchback_window_prob",
    "true_ade",
    "true_gate",
    "validate_trajectory",
    "var_batch_means",
    "var_ht",
    "var_iid_plugin",
    "var_mdep",
    "variance_for",
    "write_trajectory_csv",
    "z_quantile",
]
