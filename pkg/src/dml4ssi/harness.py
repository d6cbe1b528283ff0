"""Monte Carlo experiment runner.

One replication is the full pipeline: simulate an auxiliary
trajectory, fit nuisances on it, simulate an independent inference
trajectory, compute every requested estimator with its assigned
variance and confidence interval, and score coverage against the
analytic truth. Experiments repeat that R times on isolated RNG
streams and aggregate bias/coverage/width summaries.

Stream layout: replication ``index`` owns streams derived from the
scenario root as index*8 + stage for stages {aux-sim=0, forest-fit=1,
inference-sim=2, perturbation=3}; the fit stream is further split per
model (0: outcome with shared state, 1: outcome without, 2:
propensity). Stage isolation keeps every estimator's draws fixed when
the estimator set changes, and makes jobs=1 and jobs=8 byte-identical.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .core import EstimateReport, SwitchbackDesign, Trajectory
from .dgp import (
    AdeDgpConfig,
    SwitchbackDgpConfig,
    simulate_ade_dgp,
    simulate_switchback_dgp,
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
    psi_ade_dml,
    psi_dml_naive,
    psi_gate_dml,
    psi_gate_plugin,
    psi_ht_naive,
    psi_plugin,
    psi_sb_ht,
    psi_ssac,
)
from .forest import ForestParams
from .nuisance import (
    ConstantPropensity,
    NuisanceSet,
    OracleAdeMarginalOutcome,
    OracleSwitchbackMarginalOutcome,
    fit_outcome_model,
    fit_propensity_model,
    oracle_nuisances,
)
from .rng import RngStream, derive_stream, fsum
from .variance import (
    DEFAULT_THETA,
    VarianceMethod,
    confidence_interval,
    variance_for,
)

STAGE_AUX_SIM = 0
STAGE_FOREST_FIT = 1
STAGE_INFERENCE_SIM = 2
STAGE_PERTURBATION = 3
STAGES_PER_REPLICATION = 8

FIT_OUTCOME = 0
FIT_OUTCOME_NO_H = 1
FIT_PROPENSITY = 2

DgpConfig = Union[AdeDgpConfig, SwitchbackDgpConfig]


def default_variance_method(estimator: str, dgp: DgpConfig) -> VarianceMethod:
    """Regime-appropriate variance estimator for each estimator label."""
    switchback = isinstance(dgp, SwitchbackDgpConfig)
    if estimator in (SSAC, DML_NAIVE):
        return VarianceMethod("iid-plugin")
    if estimator == HT_NAIVE:
        return VarianceMethod("ht-plugin")
    if switchback:
        # dml4ssi, plugin, sb-ht all ride the m-dependent regime
        return VarianceMethod("m-dependent", m=dgp.design.m)
    return VarianceMethod("batch-means", theta=DEFAULT_THETA)


@dataclass(frozen=True)
class Scenario:
    """Everything one Monte Carlo experiment needs."""

    dgp: DgpConfig
    T: int
    aux_T: int
    estimators: Tuple[str, ...]
    R: int
    base_seed: int
    variance_assignments: Optional[Mapping[str, VarianceMethod]] = None
    alpha: float = 0.05
    jobs: int = 1
    use_oracle_nuisances: bool = False
    n_trees: int = 200
    min_samples_leaf: int = 5
    feature_fraction: float = 1.0 / 3.0
    max_depth: Optional[int] = None
    root_stream_id: int = 0

    def __post_init__(self) -> None:
        if self.T < 1 or self.aux_T < 1:
            raise ValueError("T and aux_T must be positive")
        if self.R < 1:
            raise ValueError("R must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        ests = tuple(self.estimators)
        if not ests:
            raise ValueError("at least one estimator required")
        if len(set(ests)) != len(ests):
            raise ValueError("duplicate estimator labels")
        unknown = [e for e in ests if e not in ALL_ESTIMATORS]
        if unknown:
            raise ValueError(f"unknown estimators {unknown}")
        switchback = isinstance(self.dgp, SwitchbackDgpConfig)
        if not switchback and SB_HT in ests:
            raise ValueError("sb-ht requires a switchback DGP")
        object.__setattr__(self, "estimators", ests)
        assigned = dict(self.variance_assignments or {})
        for k, v in assigned.items():
            if k not in ALL_ESTIMATORS:
                raise ValueError(f"variance assigned to unknown estimator {k!r}")
            if not isinstance(v, VarianceMethod):
                raise ValueError(f"variance assignment for {k!r} is not a VarianceMethod")
        object.__setattr__(self, "variance_assignments", assigned)

    def variance_method(self, estimator: str) -> VarianceMethod:
        got = self.variance_assignments.get(estimator)
        return got if got is not None else default_variance_method(estimator, self.dgp)

    @property
    def is_switchback(self) -> bool:
        return isinstance(self.dgp, SwitchbackDgpConfig)

    def forest_params(self, seed: RngStream) -> ForestParams:
        return ForestParams(
            seed=seed,
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            feature_fraction=self.feature_fraction,
        )

    def root_stream(self) -> RngStream:
        return RngStream(self.base_seed, self.root_stream_id)


@dataclass(frozen=True)
class ReplicationResult:
    index: int
    psi_star: float
    reports: Dict[str, EstimateReport]
    covered: Dict[str, bool]
    errors: Dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class EstimatorSummary:
    estimator: str
    n: int
    mean_bias: float
    bias_sd: float
    mc_se: float
    coverage: float
    coverage_se: float
    mean_ci_width: float
    n_degenerate: int


@dataclass(frozen=True)
class ExperimentReport:
    scenario: Scenario
    psi_star: float
    summaries: Dict[str, EstimatorSummary]
    replications: List[ReplicationResult]
    wall_clock_s: float


def _truth(scenario: Scenario) -> float:
    if scenario.is_switchback:
        return true_gate(scenario.dgp).psi_star
    return true_ade(scenario.dgp, T=scenario.T).psi_star


def _fit_nuisances(
    scenario: Scenario, aux: Trajectory, fit_stream: RngStream, needs: Dict[str, bool]
) -> Dict[str, object]:
    """Fit (lazily, per need) the outcome, no-shared-state outcome, and
    propensity models on the auxiliary trajectory."""
    dgp = scenario.dgp
    models: Dict[str, object] = {}
    if scenario.use_oracle_nuisances:
        star = oracle_nuisances(dgp)
        if needs["f"]:
            models["f"] = star.f
        if needs["f_no_h"]:
            if scenario.is_switchback:
                models["f_no_h"] = OracleSwitchbackMarginalOutcome(dgp)
            else:
                models["f_no_h"] = OracleAdeMarginalOutcome(dgp)
        if needs["m"]:
            models["m"] = star.m
        models["zeta"] = star.zeta
        return models
    if needs["f"]:
        params = scenario.forest_params(derive_stream(fit_stream, FIT_OUTCOME))
        models["f"] = fit_outcome_model(aux, include_shared_state=True, params=params)
    if needs["f_no_h"]:
        params = scenario.forest_params(derive_stream(fit_stream, FIT_OUTCOME_NO_H))
        models["f_no_h"] = fit_outcome_model(
            aux, include_shared_state=False, params=params
        )
    if needs["m"]:
        if scenario.is_switchback:
            # design assignment: the propensity is known, not fitted
            models["m"] = ConstantPropensity(scenario.dgp.design.treat_prob)
        else:
            params = scenario.forest_params(derive_stream(fit_stream, FIT_PROPENSITY))
            models["m"] = fit_propensity_model(aux, scenario.dgp.zeta, params)
    if scenario.is_switchback:
        p = scenario.dgp.design.treat_prob
        models["zeta"] = min(p, 1.0 - p) / 2.0
    else:
        models["zeta"] = scenario.dgp.zeta
    return models


def _needed_models(estimators: Sequence[str]) -> Dict[str, bool]:
    wants = set(estimators)
    return {
        "f": bool(wants & {DML4SSI, PLUGIN, SSAC}),
        "f_no_h": DML_NAIVE in wants,
        "m": bool(wants & {DML4SSI, SSAC, DML_NAIVE, HT_NAIVE}),
    }


def _estimate_one(
    scenario: Scenario,
    estimator: str,
    traj: Trajectory,
    models: Dict[str, object],
) -> Tuple[float, PhiSeries]:
    zeta = models["zeta"]
    if estimator == DML4SSI:
        nuis = NuisanceSet(models["f"], models["m"], zeta, True)
        if scenario.is_switchback:
            return psi_gate_dml(traj, nuis, scenario.dgp.design)
        return psi_ade_dml(traj, nuis)
    if estimator == PLUGIN:
        nuis = NuisanceSet(models["f"], models.get("m") or ConstantPropensity(0.5), zeta, True)
        if scenario.is_switchback:
            return psi_gate_plugin(traj, nuis, scenario.dgp.design)
        return psi_plugin(traj, nuis)
    if estimator == SSAC:
        nuis = NuisanceSet(models["f"], models["m"], zeta, True)
        return psi_ssac(traj, nuis)
    if estimator == DML_NAIVE:
        nuis = NuisanceSet(models["f_no_h"], models["m"], zeta, False)
        return psi_dml_naive(traj, nuis)
    if estimator == HT_NAIVE:
        return psi_ht_naive(traj, models["m"])
    if estimator == SB_HT:
        return psi_sb_ht(traj, scenario.dgp.design)
    raise ValueError(f"unknown estimator {estimator!r}")


def run_replication(scenario: Scenario, index: int) -> ReplicationResult:
    """Execute one full replication on streams derived from (base_seed, index)."""
    if index < 0:
        raise ValueError("replication index must be nonnegative")
    root = scenario.root_stream()
    base = index * STAGES_PER_REPLICATION
    aux_stream = derive_stream(root, base + STAGE_AUX_SIM)
    fit_stream = derive_stream(root, base + STAGE_FOREST_FIT)
    inf_stream = derive_stream(root, base + STAGE_INFERENCE_SIM)

    if scenario.is_switchback:
        aux = simulate_switchback_dgp(scenario.dgp, scenario.aux_T, aux_stream)
        traj = simulate_switchback_dgp(scenario.dgp, scenario.T, inf_stream)
    else:
        aux = simulate_ade_dgp(scenario.dgp, scenario.aux_T, aux_stream)
        traj = simulate_ade_dgp(scenario.dgp, scenario.T, inf_stream)

    psi_star = _truth(scenario)
    needs = _needed_models(scenario.estimators)
    models = _fit_nuisances(scenario, aux, fit_stream, needs)

    reports: Dict[str, EstimateReport] = {}
    covered: Dict[str, bool] = {}
    errors: Dict[str, str] = {}
    for est in scenario.estimators:
        try:
            psi_hat, phis = _estimate_one(scenario, est, traj, models)
            method = scenario.variance_method(est)
            sigma2, degenerate = variance_for(
                method, phis, traj=traj, propensity=models.get("m")
            )
            lo, hi = confidence_interval(
                psi_hat, max(sigma2, 0.0), scenario.T, scenario.alpha
            )
            reports[est] = EstimateReport(
                estimator=est,
                psi_hat=psi_hat,
                sigma2_hat=sigma2,
                ci_low=lo,
                ci_high=hi,
                alpha=scenario.alpha,
                T=scenario.T,
                degenerate=degenerate,
            )
            covered[est] = bool(lo <= psi_star <= hi)
        except Exception as exc:  # noqa: BLE001 - per-estimator isolation
            errors[est] = f"{type(exc).__name__}: {exc}"
    return ReplicationResult(
        index=index, psi_star=psi_star, reports=reports, covered=covered, errors=errors
    )


def _replicate_job(args: Tuple[Scenario, int]) -> ReplicationResult:
    scenario, index = args
    return run_replication(scenario, index)


def run_experiment(scenario: Scenario) -> ExperimentReport:
    """Run R replications (up to ``jobs`` concurrently) and aggregate."""
    start = time.perf_counter()
    indices = list(range(scenario.R))
    if scenario.jobs > 1:
        with ProcessPoolExecutor(max_workers=scenario.jobs) as pool:
            results = list(pool.map(_replicate_job, [(scenario, i) for i in indices]))
    else:
        results = [run_replication(scenario, i) for i in indices]
    results.sort(key=lambda r: r.index)
    if all(not r.reports for r in results):
        details = results[0].errors if results else {}
        raise RuntimeError(f"every replication failed; first errors: {details}")

    psi_star = results[0].psi_star
    summaries: Dict[str, EstimatorSummary] = {}
    for est in scenario.estimators:
        reps = [r for r in results if est in r.reports]
        if not reps:
            continue
        n = len(reps)
        biases = np.array([r.reports[est].psi_hat - psi_star for r in reps])
        widths = np.array(
            [r.reports[est].ci_high - r.reports[est].ci_low for r in reps]
        )
        cov_flags = np.array([r.covered[est] for r in reps], dtype=np.float64)
        mean_bias = fsum(biases) / n
        bias_sd = float(np.std(biases, ddof=1)) if n > 1 else 0.0
        coverage = fsum(cov_flags) / n
        summaries[est] = EstimatorSummary(
            estimator=est,
            n=n,
            mean_bias=mean_bias,
            bias_sd=bias_sd,
            mc_se=bias_sd / math.sqrt(n),
            coverage=coverage,
            coverage_se=math.sqrt(coverage * (1.0 - coverage) / n),
            mean_ci_width=fsum(widths) / n,
            n_degenerate=sum(r.reports[est].degenerate for r in reps),
        )
    return ExperimentReport(
        scenario=scenario,
        psi_star=psi_star,
        summaries=summaries,
        replications=results,
        wall_clock_s=time.perf_counter() - start,
    )


def coverage_sweep(
    scenario: Scenario, T_grid: Sequence[int]
) -> List[ExperimentReport]:
    """One experiment per horizon T, aux_T tracking T, isolated streams."""
    grid = list(T_grid)
    if not grid:
        raise ValueError("T grid must be nonempty")
    if any(t < 1 for t in grid) or sorted(grid) != grid:
        raise ValueError("T grid must be increasing positive integers")
    out = []
    for g, T in enumerate(grid):
        sub = replace(scenario, T=T, aux_T=T, root_stream_id=g + 1)
        out.append(run_experiment(sub))
    return out


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


REPLICATION_COLUMNS = (
    "replication",
    "estimator",
    "psi_hat",
    "sigma2_hat",
    "ci_low",
    "ci_high",
    "covered",
    "psi_star",
    "degenerate",
)

SUMMARY_COLUMNS = (
    "estimator",
    "T",
    "R",
    "mean_bias",
    "bias_sd",
    "mc_se",
    "coverage",
    "coverage_se",
    "mean_ci_width",
)


def emit_csv(report: ExperimentReport, destination: str, suffix: str = "") -> Tuple[str, str]:
    """Write replications{suffix}.csv and summary{suffix}.csv under ``destination``."""
    try:
        os.makedirs(destination, exist_ok=True)
        rep_path = os.path.join(destination, f"replications{suffix}.csv")
        sum_path = os.path.join(destination, f"summary{suffix}.csv")
        scenario = report.scenario
        with open(rep_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(REPLICATION_COLUMNS)
            for r in report.replications:
                for est in scenario.estimators:
                    if est not in r.reports:
                        continue
                    er = r.reports[est]
                    w.writerow(
                        [
                            r.index,
                            est,
                            _fmt(er.psi_hat),
                            _fmt(er.sigma2_hat),
                            _fmt(er.ci_low),
                            _fmt(er.ci_high),
                            int(r.covered[est]),
                            _fmt(r.psi_star),
                            int(er.degenerate),
                        ]
                    )
        with open(sum_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_COLUMNS)
            for est in scenario.estimators:
                if est not in report.summaries:
                    continue
                s = report.summaries[est]
                w.writerow(
                    [
                        est,
                        scenario.T,
                        s.n,
                        _fmt(s.mean_bias),
                        _fmt(s.bias_sd),
                        _fmt(s.mc_se),
                        _fmt(s.coverage),
                        _fmt(s.coverage_se),
                        _fmt(s.mean_ci_width),
                    ]
                )
        return rep_path, sum_path
    except OSError as exc:
        raise OSError(f"failed writing CSV under {destination!r}: {exc}") from exc
