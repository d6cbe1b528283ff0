"""Point estimators: the debiased estimators and their comparators.

Every estimator produces a per-time-step score series phi and the point
estimate is exactly the compensated mean of that series, so variance
estimation downstream always works from the same object.

Labels: ``dml4ssi`` (debiased estimator, direct-effect or switchback
global-effect form), ``plugin`` (regression difference only),
``ht-naive`` (inverse-propensity difference in means), ``dml-naive``
(iid-style AIPW without the shared state), ``ssac`` (shared state as
covariates; identical arithmetic to the direct-effect estimator), and
``sb-ht`` (window Horvitz-Thompson switchback estimator).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import Observation, Regime, SwitchbackDesign, Trajectory
from .dgp import switchback_window_prob, window_prob_series
from .nuisance import NuisanceSet, PropensityModel
from .rng import fsum

DML4SSI = "dml4ssi"
PLUGIN = "plugin"
HT_NAIVE = "ht-naive"
DML_NAIVE = "dml-naive"
SSAC = "ssac"
SB_HT = "sb-ht"

ALL_ESTIMATORS = (DML4SSI, PLUGIN, HT_NAIVE, DML_NAIVE, SSAC, SB_HT)


@dataclass(frozen=True)
class PhiSeries:
    """Per-time-step scores phi(W_t; eta) for one estimator."""

    values: np.ndarray
    estimator: str
    regime: Regime
    m: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "values", np.asarray(self.values, dtype=np.float64)
        )
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite phi values for estimator {self.estimator}")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    def mean(self) -> float:
        return fsum(self.values) / self.T


def _series(traj: Trajectory, values: np.ndarray, label: str) -> Tuple[float, PhiSeries]:
    m = traj.regime.m if traj.regime.m is not None else None
    phis = PhiSeries(values=values, estimator=label, regime=traj.regime, m=m)
    return phis.mean(), phis


def phi_ade(obs: Observation, nuis: NuisanceSet) -> float:
    """Debiased direct-effect score for one observation.

    [f(1,x,h) - f(0,x,h)] + [d/m(x) - (1-d)/(1-m(x))] * [y - f(d,x,h)].
    """
    f1 = nuis.f(1.0, obs.x, obs.h)
    f0 = nuis.f(0.0, obs.x, obs.h)
    fd = f1 if obs.d == 1 else f0
    mx = nuis.m(obs.x)
    w = obs.d / mx - (1 - obs.d) / (1.0 - mx)
    out = (f1 - f0) + w * (obs.y - fd)
    if not np.isfinite(out):
        raise ValueError("non-finite nuisance output in phi_ade")
    return float(out)


def _ade_phi_values(traj: Trajectory, nuis: NuisanceSet) -> np.ndarray:
    ones = np.ones(traj.T)
    zeros = np.zeros(traj.T)
    h = traj.h if nuis.includes_shared_state else None
    f1 = nuis.f.predict_series(ones, traj.x, h)
    f0 = nuis.f.predict_series(zeros, traj.x, h)
    d = traj.d.astype(np.float64)
    fd = np.where(traj.d == 1, f1, f0)
    mx = nuis.m.predict_series(traj.x)
    w = d / mx - (1.0 - d) / (1.0 - mx)
    return (f1 - f0) + w * (traj.y - fd)


def psi_ade_dml(traj: Trajectory, nuis: NuisanceSet) -> Tuple[float, PhiSeries]:
    """Debiased average-direct-effect estimate with its score series."""
    return _series(traj, _ade_phi_values(traj, nuis), DML4SSI)


def psi_plugin(traj: Trajectory, nuis: NuisanceSet) -> Tuple[float, PhiSeries]:
    """Regression-difference estimate: mean of f(1,x,h) - f(0,x,h)."""
    ones = np.ones(traj.T)
    zeros = np.zeros(traj.T)
    h = traj.h if nuis.includes_shared_state else None
    values = nuis.f.predict_series(ones, traj.x, h) - nuis.f.predict_series(
        zeros, traj.x, h
    )
    return _series(traj, values, PLUGIN)


def psi_ht_naive(
    traj: Trajectory, propensity: PropensityModel
) -> Tuple[float, PhiSeries]:
    """Inverse-propensity difference in means."""
    d = traj.d.astype(np.float64)
    mx = propensity.predict_series(traj.x)
    values = (d / mx - (1.0 - d) / (1.0 - mx)) * traj.y
    return _series(traj, values, HT_NAIVE)


def psi_dml_naive(traj: Trajectory, nuis_no_h: NuisanceSet) -> Tuple[float, PhiSeries]:
    """AIPW with an outcome model that omits the shared state."""
    if nuis_no_h.includes_shared_state:
        raise ValueError("psi_dml_naive requires a no-shared-state nuisance set")
    values = _ade_phi_values(traj, nuis_no_h)
    return _series(traj, values, DML_NAIVE)


def _require_design(traj: Trajectory, design: Optional[SwitchbackDesign]):
    design = design if design is not None else traj.design
    if design is None:
        raise ValueError("switchback estimator requires a design")
    return design


def _window_indicators(traj: Trajectory, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """All-ones / all-zeros indicators of the windows D_{(t-m):t}."""
    lag = traj.h[:, :m]
    ones = (traj.d == 1) & np.all(lag == 1.0, axis=1)
    zeros = (traj.d == 0) & np.all(lag == 0.0, axis=1)
    return ones.astype(np.float64), zeros.astype(np.float64)


def _window_prob_arrays(
    design: SwitchbackDesign, T: int
) -> Tuple[np.ndarray, np.ndarray]:
    pi1 = window_prob_series(design, T, "all-ones")
    pi0 = window_prob_series(design, T, "all-zeros")
    if np.any(pi1 <= 0.0) or np.any(pi0 <= 0.0):
        raise ValueError("design yields a zero window probability")
    return pi1, pi0


def phi_gate(
    traj: Trajectory, t: int, nuis: NuisanceSet, design: SwitchbackDesign = None
) -> float:
    """Debiased global-effect score at time step t (1-based).

    The plug-in term contrasts the counterfactual shared states h_t(1)
    and h_t(0), which substitute all-ones/all-zeros for the lagged
    treatment components of h while keeping the observed covariate
    components; the debias weight is the window Horvitz-Thompson term.
    """
    design = _require_design(traj, design)
    if not 1 <= t <= traj.T:
        raise ValueError(f"t must lie in 1..{traj.T}, got {t}")
    m = design.m
    i = t - 1
    x = traj.x[i : i + 1]
    h = traj.h[i : i + 1]
    h1 = h.copy()
    h0 = h.copy()
    h1[:, :m] = 1.0
    h0[:, :m] = 0.0
    f1 = float(nuis.f.predict_series(np.array([1.0]), x, h1)[0])
    f0 = float(nuis.f.predict_series(np.array([0.0]), x, h0)[0])
    fd = float(nuis.f.predict_series(np.array([float(traj.d[i])]), x, h)[0])

    pi1 = switchback_window_prob(design, t, "all-ones")
    pi0 = switchback_window_prob(design, t, "all-zeros")
    if pi1 <= 0.0 or pi0 <= 0.0:
        raise ValueError("design yields a zero window probability")
    lag = traj.h[i, :m]
    ind1 = float(traj.d[i] == 1 and np.all(lag == 1.0))
    ind0 = float(traj.d[i] == 0 and np.all(lag == 0.0))
    out = (f1 - f0) + (ind1 / pi1 - ind0 / pi0) * (traj.y[i] - fd)
    if not np.isfinite(out):
        raise ValueError("non-finite nuisance output in phi_gate")
    return float(out)


def psi_gate_dml(
    traj: Trajectory, nuis: NuisanceSet, design: SwitchbackDesign = None
) -> Tuple[float, PhiSeries]:
    """Debiased switchback global-effect estimate."""
    design = _require_design(traj, design)
    m = design.m
    T = traj.T
    h1 = traj.h.copy()
    h0 = traj.h.copy()
    h1[:, :m] = 1.0
    h0[:, :m] = 0.0
    f1 = nuis.f.predict_series(np.ones(T), traj.x, h1)
    f0 = nuis.f.predict_series(np.zeros(T), traj.x, h0)
    fd = nuis.f.predict_series(traj.d.astype(np.float64), traj.x, traj.h)
    pi1, pi0 = _window_prob_arrays(design, T)
    ind1, ind0 = _window_indicators(traj, m)
    values = (f1 - f0) + (ind1 / pi1 - ind0 / pi0) * (traj.y - fd)
    return _series(traj, values, DML4SSI)


def psi_gate_plugin(
    traj: Trajectory, nuis: NuisanceSet, design: SwitchbackDesign = None
) -> Tuple[float, PhiSeries]:
    """Regression-difference global-effect estimate at counterfactual windows.

    Mean of f(1, x_t, h_t(1)) - f(0, x_t, h_t(0)); the debiased
    estimator minus its Horvitz-Thompson correction term.
    """
    design = _require_design(traj, design)
    m = design.m
    T = traj.T
    h1 = traj.h.copy()
    h0 = traj.h.copy()
    h1[:, :m] = 1.0
    h0[:, :m] = 0.0
    values = nuis.f.predict_series(np.ones(T), traj.x, h1) - nuis.f.predict_series(
        np.zeros(T), traj.x, h0
    )
    return _series(traj, values, PLUGIN)


def psi_sb_ht(
    traj: Trajectory, design: SwitchbackDesign = None
) -> Tuple[float, PhiSeries]:
    """Window Horvitz-Thompson switchback estimate."""
    design = _require_design(traj, design)
    pi1, pi0 = _window_prob_arrays(design, traj.T)
    ind1, ind0 = _window_indicators(traj, design.m)
    values = (ind1 / pi1 - ind0 / pi0) * traj.y
    return _series(traj, values, SB_HT)


def psi_ssac(traj: Trajectory, nuis: NuisanceSet) -> Tuple[float, PhiSeries]:
    """Shared-state-as-covariates estimate.

    Identical arithmetic to the direct-effect estimator (observed h,
    single-unit propensity); on switchback data it targets a different
    estimand than the global effect.
    """
    return _series(traj, _ade_phi_values(traj, nuis), SSAC)
