"""Nuisance models: fitted forests and closed-form oracles.

Outcome models map (d, x, h) to a conditional mean outcome; propensity
models map x to a treatment probability inside [zeta, 1 - zeta]. Both
come in two flavors with one interface: forest fits on auxiliary
trajectories, and oracles that evaluate the simulators' own formulas.
Estimators only use the vectorized ``predict_series`` methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import Trajectory, validate_trajectory
from .dgp import (
    AdeDgpConfig,
    SwitchbackDgpConfig,
    ade_outcome_mean,
    propensity_true,
)
from .forest import ForestParams, RegressionForest, fit_regression_forest


@dataclass(frozen=True)
class OutcomeForestModel:
    """Forest outcome model over features [d | x | h?].

    When ``includes_shared_state`` is false the h argument is ignored
    by construction (it was never a feature).
    """

    forest: RegressionForest
    includes_shared_state: bool

    def predict_series(
        self, d: np.ndarray, x: np.ndarray, h: Optional[np.ndarray]
    ) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64).reshape(-1, 1)
        cols = [d, np.asarray(x, dtype=np.float64)]
        if self.includes_shared_state:
            cols.append(np.asarray(h, dtype=np.float64))
        return self.forest.predict(np.hstack(cols))

    def __call__(self, d, x, h) -> float:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        h = None if h is None else np.atleast_2d(np.asarray(h, dtype=np.float64))
        return float(self.predict_series(np.array([d]), x, h)[0])


@dataclass(frozen=True)
class PropensityForestModel:
    """Forest regression of treatment on covariates, clipped."""

    forest: RegressionForest
    zeta: float

    def predict_series(self, x: np.ndarray) -> np.ndarray:
        raw = self.forest.predict(np.asarray(x, dtype=np.float64))
        return np.clip(raw, self.zeta, 1.0 - self.zeta)

    def __call__(self, x) -> float:
        return float(self.predict_series(np.atleast_2d(x))[0])


@dataclass(frozen=True)
class OracleAdeOutcome:
    cfg: AdeDgpConfig
    includes_shared_state: bool = True

    def predict_series(self, d, x, h) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        return ade_outcome_mean(self.cfg, d, x[:, 0], h[:, 0])

    def __call__(self, d, x, h) -> float:
        x = np.atleast_2d(x)
        h = np.atleast_2d(h)
        return float(self.predict_series(np.array([d], dtype=np.float64), x, h)[0])


@dataclass(frozen=True)
class OracleAdePropensity:
    cfg: AdeDgpConfig

    def predict_series(self, x) -> np.ndarray:
        return propensity_true(np.asarray(x, dtype=np.float64)[:, 0], self.cfg.zeta)

    def __call__(self, x) -> float:
        return float(self.predict_series(np.atleast_2d(x))[0])


@dataclass(frozen=True)
class OracleSwitchbackOutcome:
    """Noise-free switchback outcome mean as a function of (d, x, h).

    The spillover term reads the m lagged treatments from the leading
    components of h, so counterfactual all-ones/all-zeros windows are
    evaluated by substituting those components.
    """

    cfg: SwitchbackDgpConfig
    includes_shared_state: bool = True

    def predict_series(self, d, x, h) -> np.ndarray:
        cfg = self.cfg
        d = np.asarray(d, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        m = cfg.design.m
        out = (
            np.sin(2.0 * np.pi * x[:, 0])
            + cfg.direct_coef * d
            + cfg.intercept
        )
        if m > 0:
            spill = np.exp(-h[:, :m] / cfg.spill_scale).mean(axis=1)
            out = out + cfg.spill_coef * spill
        return out

    def __call__(self, d, x, h) -> float:
        x = np.atleast_2d(x)
        h = np.atleast_2d(h)
        return float(self.predict_series(np.array([d], dtype=np.float64), x, h)[0])


@dataclass(frozen=True)
class OracleAdeMarginalOutcome:
    """E[Y | d, x] with the shared state integrated out (stationary mean 1)."""

    cfg: AdeDgpConfig
    includes_shared_state: bool = False

    def predict_series(self, d, x, h=None) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        return ade_outcome_mean(self.cfg, d, x[:, 0], np.ones_like(d))

    def __call__(self, d, x, h=None) -> float:
        x = np.atleast_2d(x)
        return float(self.predict_series(np.array([d], dtype=np.float64), x)[0])


@dataclass(frozen=True)
class OracleSwitchbackMarginalOutcome:
    """E[Y | d, x] with lagged treatments integrated over the design marginal."""

    cfg: SwitchbackDgpConfig
    includes_shared_state: bool = False

    def predict_series(self, d, x, h=None) -> np.ndarray:
        cfg = self.cfg
        d = np.asarray(d, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        p = cfg.design.treat_prob
        spill = p * math.exp(-1.0 / cfg.spill_scale) + (1.0 - p)
        out = np.sin(2.0 * np.pi * x[:, 0]) + cfg.direct_coef * d + cfg.intercept
        if cfg.design.m > 0:
            out = out + cfg.spill_coef * spill
        return out

    def __call__(self, d, x, h=None) -> float:
        x = np.atleast_2d(x)
        return float(self.predict_series(np.array([d], dtype=np.float64), x)[0])


@dataclass(frozen=True)
class ConstantPropensity:
    """Known design propensity (switchback experiments)."""

    p: float

    def predict_series(self, x) -> np.ndarray:
        return np.full(np.atleast_2d(x).shape[0], self.p)

    def __call__(self, x) -> float:
        return self.p


OutcomeModel = Union[
    OutcomeForestModel,
    OracleAdeOutcome,
    OracleSwitchbackOutcome,
    OracleAdeMarginalOutcome,
    OracleSwitchbackMarginalOutcome,
]
PropensityModel = Union[PropensityForestModel, OracleAdePropensity, ConstantPropensity]


@dataclass(frozen=True)
class NuisanceSet:
    """The (f, m) pair an estimator consumes."""

    f: OutcomeModel
    m: PropensityModel
    zeta: float
    includes_shared_state: bool

    def __post_init__(self) -> None:
        if not 0.0 < self.zeta < 0.5:
            raise ValueError(f"zeta must lie in (0, 0.5), got {self.zeta}")


def _check_aux(aux: Trajectory) -> None:
    problems = validate_trajectory(aux)
    if problems:
        raise ValueError(
            "auxiliary trajectory fails validation: " + "; ".join(problems[:5])
        )


def fit_outcome_model(
    aux: Trajectory, include_shared_state: bool, params: ForestParams
) -> OutcomeForestModel:
    """Fit the outcome forest on (d, x[, h]) -> y rows of ``aux``."""
    _check_aux(aux)
    cols = [aux.d.reshape(-1, 1).astype(np.float64), aux.x]
    if include_shared_state:
        cols.append(aux.h)
    features = np.hstack(cols)
    forest = fit_regression_forest(features, aux.y, params)
    return OutcomeForestModel(forest=forest, includes_shared_state=include_shared_state)


def fit_propensity_model(
    aux: Trajectory, zeta: float, params: ForestParams
) -> PropensityForestModel:
    """Fit the propensity forest on x -> d rows of ``aux``, clipped."""
    if not 0.0 < zeta < 0.5:
        raise ValueError(f"zeta must lie in (0, 0.5), got {zeta}")
    _check_aux(aux)
    forest = fit_regression_forest(aux.x, aux.d.astype(np.float64), params)
    return PropensityForestModel(forest=forest, zeta=zeta)


def oracle_nuisances(cfg) -> NuisanceSet:
    """True (f*, m*) for a built-in DGP config."""
    if isinstance(cfg, AdeDgpConfig):
        return NuisanceSet(
            f=OracleAdeOutcome(cfg),
            m=OracleAdePropensity(cfg),
            zeta=cfg.zeta,
            includes_shared_state=True,
        )
    if isinstance(cfg, SwitchbackDgpConfig):
        p = cfg.design.treat_prob
        return NuisanceSet(
            f=OracleSwitchbackOutcome(cfg),
            m=ConstantPropensity(p),
            zeta=min(p, 1.0 - p) / 2.0,
            includes_shared_state=True,
        )
    raise TypeError(f"unsupported config type {type(cfg).__name__}")
