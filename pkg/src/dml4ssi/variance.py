"""Variance estimators for score series and CI construction.

The two serial-dependence-aware estimators are batch means (for the
geometric-ergodic regime) and an m-dependent plug-in (for the
m-dependent regime). The iid plug-in and the inverse-propensity
group-mean variance exist as comparators. All return an estimate of
the asymptotic variance sigma2 of sqrt(T) * (psi_hat - psi), so the
confidence interval is psi_hat +/- z * sqrt(sigma2 / T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .core import Trajectory
from .estimators import PhiSeries
from .nuisance import PropensityModel
from .rng import fsum, z_quantile

DEFAULT_THETA = 2.0 / 3.0

BATCH_MEANS = "batch-means"
M_DEPENDENT = "m-dependent"
IID_PLUGIN = "iid-plugin"
HT_PLUGIN = "ht-plugin"

VARIANCE_KINDS = (BATCH_MEANS, M_DEPENDENT, IID_PLUGIN, HT_PLUGIN)


@dataclass(frozen=True)
class VarianceMethod:
    """Which variance estimator to apply, with its parameter."""

    kind: str
    theta: float = DEFAULT_THETA
    m: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in VARIANCE_KINDS:
            raise ValueError(f"unknown variance kind {self.kind!r}")
        if self.kind == BATCH_MEANS and not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.kind == M_DEPENDENT:
            if self.m is None or self.m < 0:
                raise ValueError("m-dependent variance needs m >= 0")


def _values(phis: Union[PhiSeries, np.ndarray]) -> np.ndarray:
    if isinstance(phis, PhiSeries):
        return phis.values
    return np.asarray(phis, dtype=np.float64)


def var_batch_means(
    phis: Union[PhiSeries, np.ndarray], theta: float = DEFAULT_THETA
) -> float:
    """Batch-means long-run variance from non-overlapping block sums.

    T2 = floor(T^theta) points per block, T1 = floor(T / T2) blocks;
    block sums are compared against T2 times the full-sample mean, so a
    trailing remainder shorter than T2 contributes to the mean but not
    to any block.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    v = _values(phis)
    T = v.shape[0]
    T2 = int(math.floor(T**theta))
    if T2 < 1:
        raise ValueError("series too short for batch means")
    T1 = T // T2
    if T1 < 2:
        raise ValueError(
            f"series too short for batch means: T={T}, theta={theta} gives {T1} block(s)"
        )
    psi_bar = fsum(v) / T
    target = T2 * psi_bar
    acc = 0.0
    for j in range(T1):
        dev = fsum(v[j * T2 : (j + 1) * T2]) - target
        acc += dev * dev
    return acc / (T2 * (T1 - 1))


def var_mdep(phis: Union[PhiSeries, np.ndarray], m: int) -> Tuple[float, bool]:
    """m-dependent plug-in long-run variance, with a degeneracy flag.

    (1/T) sum_t [(phi_t - psi_bar)^2
                 + 2 sum_{i=1..min(t-1,m)} (phi_t - psi_bar)(phi_{t-i} - psi_bar)].
    Finite samples can make this negative; the raw value is returned
    together with a flag and only clamped at CI construction.
    """
    if m < 0:
        raise ValueError(f"m must be nonnegative, got {m}")
    v = _values(phis)
    T = v.shape[0]
    if T < m + 1:
        raise ValueError(f"need T >= m + 1, got T={T}, m={m}")
    c = v - fsum(v) / T
    total = float(np.dot(c, c))
    for i in range(1, m + 1):
        total += 2.0 * float(np.dot(c[i:], c[:-i]))
    value = total / T
    return value, value < 0.0


def var_iid_plugin(phis: Union[PhiSeries, np.ndarray]) -> float:
    """Plain plug-in variance (1/T) sum (phi_t - psi_bar)^2."""
    v = _values(phis)
    T = v.shape[0]
    c = v - fsum(v) / T
    return float(np.dot(c, c)) / T


def var_ht(traj: Trajectory, propensity: PropensityModel) -> float:
    """Inverse-propensity variance with literal cross-group centering.

    (1/T) sum_t [d/m(x) * (y - ybar0) - (1-d)/(1-m(x)) * (y - ybar1)]^2
    where ybar_l is the mean outcome in treatment group l. Treated
    residuals are taken against the control mean and vice versa.
    """
    d = traj.d
    y = traj.y
    n1 = int(np.sum(d == 1))
    n0 = traj.T - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("both treatment groups must be nonempty")
    ybar1 = fsum(y[d == 1]) / n1
    ybar0 = fsum(y[d == 0]) / n0
    mx = propensity.predict_series(traj.x)
    df = d.astype(np.float64)
    term = df / mx * (y - ybar0) - (1.0 - df) / (1.0 - mx) * (y - ybar1)
    return float(np.dot(term, term)) / traj.T


def confidence_interval(
    psi_hat: float, sigma2: float, T: int, alpha: float
) -> Tuple[float, float]:
    """Two-sided normal interval psi_hat +/- z_{1-alpha/2} sqrt(sigma2/T)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if sigma2 < 0.0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    if T < 1:
        raise ValueError(f"T must be positive, got {T}")
    half = z_quantile(alpha) * math.sqrt(sigma2 / T)
    return psi_hat - half, psi_hat + half


def variance_for(
    method: VarianceMethod,
    phis: PhiSeries,
    traj: Optional[Trajectory] = None,
    propensity: Optional[PropensityModel] = None,
) -> Tuple[float, bool]:
    """Apply ``method`` to a score series; returns (sigma2, degenerate)."""
    if method.kind == BATCH_MEANS:
        return var_batch_means(phis, method.theta), False
    if method.kind == M_DEPENDENT:
        return var_mdep(phis, method.m)
    if method.kind == IID_PLUGIN:
        return var_iid_plugin(phis), False
    if method.kind == HT_PLUGIN:
        if traj is None or propensity is None:
            raise ValueError("ht-plugin variance needs the trajectory and propensity")
        return var_ht(traj, propensity), False
    raise ValueError(f"unknown variance kind {method.kind!r}")
