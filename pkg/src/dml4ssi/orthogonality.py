"""Finite-difference check of first-order nuisance insensitivity.

Perturb the oracle nuisances along a fixed bounded direction,
eta_r = eta* + r * delta, and trace the Monte Carlo estimate of
g(r) = E[psi(W; eta_r)] - E[psi(W; eta*)] over shrinking r. For an
orthogonal estimator the linear term is absent, so |g(eps)| stays
inside a quadratic envelope kappa * eps^2 fit at the largest eps; a
non-orthogonal estimator (the plug-in) decays only linearly and
escapes the envelope. Common random numbers pair each psi(eta_r) with
psi(eta*) on the same trajectory, and the envelope carries a small
multiple of the paired standard error so that pure Monte Carlo noise
is not misread as a linear term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .dgp import (
    AdeDgpConfig,
    SwitchbackDgpConfig,
    simulate_ade_dgp,
    simulate_switchback_dgp,
)
from .estimators import DML4SSI, PLUGIN, psi_ade_dml, psi_gate_dml, psi_plugin
from .nuisance import NuisanceSet, oracle_nuisances
from .rng import RngStream, derive_stream

DEFAULT_EPS = (0.2, 0.1, 0.05)
NOISE_ALLOWANCE = 3.0


def delta_outcome(d: np.ndarray, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Bounded outcome-model error direction with a treatment component."""
    out = 0.6 * np.asarray(d, dtype=np.float64) + 0.4 * np.cos(
        2.0 * np.pi * np.asarray(x, dtype=np.float64)[:, 0]
    )
    h = np.asarray(h, dtype=np.float64)
    if h.ndim == 2 and h.shape[1] > 0:
        out = out + 0.3 * np.tanh(h[:, 0])
    return out


def delta_propensity(x: np.ndarray) -> np.ndarray:
    """Bounded propensity error direction (|delta| <= 0.25)."""
    return 0.25 * np.cos(2.0 * np.pi * np.asarray(x, dtype=np.float64)[:, 0])


@dataclass(frozen=True)
class ShiftedOutcome:
    """base + r * direction(d, x, h)."""

    base: object
    r: float
    direction: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    includes_shared_state: bool = True

    def predict_series(self, d, x, h) -> np.ndarray:
        return self.base.predict_series(d, x, h) + self.r * self.direction(d, x, h)

    def __call__(self, d, x, h) -> float:
        x2 = np.atleast_2d(x)
        h2 = np.atleast_2d(h)
        return float(self.predict_series(np.array([float(d)]), x2, h2)[0])


@dataclass(frozen=True)
class ShiftedPropensity:
    """clip(base + r * direction(x), lo, 1 - lo).

    The clip guards degenerate user choices; for the default direction
    and r <= 0.2 it never binds (oracle propensities live in
    [zeta, 1 - zeta] and |r * delta| <= 0.05).
    """

    base: object
    r: float
    direction: Callable[[np.ndarray], np.ndarray]
    lo: float = 1e-3

    def predict_series(self, x) -> np.ndarray:
        raw = self.base.predict_series(x) + self.r * self.direction(x)
        return np.clip(raw, self.lo, 1.0 - self.lo)

    def __call__(self, x) -> float:
        return float(self.predict_series(np.atleast_2d(x))[0])


def perturbed_nuisances(nuis: NuisanceSet, r: float) -> NuisanceSet:
    """Shift both nuisances of ``nuis`` a distance r along the fixed directions."""
    return NuisanceSet(
        f=ShiftedOutcome(base=nuis.f, r=r, direction=delta_outcome),
        m=ShiftedPropensity(base=nuis.m, r=r, direction=delta_propensity),
        zeta=1e-3,
        includes_shared_state=nuis.includes_shared_state,
    )


@dataclass(frozen=True)
class OrthogonalityReport:
    """Result of one finite-difference sweep."""

    estimator: str
    dgp_kind: str
    eps: Tuple[float, ...]
    g_hat: Tuple[float, ...]
    se: Tuple[float, ...]
    kappa: float
    passed: bool
    R: int
    T: int

    def lines(self) -> list:
        out = [
            f"orthogonality {self.estimator} on {self.dgp_kind}: "
            f"kappa={self.kappa:.6g} R={self.R} T={self.T}"
        ]
        for e, g, s in zip(self.eps, self.g_hat, self.se):
            bound = self.kappa * e * e + NOISE_ALLOWANCE * s
            ok = "ok" if abs(g) <= bound else "VIOLATED"
            out.append(
                f"  eps={e:<5g} |g|={abs(g):.6g} envelope={bound:.6g} se={s:.3g} {ok}"
            )
        out.append(f"  -> {'PASS' if self.passed else 'FAIL'}")
        return out


def orthogonality_check(
    cfg: Union[AdeDgpConfig, SwitchbackDgpConfig],
    estimator: str,
    rng: RngStream,
    R: int = 200,
    T: int = 500,
    eps: Sequence[float] = DEFAULT_EPS,
    noise_allowance: float = NOISE_ALLOWANCE,
) -> OrthogonalityReport:
    """Run the finite-difference sweep for one estimator on one DGP."""
    if estimator not in (DML4SSI, PLUGIN):
        raise ValueError(f"orthogonality check supports dml4ssi/plugin, got {estimator!r}")
    eps = tuple(sorted((float(e) for e in eps), reverse=True))
    if len(eps) < 2 or eps[-1] <= 0.0:
        raise ValueError("need at least two positive eps values")
    is_ade = isinstance(cfg, AdeDgpConfig)
    nuis_star = oracle_nuisances(cfg)
    nuis_eps = [perturbed_nuisances(nuis_star, e) for e in eps]

    diffs = np.empty((R, len(eps)))
    for rep in range(R):
        sub = derive_stream(rng, rep)
        if is_ade:
            traj = simulate_ade_dgp(cfg, T, sub)
        else:
            traj = simulate_switchback_dgp(cfg, T, sub)
        if estimator == PLUGIN:
            base, _ = psi_plugin(traj, nuis_star)
            for j, nz in enumerate(nuis_eps):
                diffs[rep, j] = psi_plugin(traj, nz)[0] - base
        elif is_ade:
            base, _ = psi_ade_dml(traj, nuis_star)
            for j, nz in enumerate(nuis_eps):
                diffs[rep, j] = psi_ade_dml(traj, nz)[0] - base
        else:
            base, _ = psi_gate_dml(traj, nuis_star, cfg.design)
            for j, nz in enumerate(nuis_eps):
                diffs[rep, j] = psi_gate_dml(traj, nz, cfg.design)[0] - base

    g_hat = diffs.mean(axis=0)
    if R > 1:
        se = diffs.std(axis=0, ddof=1) / math.sqrt(R)
    else:
        se = np.zeros(len(eps))
    kappa = abs(g_hat[0]) / (eps[0] ** 2)
    passed = all(
        abs(g) <= kappa * e * e + noise_allowance * s
        for e, g, s in zip(eps, g_hat, se)
    )
    return OrthogonalityReport(
        estimator=estimator,
        dgp_kind="ade" if is_ade else "switchback",
        eps=eps,
        g_hat=tuple(float(g) for g in g_hat),
        se=tuple(float(s) for s in se),
        kappa=float(kappa),
        passed=passed,
        R=R,
        T=T,
    )
