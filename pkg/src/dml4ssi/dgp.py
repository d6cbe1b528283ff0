"""Synthetic data-generating processes and their true estimands.

Two structural models are built in:

* an observational model where a scalar shared state follows an AR(1)
  recursion and enters outcomes through a treatment interaction, used
  for average-direct-effect (ADE) estimation;
* a switchback experiment where the shared state is the window of
  lagged treatments and covariates, and past treatments spill into
  outcomes through an exponential decay, used for global-effect (GATE)
  estimation.

Both expose closed-form conditional outcome means (the oracle nuisance
functions live in :mod:`dml4ssi.nuisance` on top of these) and analytic
true effects with Monte Carlo cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .core import (
    Regime,
    SwitchbackDesign,
    Trajectory,
    geometric_ergodic,
    m_dependent,
)
from .rng import RngStream, derive_stream

H0_DETERMINISTIC = "deterministic"
H0_STATIONARY = "stationary-draw"


@dataclass(frozen=True)
class AdeDgpConfig:
    """Observational shared-state model.

    Covariates are iid Normal(x_mean, x_sd^2); treatment is Bernoulli of
    the first covariate clipped to [zeta, 1-zeta]; the shared state runs
    an AR(1) around its fixed point 1; outcomes are
    sin(2*pi*x_1) + direct_coef*d + interaction_coef*h*d + intercept
    plus Normal(0, y_noise_sd^2) noise.
    """

    p_x: int = 10
    x_mean: float = 1.0
    x_sd: float = 1.0
    zeta: float = 0.1
    ar_coef: float = 0.75
    h_noise_sd: float = 1.0
    y_noise_sd: float = math.sqrt(0.1)
    h0_mode: str = H0_DETERMINISTIC
    h0_value: float = 1.0
    direct_coef: float = 2.0
    interaction_coef: float = 2.0
    intercept: float = -1.0

    def __post_init__(self) -> None:
        if self.p_x < 1:
            raise ValueError(f"p_x must be positive, got {self.p_x}")
        if not 0.0 < self.zeta < 0.5:
            raise ValueError(f"zeta must lie in (0, 0.5), got {self.zeta}")
        if not abs(self.ar_coef) < 1.0:
            raise ValueError(f"|ar_coef| must be < 1, got {self.ar_coef}")
        if self.x_sd <= 0:
            raise ValueError(f"x_sd must be positive, got {self.x_sd}")
        if self.h_noise_sd < 0 or self.y_noise_sd < 0:
            raise ValueError("noise standard deviations must be nonnegative")
        if self.h0_mode not in (H0_DETERMINISTIC, H0_STATIONARY):
            raise ValueError(f"unknown h0_mode {self.h0_mode!r}")


@dataclass(frozen=True)
class SwitchbackDgpConfig:
    """Switchback experiment model.

    Covariates are iid Uniform[0,1]^{p_x}; treatments come from the
    block design; the shared state at t is the vector of the m lagged
    treatments followed by the m lagged first covariates. Outcomes are
    sin(2*pi*x_1) + direct_coef*d
    + spill_coef * mean_{i=1..m} exp(-d_{t-i}/spill_scale) + intercept
    plus Normal(0, y_noise_sd^2) noise (the spillover average is 0 when
    m = 0).
    """

    p_x: int = 1
    design: SwitchbackDesign = field(default_factory=SwitchbackDesign)
    y_noise_sd: float = math.sqrt(0.1)
    spill_coef: float = 2.0
    spill_scale: float = 3.0
    direct_coef: float = 2.0
    intercept: float = -1.0

    def __post_init__(self) -> None:
        if self.p_x < 1:
            raise ValueError(f"p_x must be positive, got {self.p_x}")
        if self.y_noise_sd < 0:
            raise ValueError("y_noise_sd must be nonnegative")
        if self.spill_scale <= 0:
            raise ValueError(f"spill_scale must be positive, got {self.spill_scale}")


DgpConfig = Union[AdeDgpConfig, SwitchbackDgpConfig]


@dataclass(frozen=True)
class TruthSpec:
    """A true estimand value and how it was obtained."""

    psi_star: float
    method: str
    se: Optional[float] = None
    R: Optional[int] = None


def ar1_step(h_prev: float, noise: float, cfg: AdeDgpConfig) -> float:
    """One shared-state transition: ar_coef*(h_prev - 1) + 1 + noise."""
    return cfg.ar_coef * (h_prev - 1.0) + 1.0 + noise


def propensity_true(x1, zeta: float):
    """Treatment probability: x1 clipped to [zeta, 1 - zeta]."""
    return np.clip(x1, zeta, 1.0 - zeta)


def ade_outcome_mean(cfg: AdeDgpConfig, d, x1, h1):
    """Noise-free conditional outcome mean of the ADE model."""
    return (
        np.sin(2.0 * np.pi * x1)
        + cfg.direct_coef * d
        + cfg.interaction_coef * h1 * d
        + cfg.intercept
    )


def stationary_h_variance(cfg: AdeDgpConfig) -> float:
    return cfg.h_noise_sd**2 / (1.0 - cfg.ar_coef**2)


def simulate_ade_dgp(cfg: AdeDgpConfig, T: int, rng: RngStream) -> Trajectory:
    """Simulate the observational model for T steps.

    Draw layout (fixed): optional stationary h0 normal, covariate block,
    shared-state noise block, treatment uniforms, outcome noise block.
    """
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    s = rng.sampler()

    if cfg.h0_mode == H0_STATIONARY:
        h0 = float(s.normals(1, 1.0, math.sqrt(stationary_h_variance(cfg)))[0])
    else:
        h0 = cfg.h0_value

    x = s.normals(T * cfg.p_x, cfg.x_mean, cfg.x_sd).reshape(T, cfg.p_x)
    h_noise = s.normals(T, 0.0, cfg.h_noise_sd)
    d = s.bernoulli(propensity_true(x[:, 0], cfg.zeta))
    y_noise = s.normals(T, 0.0, cfg.y_noise_sd)

    h = np.empty(T)
    prev = h0
    for t in range(T):
        prev = ar1_step(prev, h_noise[t], cfg)
        h[t] = prev

    y = ade_outcome_mean(cfg, d, x[:, 0], h) + y_noise
    return Trajectory(
        h0=np.array([h0]),
        x=x,
        d=d,
        h=h.reshape(T, 1),
        y=y,
        regime=geometric_ergodic(),
    )


def draw_switchback_assignments(
    design: SwitchbackDesign, T: int, rng: RngStream
) -> Tuple[np.ndarray, int]:
    """Draw treatments for positions 1-m .. T under the block design.

    The offset o is uniform on {1..block_len}; boundaries fall at
    o, o+block_len, ...; the initial segment [1-m, o-1] is its own block
    (it may be empty when o=1 and m=0); every block is treated with
    probability treat_prob independently. Returns the length-(T+m)
    assignment vector (the first m entries are burn-in) and the offset.
    """
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    s = rng.sampler()
    ell, m = design.block_len, design.m
    offset = int(s.integers(1, ell)[0]) + 1

    positions = np.arange(1 - m, T + 1)
    # Block 0 is the initial segment; boundary j starts block j+1.
    idx = np.where(positions < offset, 0, 1 + (positions - offset) // ell)
    n_blocks = int(idx.max()) + 1
    draws = s.bernoulli(design.treat_prob, n_blocks)
    return draws[idx], offset


def switchback_window_prob(design: SwitchbackDesign, t: int, b: str) -> float:
    """Exact design probability that the window D_{(t-m):t} equals b.

    ``b`` is "all-ones" or "all-zeros". Enumerates the block_len equally
    likely offsets; for each, the window hits k distinct blocks where
    k - 1 boundaries fall strictly inside it, giving probability p^k
    (or (1-p)^k); the result is the average over offsets.
    """
    if b == "all-ones":
        p = design.treat_prob
    elif b == "all-zeros":
        p = 1.0 - design.treat_prob
    else:
        raise ValueError(f"b must be 'all-ones' or 'all-zeros', got {b!r}")
    if t < 1:
        raise ValueError(f"t must be at least 1, got {t}")

    ell, m = design.block_len, design.m
    total = 0.0
    for o in range(1, ell + 1):
        j_hi = (t - o) // ell if t >= o else -1
        j_lo = max(0, (t - m - o) // ell + 1)
        boundaries_inside = max(0, j_hi - j_lo + 1)
        total += p ** (1 + boundaries_inside)
    return total / ell


def window_prob_series(design: SwitchbackDesign, T: int, b: str) -> np.ndarray:
    """switchback_window_prob for t = 1..T as an array.

    Probabilities are periodic in t with period block_len once
    t - m >= 1, so only the first max(m + 1, block_len) + block_len
    values are enumerated directly.
    """
    head = min(T, max(m_periodic_start(design), 1) + design.block_len - 1)
    out = np.empty(T)
    for t in range(1, head + 1):
        out[t - 1] = switchback_window_prob(design, t, b)
    for t in range(head + 1, T + 1):
        out[t - 1] = out[t - 1 - design.block_len]
    return out


def m_periodic_start(design: SwitchbackDesign) -> int:
    """First t at which the window no longer reaches the initial block."""
    return design.m + 2


def _switchback_spill(d_all: np.ndarray, m: int, spill_scale: float) -> np.ndarray:
    """Per-step spillover mean_{i=1..m} exp(-d_{t-i}/spill_scale).

    ``d_all`` covers positions 1-m..T; the result covers t = 1..T.
    Zero when m = 0.
    """
    T = d_all.shape[0] - m
    if m == 0:
        return np.zeros(T)
    e1 = math.exp(-1.0 / spill_scale)
    csum = np.concatenate([[0], np.cumsum(d_all)])
    ones_in_window = csum[m : m + T] - csum[:T]
    return (ones_in_window * e1 + (m - ones_in_window) * 1.0) / m


def simulate_switchback_dgp(
    cfg: SwitchbackDgpConfig, T: int, rng: RngStream
) -> Trajectory:
    """Simulate the switchback experiment for T steps.

    Child stream 0 drives the design draw (offset and block treatments),
    child stream 1 the covariates and outcome noise. The shared state
    at t is (d_{t-m}, ..., d_{t-1}, x_{t-m,1}, ..., x_{t-1,1}); h0 is
    the state entering the first outcome.
    """
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    design = cfg.design
    m = design.m

    d_all, _offset = draw_switchback_assignments(design, T, derive_stream(rng, 0))
    s = derive_stream(rng, 1).sampler()
    x_all = s.uniforms((T + m) * cfg.p_x).reshape(T + m, cfg.p_x)
    y_noise = s.normals(T, 0.0, cfg.y_noise_sd)

    x = x_all[m:]
    d = d_all[m:]
    h = np.empty((T, 2 * m))
    for i in range(T):
        h[i, :m] = d_all[i : i + m]
        h[i, m:] = x_all[i : i + m, 0]

    spill = _switchback_spill(d_all, m, cfg.spill_scale)
    y = (
        np.sin(2.0 * np.pi * x[:, 0])
        + cfg.direct_coef * d
        + cfg.spill_coef * spill
        + cfg.intercept
        + y_noise
    )
    h0 = h[0].copy() if m > 0 else np.empty(0)
    return Trajectory(
        h0=h0,
        x=x,
        d=d,
        h=h,
        y=y,
        regime=m_dependent(m),
        design=design,
    )


def true_ade(cfg: AdeDgpConfig, T: Optional[int] = None) -> TruthSpec:
    """Analytic ADE: direct_coef + interaction_coef * average E[H_t].

    With the default fixed-point start (or a stationary draw) E[H_t] = 1
    at every t, so the defaults give exactly 4. For deterministic starts
    away from 1 the mean state decays geometrically, so the finite-T
    value depends on T; pass T for the finite-horizon truth, omit it for
    the asymptotic one.
    """
    if cfg.h0_mode == H0_STATIONARY or cfg.h0_value == 1.0:
        mean_h = 1.0
    elif T is None:
        mean_h = 1.0
    else:
        rho = cfg.ar_coef
        geom = rho * (1.0 - rho**T) / (1.0 - rho) if rho != 0.0 else 0.0
        mean_h = 1.0 + (cfg.h0_value - 1.0) * geom / T
    return TruthSpec(cfg.direct_coef + cfg.interaction_coef * mean_h, "analytic")


def oracle_true_ade(
    cfg: AdeDgpConfig, R: int, rng: RngStream, T: Optional[int] = None
) -> TruthSpec:
    """Monte Carlo ADE oracle: average f*(1,x,h) - f*(0,x,h).

    The contrast is direct_coef + interaction_coef * H_t, so it reduces
    to averaging the simulated shared state. With T given, R//T chains
    of length T are averaged (finite-horizon truth); otherwise one chain
    of length R is used with a segment-based standard error.
    """
    if T is None:
        traj = simulate_ade_dgp(cfg, R, rng)
        h = traj.h[:, 0]
        segments = np.array_split(h, 100)
        seg_means = np.array([s.mean() for s in segments])
        mean_h = float(h.mean())
        se_h = float(seg_means.std(ddof=1) / math.sqrt(len(seg_means)))
    else:
        n_chains = max(2, R // T)
        means = np.empty(n_chains)
        for r in range(n_chains):
            traj = simulate_ade_dgp(cfg, T, derive_stream(rng, r))
            means[r] = traj.h[:, 0].mean()
        mean_h = float(means.mean())
        se_h = float(means.std(ddof=1) / math.sqrt(n_chains))
    psi = cfg.direct_coef + cfg.interaction_coef * mean_h
    se = abs(cfg.interaction_coef) * se_h
    return TruthSpec(psi, "oracle-monte-carlo", se=se, R=R)


def true_gate(cfg: SwitchbackDgpConfig) -> TruthSpec:
    """Analytic GATE under all-ones vs all-zeros assignment.

    direct_coef + spill_coef * (exp(-1/spill_scale) - 1) for m >= 1;
    the spillover term drops for the degenerate m = 0 design.
    """
    if cfg.design.m == 0:
        return TruthSpec(cfg.direct_coef, "analytic")
    psi = cfg.direct_coef + cfg.spill_coef * (math.exp(-1.0 / cfg.spill_scale) - 1.0)
    return TruthSpec(psi, "analytic")


def oracle_true_gate(cfg: SwitchbackDgpConfig, R: int, rng: RngStream) -> TruthSpec:
    """Monte Carlo GATE oracle with forced assignments.

    Simulates R outcomes under an all-ones assignment sequence and R
    under all-zeros (independent draws), and differences the means.
    """
    m = cfg.design.m
    means = []
    variances = []
    for arm, fill in enumerate((1, 0)):
        s = derive_stream(rng, arm).sampler()
        x_all = s.uniforms((R + m) * cfg.p_x).reshape(R + m, cfg.p_x)
        noise = s.normals(R, 0.0, cfg.y_noise_sd)
        d_all = np.full(R + m, fill, dtype=np.int64)
        spill = _switchback_spill(d_all, m, cfg.spill_scale)
        y = (
            np.sin(2.0 * np.pi * x_all[m:, 0])
            + cfg.direct_coef * d_all[m:]
            + cfg.spill_coef * spill
            + cfg.intercept
            + noise
        )
        means.append(float(y.mean()))
        variances.append(float(y.var(ddof=1)))
    psi = means[0] - means[1]
    se = math.sqrt((variances[0] + variances[1]) / R)
    return TruthSpec(psi, "oracle-monte-carlo", se=se, R=R)


def true_effect(cfg: DgpConfig, T: Optional[int] = None) -> TruthSpec:
    """Dispatch to true_ade or true_gate by config type."""
    if isinstance(cfg, AdeDgpConfig):
        return true_ade(cfg, T=T)
    if isinstance(cfg, SwitchbackDgpConfig):
        return true_gate(cfg)
    raise TypeError(f"unsupported config type {type(cfg).__name__}")
