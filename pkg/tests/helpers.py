"""Hand-built micro-data and constant models shared across test modules."""

import numpy as np

from dml4ssi import SwitchbackDesign, Trajectory, geometric_ergodic, m_dependent


def ar1_series(T, rho, stream):
    """Stationary AR(1) with unit innovations; long-run variance 1/(1-rho)^2."""
    eps = stream.sampler().normals(T)
    phi = np.empty(T)
    phi[0] = eps[0] / np.sqrt(1.0 - rho * rho)
    for t in range(1, T):
        phi[t] = rho * phi[t - 1] + eps[t]
    return phi


def ma1_series(T, coef, stream):
    """MA(1) with unit innovations; long-run variance (1 + coef)^2."""
    eps = stream.sampler().normals(T + 1)
    return eps[1:] + coef * eps[:-1]


def ade_traj(d, y, x1=None, h1=None):
    """One-covariate, scalar-shared-state trajectory in the ergodic regime."""
    d = np.asarray(d, dtype=np.int64)
    T = d.shape[0]
    y = np.asarray(y, dtype=np.float64)
    x1 = np.zeros(T) if x1 is None else np.asarray(x1, dtype=np.float64)
    h1 = np.ones(T) if h1 is None else np.asarray(h1, dtype=np.float64)
    return Trajectory(
        h0=np.array([1.0]),
        x=x1[:, None],
        d=d,
        h=h1[:, None],
        y=y,
        regime=geometric_ergodic(),
    )


def sb_traj(d, lags, y, design, x1=None):
    """Switchback trajectory; ``lags`` is the T x m lagged-treatment block."""
    d = np.asarray(d, dtype=np.int64)
    T = d.shape[0]
    lags = np.asarray(lags, dtype=np.float64).reshape(T, design.m)
    x1 = np.full(T, 0.5) if x1 is None else np.asarray(x1, dtype=np.float64)
    h = np.hstack([lags, np.full((T, design.m), 0.5)])
    h0 = np.concatenate([np.zeros(design.m), np.full(design.m, 0.5)])
    return Trajectory(
        h0=h0,
        x=x1[:, None],
        d=d,
        h=h,
        y=np.asarray(y, dtype=np.float64),
        regime=m_dependent(design.m),
        design=design,
    )


class ConstOutcome:
    """f(d, x, h) = f1 when d = 1 else f0; ignores x and h."""

    def __init__(self, f1, f0, includes_shared_state=True):
        self.f1 = float(f1)
        self.f0 = float(f0)
        self.includes_shared_state = includes_shared_state

    def predict_series(self, d, x, h=None):
        d = np.asarray(d, dtype=np.float64)
        return np.where(d == 1.0, self.f1, self.f0)

    def __call__(self, d, x, h=None):
        return self.f1 if d == 1 else self.f0


class ConstProp:
    """m(x) = p everywhere."""

    def __init__(self, p):
        self.p = float(p)

    def predict_series(self, x):
        return np.full(np.atleast_2d(x).shape[0], self.p)

    def __call__(self, x):
        return self.p
