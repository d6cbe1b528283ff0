"""Domain types, trajectory validation, and the trajectory CSV format.

A trajectory is the unit of data everywhere in the package: covariates,
binary treatments, shared-state vectors, and outcomes for time steps
1..T, plus the known initial shared state h0. Storage is columnar
(numpy arrays) for speed; :class:`Observation` gives a per-step view.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .rng import RngStream, Sampler, derive_stream, norm_ppf, z_quantile  # noqa: F401

GEOMETRIC_ERGODIC = "geometric-ergodic"
M_DEPENDENT = "m-dependent"


@dataclass(frozen=True)
class Regime:
    """Dependence regime of a trajectory.

    ``geometric-ergodic`` marks chains whose variance is estimated by
    batch means; ``m-dependent`` carries the dependence horizon ``m``.
    """

    kind: str
    m: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in (GEOMETRIC_ERGODIC, M_DEPENDENT):
            raise ValueError(f"unknown regime kind {self.kind!r}")
        if self.kind == M_DEPENDENT:
            if self.m is None or self.m < 0:
                raise ValueError("m-dependent regime requires m >= 0")
        elif self.m is not None:
            raise ValueError("geometric-ergodic regime takes no m")


def geometric_ergodic() -> Regime:
    return Regime(GEOMETRIC_ERGODIC)


def m_dependent(m: int) -> Regime:
    return Regime(M_DEPENDENT, m)


@dataclass(frozen=True)
class SwitchbackDesign:
    """Block-randomized treatment design with burn-in.

    Treatments are constant on blocks of length ``block_len``; the first
    boundary falls uniformly on {1..block_len} and each block is treated
    with probability ``treat_prob`` independently. ``m`` is the horizon
    over which past treatments reach outcomes; ``block_len > m`` makes
    fully-treated and fully-control windows possible.
    """

    m: int = 5
    block_len: int = 10
    treat_prob: float = 0.5

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError(f"m must be nonnegative, got {self.m}")
        if self.block_len <= self.m:
            raise ValueError(
                f"block_len must exceed m, got block_len={self.block_len} m={self.m}"
            )
        if not 0.0 < self.treat_prob < 1.0:
            raise ValueError(f"treat_prob must lie in (0,1), got {self.treat_prob}")


@dataclass(frozen=True)
class Observation:
    """One time step: covariates, treatment, shared state, outcome."""

    x: np.ndarray
    d: int
    h: np.ndarray
    y: float


class _ObsView(Sequence):
    """Read-only per-step view over a trajectory's columnar arrays."""

    def __init__(self, traj: "Trajectory") -> None:
        self._traj = traj

    def __len__(self) -> int:
        return self._traj.T

    def __getitem__(self, i: int) -> Observation:
        t = self._traj
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return Observation(x=t.x[i], d=int(t.d[i]), h=t.h[i], y=float(t.y[i]))

    def __iter__(self) -> Iterator[Observation]:
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class Trajectory:
    """Observed data W_{1:T} plus the known initial shared state.

    Arrays are indexed 0..T-1 for time steps 1..T. ``design`` is present
    for switchback data so estimators can recover window probabilities.
    """

    h0: np.ndarray
    x: np.ndarray
    d: np.ndarray
    h: np.ndarray
    y: np.ndarray
    regime: Regime
    design: Optional[SwitchbackDesign] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "h0", np.asarray(self.h0, dtype=np.float64))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64))
        object.__setattr__(self, "d", np.asarray(self.d, dtype=np.int64))
        object.__setattr__(self, "h", np.asarray(self.h, dtype=np.float64))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64))

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def p_x(self) -> int:
        return self.x.shape[1]

    @property
    def p_h(self) -> int:
        return self.h.shape[1]

    @property
    def obs(self) -> _ObsView:
        return _ObsView(self)


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate with its variance, confidence interval, and flags.

    ``sigma2_hat`` keeps the raw variance estimate even when negative
    (possible for the m-dependent estimator); ``degenerate`` marks that
    case and the interval is built from variance clamped at zero.
    """

    estimator: str
    psi_hat: float
    sigma2_hat: float
    ci_low: float
    ci_high: float
    alpha: float
    T: int
    degenerate: bool = False


def validate_trajectory(traj: Trajectory) -> list:
    """All invariant violations of ``traj``, empty when valid.

    Violations are strings carrying the offending time index; validation
    never raises, so callers can report every problem at once.
    """
    out = []
    T = traj.T
    if T < 1:
        out.append("trajectory has no observations (T must be >= 1)")
        return out

    if traj.x.ndim != 2 or traj.x.shape[0] != T:
        out.append(f"covariate array shape {traj.x.shape} inconsistent with T={T}")
    if traj.h.ndim != 2 or traj.h.shape[0] != T:
        out.append(f"shared-state array shape {traj.h.shape} inconsistent with T={T}")
    if traj.d.shape != (T,):
        out.append(f"treatment array shape {traj.d.shape} inconsistent with T={T}")
    if traj.h0.ndim != 1 or (traj.h.ndim == 2 and traj.h0.shape[0] != traj.h.shape[1]):
        out.append(
            f"initial shared state length {traj.h0.shape} does not match p_h"
        )
    if out:
        return out

    bad_d = np.nonzero((traj.d != 0) & (traj.d != 1))[0]
    for i in bad_d:
        out.append(f"treatment not binary at t={i + 1}")
    bad_x = np.nonzero(~np.all(np.isfinite(traj.x), axis=1))[0]
    for i in bad_x:
        out.append(f"non-finite covariates at t={i + 1}")
    bad_h = np.nonzero(~np.all(np.isfinite(traj.h), axis=1))[0]
    for i in bad_h:
        out.append(f"non-finite shared state at t={i + 1}")
    bad_y = np.nonzero(~np.isfinite(traj.y))[0]
    for i in bad_y:
        out.append(f"non-finite outcome at t={i + 1}")
    if not np.all(np.isfinite(traj.h0)):
        out.append("non-finite initial shared state")
    if (
        traj.regime.kind == M_DEPENDENT
        and traj.design is not None
        and traj.design.m != traj.regime.m
    ):
        out.append(
            f"design horizon m={traj.design.m} disagrees with regime m={traj.regime.m}"
        )
    return out


class TrajectoryFormatError(ValueError):
    """Raised by the CSV reader; collects all row-level problems."""

    def __init__(self, problems: list) -> None:
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write ``traj`` in the interchange CSV format.

    Header ``t,x_1..x_pX,d,h_1..h_pH,y``; the t=0 row carries h0 with
    empty covariate/treatment/outcome cells; all floats use 17
    significant digits so a read-back is bit-exact.
    """
    p_x, p_h = traj.p_x, traj.p_h
    header = (
        ["t"]
        + [f"x_{j + 1}" for j in range(p_x)]
        + ["d"]
        + [f"h_{j + 1}" for j in range(p_h)]
        + ["y"]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerow(["0"] + [""] * p_x + [""] + [_fmt(v) for v in traj.h0] + [""])
        for i in range(traj.T):
            row = (
                [str(i + 1)]
                + [_fmt(v) for v in traj.x[i]]
                + [str(int(traj.d[i]))]
                + [_fmt(v) for v in traj.h[i]]
                + [_fmt(traj.y[i])]
            )
            w.writerow(row)


def _parse_header(header: list) -> tuple:
    """Return (p_x, p_h) or raise on a malformed header."""
    problems = []
    if not header or header[0] != "t":
        raise TrajectoryFormatError(["row 1: header must start with column 't'"])
    cols = header[1:]
    if "d" not in cols or cols[-1] != "y":
        raise TrajectoryFormatError(
            ["row 1: header must be t,x_1..x_pX,d,h_1..h_pH,y (missing d or y)"]
        )
    d_at = cols.index("d")
    x_cols = cols[:d_at]
    h_cols = cols[d_at + 1 : -1]
    for j, name in enumerate(x_cols):
        if name != f"x_{j + 1}":
            problems.append(f"row 1: expected covariate column x_{j + 1}, got {name!r}")
    for j, name in enumerate(h_cols):
        if name != f"h_{j + 1}":
            problems.append(f"row 1: expected shared-state column h_{j + 1}, got {name!r}")
    if not h_cols:
        problems.append("row 1: at least one shared-state column h_1 is required")
    if problems:
        raise TrajectoryFormatError(problems)
    return len(x_cols), len(h_cols)


def read_trajectory_csv(
    path,
    regime: Regime,
    design: Optional[SwitchbackDesign] = None,
) -> Trajectory:
    """Parse a trajectory CSV, reporting every malformed row at once.

    ``regime`` and ``design`` are not stored in the file; the caller
    supplies them (the CLI takes them from its config).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TrajectoryFormatError(["row 1: file is empty"])
    p_x, p_h = _parse_header(rows[0])
    width = 1 + p_x + 1 + p_h + 1
    problems = []

    if len(rows) < 2:
        raise TrajectoryFormatError(["row 2: missing t=0 initial-state row"])

    def _floats(cells, row_no, what):
        vals = []
        for c in cells:
            try:
                vals.append(float(c))
            except ValueError:
                problems.append(f"row {row_no}: non-numeric {what} value {c!r}")
                vals.append(np.nan)
        return vals

    r0 = rows[1]
    if len(r0) != width:
        raise TrajectoryFormatError(
            [f"row 2: expected {width} cells, got {len(r0)}"]
        )
    if r0[0] != "0":
        problems.append(f"row 2: first data row must have t=0, got t={r0[0]!r}")
    h0 = _floats(r0[1 + p_x + 1 : 1 + p_x + 1 + p_h], 2, "h0")

    T = len(rows) - 2
    if T < 1:
        problems.append("row 3: no observation rows (need T >= 1)")
        raise TrajectoryFormatError(problems)

    x = np.empty((T, p_x))
    d = np.zeros(T, dtype=np.int64)
    h = np.empty((T, p_h))
    y = np.empty(T)
    for i, row in enumerate(rows[2:]):
        row_no = i + 3
        if len(row) != width:
            problems.append(f"row {row_no}: expected {width} cells, got {len(row)}")
            x[i], h[i], y[i] = np.nan, np.nan, np.nan
            continue
        if row[0] != str(i + 1):
            problems.append(f"row {row_no}: expected t={i + 1}, got t={row[0]!r}")
        x[i] = _floats(row[1 : 1 + p_x], row_no, "covariate")
        try:
            d[i] = int(row[1 + p_x])
        except ValueError:
            problems.append(
                f"row {row_no}: non-integer treatment value {row[1 + p_x]!r}"
            )
        h[i] = _floats(row[2 + p_x : 2 + p_x + p_h], row_no, "shared-state")
        y[i] = _floats([row[-1]], row_no, "outcome")[0]

    if problems:
        raise TrajectoryFormatError(problems)
    return Trajectory(h0=np.array(h0), x=x, d=d, h=h, y=y, regime=regime, design=design)
