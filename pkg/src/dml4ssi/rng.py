"""Deterministic counter-based random streams.

Every stochastic component of the package draws from an ``RngStream``, a
named, splittable source identified by a 64-bit ``(seed, stream_id)`` pair.
Draw ``k`` of a stream is a pure function of ``(seed, stream_id, k)``, so
results are bit-reproducible across platforms and independent of execution
order: parallel workers can consume disjoint derived streams and produce
byte-identical output to a serial run.

The generator is the SplitMix64 counter construction: state ``k`` is
``key + (k + 1) * GAMMA`` modulo 2**64 and the output is the Stafford
"mix13" finalizer of that state. Constants:

- ``GAMMA  = 0x9E3779B97F4A7C15`` (2**64 divided by the golden ratio)
- ``MIX_A  = 0xBF58476D1CE4E5B9``
- ``MIX_B  = 0x94D049BB133111EB``

Normal deviates are produced by applying a rational approximation of the
normal inverse CDF (Wichura's AS241, absolute error below 1e-9) to the
uniform output; the same approximation supplies the z-quantiles used for
confidence intervals, so simulation and inference share one definition of
the normal quantile function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1

GAMMA = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer (Stafford mix13) on a 64-bit integer."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * MIX_A) & _MASK
    z = ((z ^ (z >> 27)) * MIX_B) & _MASK
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_B)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class RngStream:
    """Immutable identifier of one random stream.

    The same ``(seed, stream_id)`` always reproduces the identical draw
    sequence. A stream is meant to be consumed by exactly one task; use
    :func:`derive_stream` to hand independent children to subtasks.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "seed", self.seed & _MASK)
        object.__setattr__(self, "stream_id", self.stream_id & _MASK)

    def key(self) -> int:
        """64-bit key feeding the counter sequence of this stream."""
        return mix64(mix64(self.seed + GAMMA) + mix64(self.stream_id + 2 * GAMMA))

    def sampler(self) -> "Sampler":
        return Sampler(self)


def derive_stream(base: RngStream, index: int) -> RngStream:
    """Child stream ``index`` of ``base``.

    Keeps the seed and rehashes the stream id, so distinct indices give
    streams with unrelated counter sequences while remaining a pure
    function of ``(base, index)``.
    """
    if index < 0:
        raise ValueError(f"stream index must be nonnegative, got {index}")
    child = mix64(mix64(base.stream_id + GAMMA) + index + 1)
    return RngStream(seed=base.seed, stream_id=child)


class Sampler:
    """Stateful consumer of one stream.

    Each call advances an internal counter by the number of variates
    requested, never by a data-dependent amount, so the mapping from
    call sequence to draws is fixed in advance.
    """

    __slots__ = ("_key", "_counter")

    def __init__(self, stream: RngStream) -> None:
        self._key = stream.key()
        self._counter = 0

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` 64-bit words as a uint64 array."""
        start = self._counter
        self._counter += n
        ks = np.arange(start + 1, start + n + 1, dtype=np.uint64)
        states = np.uint64(self._key) + ks * np.uint64(GAMMA)
        return _mix64_array(states)

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` doubles in the open interval (0, 1)."""
        top53 = (self.raw(n) >> np.uint64(11)).astype(np.float64)
        return (top53 + 0.5) * 2.0**-53

    def normals(self, n: int, mean: float = 0.0, sd: float = 1.0) -> np.ndarray:
        return mean + sd * norm_ppf(self.uniforms(n))

    def bernoulli(self, probs: np.ndarray | float, n: int | None = None) -> np.ndarray:
        """Bernoulli draws as an int64 0/1 array.

        ``probs`` may be a scalar (then ``n`` is required) or an array of
        per-draw probabilities.
        """
        if np.isscalar(probs):
            if n is None:
                raise ValueError("n is required with a scalar probability")
            p = np.full(n, float(probs))
        else:
            p = np.asarray(probs, dtype=np.float64)
        u = self.uniforms(p.size)
        return (u < p).astype(np.int64)

    def integers(self, n: int, bound: int) -> np.ndarray:
        """``n`` integers uniform on {0, ..., bound - 1}.

        Uses the raw word modulo ``bound``; for the bounds used here
        (at most a few million) the modulo bias is below 1e-12.
        """
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        return (self.raw(n) % np.uint64(bound)).astype(np.int64)


# AS241 coefficient tables (Wichura 1988). Ordered low to high degree;
# evaluated by Horner from the top.
_PPF_A = (
    3.3871328727963666080e00,
    1.3314166789178437745e02,
    1.9715909503065514427e03,
    1.3731693765509461125e04,
    4.5921953931549871457e04,
    6.7265770927008700853e04,
    3.3430575583588128105e04,
    2.5090809287301226727e03,
)
_PPF_B = (
    1.0,
    4.2313330701600911252e01,
    6.8718700749205790830e02,
    5.3941960214247511077e03,
    2.1213794301586595867e04,
    3.9307895800092710610e04,
    2.8729085735721942674e04,
    5.2264952788528545610e03,
)
_PPF_C = (
    1.42343711074968357734e00,
    4.63033784615654529590e00,
    5.76949722146069140550e00,
    3.64784832476320460504e00,
    1.27045825245236838258e00,
    2.41780725177450611770e-01,
    2.27238449892691845833e-02,
    7.74545014278341407640e-04,
)
_PPF_D = (
    1.0,
    2.05319162663775882187e00,
    1.67638483018380384940e00,
    6.89767334985100004550e-01,
    1.48103976427480074590e-01,
    1.51986665636164571966e-02,
    5.47593808499534494600e-04,
    1.05075007164441684324e-09,
)
_PPF_E = (
    6.65790464350110377720e00,
    5.46378491116411436990e00,
    1.78482653991729133580e00,
    2.96560571828504891230e-01,
    2.65321895265761230930e-02,
    1.24266094738807843860e-03,
    2.71155556874348757815e-05,
    2.01033439929228813265e-07,
)
_PPF_F = (
    1.0,
    5.99832206555887937690e-01,
    1.36929880922735805310e-01,
    1.48753612908506148525e-02,
    7.86869131145613259100e-04,
    1.84631831751005468180e-05,
    1.42151175831644588870e-07,
    2.04426310338993978564e-15,
)


def _ratpoly(r, num, den):
    p = num[7]
    q = den[7]
    for i in range(6, -1, -1):
        p = p * r + num[i]
        q = q * r + den[i]
    return p / q


def norm_ppf(p: np.ndarray | float):
    """Normal inverse CDF, AS241 rational approximation.

    Absolute error below 1e-9 over (0, 1); accepts scalars or arrays.
    """
    scalar = np.isscalar(p)
    parr = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if np.any((parr <= 0.0) | (parr >= 1.0)):
        raise ValueError("norm_ppf requires probabilities strictly inside (0, 1)")

    q = parr - 0.5
    out = np.empty_like(parr)

    central = np.abs(q) <= 0.425
    if np.any(central):
        r = 0.180625 - q[central] * q[central]
        out[central] = q[central] * _ratpoly(r, _PPF_A, _PPF_B)

    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.where(qt < 0.0, parr[tail], 1.0 - parr[tail])
        r = np.sqrt(-np.log(r))
        mid = r <= 5.0
        val = np.empty_like(r)
        val[mid] = _ratpoly(r[mid] - 1.6, _PPF_C, _PPF_D)
        val[~mid] = _ratpoly(r[~mid] - 5.0, _PPF_E, _PPF_F)
        out[tail] = np.where(qt < 0.0, -val, val)

    if scalar:
        return float(out[0])
    return out


def z_quantile(alpha: float) -> float:
    """Two-sided normal critical value ``z_{1 - alpha/2}``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return norm_ppf(1.0 - alpha / 2.0)


def fsum(values) -> float:
    """Compensated (error-free) sum; thin alias of math.fsum."""
    return math.fsum(values)


def fmean(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("mean of empty sequence")
    return math.fsum(arr) / arr.size
