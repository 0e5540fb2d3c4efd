"""Gamma-process degradation: increment laws, first passages, sampling.

A homogeneous gamma process with shape rate ``alpha`` and rate ``beta`` has
independent increments ``X(t+d) - X(t) ~ Gamma(shape=alpha*d, rate=beta)``.
The first passage time of a level ``z`` satisfies
``P(sigma_z <= t) = P(X(t) >= z) = Q(alpha*t, beta*z)`` where ``Q`` is the
regularized upper incomplete gamma function.

Samplers take an explicit :class:`numpy.random.Generator`; nothing here
touches global random state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import NumericalError
from .estimate import EstimateWithError

__all__ = [
    "GammaParams",
    "first_passage_cdf",
    "first_passage_pdf",
    "first_passage_sf",
    "increment_cdf",
    "increment_pdf",
    "increment_sf",
    "sample_first_passage",
    "sample_increment",
    "sample_sigma_diff",
    "sigma_diff_survival",
]


@dataclass(frozen=True)
class GammaParams:
    """Parameters of a stationary gamma process.

    Parameters
    ----------
    shape_rate : float
        Shape accumulated per unit time (``alpha``).
    rate : float
        Inverse scale of the increments (``beta``).
    """

    shape_rate: float
    rate: float

    def __post_init__(self):
        if not (self.shape_rate > 0 and math.isfinite(self.shape_rate)):
            raise ValueError(f"shape_rate must be positive and finite, got {self.shape_rate}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive and finite, got {self.rate}")

    @classmethod
    def from_scale(cls, shape_rate: float, scale: float) -> "GammaParams":
        """Build from a scale parameterisation (``rate = 1/scale``)."""
        return cls(shape_rate, 1.0 / scale)

    def mean(self, duration: float) -> float:
        return self.shape_rate * duration / self.rate

    def variance(self, duration: float) -> float:
        return self.shape_rate * duration / self.rate**2

    def mean_passage_time(self, level: float) -> float:
        """Time for the mean path to reach ``level``."""
        return level * self.rate / self.shape_rate


def _check_duration(duration):
    d = np.asarray(duration, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("duration must be positive")
    return d


def _check_nonneg(name, value):
    v = np.asarray(value, dtype=float)
    if np.any(~(v >= 0)):
        raise ValueError(f"{name} must be non-negative")
    return v


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def increment_pdf(p: GammaParams, duration, x):
    """Density of an increment over ``duration`` evaluated at ``x``."""
    d = _check_duration(duration)
    x = _check_nonneg("x", x)
    shape = p.shape_rate * d
    return _scalar_or_array(stats.gamma.pdf(x, shape, scale=1.0 / p.rate))


def increment_cdf(p: GammaParams, duration, x):
    """``P(X(t+duration) - X(t) <= x)``."""
    d = _check_duration(duration)
    x = _check_nonneg("x", x)
    return _scalar_or_array(special.gammainc(p.shape_rate * d, p.rate * x))


def increment_sf(p: GammaParams, duration, x):
    """Survival function of an increment; zero-duration increments are 0."""
    d = _check_nonneg("duration", duration)
    x = _check_nonneg("x", x)
    d, x = np.broadcast_arrays(d, x)
    out = np.zeros(d.shape, dtype=float)
    pos = d > 0
    out[pos] = special.gammaincc(p.shape_rate * d[pos], p.rate * x[pos])
    # zero-duration increment equals 0: survives only the level 0
    out[~pos] = np.where(x[~pos] <= 0, 1.0, 0.0)
    return _scalar_or_array(out)


def first_passage_cdf(p: GammaParams, level, t):
    """``P(sigma_level <= t) = P(X(t) >= level)``."""
    z = _check_nonneg("level", level)
    t = _check_nonneg("t", t)
    z, t = np.broadcast_arrays(z, t)
    out = np.empty(z.shape, dtype=float)
    zero_level = z <= 0
    out[zero_level] = 1.0
    zero_time = (t <= 0) & ~zero_level
    out[zero_time] = 0.0
    rest = ~(zero_level | zero_time)
    out[rest] = special.gammaincc(p.shape_rate * t[rest], p.rate * z[rest])
    return _scalar_or_array(out)


def first_passage_sf(p: GammaParams, level, t):
    """``P(sigma_level > t)``."""
    z = _check_nonneg("level", level)
    t = _check_nonneg("t", t)
    z, t = np.broadcast_arrays(z, t)
    out = np.empty(z.shape, dtype=float)
    zero_level = z <= 0
    out[zero_level] = 0.0
    zero_time = (t <= 0) & ~zero_level
    out[zero_time] = 1.0
    rest = ~(zero_level | zero_time)
    out[rest] = special.gammainc(p.shape_rate * t[rest], p.rate * z[rest])
    return _scalar_or_array(out)


def first_passage_pdf(p: GammaParams, level, t):
    """Density of the first passage time, by central differences in ``t``.

    Step ``h = max(1e-5, 1e-4*t)``; a forward difference is used where
    ``t <= h``.
    """
    z = np.asarray(level, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(~(z > 0)) or np.any(~(t > 0)):
        raise ValueError("level and t must be positive")
    z, t = np.broadcast_arrays(z, t)
    h = np.maximum(1e-5, 1e-4 * t)
    if np.any(t + h == t):
        raise NumericalError("finite-difference step underflows relative to t")
    central = t > h
    lo = np.where(central, t - h, t)
    width = np.where(central, 2 * h, h)
    dens = (first_passage_cdf(p, z, t + h) - first_passage_cdf(p, z, lo)) / width
    dens = np.asarray(dens, dtype=float)
    if not np.all(np.isfinite(dens)):
        raise NumericalError("non-finite first-passage density")
    return _scalar_or_array(np.maximum(dens, 0.0))


def sample_increment(p: GammaParams, duration: float, rng: np.random.Generator, size=None):
    """Draw increments over ``duration``.

    Uses numpy's ``standard_gamma``: Marsaglia-Tsang squeeze/rejection for
    shape >= 1 and a rejection scheme with exact small-shape handling below 1.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    return rng.standard_gamma(p.shape_rate * duration, size) / p.rate


def sample_first_passage(
    p: GammaParams,
    level,
    rng: np.random.Generator,
    size: int | None = None,
    grid_step: float = 0.01,
    refine_levels: int = 6,
):
    """First grid time at which a path started at 0 reaches ``level``.

    The path lives on the grid ``k*grid_step``. It is generated on a coarse
    grid ``2**refine_levels`` times wider and the coarse cell holding the
    crossing is bisected with gamma-bridge (beta) draws, which yields the
    same law as walking the fine grid step by step.

    Returns ``(times, values)`` where ``values`` is the path level at the
    crossing grid point.
    """
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    if size is None:
        level_arr = np.atleast_1d(np.asarray(level, dtype=float))
        n = level_arr.size
    else:
        n = int(size)
        level_arr = np.broadcast_to(np.asarray(level, dtype=float), (n,)).copy()

    a = p.shape_rate
    fine_per_coarse = 2**refine_levels
    coarse = grid_step * fine_per_coarse

    cell = np.zeros(n, dtype=np.int64)
    left_val = np.zeros(n)
    right_val = np.zeros(n)
    done = level_arr <= 0
    active = np.flatnonzero(~done)
    x = np.zeros(active.size)
    k = 0
    while active.size:
        inc = rng.standard_gamma(a * coarse, active.size) / p.rate
        nxt = x + inc
        hit = nxt >= level_arr[active]
        idx = active[hit]
        cell[idx] = k
        left_val[idx] = x[hit]
        right_val[idx] = nxt[hit]
        active = active[~hit]
        x = nxt[~hit]
        k += 1
        if k > 10**7:
            raise NumericalError("first-passage sampling did not terminate")

    crossed = ~done
    lo = cell[crossed] * fine_per_coarse
    lv = left_val[crossed]
    rv = right_val[crossed]
    target = level_arr[crossed]
    half = fine_per_coarse
    for _ in range(refine_levels):
        half //= 2
        frac = rng.beta(a * half * grid_step, a * half * grid_step, lv.size)
        mid_val = lv + (rv - lv) * frac
        upper = mid_val >= target
        rv = np.where(upper, mid_val, rv)
        lv = np.where(upper, lv, mid_val)
        lo = np.where(upper, lo, lo + half)

    times = np.zeros(n)
    values = np.zeros(n)
    times[crossed] = (lo + 1) * grid_step
    values[crossed] = rv
    if size is None and np.ndim(level) == 0:
        return float(times[0]), float(values[0])
    return times, values


def sample_sigma_diff(
    p: GammaParams,
    lower: float,
    upper: float,
    size: int,
    rng: np.random.Generator,
    grid_step: float = 0.01,
    return_lower_times: bool = False,
):
    """Samples of ``sigma_upper - sigma_lower`` on the path grid.

    By the Markov property at the grid crossing of ``lower`` the remaining
    time is the first passage of ``upper - X(sigma_lower)`` by a fresh path.
    """
    if not 0 <= lower < upper:
        raise ValueError("need 0 <= lower < upper")
    t_low, v_low = sample_first_passage(p, lower, rng, size=size, grid_step=grid_step)
    remaining = upper - v_low
    diff, _ = sample_first_passage(p, remaining, rng, grid_step=grid_step)
    diff = np.asarray(diff, dtype=float).reshape(size)
    if return_lower_times:
        return diff, t_low
    return diff


def sigma_diff_survival(
    p: GammaParams,
    M: float,
    L: float,
    t,
    effort: int,
    rng: np.random.Generator | None = None,
    grid_step: float = 0.01,
) -> EstimateWithError:
    """Monte Carlo estimate of ``P(sigma_L - sigma_M > t)``.

    ``t`` may be an array; the returned estimate then carries arrays of
    means and standard errors computed from the same sample.
    """
    if effort < 100:
        raise ValueError("effort below 100 samples is statistically meaningless")
    if not 0 < M < L:
        raise ValueError("need 0 < M < L")
    rng = np.random.default_rng() if rng is None else rng
    diffs = np.sort(sample_sigma_diff(p, M, L, effort, rng, grid_step=grid_step))
    t_arr = np.asarray(t, dtype=float)
    surv = 1.0 - np.searchsorted(diffs, t_arr, side="right") / effort
    se = np.sqrt(surv * (1.0 - surv) / effort)
    return EstimateWithError(_scalar_or_array(surv), _scalar_or_array(se), effort)
