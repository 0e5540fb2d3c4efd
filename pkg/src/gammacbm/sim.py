"""Monte Carlo engine for semi-regenerative maintenance cycles.

Degradation paths live on a grid of step ``grid_step``. Crossing times of
the preventive and failure thresholds are the first grid points at which
the path is at or above the threshold. The non-degrading part fails after
an exponential time measured in continuous time. Inspections follow a
fixed schedule that is never reset by maintenance.

A maintenance epoch ``O`` is the first inspection at or after the first
threshold crossing, unless a failure at ``Z`` has a delay window
``Z + delay`` ending strictly before that inspection. At ``O`` every
degrading component at or above its failure threshold is correctively
replaced, every component in ``[M_i, L_i)`` is preventively replaced and a
failed non-degrading part is repaired.

Replication ``r`` draws its randomness from
``SeedSequence(base_seed).spawn(replications)[r]``, so aggregate results do
not depend on how many replications run concurrently.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernel
from .errors import ConfigError, SimulationFault
from .estimate import EstimateWithError, mean_estimate, ratio_estimate
from .model import ComponentSpec, PolicyVector, SystemSpec, lemma1_mu

__all__ = [
    "ACTIONS",
    "TRIGGERS",
    "CostBreakdown",
    "CycleLog",
    "CycleRecord",
    "EstimateWithError",
    "RewardCurve",
    "SimConfig",
    "SimResult",
    "StabilityWarning",
    "critical_probability_curve",
    "estimate_cost_rate",
    "replication_seeds",
    "reward_rate_curve",
    "run_cycle",
    "simulate_chain",
]

TRIGGERS = (
    "inspection-only",
    "degrading-failure-delay",
    "nondegrading-failure-delay",
    "inspection-after-late-failure",
)
ACTIONS = ("none", "preventive", "corrective")

_PATH_CHUNK = 1 << 14
_EXP_CHUNK = 256


class StabilityWarning(RuntimeWarning):
    """The stability bound does not certify a stationary regime."""


@dataclass(frozen=True)
class SimConfig:
    """Simulation effort and discretisation.

    ``horizon_cycles`` counts all cycles of a replication, warmup included.
    """

    grid_step: float = 0.01
    horizon_cycles: int = 5100
    replications: int = 20
    base_seed: int = 0
    warmup_cycles: int = 100

    def __post_init__(self):
        if not (self.grid_step > 0 and math.isfinite(self.grid_step)):
            raise ConfigError("grid_step must be positive")
        if int(self.horizon_cycles) < 1:
            raise ConfigError("horizon_cycles must be at least 1")
        if int(self.replications) < 1:
            raise ConfigError("replications must be at least 1")
        if int(self.warmup_cycles) < 0:
            raise ConfigError("warmup_cycles must be non-negative")
        if int(self.base_seed) < 0:
            raise ConfigError("base_seed must be non-negative")

    def check_delay(self, delay: float) -> None:
        """Crossing times must resolve the delay: ``grid_step <= delay/5``."""
        if delay > 0 and self.grid_step > delay / 5 * (1 + 1e-12):
            raise ConfigError(
                f"grid_step {self.grid_step} is too coarse for delay {delay} (needs <= delay/5)"
            )

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CostBreakdown:
    """The six cost terms; ``reward`` is earned and enters the rate with a minus sign."""

    preventive: float = 0.0
    corrective_degrading: float = 0.0
    corrective_nondegrading: float = 0.0
    inspections: float = 0.0
    downtime: float = 0.0
    reward: float = 0.0

    @property
    def net(self) -> float:
        return (
            self.preventive
            + self.corrective_degrading
            + self.corrective_nondegrading
            + self.inspections
            + self.downtime
            - self.reward
        )

    @classmethod
    def from_array(cls, values) -> "CostBreakdown":
        return cls(*(float(v) for v in values))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CycleRecord:
    """One semi-regenerative cycle.

    ``downtime`` lists the per-component downtimes followed by the
    non-degrading part's. ``post_levels`` and ``post_time_to_inspection``
    form the embedded-chain state after maintenance; ``pre_levels`` are the
    grid levels at the maintenance time, before any replacement.
    """

    duration: float
    trigger: str
    actions: tuple[str, ...]
    nondegrading_repaired: bool
    inspections_count: int
    downtime: tuple[float, ...]
    reward_integral: float
    cost_breakdown: CostBreakdown
    critical: bool
    post_levels: tuple[float, ...]
    post_time_to_inspection: float
    pre_levels: tuple[float, ...] = ()


@dataclass
class CycleLog:
    """Column arrays for a run of consecutive cycles."""

    duration: np.ndarray
    trigger: np.ndarray
    actions: np.ndarray
    nondegrading_repaired: np.ndarray
    inspections_count: np.ndarray
    downtime: np.ndarray
    costs: np.ndarray
    critical: np.ndarray
    post_levels: np.ndarray
    post_time_to_inspection: np.ndarray
    pre_levels: np.ndarray

    @classmethod
    def empty(cls, n: int, m: int) -> "CycleLog":
        return cls(
            duration=np.zeros(n),
            trigger=np.zeros(n, dtype=np.int8),
            actions=np.zeros((n, m), dtype=np.int8),
            nondegrading_repaired=np.zeros(n, dtype=np.bool_),
            inspections_count=np.zeros(n, dtype=np.int32),
            downtime=np.zeros((n, m + 1)),
            costs=np.zeros((n, len(_kernel.COST_COLUMNS))),
            critical=np.zeros(n, dtype=np.bool_),
            post_levels=np.zeros((n, m)),
            post_time_to_inspection=np.zeros(n),
            pre_levels=np.zeros((n, m)),
        )

    def __len__(self) -> int:
        return self.duration.size

    def slice(self, start: int, stop: int | None = None) -> "CycleLog":
        return CycleLog(**{k: v[start:stop] for k, v in self.__dict__.items()})

    @property
    def net_cost(self) -> np.ndarray:
        """Per-cycle costs minus reward."""
        return self.costs[:, :5].sum(axis=1) - self.costs[:, 5]

    def record(self, k: int) -> CycleRecord:
        return CycleRecord(
            duration=float(self.duration[k]),
            trigger=TRIGGERS[int(self.trigger[k])],
            actions=tuple(ACTIONS[int(a)] for a in self.actions[k]),
            nondegrading_repaired=bool(self.nondegrading_repaired[k]),
            inspections_count=int(self.inspections_count[k]),
            downtime=tuple(float(d) for d in self.downtime[k]),
            reward_integral=float(self.costs[k, 5]),
            cost_breakdown=CostBreakdown.from_array(self.costs[k]),
            critical=bool(self.critical[k]),
            post_levels=tuple(float(v) for v in self.post_levels[k]),
            post_time_to_inspection=float(self.post_time_to_inspection[k]),
            pre_levels=tuple(float(v) for v in self.pre_levels[k]),
        )


def replication_seeds(base_seed: int, replications: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(int(base_seed)).spawn(int(replications))


class _Streams:
    """Per-component increment streams and the exponential stream."""

    def __init__(self, gens: list[np.random.Generator], shapes, rates):
        self.gens = gens
        self.shapes = np.asarray(shapes, dtype=float)
        self.rates = np.asarray(rates, dtype=float)

    @classmethod
    def from_seed(cls, seed, s: SystemSpec, delta: float) -> "_Streams":
        children = seed.spawn(s.m + 1) if isinstance(seed, np.random.SeedSequence) else seed.spawn(s.m + 1)
        gens = [c if isinstance(c, np.random.Generator) else np.random.default_rng(c) for c in children]
        shapes = [c.gamma.shape_rate * delta for c in s.components]
        rates = [c.gamma.rate for c in s.components]
        return cls(gens, shapes, rates)

    def increments(self, n: int) -> np.ndarray:
        out = np.empty((self.shapes.size, n))
        for i, g in enumerate(self.gens[:-1]):
            out[i] = g.standard_gamma(self.shapes[i], n) / self.rates[i]
        return out

    def exponentials(self, n: int) -> np.ndarray:
        return self.gens[-1].standard_exponential(n)


class _Chain:
    """Buffers and mutable state driving the compiled kernel."""

    def __init__(self, s: SystemSpec, p: PolicyVector, delta: float, streams: _Streams,
                 fixed_start=None):
        m = s.m
        self.s, self.p, self.delta, self.streams = s, p, delta, streams
        T_g = _snap(p.inspection_period / delta)
        self.S = np.zeros((m, 1))
        self._extend(_PATH_CHUNK)
        self.exps = streams.exponentials(_EXP_CHUNK)
        self.exp_pos = np.zeros(1, dtype=np.int64)
        self.base = np.zeros(m)
        self.r = np.zeros(m, dtype=np.int64)
        self.fixed = fixed_start is not None
        if self.fixed:
            x0, w0 = fixed_start
            self.x0 = np.asarray(x0, dtype=float)
            self.w0_g = _snap(float(w0) / delta)
            self.state = np.array([0.0, self.w0_g, np.inf, 1.0])
        else:
            self.x0 = np.zeros(m)
            self.w0_g = T_g
            lam = s.nondegrading_rate
            y = self.exps[0] / (lam * delta) if lam > 0 else np.inf
            self.exp_pos[0] = 1
            self.state = np.array([0.0, T_g, y, 0.0])
        comps = s.components
        self.params = (
            np.array(p.preventive_thresholds, dtype=float),
            np.array([c.failure_threshold for c in comps], dtype=float),
            np.array([c.corrective_cost for c in comps], dtype=float),
            np.array([c.preventive_cost for c in comps], dtype=float),
            np.array([c.downtime_cost_rate for c in comps], dtype=float),
            np.array([c.reward_floor for c in comps], dtype=float),
            np.array([c.reward_amplitude for c in comps], dtype=float),
            np.array([c.reward_decay for c in comps], dtype=float),
            s.nondegrading_rate * delta,
            _snap(s.delay / delta),
            T_g,
            p.inspection_period,
            delta,
            s.nondegrading_corrective_cost,
            s.nondegrading_downtime_cost_rate,
            s.inspection_cost,
        )

    def _extend(self, n: int) -> None:
        inc = self.streams.increments(n)
        tail = self.S[:, -1:]
        self.S = np.concatenate([self.S, tail + np.cumsum(inc, axis=1)], axis=1)

    def _rebase(self) -> int:
        keep = min(int(self.r.min()), int(math.floor(self.state[0] + 1e-9)))
        if keep <= 0:
            return 0
        self.S = self.S[:, keep:] - self.S[:, keep:keep + 1]
        self.r -= keep
        self.state[:3] -= keep
        return keep

    def _refill_exp(self) -> None:
        rest = self.exps[self.exp_pos[0]:]
        self.exps = np.concatenate([rest, self.streams.exponentials(_EXP_CHUNK)])
        self.exp_pos[0] = 0

    def run(self, log: CycleLog, start: int = 0, stop: int | None = None) -> None:
        k = start
        stop = len(log) if stop is None else stop
        stalls = 0
        while k < stop:
            k_new, status = _kernel.run_cycles(
                self.S, self.exps, self.exp_pos, self.state, self.base, self.r,
                *self.params,
                self.fixed, self.x0, self.w0_g,
                k, stop,
                log.duration, log.trigger, log.actions, log.nondegrading_repaired,
                log.inspections_count, log.downtime, log.costs, log.critical,
                log.post_levels, log.post_time_to_inspection, log.pre_levels,
            )
            stalls = 0 if k_new > k else stalls + 1
            k = k_new
            if status == _kernel.DONE:
                break
            if status == _kernel.NEED_EXP:
                self._refill_exp()
            elif status == _kernel.NEED_PATH:
                self._rebase()
                grow = _PATH_CHUNK << min(stalls, 10)
                self._extend(grow)
            else:
                raise SimulationFault(f"non-finite or inconsistent state in cycle {k}")
            if stalls > 60:
                raise SimulationFault("cycle did not terminate; check the policy and rates")


def _snap(x: float) -> float:
    """Round a grid-unit duration to an integer when it is one up to rounding."""
    n = round(x)
    return float(n) if abs(x - n) <= 1e-9 * max(1.0, abs(x)) else x


def _prepare(s: SystemSpec, p: PolicyVector, cfg: SimConfig) -> None:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p.validate(s)
    cfg.check_delay(s.delay)


def simulate_chain(
    s: SystemSpec,
    p: PolicyVector,
    cfg: SimConfig,
    n_cycles: int | None = None,
    replication: int = 0,
    start_state=None,
) -> CycleLog:
    """Cycles of one replication.

    Without ``start_state`` the embedded chain is run from the renewal state
    ``(0, ..., 0, T)``. With ``start_state = (levels, time_to_inspection)``
    every cycle restarts from that state on fresh randomness, which gives
    i.i.d. conditional cycles.
    """
    _prepare(s, p, cfg)
    n = cfg.horizon_cycles if n_cycles is None else int(n_cycles)
    seed = replication_seeds(cfg.base_seed, replication + 1)[replication]
    if start_state is not None:
        start_state = _check_start(s, p, start_state)
    chain = _Chain(s, p, cfg.grid_step, _Streams.from_seed(seed, s, cfg.grid_step), start_state)
    log = CycleLog.empty(n, s.m)
    chain.run(log)
    return log


def _check_start(s: SystemSpec, p: PolicyVector, start_state):
    levels, w = start_state
    levels = np.asarray(levels, dtype=float)
    if levels.shape != (s.m,):
        raise ConfigError(f"start levels must have length {s.m}")
    L = np.array([c.failure_threshold for c in s.components])
    if np.any(levels < 0) or np.any(levels >= L):
        raise ConfigError("start levels must lie in [0, L_i)")
    if not 0 < w <= p.inspection_period:
        raise ConfigError("time to inspection must lie in (0, T]")
    return levels, float(w)


def run_cycle(
    s: SystemSpec,
    p: PolicyVector,
    start_state,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> CycleRecord:
    """Simulate one cycle from ``start_state = (levels, time_to_inspection)``.

    Child streams are spawned from ``rng``; one per component and one for
    the non-degrading failure time.
    """
    _prepare(s, p, cfg)
    start_state = _check_start(s, p, start_state)
    streams = _Streams.from_seed(rng, s, cfg.grid_step)
    chain = _Chain(s, p, cfg.grid_step, streams, start_state)
    log = CycleLog.empty(1, s.m)
    chain.run(log)
    return log.record(0)


@dataclass(frozen=True)
class SimResult:
    """Output of :func:`estimate_cost_rate`.

    Attributes
    ----------
    cost_rate : EstimateWithError
        Long-run cost per unit time, net of reward.
    breakdown : CostBreakdown
        Per-unit-time rate of each cost term.
    breakdown_std_error : CostBreakdown
        Standard errors of the breakdown rates.
    critical_probability : EstimateWithError
        Stationary fraction of cycles in which every component fails.
    mu : float
        Stability bound; values below 1 certify a stationary regime.
    mean_cycle_length : EstimateWithError
    cycles : int
        Post-warmup cycles over all replications.
    pi_levels, pi_time_to_inspection : ndarray
        Post-maintenance states visited after warmup (empirical stationary law).
    """

    cost_rate: EstimateWithError
    breakdown: CostBreakdown
    breakdown_std_error: CostBreakdown
    critical_probability: EstimateWithError
    mu: float
    mean_cycle_length: EstimateWithError
    cycles: int
    pi_levels: np.ndarray = field(repr=False)
    pi_time_to_inspection: np.ndarray = field(repr=False)
    action_frequencies: dict = field(default_factory=dict)

    @property
    def mu_warning(self) -> bool:
        return not self.mu < 1

    def summary(self) -> dict:
        return {
            "cost_rate": self.cost_rate.as_dict(),
            "breakdown_rates": self.breakdown.as_dict(),
            "breakdown_std_errors": self.breakdown_std_error.as_dict(),
            "critical_probability": self.critical_probability.as_dict(),
            "mu": self.mu,
            "mu_warning": self.mu_warning,
            "mean_cycle_length": self.mean_cycle_length.as_dict(),
            "cycles": self.cycles,
            "action_frequencies": self.action_frequencies,
        }


def _default_threads(threads):
    if threads is None:
        return os.cpu_count() or 1
    if int(threads) < 1:
        raise ConfigError("threads must be at least 1")
    return int(threads)


def _run_replications(fn, n: int, threads) -> list:
    threads = _default_threads(threads)
    if threads == 1 or n == 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=min(threads, n)) as pool:
        return list(pool.map(fn, range(n)))


def estimate_cost_rate(
    s: SystemSpec,
    p: PolicyVector,
    cfg: SimConfig,
    threads: int | None = None,
) -> SimResult:
    """Long-run cost rate, its six-term breakdown and the critical probability.

    Each replication chains cycles from the renewal state, drops the first
    ``warmup_cycles`` and keeps per-replication totals; the cost rate is the
    pooled ratio of net cost to elapsed time.
    """
    _prepare(s, p, cfg)
    if cfg.horizon_cycles <= cfg.warmup_cycles:
        raise ConfigError("horizon_cycles must exceed warmup_cycles")
    mu = lemma1_mu(s, p)
    if not mu < 1:
        warnings.warn(f"stability bound mu={mu:.6g} is not below 1", StabilityWarning, stacklevel=2)
    seeds = replication_seeds(cfg.base_seed, cfg.replications)

    def one(r):
        chain = _Chain(s, p, cfg.grid_step, _Streams.from_seed(seeds[r], s, cfg.grid_step))
        log = CycleLog.empty(cfg.horizon_cycles, s.m)
        chain.run(log)
        return log.slice(cfg.warmup_cycles)

    logs = _run_replications(one, cfg.replications, threads)
    dur = np.array([lg.duration.sum() for lg in logs])
    net = np.array([lg.net_cost.sum() for lg in logs])
    cols = np.array([lg.costs.sum(axis=0) for lg in logs])
    crit = np.array([lg.critical.mean() for lg in logs])
    cyc_len = np.array([lg.duration.mean() for lg in logs])

    terms = [ratio_estimate(cols[:, j], dur) for j in range(cols.shape[1])]
    acts = np.concatenate([lg.actions for lg in logs])
    freqs = {
        name: [float(v) for v in (acts == code).mean(axis=0)]
        for code, name in enumerate(ACTIONS)
    }
    freqs["nondegrading_repaired"] = float(np.mean(np.concatenate([lg.nondegrading_repaired for lg in logs])))
    return SimResult(
        cost_rate=ratio_estimate(net, dur),
        breakdown=CostBreakdown(*(t.mean for t in terms)),
        breakdown_std_error=CostBreakdown(*(0.0 if not np.isfinite(t.std_error) else t.std_error for t in terms)),
        critical_probability=mean_estimate(crit),
        mu=mu,
        mean_cycle_length=mean_estimate(cyc_len),
        cycles=int(sum(len(lg) for lg in logs)),
        pi_levels=np.concatenate([lg.post_levels for lg in logs]),
        pi_time_to_inspection=np.concatenate([lg.post_time_to_inspection for lg in logs]),
        action_frequencies=freqs,
    )


def critical_probability_curve(
    s: SystemSpec,
    p: PolicyVector,
    taus,
    cfg: SimConfig,
    threads: int | None = None,
) -> list[EstimateWithError | None]:
    """Critical-situation probability for each delay in ``taus``.

    Entries whose delay violates ``T > 2*tau`` are returned as ``None``.
    """
    out = []
    for tau in taus:
        if not p.inspection_period > 2 * tau:
            out.append(None)
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            st = _replace_delay(s, float(tau))
            out.append(estimate_cost_rate(st, p, cfg, threads).critical_probability)
    return out


def _replace_delay(s: SystemSpec, tau: float) -> SystemSpec:
    from dataclasses import replace

    return replace(s, delay=tau)


@dataclass(frozen=True)
class RewardCurve:
    """Expected reward rate ``(1/T) * int_0^T E[g(X(t))] dt`` on a grid of ``T``."""

    periods: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray


def reward_rate_curve(
    c: ComponentSpec,
    horizon: float,
    cfg: SimConfig,
    periods=None,
    threads: int | None = None,
) -> RewardCurve:
    """Reward rate of a component started new, by path simulation.

    Each replication simulates ``cfg.horizon_cycles`` independent paths
    on the grid and integrates the reward by the trapezoid rule; the
    reward is 0 from the failure threshold on.
    """
    if not horizon > 0:
        raise ConfigError("horizon must be positive")
    delta = cfg.grid_step
    n_steps = max(1, int(math.ceil(horizon / delta - 1e-9)))
    t = np.arange(n_steps + 1) * delta
    if periods is None:
        periods = np.linspace(horizon / 20, horizon, 20)
    periods = np.asarray(periods, dtype=float)
    if np.any(periods <= 0) or np.any(periods > t[-1] + 1e-9):
        raise ConfigError("periods must lie in (0, horizon]")
    seeds = replication_seeds(cfg.base_seed, cfg.replications)
    a, b = c.gamma.shape_rate * delta, c.gamma.rate
    batch = max(1, min(cfg.horizon_cycles, int(4e6 // (n_steps + 1))))

    def one(r):
        rng = np.random.default_rng(seeds[r])
        acc = np.zeros(n_steps + 1)
        done = 0
        while done < cfg.horizon_cycles:
            nb = min(batch, cfg.horizon_cycles - done)
            lv = np.zeros((nb, n_steps + 1))
            np.cumsum(rng.standard_gamma(a, (nb, n_steps)) / b, axis=1, out=lv[:, 1:])
            g = c.reward_floor + c.reward_amplitude * np.exp(-c.reward_decay * lv)
            g[lv >= c.failure_threshold] = 0.0
            acc += g.sum(axis=0)
            done += nb
        mean_g = acc / cfg.horizon_cycles
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (mean_g[1:] + mean_g[:-1]) * delta)])
        return np.interp(periods, t, cum) / periods

    rates = np.array(_run_replications(one, cfg.replications, threads))
    n = rates.shape[0]
    se = rates.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(periods.size, np.nan)
    return RewardCurve(periods, rates.mean(axis=0), se)
