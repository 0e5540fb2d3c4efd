"""Constrained policy search: random seeding, pattern search, genetic algorithm.

Policies are compared by feasibility dominance: a feasible policy (critical
probability at most the safety limit) beats an infeasible one, feasible
policies are ranked by cost rate and infeasible ones by constraint
violation. Every evaluation uses the same ``base_seed``, so compared
policies share random numbers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError
from .estimate import EstimateWithError
from .model import ConstraintSpec, PolicyVector, SystemSpec
from .sim import SimConfig, estimate_cost_rate

__all__ = [
    "Evaluation",
    "Evaluator",
    "OptConfig",
    "OptResult",
    "TraceEntry",
    "genetic_search",
    "optimize",
    "pattern_search",
    "seed_search",
]

Objective = Callable[[PolicyVector], tuple]
_LOWER_EPS = 1e-3


@dataclass(frozen=True)
class OptConfig:
    """Search settings.

    Attributes
    ----------
    method : {"pattern-search", "genetic"}
    budget : int
        Maximum number of search-time evaluations, seeding included.
    seed_samples : int
        Random policies evaluated to pick the starting point.
    constraint : ConstraintSpec
    sim : SimConfig
        Full effort, used to re-evaluate the reported optimum.
    search_sim : SimConfig, optional
        Cheaper effort used while searching; derived from ``sim`` if omitted.
    T_max : float, optional
        Upper bound on the inspection period; defaults to ten times the mean
        time for the fastest component to reach its failure threshold.
    tied_thresholds : bool
        Search one preventive threshold shared by all components.
    initial_mesh, contraction, expansion, min_mesh
        Pattern search; mesh sizes are fractions of each bound range.
    population, generations, crossover_rate, mutation_rate, tournament_size,
    mutation_scale, blend_alpha
        Genetic algorithm; ``mutation_scale`` is a fraction of each range.
    """

    method: str = "pattern-search"
    budget: int = 80
    seed_samples: int = 16
    constraint: ConstraintSpec = field(default_factory=lambda: ConstraintSpec(0.01))
    sim: SimConfig = field(default_factory=SimConfig)
    search_sim: SimConfig | None = None
    T_max: float | None = None
    tied_thresholds: bool = False
    initial_mesh: float = 0.1
    contraction: float = 0.5
    expansion: float = 2.0
    min_mesh: float = 0.005
    population: int = 12
    generations: int = 10
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    tournament_size: int = 3
    mutation_scale: float = 0.1
    blend_alpha: float = 0.5

    def __post_init__(self):
        if self.method not in ("pattern-search", "genetic"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.seed_samples < 0:
            raise ConfigError("seed_samples must be non-negative")
        if self.budget < self.seed_samples:
            raise ConfigError("budget must be at least seed_samples")
        if not 0 < self.contraction < 1 or not self.expansion >= 1:
            raise ConfigError("need 0 < contraction < 1 <= expansion")
        if not 0 < self.min_mesh <= self.initial_mesh:
            raise ConfigError("need 0 < min_mesh <= initial_mesh")
        if not 0 <= self.crossover_rate <= 1 or not 0 <= self.mutation_rate <= 1:
            raise ConfigError("rates must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ConfigError("tournament_size must be at least 1")
        if self.T_max is not None and not self.T_max > 0:
            raise ConfigError("T_max must be positive")

    def resolved_search_sim(self) -> SimConfig:
        if self.search_sim is not None:
            return self.search_sim
        full = self.sim
        warm = min(full.warmup_cycles, 100)
        return replace(
            full,
            horizon_cycles=min(full.horizon_cycles, warm + 1000),
            replications=min(full.replications, 8),
            warmup_cycles=warm,
        )

    def bounds(self, s: SystemSpec) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper bounds of the search vector ``(T, M...)``."""
        T_max = self.T_max if self.T_max is not None else 10.0 * s.fastest_failure_time()
        L = np.array([c.failure_threshold for c in s.components])
        if not np.all(np.isfinite(L)):
            raise ConfigError("policy search needs finite failure thresholds")
        T_lo = 2 * s.delay + _LOWER_EPS * max(T_max, 1.0)
        if not T_max >= T_lo:
            raise ConfigError(f"T_max={T_max} leaves no admissible inspection period")
        if self.tied_thresholds:
            hi_m = np.array([L.min()])
        else:
            hi_m = L
        lo = np.concatenate([[T_lo], _LOWER_EPS * hi_m])
        hi = np.concatenate([[T_max], hi_m])
        return lo, hi

    def as_dict(self) -> dict:
        out = {
            k: getattr(self, k)
            for k in self.__dataclass_fields__
            if k not in ("constraint", "sim", "search_sim")
        }
        out["safety_limit"] = self.constraint.safety_limit
        out["sim"] = self.sim.as_dict()
        out["search_sim"] = self.resolved_search_sim().as_dict()
        return out


@dataclass(frozen=True)
class Evaluation:
    policy: PolicyVector
    cost: EstimateWithError
    constraint: EstimateWithError

    def feasible(self, limit: float) -> bool:
        return self.constraint.mean <= limit

    def rank(self, limit: float) -> tuple:
        if self.feasible(limit):
            return (0, self.cost.mean)
        return (1, self.constraint.mean - limit)


@dataclass(frozen=True)
class TraceEntry:
    index: int
    policy: PolicyVector
    cost: EstimateWithError
    constraint: EstimateWithError
    feasible: bool
    phase: str

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "phase": self.phase,
            "T": self.policy.inspection_period,
            "M": list(self.policy.preventive_thresholds),
            "cost": self.cost.as_dict(),
            "constraint": self.constraint.as_dict(),
            "feasible": self.feasible,
        }


@dataclass(frozen=True)
class OptResult:
    """Best policy with its full-effort estimates and the search trace."""

    best_policy: PolicyVector
    best_cost: EstimateWithError
    constraint_value: EstimateWithError
    trace: tuple[TraceEntry, ...]
    feasible: bool
    method: str
    search_cost: EstimateWithError

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "best_policy": {
                "T": self.best_policy.inspection_period,
                "M": list(self.best_policy.preventive_thresholds),
            },
            "best_cost": self.best_cost.as_dict(),
            "constraint_value": self.constraint_value.as_dict(),
            "feasible": self.feasible,
            "search_cost": self.search_cost.as_dict(),
            "evaluations": len(self.trace),
            "trace": [t.as_dict() for t in self.trace],
        }


def _as_estimate(v) -> EstimateWithError:
    if isinstance(v, EstimateWithError):
        return v
    return EstimateWithError(float(v), 0.0, 1)


class Evaluator:
    """Budgeted, cached objective with a trace.

    ``objective`` replaces the simulator; it maps a policy to
    ``(cost, constraint)`` given as floats or estimates.
    """

    def __init__(self, s: SystemSpec, cfg: OptConfig, objective: Objective | None = None,
                 threads: int | None = None):
        self.s, self.cfg, self.objective, self.threads = s, cfg, objective, threads
        self.lo, self.hi = cfg.bounds(s)
        self.limit = cfg.constraint.safety_limit
        self.trace: list[TraceEntry] = []
        self._cache: dict[tuple, Evaluation] = {}
        self._search_sim = cfg.resolved_search_sim()

    @property
    def used(self) -> int:
        return len(self.trace)

    @property
    def remaining(self) -> int:
        return self.cfg.budget - self.used

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def to_policy(self, x) -> PolicyVector:
        x = self.clip(x)
        M = np.repeat(x[1], self.s.m) if self.cfg.tied_thresholds else x[1:]
        return PolicyVector(float(x[0]), tuple(float(v) for v in M))

    def to_vector(self, p: PolicyVector) -> np.ndarray:
        M = p.preventive_thresholds
        if self.cfg.tied_thresholds:
            M = (float(np.mean(M)),)
        return self.clip([p.inspection_period, *M])

    def _run(self, p: PolicyVector, sim: SimConfig) -> Evaluation:
        if self.objective is not None:
            cost, cons = self.objective(p)
            return Evaluation(p, _as_estimate(cost), _as_estimate(cons))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = estimate_cost_rate(self.s, p, sim, threads=self.threads)
        return Evaluation(p, res.cost_rate, res.critical_probability)

    def __call__(self, x, phase: str) -> Evaluation:
        x = self.clip(x)
        key = tuple(np.round(x, 12))
        if key in self._cache:
            return self._cache[key]
        if self.remaining <= 0:
            raise ConfigError("evaluation budget exhausted")
        ev = self._run(self.to_policy(x), self._search_sim)
        self._cache[key] = ev
        self.trace.append(TraceEntry(self.used, ev.policy, ev.cost, ev.constraint,
                                     ev.feasible(self.limit), phase))
        return ev

    def evaluate_unbudgeted(self, p: PolicyVector) -> Evaluation:
        """Search-effort evaluation outside the budget and the trace."""
        return self._run(p, self._search_sim)

    def is_cached(self, x) -> bool:
        return tuple(np.round(self.clip(x), 12)) in self._cache

    def better(self, a: Evaluation, b: Evaluation) -> bool:
        return a.rank(self.limit) < b.rank(self.limit)

    def finish(self, best: Evaluation, method: str) -> OptResult:
        """Re-evaluate ``best`` at full effort and package the result."""
        full = self._run(best.policy, self.cfg.sim)
        return OptResult(
            best_policy=best.policy,
            best_cost=full.cost,
            constraint_value=full.constraint,
            trace=tuple(self.trace),
            feasible=full.feasible(self.limit),
            method=method,
            search_cost=best.cost,
        )


def _search_rng(cfg: OptConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.sim.base_seed, stream]))


def seed_search(
    s: SystemSpec,
    cfg: OptConfig,
    rng: np.random.Generator | None = None,
    objective: Objective | None = None,
    evaluator: Evaluator | None = None,
) -> PolicyVector:
    """Best of ``seed_samples`` uniformly drawn policies.

    Returns the feasible policy of lowest cost, or the one with the smallest
    constraint violation when none is feasible.
    """
    ev = evaluator or Evaluator(s, cfg, objective)
    n = max(1, cfg.seed_samples)
    if ev.remaining < 1:
        raise ConfigError("budget does not allow a single seed evaluation")
    rng = rng if rng is not None else _search_rng(cfg, 0)
    best = None
    for _ in range(min(n, ev.remaining)):
        x = ev.lo + rng.random(ev.lo.size) * (ev.hi - ev.lo)
        e = ev(x, "seed")
        if best is None or ev.better(e, best):
            best = e
    return best.policy


def pattern_search(
    s: SystemSpec,
    start: PolicyVector,
    cfg: OptConfig,
    objective: Objective | None = None,
    evaluator: Evaluator | None = None,
) -> OptResult:
    """Coordinate pattern search with mesh expansion and contraction.

    Each iteration polls ``x +- mesh_i e_i`` for every coordinate, moves to
    the best polled point if it dominates the incumbent and expands the
    mesh, and otherwise contracts it. Stops when every mesh fraction is
    below ``min_mesh`` or the budget cannot cover another poll.

    Raises
    ------
    ConfigError
        If the budget cannot cover the start point and the first poll.
    """
    ev = evaluator or Evaluator(s, cfg, objective)
    x = ev.to_vector(start)
    n = x.size
    need = (0 if ev.is_cached(x) else 1) + 2 * n
    if ev.remaining < need:
        raise ConfigError(
            f"budget leaves {ev.remaining} evaluations; the first poll needs {need}"
        )
    span = ev.hi - ev.lo
    mesh = np.full(n, cfg.initial_mesh)
    best = ev(x, "pattern")
    while np.any(mesh >= cfg.min_mesh):
        poll = []
        for i in range(n):
            if mesh[i] < cfg.min_mesh:
                continue
            for sign in (1.0, -1.0):
                y = x.copy()
                y[i] += sign * mesh[i] * span[i]
                y = ev.clip(y)
                if not np.array_equal(y, x):
                    poll.append(y)
        fresh = sum(not ev.is_cached(y) for y in poll)
        if fresh > ev.remaining:
            break
        moved = False
        cand = best
        cand_x = x
        for y in poll:
            e = ev(y, "pattern")
            if ev.better(e, cand):
                cand, cand_x = e, y
                moved = True
        if moved:
            best, x = cand, cand_x
            mesh = np.minimum(mesh * cfg.expansion, 0.5)
        else:
            mesh = mesh * cfg.contraction
    return ev.finish(best, "pattern-search")


def genetic_search(
    s: SystemSpec,
    cfg: OptConfig,
    objective: Objective | None = None,
    evaluator: Evaluator | None = None,
    initial: PolicyVector | None = None,
    rng: np.random.Generator | None = None,
) -> OptResult:
    """Real-coded genetic algorithm with elitism of one.

    Tournament selection, blend (BLX) crossover and Gaussian mutation
    clipped to the bounds; ranking by feasibility dominance.
    """
    if cfg.population < 4:
        raise ConfigError("population must be at least 4")
    ev = evaluator or Evaluator(s, cfg, objective)
    rng = rng if rng is not None else _search_rng(cfg, 1)
    span = ev.hi - ev.lo
    n = ev.lo.size
    if ev.remaining < 1:
        raise ConfigError("budget exhausted before the first generation")

    pop_x = [ev.lo + rng.random(n) * span for _ in range(cfg.population)]
    if initial is not None:
        pop_x[0] = ev.to_vector(initial)
    pop = []
    for x in pop_x:
        if ev.remaining < 1 and not ev.is_cached(x):
            break
        pop.append((ev.clip(x), ev(x, "genetic")))

    def key(item):
        return item[1].rank(ev.limit)

    def tournament():
        idx = rng.integers(len(pop), size=min(cfg.tournament_size, len(pop)))
        return min((pop[i] for i in idx), key=key)[0]

    for _ in range(cfg.generations):
        if ev.remaining < cfg.population - 1:
            break
        elite = min(pop, key=key)
        children = [elite]
        while len(children) < cfg.population:
            p1, p2 = tournament(), tournament()
            if rng.random() < cfg.crossover_rate:
                u = rng.uniform(-cfg.blend_alpha, 1 + cfg.blend_alpha, n)
                child = p1 + u * (p2 - p1)
            else:
                child = p1.copy()
            mutate = rng.random(n) < cfg.mutation_rate
            child = child + mutate * rng.normal(0.0, cfg.mutation_scale, n) * span
            child = ev.clip(child)
            children.append((child, ev(child, "genetic")))
        pop = children
    best = min(pop, key=key)[1]
    return ev.finish(best, "genetic")


def optimize(
    s: SystemSpec,
    cfg: OptConfig,
    objective: Objective | None = None,
    start: PolicyVector | None = None,
    threads: int | None = None,
) -> OptResult:
    """Seed search followed by the configured method.

    With no budget left after seeding the seed itself is returned,
    re-evaluated at full effort. ``start`` skips seeding.
    """
    ev = Evaluator(s, cfg, objective, threads=threads)
    if start is None:
        start = seed_search(s, cfg, objective=objective, evaluator=ev)
    x = ev.to_vector(start)
    if ev.is_cached(x) or ev.remaining > 0:
        seed_eval = ev(x, "seed")
    else:
        seed_eval = ev.evaluate_unbudgeted(start)
    if cfg.method == "genetic":
        if ev.remaining >= cfg.population:
            return genetic_search(s, cfg, objective=objective, evaluator=ev, initial=start)
    elif ev.remaining >= 2 * x.size:
        return pattern_search(s, start, cfg, objective=objective, evaluator=ev)
    # no budget left for refinement: the seed is the answer
    return ev.finish(seed_eval, "seed")
