"""Relative cost variation under one-at-a-time parameter perturbations.

For each component count ``m`` the baseline problem (identical components)
is optimised once. Each grid value of the perturbed parameter is then
re-optimised by pattern search started from the baseline optimum, and the
cell reports ``V = |C_base - C_cell| / C_base``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

from .errors import ConfigError
from .gamma import GammaParams
from .model import PolicyVector, SystemSpec
from .opt import Evaluator, OptConfig, OptResult, optimize, pattern_search

__all__ = [
    "PARAMETERS",
    "SensitivityCell",
    "SensitivityPlan",
    "SensitivityTable",
    "perturb",
    "run_sensitivity",
]

PARAMETERS = ("alpha", "beta", "lambda")


@dataclass(frozen=True)
class SensitivityPlan:
    """One parameter, its grid and the component counts to tabulate.

    ``beta`` values are gamma rates (inverse scales). The baseline system's
    first component is replicated ``m`` times for each ``m``.
    """

    parameter: str
    grid: tuple[float, ...]
    m_values: tuple[int, ...]
    baseline: SystemSpec
    opt: OptConfig

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        object.__setattr__(self, "m_values", tuple(int(v) for v in self.m_values))
        if self.parameter not in PARAMETERS:
            raise ConfigError(f"parameter must be one of {PARAMETERS}")
        if not self.grid or any(not v > 0 for v in self.grid):
            raise ConfigError("grid values must be positive")
        if not any(math.isclose(v, self.baseline_value, rel_tol=1e-9) for v in self.grid):
            raise ConfigError(f"grid must contain the baseline value {self.baseline_value}")
        if not self.m_values or any(m < 1 for m in self.m_values):
            raise ConfigError("m_values must be positive")

    @property
    def baseline_value(self) -> float:
        c = self.baseline.components[0]
        return {
            "alpha": c.gamma.shape_rate,
            "beta": c.gamma.rate,
            "lambda": self.baseline.nondegrading_rate,
        }[self.parameter]

    def system(self, m: int, value: float | None = None) -> SystemSpec:
        base = self.baseline.with_components([self.baseline.components[0]] * m)
        return base if value is None else perturb(base, self.parameter, value)


def perturb(s: SystemSpec, parameter: str, value: float) -> SystemSpec:
    """Copy of ``s`` with ``parameter`` set to ``value`` for every component."""
    if parameter == "lambda":
        return replace(s, nondegrading_rate=float(value))
    if parameter not in ("alpha", "beta"):
        raise ConfigError(f"unknown parameter {parameter!r}")
    comps = []
    for c in s.components:
        g = c.gamma
        g = GammaParams(value, g.rate) if parameter == "alpha" else GammaParams(g.shape_rate, value)
        comps.append(replace(c, gamma=g))
    return s.with_components(comps)


@dataclass(frozen=True)
class SensitivityCell:
    m: int
    parameter: str
    value: float
    V: float
    std_error_proxy: float
    cost: float
    cost_std_error: float
    policy: PolicyVector
    feasible: bool
    baseline: bool


@dataclass(frozen=True)
class SensitivityTable:
    parameter: str
    cells: tuple[SensitivityCell, ...]

    def lookup(self, m: int, value: float) -> SensitivityCell:
        for c in self.cells:
            if c.m == m and math.isclose(c.value, value, rel_tol=1e-9):
                return c
        raise KeyError((m, value))

    def max_v(self, m: int) -> float:
        return max(c.V for c in self.cells if c.m == m)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["m", "parameter", "value", "V", "std_error_proxy", "cost", "T", "M", "feasible"])
        for c in self.cells:
            w.writerow([
                c.m, c.parameter, repr(c.value), repr(c.V), repr(c.std_error_proxy), repr(c.cost),
                repr(c.policy.inspection_period),
                " ".join(repr(v) for v in c.policy.preventive_thresholds),
                "true" if c.feasible else "infeasible",
            ])
        return buf.getvalue()

    def render(self) -> str:
        """Plain-text grid with ``m`` down the rows and the values across."""
        values = sorted({c.value for c in self.cells})
        ms = sorted({c.m for c in self.cells})
        head = f"{'m':>4} | " + " ".join(f"{v:>9.4g}" for v in values)
        lines = [f"V for {self.parameter}", head, "-" * len(head)]
        for m in ms:
            row = []
            for v in values:
                try:
                    c = self.lookup(m, v)
                except KeyError:
                    row.append(f"{'':>9}")
                    continue
                mark = "" if c.feasible else "*"
                row.append(f"{c.V:>8.4f}{mark or ' '}")
            lines.append(f"{m:>4} | " + " ".join(row))
        if any(not c.feasible for c in self.cells):
            lines.append("* infeasible cell")
        return "\n".join(lines)


def run_sensitivity(
    plan: SensitivityPlan,
    threads: int | None = None,
    baselines: dict[int, OptResult] | None = None,
) -> SensitivityTable:
    """Tabulate ``V`` over ``plan.m_values x plan.grid``.

    ``baselines`` may supply precomputed baseline optima keyed by ``m``.
    Cell searches start at the baseline optimum and use the baseline
    budget minus seeding.
    """
    cells = []
    cfg = plan.opt
    cell_cfg = replace(cfg, seed_samples=0, budget=max(cfg.budget - cfg.seed_samples, 0))
    for m in plan.m_values:
        base_sys = plan.system(m)
        if baselines and m in baselines:
            base = baselines[m]
        else:
            base = optimize(base_sys, cfg, threads=threads)
        c0 = base.best_cost
        for value in plan.grid:
            if math.isclose(value, plan.baseline_value, rel_tol=1e-9):
                cells.append(SensitivityCell(m, plan.parameter, value, 0.0, 0.0, c0.mean,
                                             c0.std_error, base.best_policy, base.feasible, True))
                continue
            s = plan.system(m, value)
            res = _reoptimize(s, base.best_policy, cell_cfg, threads)
            c = res.best_cost
            V = abs(c0.mean - c.mean) / abs(c0.mean)
            se = math.hypot(c0.std_error, c.std_error) / abs(c0.mean)
            cells.append(SensitivityCell(m, plan.parameter, value, V, se, c.mean, c.std_error,
                                         res.best_policy, res.feasible, False))
    return SensitivityTable(plan.parameter, tuple(cells))


def _reoptimize(s: SystemSpec, start: PolicyVector, cfg: OptConfig, threads) -> OptResult:
    ev = Evaluator(s, cfg, threads=threads)
    start = ev.to_policy(ev.to_vector(start))
    if ev.remaining < 1 + 2 * ev.lo.size:
        # no room for a poll: report the start point itself
        return ev.finish(ev.evaluate_unbudgeted(start), "seed")
    return pattern_search(s, start, cfg, evaluator=ev)
