"""System, policy and constraint definitions; reward function; stability bound."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .gamma import GammaParams, increment_cdf, increment_sf

__all__ = [
    "ComponentSpec",
    "ConstraintSpec",
    "DegenerateInputWarning",
    "PolicyVector",
    "SystemSpec",
    "lemma1_mu",
    "reward_rate_at",
]


class DegenerateInputWarning(UserWarning):
    """Valid but degenerate input (zero delay, threshold collapse, ...)."""


@dataclass(frozen=True)
class ComponentSpec:
    """One gamma-degrading component.

    ``reward_amplitude`` is the coefficient of the exponential reward term,
    sometimes written ``g`` and sometimes ``h``.
    """

    gamma: GammaParams
    failure_threshold: float
    corrective_cost: float = 0.0
    preventive_cost: float = 0.0
    downtime_cost_rate: float = 0.0
    reward_floor: float = 0.0
    reward_amplitude: float = 0.0
    reward_decay: float = 0.0

    def __post_init__(self):
        if not self.failure_threshold > 0:
            raise ConfigError("failure_threshold must be positive")
        for name in (
            "corrective_cost",
            "preventive_cost",
            "downtime_cost_rate",
            "reward_floor",
            "reward_amplitude",
            "reward_decay",
        ):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be finite and non-negative, got {value}")


@dataclass(frozen=True)
class SystemSpec:
    """Degrading components plus the exponential non-degrading part."""

    components: tuple[ComponentSpec, ...]
    nondegrading_rate: float
    delay: float
    nondegrading_corrective_cost: float = 0.0
    nondegrading_downtime_cost_rate: float = 0.0
    inspection_cost: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) < 1:
            raise ConfigError("at least one degrading component is required")
        if not (self.nondegrading_rate >= 0 and math.isfinite(self.nondegrading_rate)):
            raise ConfigError("nondegrading_rate must be finite and non-negative")
        if self.nondegrading_rate == 0:
            warnings.warn(
                "nondegrading_rate = 0: the non-degrading part never fails",
                DegenerateInputWarning,
                stacklevel=3,
            )
        if not (self.delay >= 0 and math.isfinite(self.delay)):
            raise ConfigError("delay must be finite and non-negative")
        for name in (
            "nondegrading_corrective_cost",
            "nondegrading_downtime_cost_rate",
            "inspection_cost",
        ):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be non-negative")

    @property
    def m(self) -> int:
        return len(self.components)

    def with_components(self, components) -> "SystemSpec":
        return replace(self, components=tuple(components))

    def fastest_failure_time(self) -> float:
        """Mean time for the fastest component to reach its failure threshold."""
        return min(c.gamma.mean_passage_time(c.failure_threshold) for c in self.components)


@dataclass(frozen=True)
class PolicyVector:
    """Inspection period and per-component preventive thresholds."""

    inspection_period: float
    preventive_thresholds: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(
            self, "preventive_thresholds", tuple(float(v) for v in self.preventive_thresholds)
        )

    def validate(self, system: SystemSpec) -> "PolicyVector":
        """Check the policy against ``system``; returns ``self`` for chaining."""
        T = self.inspection_period
        M = self.preventive_thresholds
        if len(M) != system.m:
            raise ConfigError(f"expected {system.m} preventive thresholds, got {len(M)}")
        if not (math.isfinite(T) and T > 2 * system.delay):
            raise ConfigError(f"inspection period {T} must exceed twice the delay {system.delay}")
        for i, (Mi, comp) in enumerate(zip(M, system.components)):
            if not 0 < Mi <= comp.failure_threshold:
                raise ConfigError(
                    f"threshold M[{i}]={Mi} outside (0, L={comp.failure_threshold}]"
                )
        if system.delay == 0 or any(
            Mi == c.failure_threshold for Mi, c in zip(M, system.components)
        ):
            warnings.warn(
                "zero delay or preventive threshold equal to failure threshold",
                DegenerateInputWarning,
                stacklevel=2,
            )
        return self

    def as_array(self) -> np.ndarray:
        return np.array([self.inspection_period, *self.preventive_thresholds])

    @classmethod
    def from_array(cls, x) -> "PolicyVector":
        x = np.asarray(x, dtype=float)
        return cls(float(x[0]), tuple(float(v) for v in x[1:]))


@dataclass(frozen=True)
class ConstraintSpec:
    """Upper limit on the stationary probability of a critical situation."""

    safety_limit: float

    def __post_init__(self):
        if not 0 < self.safety_limit < 1:
            raise ConfigError("safety_limit must lie in (0, 1)")


def reward_rate_at(c: ComponentSpec, level):
    """Reward earned per unit time by a component at degradation ``level``.

    ``floor + amplitude*exp(-decay*level)`` below the failure threshold,
    0 once failed.
    """
    lv = np.asarray(level, dtype=float)
    if np.any(~(lv >= 0)):
        raise ValueError("level must be non-negative")
    out = np.where(
        lv < c.failure_threshold,
        c.reward_floor + c.reward_amplitude * np.exp(-c.reward_decay * lv),
        0.0,
    )
    return float(out) if out.ndim == 0 else out


def lemma1_mu(s: SystemSpec, p: PolicyVector) -> float:
    """Geometric bound on the probability of not renewing at an inspection.

    ``mu = 1 - exp(-lambda*(T-tau)) * prod_i P(X_i(tau) > M_i) P(X_i(T-tau) <= L_i-M_i)``.
    ``mu < 1`` certifies a finite mean renewal time and hence a stationary
    law for the post-maintenance chain.
    """
    T, tau = p.inspection_period, s.delay
    if len(p.preventive_thresholds) != s.m:
        raise ConfigError("threshold count does not match the component count")
    if T <= tau:
        raise ConfigError("inspection period must exceed the delay")
    survive = math.exp(-s.nondegrading_rate * (T - tau))
    prod = 1.0
    for comp, M in zip(s.components, p.preventive_thresholds):
        exceed = increment_sf(comp.gamma, tau, M)
        stay = increment_cdf(comp.gamma, T - tau, comp.failure_threshold - M) if comp.failure_threshold > M else 0.0
        prod *= exceed * stay
    return float(min(1.0, max(0.0, 1.0 - survive * prod)))
