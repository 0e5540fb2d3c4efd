"""Condition-based maintenance of gamma-degrading multi-component systems.

Simulation, quadrature cross-checks and constrained policy search for a
system of gamma-degrading components plus one exponentially failing
non-degrading part, inspected periodically and maintained after a delay.
"""

from .errors import ConfigError, NumericalError, SimulationFault, UnsupportedDimensionError
from .gamma import GammaParams
from .model import ComponentSpec, ConstraintSpec, PolicyVector, SystemSpec, lemma1_mu, reward_rate_at
from .sim import (
    CostBreakdown,
    CycleRecord,
    EstimateWithError,
    SimConfig,
    estimate_cost_rate,
    run_cycle,
)

__version__ = "0.1.0"

__all__ = [
    "ComponentSpec",
    "ConfigError",
    "ConstraintSpec",
    "CostBreakdown",
    "CycleRecord",
    "EstimateWithError",
    "GammaParams",
    "NumericalError",
    "PolicyVector",
    "SimConfig",
    "SimulationFault",
    "SystemSpec",
    "UnsupportedDimensionError",
    "estimate_cost_rate",
    "lemma1_mu",
    "reward_rate_at",
    "run_cycle",
]
