"""Side-by-side comparison of quadrature values and simulated frequencies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimate import EstimateWithError, mean_estimate
from .model import PolicyVector, SystemSpec
from .oracle import CycleOracle, StartState
from .sim import ACTIONS, SimConfig, _run_replications, simulate_chain

__all__ = ["ComparisonRow", "compare_with_oracle", "simulated_cycle_quantities"]

_PREVENTIVE = ACTIONS.index("preventive")
_CORRECTIVE = ACTIONS.index("corrective")


@dataclass(frozen=True)
class ComparisonRow:
    quantity: str
    oracle: float
    simulated: EstimateWithError

    @property
    def z(self) -> float:
        return self.simulated.z_score(self.oracle)

    def as_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "oracle": self.oracle,
            "simulated": self.simulated.mean,
            "std_error": self.simulated.std_error,
            "z": self.z,
        }


def simulated_cycle_quantities(
    s: SystemSpec,
    p: PolicyVector,
    st: StartState,
    cfg: SimConfig,
    threads: int | None = None,
) -> dict[str, EstimateWithError]:
    """Means over ``replications * horizon_cycles`` i.i.d. cycles from ``st``.

    Keys match :meth:`CycleTotals.as_dict`.
    """
    start = (st.levels, st.time_to_inspection)
    logs = _run_replications(
        lambda r: simulate_chain(s, p, cfg, replication=r, start_state=start),
        cfg.replications,
        threads,
    )
    acts = np.concatenate([lg.actions for lg in logs])
    down = np.concatenate([lg.downtime for lg in logs])
    out = {}
    for i in range(s.m):
        out[f"P_corrective[{i + 1}]"] = mean_estimate(acts[:, i] == _CORRECTIVE)
    for i in range(s.m):
        out[f"P_preventive[{i + 1}]"] = mean_estimate(acts[:, i] == _PREVENTIVE)
    out["P_nondegrading_repair"] = mean_estimate(np.concatenate([lg.nondegrading_repaired for lg in logs]))
    for i in range(s.m):
        out[f"downtime[{i + 1}]"] = mean_estimate(down[:, i])
    out["downtime_nondegrading"] = mean_estimate(down[:, s.m])
    out["cycle_length"] = mean_estimate(np.concatenate([lg.duration for lg in logs]))
    return out


def compare_with_oracle(
    s: SystemSpec,
    p: PolicyVector,
    st: StartState,
    cfg: SimConfig,
    oracle_effort: int = 400_000,
    oracle_grid_step: float = 0.002,
    threads: int | None = None,
) -> list[ComparisonRow]:
    """Quadrature value, simulated mean and z-score for every cycle quantity.

    Raises
    ------
    UnsupportedDimensionError
        For more than two components, before any simulation is run.
    """
    oracle = CycleOracle(s, p, st, effort=oracle_effort, seed=cfg.base_seed,
                         grid_step=oracle_grid_step)
    ref = oracle.totals().as_dict()
    sim = simulated_cycle_quantities(s, p, st, cfg, threads)
    return [ComparisonRow(k, float(ref[k]), sim[k]) for k in ref]
