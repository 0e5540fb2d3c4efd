"""Scenario documents: JSON schema, loading with line-level errors, presets.

A scenario is a JSON object carrying ``schema_version`` and the sections
``system``, ``policy``, ``simulation``, ``optimization``, ``constraint``,
``sensitivity``, ``validation`` and ``curves``; only ``system`` is
mandatory. Quantities carry their unit in the field name
(``delay_time_units``, ``inspection_cost_money_units``, ...); all units
are dimensionless but must be used consistently.
"""

from __future__ import annotations

import copy
import json
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .errors import ConfigError
from .gamma import GammaParams
from .model import ComponentSpec, ConstraintSpec, PolicyVector, SystemSpec
from .opt import OptConfig
from .sim import SimConfig

__all__ = [
    "EFFORTS",
    "SCHEMA",
    "SCHEMA_VERSION",
    "Scenario",
    "ScenarioError",
    "apply_overrides",
    "load_scenario",
    "parse_scenario",
    "preset",
    "PRESETS",
]

SCHEMA_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_count = {"type": "integer", "minimum": 1}
_threshold = {"anyOf": [_pos, {"const": "inf"}]}

_SIM = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "grid_step_time_units": _pos,
        "horizon_cycles": _count,
        "replications": _count,
        "base_seed": {"type": "integer", "minimum": 0},
        "warmup_cycles": {"type": "integer", "minimum": 0},
    },
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gammacbm scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "system"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "required": ["components", "nondegrading_rate_per_time_unit", "delay_time_units"],
            "properties": {
                "components": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": [
                            "shape_rate_per_time_unit",
                            "rate_per_degradation_unit",
                            "failure_threshold_degradation_units",
                        ],
                        "properties": {
                            "count": _count,
                            "shape_rate_per_time_unit": _pos,
                            "rate_per_degradation_unit": _pos,
                            "failure_threshold_degradation_units": _threshold,
                            "corrective_cost_money_units": _nonneg,
                            "preventive_cost_money_units": _nonneg,
                            "downtime_cost_money_per_time_unit": _nonneg,
                            "reward_floor_money_per_time_unit": _nonneg,
                            "reward_amplitude_money_per_time_unit": _nonneg,
                            "reward_decay_per_degradation_unit": _nonneg,
                        },
                    },
                },
                "nondegrading_rate_per_time_unit": _nonneg,
                "delay_time_units": _nonneg,
                "nondegrading_corrective_cost_money_units": _nonneg,
                "nondegrading_downtime_cost_money_per_time_unit": _nonneg,
                "inspection_cost_money_units": _nonneg,
            },
        },
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "required": ["inspection_period_time_units", "preventive_thresholds_degradation_units"],
            "properties": {
                "inspection_period_time_units": _pos,
                "preventive_thresholds_degradation_units": {
                    "anyOf": [_pos, {"type": "array", "minItems": 1, "items": _pos}]
                },
            },
        },
        "simulation": _SIM,
        "constraint": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"safety_limit_probability": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
        },
        "optimization": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["pattern-search", "genetic"]},
                "budget": {"type": "integer", "minimum": 0},
                "seed_samples": {"type": "integer", "minimum": 0},
                "T_max_time_units": _pos,
                "tied_thresholds": {"type": "boolean"},
                "initial_mesh": _pos,
                "contraction": _pos,
                "expansion": _pos,
                "min_mesh": _pos,
                "population": _count,
                "generations": {"type": "integer", "minimum": 0},
                "crossover_rate": _nonneg,
                "mutation_rate": _nonneg,
                "tournament_size": _count,
                "mutation_scale": _pos,
                "blend_alpha": _nonneg,
                "search_simulation": _SIM,
            },
        },
        "sensitivity": {
            "type": "object",
            "additionalProperties": False,
            "required": ["plans"],
            "properties": {
                "m_values": {"type": "array", "minItems": 1, "items": _count},
                "plans": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["parameter", "grid"],
                        "properties": {
                            "parameter": {"enum": ["alpha", "beta", "lambda"]},
                            "grid": {"type": "array", "minItems": 1, "items": _pos},
                            "m_values": {"type": "array", "minItems": 1, "items": _count},
                        },
                    },
                },
            },
        },
        "validation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "start_levels_degradation_units": {"type": "array", "items": _nonneg},
                "time_to_inspection_time_units": _pos,
                "oracle_samples": {"type": "integer", "minimum": 100},
                "oracle_grid_step_time_units": _pos,
                "simulation": _SIM,
            },
        },
        "curves": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "critical_probability": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "shape_rates_per_time_unit": {"type": "array", "minItems": 1, "items": _pos},
                        "m_values": {"type": "array", "minItems": 1, "items": _count},
                        "rate_per_degradation_unit": _pos,
                        "failure_threshold_degradation_units": _pos,
                        "preventive_threshold_degradation_units": _pos,
                        "inspection_period_time_units": _pos,
                        "nondegrading_rate_per_time_unit": _nonneg,
                        "taus_time_units": {"type": "array", "minItems": 1, "items": _nonneg},
                        "simulation": _SIM,
                    },
                },
                "reward_rate": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "shape_rates_per_time_unit": {"type": "array", "minItems": 1, "items": _pos},
                        "rate_per_degradation_unit": _pos,
                        "failure_threshold_degradation_units": _threshold,
                        "reward_floor_money_per_time_unit": _nonneg,
                        "reward_amplitude_money_per_time_unit": _nonneg,
                        "reward_decay_per_degradation_unit": _nonneg,
                        "horizon_time_units": _pos,
                        "points": {"type": "integer", "minimum": 2},
                        "simulation": _SIM,
                    },
                },
            },
        },
    },
}

EFFORTS = {
    "quick": {"grid_step_time_units": 0.05, "horizon_cycles": 1100, "replications": 8},
    "standard": {"grid_step_time_units": 0.02, "horizon_cycles": 2600, "replications": 20},
    "full": {"grid_step_time_units": 0.01, "horizon_cycles": 5100, "replications": 20},
}


class ScenarioError(ConfigError):
    """Invalid scenario document; carries the offending line when known."""

    def __init__(self, message: str, line: int | None = None, path: str = ""):
        self.line = line
        self.path = path
        where = f"line {line}" if line is not None else "location unknown"
        loc = f" at {path}" if path else ""
        super().__init__(f"{where}{loc}: {message}")


def _locate(text: str, path) -> int | None:
    """Best-effort line of a JSON path inside ``text``."""
    pos = 0
    for part in path:
        if isinstance(part, int):
            # skip to the part-th element start after the current position
            depth = 0
            count = -1
            i = text.find("[", pos)
            if i < 0:
                return None
            j = i + 1
            in_str = False
            while j < len(text):
                ch = text[j]
                if in_str:
                    if ch == "\\":
                        j += 2
                        continue
                    if ch == '"':
                        in_str = False
                elif ch == '"':
                    in_str = True
                    if depth == 0 and count < part and _starts_element(text, i, j):
                        count += 1
                        if count == part:
                            pos = j
                            break
                elif ch in "[{":
                    if depth == 0:
                        count += 1
                        if count == part:
                            pos = j
                            break
                    depth += 1
                elif ch in "]}":
                    if depth == 0:
                        return None
                    depth -= 1
                elif depth == 0 and not ch.isspace() and ch != ",":
                    if _starts_element(text, i, j):
                        count += 1
                        if count == part:
                            pos = j
                            break
                j += 1
            else:
                return None
        else:
            m = re.compile(r'"' + re.escape(str(part)) + r'"\s*:').search(text, pos)
            if not m:
                break
            pos = m.start()
    return text.count("\n", 0, pos) + 1


def _starts_element(text: str, open_idx: int, j: int) -> bool:
    k = j - 1
    while k > open_idx and text[k].isspace():
        k -= 1
    return k == open_idx or text[k] == ","


def _path_str(path) -> str:
    return "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path).lstrip(".")


@dataclass
class Scenario:
    """Parsed scenario; ``raw`` keeps the resolved JSON document."""

    raw: dict
    system: SystemSpec
    policy: PolicyVector | None
    sim: SimConfig
    opt: OptConfig
    constraint: ConstraintSpec
    text: str = field(default="", repr=False)

    @property
    def seed(self) -> int:
        return self.sim.base_seed


def _get(d, key, default):
    v = d.get(key, default)
    return math.inf if v == "inf" else v


def _build_sim(d: dict | None, fallback: SimConfig | None = None) -> SimConfig:
    d = d or {}
    fb = fallback or SimConfig()
    return SimConfig(
        grid_step=float(d.get("grid_step_time_units", fb.grid_step)),
        horizon_cycles=int(d.get("horizon_cycles", fb.horizon_cycles)),
        replications=int(d.get("replications", fb.replications)),
        base_seed=int(d.get("base_seed", fb.base_seed)),
        warmup_cycles=int(d.get("warmup_cycles", fb.warmup_cycles)),
    )


def build_component(d: dict) -> ComponentSpec:
    return ComponentSpec(
        gamma=GammaParams(float(d["shape_rate_per_time_unit"]), float(d["rate_per_degradation_unit"])),
        failure_threshold=float(_get(d, "failure_threshold_degradation_units", math.inf)),
        corrective_cost=float(d.get("corrective_cost_money_units", 0.0)),
        preventive_cost=float(d.get("preventive_cost_money_units", 0.0)),
        downtime_cost_rate=float(d.get("downtime_cost_money_per_time_unit", 0.0)),
        reward_floor=float(d.get("reward_floor_money_per_time_unit", 0.0)),
        reward_amplitude=float(d.get("reward_amplitude_money_per_time_unit", 0.0)),
        reward_decay=float(d.get("reward_decay_per_degradation_unit", 0.0)),
    )


def parse_scenario(doc: dict, text: str = "") -> Scenario:
    """Validate ``doc`` against :data:`SCHEMA` and build the model objects."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = list(e.absolute_path)
        raise ScenarioError(e.message, _locate(text, path) if text else None, _path_str(path))

    def fail(exc, path):
        raise ScenarioError(str(exc), _locate(text, path) if text else None, _path_str(path)) from exc

    sd = doc["system"]
    comps = []
    for i, cd in enumerate(sd["components"]):
        try:
            c = build_component(cd)
        except (ConfigError, ValueError) as exc:
            fail(exc, ["system", "components", i])
        comps.extend([c] * int(cd.get("count", 1)))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            system = SystemSpec(
                tuple(comps),
                nondegrading_rate=float(sd["nondegrading_rate_per_time_unit"]),
                delay=float(sd["delay_time_units"]),
                nondegrading_corrective_cost=float(sd.get("nondegrading_corrective_cost_money_units", 0.0)),
                nondegrading_downtime_cost_rate=float(sd.get("nondegrading_downtime_cost_money_per_time_unit", 0.0)),
                inspection_cost=float(sd.get("inspection_cost_money_units", 0.0)),
            )
    except (ConfigError, ValueError) as exc:
        fail(exc, ["system"])

    policy = None
    if "policy" in doc:
        pd = doc["policy"]
        M = pd["preventive_thresholds_degradation_units"]
        M = [M] * system.m if not isinstance(M, list) else M
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                policy = PolicyVector(float(pd["inspection_period_time_units"]), tuple(M)).validate(system)
        except (ConfigError, ValueError) as exc:
            fail(exc, ["policy"])

    try:
        sim = _build_sim(doc.get("simulation"))
        sim.check_delay(system.delay)
    except (ConfigError, ValueError) as exc:
        fail(exc, ["simulation"])

    try:
        constraint = ConstraintSpec(float(doc.get("constraint", {}).get("safety_limit_probability", 0.01)))
    except (ConfigError, ValueError) as exc:
        fail(exc, ["constraint"])

    od = doc.get("optimization", {})
    try:
        kw = {k: od[k] for k in (
            "method", "budget", "seed_samples", "tied_thresholds", "initial_mesh", "contraction",
            "expansion", "min_mesh", "population", "generations", "crossover_rate",
            "mutation_rate", "tournament_size", "mutation_scale", "blend_alpha",
        ) if k in od}
        search = _build_sim(od["search_simulation"], sim) if "search_simulation" in od else None
        if search is not None:
            search.check_delay(system.delay)
        opt = OptConfig(constraint=constraint, sim=sim, search_sim=search,
                        T_max=od.get("T_max_time_units"), **kw)
        if "optimization" in doc:
            opt.bounds(system)
    except (ConfigError, ValueError) as exc:
        fail(exc, ["optimization"])

    return Scenario(raw=doc, system=system, policy=policy, sim=sim, opt=opt,
                    constraint=constraint, text=text)


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    Raises
    ------
    ScenarioError
        On unreadable files, JSON syntax errors, schema violations and
        model invariant violations.
    """
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    return parse_scenario(doc, text)


def apply_overrides(doc: dict, seed: int | None = None, effort: str | None = None) -> dict:
    """Copy of ``doc`` with ``--seed`` and ``--effort`` folded in.

    An effort preset replaces the simulation effort; its grid step is
    capped at a fifth of the delay.
    """
    out = copy.deepcopy(doc)
    sim = out.setdefault("simulation", {})
    if effort is not None:
        if effort not in EFFORTS:
            raise ConfigError(f"unknown effort {effort!r}")
        preset = dict(EFFORTS[effort])
        tau = float(out.get("system", {}).get("delay_time_units", 0.0) or 0.0)
        if tau > 0:
            preset["grid_step_time_units"] = min(preset["grid_step_time_units"], tau / 5)
        sim.update(preset)
    if seed is not None:
        sim["base_seed"] = int(seed)
    return out


# ---- presets -----------------------------------------------------------------

def _component(alpha: float, rate: float = 2.0, count: int = 1) -> dict:
    d = {
        "shape_rate_per_time_unit": alpha,
        "rate_per_degradation_unit": rate,
        "failure_threshold_degradation_units": 6.0,
        "corrective_cost_money_units": 80.0,
        "preventive_cost_money_units": 30.0,
        "downtime_cost_money_per_time_unit": 5.0,
        "reward_floor_money_per_time_unit": 2.0,
        "reward_amplitude_money_per_time_unit": 2.0,
        "reward_decay_per_degradation_unit": 20.0,
    }
    if count != 1:
        d["count"] = count
    return d


def _system(components: list[dict]) -> dict:
    return {
        "components": components,
        "nondegrading_rate_per_time_unit": 0.025,
        "delay_time_units": 0.5,
        "nondegrading_corrective_cost_money_units": 80.0,
        "nondegrading_downtime_cost_money_per_time_unit": 5.0,
        "inspection_cost_money_units": 10.0,
    }


_FULL_SIM = {"grid_step_time_units": 0.01, "horizon_cycles": 5100, "replications": 20,
              "base_seed": 20240501, "warmup_cycles": 100}


def _identical(m: int, T: float, M: float) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": f"identical-m{m}",
        "description": f"{m} identical components; degradation scale 0.5 (rate 2)",
        "system": _system([_component(1.25, count=m)]),
        "policy": {"inspection_period_time_units": T, "preventive_thresholds_degradation_units": M},
        "simulation": dict(_FULL_SIM),
        "constraint": {"safety_limit_probability": 0.01},
        "optimization": {"method": "pattern-search", "budget": 70, "seed_samples": 10,
                         "T_max_time_units": 12.0, "tied_thresholds": True},
    }


def _sensitivity() -> dict:
    doc = _identical(2, 4.317, 3.075)
    doc["name"] = "sensitivity"
    doc["sensitivity"] = {
        "m_values": [2, 5],
        "plans": [
            {"parameter": "alpha", "grid": [1.10, 1.15, 1.20, 1.25, 1.30, 1.35, 1.40]},
            {"parameter": "beta", "grid": [1 / b for b in (0.35, 0.40, 0.45, 0.5, 0.55, 0.60, 0.65)]},
            {"parameter": "lambda", "grid": [0.010, 0.015, 0.020, 0.025, 0.030, 0.035, 0.040]},
        ],
    }
    return doc


def _curves() -> dict:
    doc = _identical(2, 4.317, 3.075)
    doc["name"] = "figures"
    doc["curves"] = {
        "critical_probability": {
            "shape_rates_per_time_unit": [0.2, 0.3, 0.4, 0.5, 0.6],
            "m_values": [2, 3, 4, 5],
            "rate_per_degradation_unit": 1.0,
            "failure_threshold_degradation_units": 6.0,
            "preventive_threshold_degradation_units": 3.0,
            "inspection_period_time_units": 100.0,
            "nondegrading_rate_per_time_unit": 0.025,
            "taus_time_units": [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0],
            "simulation": {"grid_step_time_units": 0.05, "horizon_cycles": 4100, "replications": 10,
                           "base_seed": 20240501, "warmup_cycles": 100},
        },
        "reward_rate": {
            "shape_rates_per_time_unit": [1.0, 1.1, 1.2, 1.3, 1.4],
            "rate_per_degradation_unit": 1.0,
            "failure_threshold_degradation_units": "inf",
            "reward_floor_money_per_time_unit": 2.0,
            "reward_amplitude_money_per_time_unit": 2.0,
            "reward_decay_per_degradation_unit": 2.0,
            "horizon_time_units": 10.0,
            "points": 20,
            "simulation": {"grid_step_time_units": 0.01, "horizon_cycles": 2000, "replications": 10,
                           "base_seed": 20240501, "warmup_cycles": 0},
        },
    }
    return doc


def _nonidentical() -> dict:
    doc = _identical(2, 5.998, [2.679, 2.014])
    doc["name"] = "nonidentical-m2"
    doc["description"] = "2 components with shape rates 1.1 and 1.2; degradation scale 0.5 (rate 2)"
    doc["system"] = _system([_component(1.1), _component(1.2)])
    doc["optimization"] = {"method": "genetic", "budget": 130, "seed_samples": 10,
                           "T_max_time_units": 12.0, "population": 12, "generations": 10}
    return doc


def _validate_m1() -> dict:
    doc = _identical(1, 4.317, 3.075)
    doc["name"] = "validate-m1"
    doc["validation"] = {
        "start_levels_degradation_units": [0.0],
        "time_to_inspection_time_units": 4.317,
        "oracle_samples": 400000,
        "oracle_grid_step_time_units": 0.002,
        "simulation": {"grid_step_time_units": 0.002, "horizon_cycles": 20000, "replications": 5,
                       "base_seed": 20240501, "warmup_cycles": 0},
    }
    return doc


PRESETS = {
    "identical-m2": lambda: _identical(2, 4.317, 3.075),
    "identical-m3": lambda: _identical(3, 3.726, 3.345),
    "identical-m4": lambda: _identical(4, 3.130, 3.680),
    "identical-m5": lambda: _identical(5, 2.657, 3.920),
    "nonidentical-m2": _nonidentical,
    "validate-m1": _validate_m1,
    "sensitivity": _sensitivity,
    "figures": _curves,
}


def preset(name: str) -> dict:
    """A fresh copy of a bundled scenario document."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
