"""Command-line front end.

Subcommands ``simulate``, ``optimize``, ``validate``, ``curves`` and
``sensitivity`` read a scenario document and write a JSON result document
plus an RFC-4180 CSV next to it. Exit codes: 0 success, 2 input error,
3 unsupported configuration, 4 numerical failure (including a validation
run with some ``|z| > 3``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError, SimulationFault, UnsupportedDimensionError
from .gamma import GammaParams
from .model import ComponentSpec, PolicyVector, SystemSpec
from .opt import optimize
from .oracle import StartState
from .scenario import EFFORTS, Scenario, ScenarioError, _build_sim, apply_overrides, load_scenario, parse_scenario
from .sensitivity import SensitivityPlan, run_sensitivity
from .sim import StabilityWarning, critical_probability_curve, estimate_cost_rate, reward_rate_curve
from .validation import compare_with_oracle

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_UNSUPPORTED = 3
EXIT_NUMERICAL = 4

Z_LIMIT = 3.0

MU_BANNER = (
    "WARNING: stability bound mu >= 1; a stationary regime is not certified "
    "and the long-run estimates may be unreliable"
)


# ---- output helpers ------------------------------------------------------------

def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats so the document stays strict JSON."""
    if isinstance(o, float):
        if math.isnan(o):
            return None
        if math.isinf(o):
            return "inf" if o > 0 else "-inf"
        return o
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.generic):
        return _clean(o.item())
    return o


def _paths(out: str | Path) -> tuple[Path, Path]:
    p = Path(out)
    if p.suffix.lower() != ".json":
        p = p.with_name(p.name + ".json")
    return p, p.with_suffix(".csv")


def _csv_text(config: dict, header: list[str], rows: list[list]) -> str:
    """CSV whose first record carries the resolved configuration.

    Record 1 is ``config_json,<document>``; record 2 is the column header.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["config_json", json.dumps(_clean(config), sort_keys=True, default=_json_default)])
    w.writerow(header)
    for r in rows:
        w.writerow([_csv_cell(v) for v in r])
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    if isinstance(v, np.floating):
        return _csv_cell(float(v))
    return v


def _write(out, command: str, config: dict, result: dict, header, rows, warnings_list,
           extra: dict[str, str] | None = None) -> list[Path]:
    jpath, cpath = _paths(out)
    jpath.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "version": __version__,
        "config": config,
        "warnings": warnings_list,
        "result": result,
    }
    jpath.write_text(json.dumps(_clean(doc), indent=2, default=_json_default) + "\n", encoding="utf-8")
    with open(cpath, "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_text(config, header, rows))
    written = [jpath, cpath]
    for suffix, text in (extra or {}).items():
        p = jpath.with_suffix(suffix)
        p.write_text(text, encoding="utf-8")
        written.append(p)
    return written


def _config(sc: Scenario, args) -> dict:
    return {
        "scenario": sc.raw,
        "seed": sc.sim.base_seed,
        "effort": args.effort,
        "threads": args.threads,
        "resolved_simulation": sc.sim.as_dict(),
        "resolved_optimization": sc.opt.as_dict(),
    }


def _load(args) -> Scenario:
    sc = load_scenario(args.scenario)
    if args.seed is None and args.effort is None:
        return sc
    doc = apply_overrides(sc.raw, seed=args.seed, effort=args.effort)
    return parse_scenario(doc, sc.text)


def _policy_rows(pol: PolicyVector) -> dict:
    return {"T": pol.inspection_period, "M": list(pol.preventive_thresholds)}


# ---- commands -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    sc = _load(args)
    if sc.policy is None:
        raise ScenarioError("simulate needs a 'policy' section")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StabilityWarning)
        res = estimate_cost_rate(sc.system, sc.policy, sc.sim, threads=args.threads)
    notes = [MU_BANNER] if res.mu_warning else []
    notes += [str(w.message) for w in caught if not issubclass(w.category, StabilityWarning)]
    result = {"policy": _policy_rows(sc.policy), **res.summary()}
    rows = [["cost_rate", res.cost_rate.mean, res.cost_rate.std_error]]
    for k, v in res.breakdown.as_dict().items():
        rows.append([f"rate.{k}", v, getattr(res.breakdown_std_error, k)])
    rows.append(["critical_probability", res.critical_probability.mean, res.critical_probability.std_error])
    rows.append(["mean_cycle_length", res.mean_cycle_length.mean, res.mean_cycle_length.std_error])
    rows.append(["mu", res.mu, float("nan")])
    rows.append(["cycles", float(res.cycles), float("nan")])
    _emit_banner(notes)
    _write(args.out, "simulate", _config(sc, args), result, ["quantity", "estimate", "std_error"], rows, notes)
    print(f"cost rate {res.cost_rate.mean:.6g} +/- {res.cost_rate.std_error:.3g}; "
          f"P_crit {res.critical_probability.mean:.4g}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    sc = _load(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = optimize(sc.system, sc.opt, start=None, threads=args.threads)
    notes = [MU_BANNER] if any(issubclass(w.category, StabilityWarning) for w in caught) else []
    d = res.as_dict()
    header = ["index", "phase", "T", "M", "cost", "cost_std_error", "constraint", "feasible"]
    rows = []
    for t in res.trace:
        rows.append([t.index, t.phase, t.policy.inspection_period,
                     " ".join(repr(float(v)) for v in t.policy.preventive_thresholds),
                     t.cost.mean, t.cost.std_error, t.constraint.mean, t.feasible])
    _emit_banner(notes)
    _write(args.out, "optimize", _config(sc, args), d, header, rows, notes)
    print(f"best {d['best_policy']}; cost {res.best_cost.mean:.6g} +/- {res.best_cost.std_error:.3g}; "
          f"feasible={res.feasible}")
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = _load(args)
    vd = sc.raw.get("validation", {})
    if sc.policy is None:
        raise ScenarioError("validate needs a 'policy' section")
    if sc.system.m > 2:
        raise UnsupportedDimensionError(f"unsupported-dimension for oracle: m={sc.system.m} > 2")
    levels = tuple(vd.get("start_levels_degradation_units", [0.0] * sc.system.m))
    st = StartState(levels, float(vd.get("time_to_inspection_time_units", sc.policy.inspection_period)))
    st.check(sc.system, sc.policy)
    vsim = _build_sim(vd.get("simulation"), sc.sim)
    if args.effort is not None:
        # fine grid kept; only the cycle count follows the preset
        n = {"quick": 4000, "standard": 10000, "full": 20000}[args.effort]
        vsim = replace(vsim, horizon_cycles=n, replications=5)
    if args.seed is not None:
        vsim = replace(vsim, base_seed=int(args.seed))
    vsim.check_delay(sc.system.delay)
    rows = compare_with_oracle(
        sc.system, sc.policy, st, vsim,
        oracle_effort=int(vd.get("oracle_samples", 400_000)),
        oracle_grid_step=float(vd.get("oracle_grid_step_time_units", 0.002)),
        threads=args.threads,
    )
    ok = all(abs(r.z) <= Z_LIMIT for r in rows)
    print(f"{'quantity':<24} {'oracle':>12} {'simulated':>12} {'std_error':>10} {'z':>7}")
    for r in rows:
        print(f"{r.quantity:<24} {r.oracle:>12.6g} {r.simulated.mean:>12.6g} "
              f"{r.simulated.std_error:>10.3g} {r.z:>7.2f}")
    print("all |z| <= 3" if ok else "some |z| > 3")
    if args.out:
        cfg = _config(sc, args)
        cfg["validation_simulation"] = vsim.as_dict()
        cfg["start_state"] = {"levels": list(st.levels), "time_to_inspection": st.time_to_inspection}
        _write(args.out, "validate", cfg, {"rows": [r.as_dict() for r in rows], "all_within_3": ok},
               ["quantity", "oracle", "simulated", "std_error", "z"],
               [[r.quantity, r.oracle, r.simulated.mean, r.simulated.std_error, r.z] for r in rows], [])
    return EXIT_OK if ok else EXIT_NUMERICAL


def _critical_settings(sc: Scenario) -> dict:
    d = sc.raw.get("curves", {}).get("critical_probability", {})
    return {
        "alphas": d.get("shape_rates_per_time_unit", [0.2, 0.3, 0.4, 0.5, 0.6]),
        "m_values": d.get("m_values", [2, 3, 4, 5]),
        "rate": d.get("rate_per_degradation_unit", 1.0),
        "L": d.get("failure_threshold_degradation_units", 6.0),
        "M": d.get("preventive_threshold_degradation_units", 3.0),
        "T": d.get("inspection_period_time_units", 100.0),
        "lam": d.get("nondegrading_rate_per_time_unit", 0.025),
        "taus": d.get("taus_time_units", [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0]),
        "sim": _build_sim(d.get("simulation"), sc.sim),
    }


def critical_curves(sc: Scenario, threads=None, effort: str | None = None) -> list[dict]:
    """Critical probability versus delay, one series per component count.

    The ``m``-component system uses the first ``m`` shape rates.
    """
    cs = _critical_settings(sc)
    sim = cs["sim"]
    if effort is not None:
        e = EFFORTS[effort]
        sim = replace(sim, horizon_cycles=e["horizon_cycles"], replications=e["replications"])
    taus = [float(t) for t in cs["taus"]]
    positive = [t for t in taus if t > 0]
    if positive and sim.grid_step > min(positive) / 5:
        raise ConfigError("curve grid step must not exceed a fifth of the smallest positive delay")
    out = []
    for m in cs["m_values"]:
        if m > len(cs["alphas"]):
            raise ConfigError(f"m={m} exceeds the number of listed shape rates")
        comps = [ComponentSpec(GammaParams(a, cs["rate"]), cs["L"]) for a in cs["alphas"][:m]]
        s = SystemSpec(tuple(comps), nondegrading_rate=cs["lam"], delay=0.0)
        p = PolicyVector(cs["T"], tuple([cs["M"]] * m))
        ests = critical_probability_curve(s, p, taus, sim, threads)
        for tau, e in zip(taus, ests):
            if e is not None:
                out.append({"figure": "critical_probability", "series": f"m={m}", "x": tau,
                            "estimate": e.mean, "std_error": e.std_error})
    return out


def reward_curves(sc: Scenario, threads=None, effort: str | None = None) -> list[dict]:
    """Expected reward rate versus inspection period, one series per shape rate."""
    d = sc.raw.get("curves", {}).get("reward_rate", {})
    sim = _build_sim(d.get("simulation"), sc.sim)
    if effort is not None:
        e = EFFORTS[effort]
        sim = replace(sim, horizon_cycles=e["horizon_cycles"] * 2, replications=e["replications"])
    horizon = float(d.get("horizon_time_units", 10.0))
    points = int(d.get("points", 20))
    periods = np.linspace(horizon / points, horizon, points)
    L = d.get("failure_threshold_degradation_units", "inf")
    L = math.inf if L == "inf" else float(L)
    out = []
    for a in d.get("shape_rates_per_time_unit", [1.0, 1.1, 1.2, 1.3, 1.4]):
        c = ComponentSpec(
            GammaParams(a, d.get("rate_per_degradation_unit", 1.0)), L,
            reward_floor=d.get("reward_floor_money_per_time_unit", 2.0),
            reward_amplitude=d.get("reward_amplitude_money_per_time_unit", 2.0),
            reward_decay=d.get("reward_decay_per_degradation_unit", 2.0),
        )
        rc = reward_rate_curve(c, horizon, sim, periods=periods, threads=threads)
        for T, mu, se in zip(rc.periods, rc.mean, rc.std_error):
            out.append({"figure": "reward_rate", "series": f"alpha={a:g}", "x": float(T),
                        "estimate": float(mu), "std_error": float(se)})
    return out


def cmd_curves(args) -> int:
    sc = _load(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = critical_curves(sc, args.threads, args.effort) + reward_curves(sc, args.threads, args.effort)
    header = ["figure", "series", "x", "estimate", "std_error"]
    _write(args.out, "curves", _config(sc, args), {"points": pts}, header,
           [[p[k] for k in header] for p in pts], [])
    print(f"{len(pts)} curve points written")
    return EXIT_OK


def sensitivity_plans(sc: Scenario) -> list[SensitivityPlan]:
    sd = sc.raw.get("sensitivity")
    if not sd:
        raise ScenarioError("sensitivity needs a 'sensitivity' section")
    default_m = sd.get("m_values", [sc.system.m])
    return [
        SensitivityPlan(pd["parameter"], tuple(pd["grid"]), tuple(pd.get("m_values", default_m)),
                        sc.system, sc.opt)
        for pd in sd["plans"]
    ]


def cmd_sensitivity(args) -> int:
    sc = _load(args)
    plans = sensitivity_plans(sc)
    tables = []
    baselines: dict[int, object] = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for plan in plans:
            for m in plan.m_values:
                if m not in baselines:
                    baselines[m] = optimize(plan.system(m), plan.opt, threads=args.threads)
            tables.append(run_sensitivity(plan, threads=args.threads, baselines=baselines))
    header = ["m", "parameter", "value", "V", "std_error_proxy", "cost", "T", "M", "feasible"]
    rows = []
    for t in tables:
        for c in t.cells:
            rows.append([c.m, c.parameter, c.value, c.V, c.std_error_proxy, c.cost,
                         c.policy.inspection_period,
                         " ".join(repr(float(v)) for v in c.policy.preventive_thresholds),
                         "true" if c.feasible else "infeasible"])
    text = "\n\n".join(t.render() for t in tables) + "\n"
    result = {
        "tables": [
            {"parameter": t.parameter,
             "cells": [{"m": c.m, "value": c.value, "V": c.V, "std_error_proxy": c.std_error_proxy,
                        "cost": c.cost, "cost_std_error": c.cost_std_error,
                        "policy": _policy_rows(c.policy), "feasible": c.feasible,
                        "baseline": c.baseline} for c in t.cells]}
            for t in tables
        ],
        "baselines": {str(m): b.as_dict() for m, b in baselines.items()},
    }
    _write(args.out, "sensitivity", _config(sc, args), result, header, rows, [], extra={".txt": text})
    print(text, end="")
    return EXIT_OK


# ---- entry point ------------------------------------------------------------------

def _emit_banner(notes):
    for n in notes:
        print(n, file=sys.stderr)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gammacbm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    commands = {
        "simulate": (cmd_simulate, "long-run cost rate of the scenario policy", True),
        "optimize": (cmd_optimize, "search for the cheapest feasible policy", True),
        "validate": (cmd_validate, "quadrature versus simulation from a fixed start", False),
        "curves": (cmd_curves, "plot-ready data for the delay and reward figures", True),
        "sensitivity": (cmd_sensitivity, "relative cost variation tables", True),
    }
    for name, (fn, help_, needs_out) in commands.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--scenario", required=True, metavar="PATH")
        p.add_argument("--out", required=needs_out, metavar="PATH",
                       help="result document path; the CSV is written alongside")
        p.add_argument("--seed", type=_u64, metavar="U64")
        p.add_argument("--threads", type=_positive, metavar="N")
        p.add_argument("--effort", choices=sorted(EFFORTS))
        p.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedDimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (NumericalError, SimulationFault) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
