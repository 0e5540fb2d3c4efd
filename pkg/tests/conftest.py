"""Shared fixtures: the benchmark system and cheap simulation settings."""

import warnings

import numpy as np
import pytest

from gammacbm import ComponentSpec, GammaParams, PolicyVector, SimConfig, SystemSpec

# benchmark degradation: shape rate 1.25 per time unit, scale 0.5 (rate 2)
BENCH_GAMMA = GammaParams(1.25, 2.0)
BENCH_POLICY = (4.317, 3.075)


def bench_component(alpha=1.25, rate=2.0, **kw):
    base = dict(
        failure_threshold=6.0,
        corrective_cost=80.0,
        preventive_cost=30.0,
        downtime_cost_rate=5.0,
        reward_floor=2.0,
        reward_amplitude=2.0,
        reward_decay=20.0,
    )
    base.update(kw)
    return ComponentSpec(GammaParams(alpha, rate), **base)


def bench_system(m=2, alphas=None, lam=0.025, tau=0.5, **kw):
    comps = [bench_component(a) for a in alphas] if alphas else [bench_component()] * m
    base = dict(nondegrading_corrective_cost=80.0, nondegrading_downtime_cost_rate=5.0, inspection_cost=10.0)
    base.update(kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SystemSpec(tuple(comps), nondegrading_rate=lam, delay=tau, **base)


def bench_policy(m=2, T=BENCH_POLICY[0], M=BENCH_POLICY[1]):
    return PolicyVector(T, (M,) * m)


@pytest.fixture
def system2():
    return bench_system(2)


@pytest.fixture
def policy2():
    return bench_policy(2)


@pytest.fixture
def quick_sim():
    return SimConfig(grid_step=0.05, horizon_cycles=600, replications=4, base_seed=7, warmup_cycles=50)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


# one verdict line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
