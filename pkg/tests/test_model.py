import math
import warnings

import numpy as np
import pytest

from gammacbm import (
    ComponentSpec,
    ConfigError,
    ConstraintSpec,
    GammaParams,
    PolicyVector,
    SystemSpec,
    lemma1_mu,
    reward_rate_at,
)
from gammacbm.model import DegenerateInputWarning

from conftest import bench_component, bench_policy, bench_system

# [DERIVED] mpmath evaluation of the closed-form bound at the benchmark policy
MU_BENCH = 0.99999975312336880


class TestComponentSpec:
    def test_rejects_nonpositive_threshold(self):
        with pytest.raises(ConfigError):
            ComponentSpec(GammaParams(1, 1), 0.0)

    @pytest.mark.parametrize("field", ["corrective_cost", "preventive_cost", "downtime_cost_rate",
                                       "reward_floor", "reward_amplitude", "reward_decay"])
    def test_rejects_negative_money(self, field):
        with pytest.raises(ConfigError):
            ComponentSpec(GammaParams(1, 1), 6.0, **{field: -1.0})

    def test_infinite_threshold_allowed(self):
        assert ComponentSpec(GammaParams(1, 1), math.inf).failure_threshold == math.inf


class TestSystemSpec:
    def test_needs_components(self):
        with pytest.raises(ConfigError):
            SystemSpec((), 0.1, 0.5)

    def test_negative_rate(self):
        with pytest.raises(ConfigError):
            SystemSpec((bench_component(),), -0.1, 0.5)

    def test_zero_rate_warns(self):
        with pytest.warns(DegenerateInputWarning):
            SystemSpec((bench_component(),), 0.0, 0.5)

    def test_negative_delay(self):
        with pytest.raises(ConfigError):
            SystemSpec((bench_component(),), 0.1, -0.5)

    def test_m_and_fastest(self, system2):
        assert system2.m == 2
        assert system2.fastest_failure_time() == pytest.approx(6.0 * 2.0 / 1.25)


class TestPolicyVector:
    def test_valid(self, system2, policy2):
        assert policy2.validate(system2) is policy2

    def test_period_vs_delay(self, system2):
        with pytest.raises(ConfigError):
            PolicyVector(1.0, (3.0, 3.0)).validate(system2)

    def test_threshold_count(self, system2):
        with pytest.raises(ConfigError):
            PolicyVector(4.0, (3.0,)).validate(system2)

    @pytest.mark.parametrize("M", [0.0, 6.5])
    def test_threshold_range(self, system2, M):
        with pytest.raises(ConfigError):
            PolicyVector(4.0, (M, 3.0)).validate(system2)

    def test_degenerate_threshold_warns(self, system2):
        with pytest.warns(DegenerateInputWarning):
            PolicyVector(4.0, (6.0, 3.0)).validate(system2)

    def test_array_round_trip(self):
        p = PolicyVector(4.0, (3.0, 2.0))
        assert PolicyVector.from_array(p.as_array()) == p


class TestConstraintSpec:
    @pytest.mark.parametrize("w", [0.0, 1.0, -0.1])
    def test_range(self, w):
        with pytest.raises(ConfigError):
            ConstraintSpec(w)


class TestReward:
    def test_benchmark_value_at_zero(self):
        # θ0 = 2, g = 2, γ = 20
        assert reward_rate_at(bench_component(), 0.0) == pytest.approx(4.0)

    def test_constant_without_decay(self):
        c = bench_component(reward_decay=0.0)
        np.testing.assert_allclose(reward_rate_at(c, np.linspace(0, 5.9, 20)), 4.0)

    def test_floor(self):
        c = bench_component(failure_threshold=math.inf)
        assert reward_rate_at(c, 1e3) == pytest.approx(2.0)

    def test_zero_after_failure(self):
        assert reward_rate_at(bench_component(), 6.0) == 0.0

    def test_monotone_and_bounded(self):
        c = bench_component(reward_decay=0.7)
        v = reward_rate_at(c, np.linspace(0, 5.99, 300))
        assert np.all(np.diff(v) <= 0)
        assert np.all((v >= 2.0) & (v <= 4.0))


class TestStabilityBound:
    def test_benchmark_value(self, system2, policy2):
        mu = lemma1_mu(system2, policy2)
        assert mu == pytest.approx(MU_BENCH, abs=1e-12)
        assert mu < 1

    def test_large_rate_limit(self, policy2):
        s = bench_system(2, lam=1e4)
        assert lemma1_mu(s, policy2) == pytest.approx(1.0, abs=1e-12)

    def test_zero_delay_convention(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            s = bench_system(2, tau=0.0)
        assert lemma1_mu(s, PolicyVector(4.0, (1e-6, 1e-6))) == 1.0

    @pytest.mark.parametrize("lam", [0.0, 0.01, 0.1, 1.0])
    def test_in_unit_interval(self, lam):
        assert 0.0 <= lemma1_mu(bench_system(2, lam=lam), bench_policy()) <= 1.0

    def test_nondecreasing_in_rate(self):
        p = bench_policy(1, T=2.0, M=0.2)
        mus = [lemma1_mu(bench_system(1, lam=lam), p) for lam in (0.01, 0.1, 0.5, 2.0)]
        assert np.all(np.diff(mus) >= 0)

    def test_monotone_in_thresholds(self):
        p = bench_policy(1, T=2.0, M=0.2)
        comps = [bench_component(failure_threshold=L) for L in (1.0, 2.0, 4.0)]
        mus_L = [lemma1_mu(bench_system(1).with_components([c]), p) for c in comps]
        assert np.all(np.diff(mus_L) <= 0)
        mus_M = [lemma1_mu(bench_system(1), bench_policy(1, T=2.0, M=M)) for M in (0.1, 0.3, 0.6)]
        assert np.all(np.diff(mus_M) >= 0)
