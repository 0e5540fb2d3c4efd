import math

import numpy as np
import pytest
from scipy import integrate, stats

from gammacbm.gamma import (
    GammaParams,
    first_passage_cdf,
    first_passage_pdf,
    first_passage_sf,
    increment_cdf,
    increment_pdf,
    increment_sf,
    sample_first_passage,
    sample_increment,
    sigma_diff_survival,
)

EXP = GammaParams(1.0, 1.0)
GENERIC = GammaParams(1.25, 0.5)

# [DERIVED] mpmath quadrature of the density, 30 digits
INC_CDF_125_05_T4_X6 = 0.18473675547622793
# [DERIVED] 2e5 plain grid walks (numpy cumsum, step 0.01), seed 12345
SIGMA_DIFF_3_6_T2 = (0.18611, 0.00087027)
# [DERIVED] same walks, seed 777: P(sigma_6 > sigma_3); one jump may cross both levels
SIGMA_DIFF_3_6_T0 = (0.92883, 0.00081305)


class TestGammaParams:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            GammaParams(0.0, 1.0)
        with pytest.raises(ValueError):
            GammaParams(1.0, -2.0)

    def test_mean_and_variance(self):
        assert GENERIC.mean(2.0) == pytest.approx(1.25 * 2 / 0.5)
        assert GENERIC.variance(2.0) == pytest.approx(1.25 * 2 / 0.25)

    def test_from_scale(self):
        assert GammaParams.from_scale(1.25, 0.5).rate == 2.0


class TestIncrementPdf:
    def test_exponential_special_case(self):
        assert increment_pdf(EXP, 1.0, 0.5) == pytest.approx(math.exp(-0.5), rel=1e-12)

    def test_matches_gamma_density(self):
        x = np.linspace(0.1, 20, 50)
        ref = stats.gamma.pdf(x, 2.5, scale=2.0)
        np.testing.assert_allclose(increment_pdf(GENERIC, 2.0, x), ref, rtol=1e-12)

    def test_normalised(self):
        val, _ = integrate.quad(lambda x: increment_pdf(GammaParams(2.0, 1.0), 1.0, x), 0, np.inf)
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_nonpositive_duration(self):
        with pytest.raises(ValueError):
            increment_pdf(EXP, 0.0, 1.0)


class TestIncrementCdf:
    def test_zero(self):
        assert increment_cdf(GENERIC, 3.0, 0.0) == 0.0

    def test_exponential_special_case(self):
        assert increment_cdf(EXP, 1.0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-12)

    def test_derived_quadrature_value(self):
        assert increment_cdf(GENERIC, 4.0, 6.0) == pytest.approx(INC_CDF_125_05_T4_X6, abs=1e-12)

    @pytest.mark.parametrize("duration,x", [(0.3, 0.2), (1.0, 2.5), (4.0, 6.0), (10.0, 3.0)])
    def test_equals_integrated_density(self, duration, x):
        val, _ = integrate.quad(lambda u: increment_pdf(GENERIC, duration, u), 0, x,
                                epsabs=1e-12, epsrel=1e-12, limit=200)
        assert increment_cdf(GENERIC, duration, x) == pytest.approx(val, abs=1e-8)

    def test_monotone_and_limit(self):
        x = np.linspace(0, 200, 400)
        v = increment_cdf(GENERIC, 2.0, x)
        assert np.all(np.diff(v) >= 0)
        assert v[-1] == pytest.approx(1.0, abs=1e-12)

    def test_rejects_negative_x(self):
        with pytest.raises(ValueError):
            increment_cdf(GENERIC, 1.0, -1.0)

    def test_sf_zero_duration_convention(self):
        assert increment_sf(GENERIC, 0.0, 0.5) == 0.0
        assert increment_sf(GENERIC, 0.0, 0.0) == 1.0


class TestFirstPassage:
    def test_zero_level(self):
        assert first_passage_cdf(GENERIC, 0.0, 2.0) == 1.0

    def test_zero_time(self):
        assert first_passage_cdf(GENERIC, 3.0, 0.0) == 0.0

    def test_complement_of_increment_cdf(self):
        rng = np.random.default_rng(3)
        z = rng.uniform(0.01, 12, 1000)
        t = rng.uniform(0.01, 15, 1000)
        np.testing.assert_allclose(first_passage_cdf(GENERIC, z, t), 1 - increment_cdf(GENERIC, t, z),
                                   atol=1e-10, rtol=0)

    def test_sf_complements_cdf(self):
        t = np.linspace(0, 10, 101)
        np.testing.assert_allclose(first_passage_cdf(GENERIC, 6.0, t) + first_passage_sf(GENERIC, 6.0, t), 1.0)

    def test_monotone(self):
        t = np.linspace(0, 20, 300)
        assert np.all(np.diff(first_passage_cdf(GENERIC, 6.0, t)) >= 0)
        z = np.linspace(0, 20, 300)
        assert np.all(np.diff(first_passage_cdf(GENERIC, z, 5.0)) <= 0)

    def test_monte_carlo_crossing_probability(self, rng):
        # [DERIVED] grid-time crossings; 5 is a grid point so the law is exact
        n = 200_000
        times, _ = sample_first_passage(GENERIC, 6.0, rng, size=n, grid_step=0.01)
        est = np.mean(times <= 5.0 + 1e-9)
        ref = first_passage_cdf(GENERIC, 6.0, 5.0)
        assert abs(est - ref) < 4 * math.sqrt(ref * (1 - ref) / n)


class TestFirstPassagePdf:
    def test_integrates_to_cdf(self):
        horizon = 10 * GENERIC.mean_passage_time(3.0)
        val, _ = integrate.quad(lambda t: first_passage_pdf(GENERIC, 3.0, t), 0, horizon, limit=200)
        assert val == pytest.approx(first_passage_cdf(GENERIC, 3.0, horizon), abs=1e-5)

    def test_nonnegative(self):
        t = np.linspace(0.01, 30, 200)
        assert np.all(first_passage_pdf(GENERIC, 3.0, t) >= 0)

    def test_mode_bracketed_by_histogram(self, rng):
        # [DERIVED] modal bin of simulated crossing times holds the density mode
        times, _ = sample_first_passage(GENERIC, 3.0, rng, size=400_000, grid_step=0.002)
        width = 0.1
        counts, edges = np.histogram(times, bins=np.arange(0, 8 + width, width))
        k = int(np.argmax(counts))
        grid = np.linspace(0.05, 8, 4000)
        mode = grid[np.argmax(first_passage_pdf(GENERIC, 3.0, grid))]
        assert edges[k] - width <= mode <= edges[k + 1] + width

    def test_small_level_concentrates_near_zero(self):
        grid = np.linspace(0.001, 5, 2000)
        mode = grid[np.argmax(first_passage_pdf(GENERIC, 1e-3, grid))]
        assert mode < 0.05
        levels = [1.0, 1e-3, 1e-6]
        mass = [first_passage_cdf(GENERIC, z, 0.2) for z in levels]
        assert mass[0] < mass[1] < mass[2]
        assert mass[2] > 0.95

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            first_passage_pdf(GENERIC, 3.0, 0.0)

    def test_far_tail_is_zero(self):
        assert first_passage_pdf(GENERIC, 3.0, 1e22) == 0.0


class TestSampling:
    def test_moments(self, rng):
        x = sample_increment(GENERIC, 1.0, rng, 1_000_000)
        se = math.sqrt(GENERIC.variance(1.0) / x.size)
        assert abs(x.mean() - 2.5) < 3 * se
        var_se = GENERIC.variance(1.0) * math.sqrt(2.0 / x.size) * 1.5
        assert abs(x.var(ddof=1) - GENERIC.variance(1.0)) < 3 * var_se

    def test_reproducible(self):
        a = sample_increment(GENERIC, 0.3, np.random.default_rng(11), 50)
        b = sample_increment(GENERIC, 0.3, np.random.default_rng(11), 50)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("duration", [0.01, 1.0])
    def test_ks(self, rng, duration):
        x = sample_increment(GENERIC, duration, rng, 1_000_000)
        res = stats.kstest(x, lambda v: increment_cdf(GENERIC, duration, v))
        assert res.pvalue > 0.001

    def test_rejects_nonpositive_duration(self, rng):
        with pytest.raises(ValueError):
            sample_increment(GENERIC, 0.0, rng)


class TestSigmaDiffSurvival:
    def test_zero_time(self, rng):
        est = sigma_diff_survival(GENERIC, 3.0, 6.0, 0.0, 100_000, rng)
        ref, ref_se = SIGMA_DIFF_3_6_T0
        assert abs(est.z_score(ref, ref_se)) < 4

    def test_zero_time_small_jumps(self, rng):
        # a wide band is rarely crossed by a single jump
        est = sigma_diff_survival(GammaParams(1.25, 20.0), 0.3, 6.0, 0.0, 1000, rng)
        assert est.mean == 1.0

    def test_large_time(self, rng):
        est = sigma_diff_survival(GENERIC, 3.0, 6.0, 200.0, 1000, rng)
        assert est.mean == 0.0

    def test_derived_grid_walk_value(self, rng):
        est = sigma_diff_survival(GENERIC, 3.0, 6.0, 2.0, 200_000, rng, grid_step=0.01)
        ref, ref_se = SIGMA_DIFF_3_6_T2
        assert abs(est.z_score(ref, ref_se)) < 4

    def test_monotone(self, rng):
        t = np.linspace(0, 10, 41)
        est = sigma_diff_survival(GENERIC, 3.0, 6.0, t, 20_000, rng)
        assert np.all(np.diff(est.mean) <= 0)

    def test_effort_guard(self, rng):
        with pytest.raises(ValueError):
            sigma_diff_survival(GENERIC, 3.0, 6.0, 1.0, 99, rng)

    def test_order_guard(self, rng):
        with pytest.raises(ValueError):
            sigma_diff_survival(GENERIC, 6.0, 3.0, 1.0, 1000, rng)
