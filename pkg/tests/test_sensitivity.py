from dataclasses import replace

import pytest

from gammacbm import ConfigError, SimConfig
from gammacbm.opt import OptConfig
from gammacbm.sensitivity import SensitivityCell, SensitivityPlan, SensitivityTable, perturb, run_sensitivity

from conftest import bench_policy

CHEAP_SIM = SimConfig(grid_step=0.05, horizon_cycles=200, replications=2, base_seed=9, warmup_cycles=20)


@pytest.fixture
def cheap_opt():
    return OptConfig(budget=6, seed_samples=2, T_max=12.0, tied_thresholds=True, sim=CHEAP_SIM,
                     search_sim=CHEAP_SIM)


class TestPerturb:
    def test_alpha(self, system2):
        s = perturb(system2, "alpha", 1.4)
        assert all(c.gamma.shape_rate == 1.4 for c in s.components)
        assert all(c.gamma.rate == 2.0 for c in s.components)

    def test_beta_is_rate(self, system2):
        s = perturb(system2, "beta", 1 / 0.4)
        assert s.components[0].gamma.rate == pytest.approx(2.5)

    def test_lambda(self, system2):
        assert perturb(system2, "lambda", 0.04).nondegrading_rate == 0.04
        assert system2.nondegrading_rate == 0.025

    def test_unknown(self, system2):
        with pytest.raises(ConfigError):
            perturb(system2, "tau", 1.0)


class TestPlan:
    def test_baseline_value(self, system2, cheap_opt):
        plan = SensitivityPlan("beta", (1.5, 2.0, 2.5), (2,), system2, cheap_opt)
        assert plan.baseline_value == 2.0
        assert plan.system(5).m == 5
        assert plan.system(3, 2.5).components[2].gamma.rate == 2.5

    @pytest.mark.parametrize("parameter,grid,ms", [
        ("gamma", (1.25,), (2,)),
        ("alpha", (), (2,)),
        ("alpha", (1.25, -1.0), (2,)),
        ("alpha", (1.1, 1.2), (2,)),
        ("alpha", (1.25,), (0,)),
    ])
    def test_invalid(self, system2, cheap_opt, parameter, grid, ms):
        with pytest.raises(ConfigError):
            SensitivityPlan(parameter, grid, ms, system2, cheap_opt)


class TestRun:
    def test_baseline_cell_is_zero(self, system2, cheap_opt):
        plan = SensitivityPlan("lambda", (0.025, 0.04), (2,), system2, cheap_opt)
        table = run_sensitivity(plan)
        base = table.lookup(2, 0.025)
        assert base.baseline and base.V == 0.0
        cell = table.lookup(2, 0.04)
        assert not cell.baseline
        assert cell.V == pytest.approx(abs(cell.cost - base.cost) / base.cost)
        assert cell.std_error_proxy > 0

    def test_shared_baselines_are_used(self, system2, cheap_opt):
        from gammacbm.opt import optimize

        base = optimize(system2, cheap_opt)
        plan = SensitivityPlan("alpha", (1.25,), (2,), system2, cheap_opt)
        table = run_sensitivity(plan, baselines={2: base})
        assert table.lookup(2, 1.25).policy == base.best_policy
        assert table.lookup(2, 1.25).cost == base.best_cost.mean

    def test_reproducible(self, system2, cheap_opt):
        plan = SensitivityPlan("alpha", (1.25, 1.35), (2,), system2, cheap_opt)
        assert run_sensitivity(plan) == run_sensitivity(plan)


def _table():
    p = bench_policy(2)
    cells = (
        SensitivityCell(2, "alpha", 1.25, 0.0, 0.0, 8.0, 0.1, p, True, True),
        SensitivityCell(2, "alpha", 1.4, 0.05, 0.01, 8.4, 0.1, p, False, False),
        SensitivityCell(5, "alpha", 1.25, 0.0, 0.0, 15.0, 0.1, p, True, True),
    )
    return SensitivityTable("alpha", cells)


class TestTable:
    def test_lookup_and_max(self):
        t = _table()
        assert t.lookup(2, 1.4).cost == 8.4
        assert t.max_v(2) == 0.05
        with pytest.raises(KeyError):
            t.lookup(5, 1.4)

    def test_csv(self):
        lines = _table().to_csv().split("\r\n")
        assert lines[0].startswith("m,parameter,value,V")
        assert lines[2].endswith(",infeasible")
        assert lines[1].endswith(",true")
        assert lines[-1] == ""

    def test_render_marks_infeasible(self):
        text = _table().render()
        assert "0.0500*" in text
        assert "* infeasible cell" in text
        # missing (m=5, 1.4) cell is left blank
        assert text.splitlines()[-2].rstrip().endswith("0.0000")

    def test_all_feasible_has_no_legend(self):
        t = _table()
        t = SensitivityTable("alpha", tuple(replace(c, feasible=True) for c in t.cells))
        assert "infeasible" not in t.render()
