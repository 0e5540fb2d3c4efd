import csv
import io
import json
from pathlib import Path

import pytest

from gammacbm import ConfigError
from gammacbm.cli import EXIT_INPUT, EXIT_OK, EXIT_UNSUPPORTED, MU_BANNER, main
from gammacbm.scenario import (
    PRESETS,
    ScenarioError,
    apply_overrides,
    load_scenario,
    parse_scenario,
    preset,
)

TINY_SIM = {"grid_step_time_units": 0.05, "horizon_cycles": 300, "replications": 2,
            "base_seed": 17, "warmup_cycles": 20}


def tiny(name="identical-m2", **sections):
    doc = preset(name)
    doc["simulation"] = dict(TINY_SIM)
    doc.update(sections)
    return doc


def write(tmp_path, doc, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return p


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestScenario:
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets_parse(self, name):
        sc = parse_scenario(preset(name))
        assert sc.system.m >= 1

    def test_bundled_files_match_presets(self):
        root = Path(__file__).resolve().parents[1] / "scenarios"
        for n, make in PRESETS.items():
            assert json.loads((root / f"{n}.json").read_text()) == make()

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset("nope")

    def test_counts_expand(self):
        sc = parse_scenario(preset("identical-m4"))
        assert sc.system.m == 4
        assert sc.policy.preventive_thresholds == (3.68,) * 4

    def test_schema_error_has_line(self, tmp_path):
        doc = tiny()
        doc["system"]["components"][0]["shape_rate_per_time_unit"] = -1.0
        p = write(tmp_path, doc)
        with pytest.raises(ScenarioError) as exc:
            load_scenario(p)
        text = p.read_text().splitlines()
        assert "shape_rate_per_time_unit" in text[exc.value.line - 1]
        assert exc.value.path == "system.components[0].shape_rate_per_time_unit"

    def test_unknown_key_rejected(self):
        doc = tiny()
        doc["system"]["colour"] = "red"
        with pytest.raises(ScenarioError):
            parse_scenario(doc)

    def test_json_syntax_error_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "schema_version": 1,\n  "system": {,\n}\n')
        with pytest.raises(ScenarioError) as exc:
            load_scenario(p)
        assert exc.value.line == 3

    def test_model_invariant_reported(self):
        doc = tiny()
        doc["policy"]["inspection_period_time_units"] = 0.8  # below twice the delay
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(doc)
        assert exc.value.path == "policy"

    def test_infinite_threshold(self):
        doc = tiny()
        doc["system"]["components"][0]["failure_threshold_degradation_units"] = "inf"
        doc.pop("policy")
        with pytest.raises(ScenarioError) as exc:
            # an infinite threshold leaves no bounded preventive range to search
            parse_scenario(doc)
        assert exc.value.path == "optimization"
        doc.pop("optimization")
        assert parse_scenario(doc).system.components[0].failure_threshold == float("inf")

    def test_overrides(self):
        doc = tiny()
        out = apply_overrides(doc, seed=99, effort="quick")
        assert out["simulation"]["base_seed"] == 99
        assert out["simulation"]["horizon_cycles"] == 1100
        assert doc["simulation"]["base_seed"] == 17
        # grid capped at a fifth of the delay
        doc["system"]["delay_time_units"] = 0.1
        out = apply_overrides(doc, effort="quick")
        assert out["simulation"]["grid_step_time_units"] == pytest.approx(0.02)


class TestSimulateCommand:
    def test_outputs(self, tmp_path):
        p = write(tmp_path, tiny())
        out = tmp_path / "res"
        assert main(["simulate", "--scenario", str(p), "--out", str(out)]) == EXIT_OK
        doc = json.loads((tmp_path / "res.json").read_text())
        assert doc["command"] == "simulate"
        assert doc["config"]["seed"] == 17
        assert doc["config"]["resolved_simulation"]["horizon_cycles"] == 300
        assert doc["result"]["cost_rate"]["mean"] > 0
        rows = read_csv(tmp_path / "res.csv")
        assert rows[0][0] == "config_json"
        assert json.loads(rows[0][1])["seed"] == 17
        assert rows[1] == ["quantity", "estimate", "std_error"]
        assert rows[2][0] == "cost_rate"
        assert float(rows[2][1]) == doc["result"]["cost_rate"]["mean"]
        assert b"\r\n" in (tmp_path / "res.csv").read_bytes()

    def test_zero_costs_give_zero(self, tmp_path):
        doc = tiny()
        comp = doc["system"]["components"][0]
        for k in list(comp):
            if "money" in k:
                comp[k] = 0.0
        for k in list(doc["system"]):
            if "money" in k:
                doc["system"][k] = 0.0
        p = write(tmp_path, doc)
        assert main(["simulate", "--scenario", str(p), "--out", str(tmp_path / "z.json")]) == EXIT_OK
        res = json.loads((tmp_path / "z.json").read_text())["result"]
        assert res["cost_rate"]["mean"] == 0.0

    def test_seed_override_reproducible(self, tmp_path):
        p = write(tmp_path, tiny())
        results = []
        for tag, seed in (("a", "5"), ("b", "5"), ("c", "6")):
            main(["simulate", "--scenario", str(p), "--out", str(tmp_path / tag), "--seed", seed])
            results.append(json.loads((tmp_path / f"{tag}.json").read_text())["result"]["cost_rate"])
        assert results[0] == results[1]
        assert results[0] != results[2]

    def test_thread_count_does_not_matter(self, tmp_path):
        p = write(tmp_path, tiny())
        for tag, n in (("one", "1"), ("three", "3")):
            main(["simulate", "--scenario", str(p), "--out", str(tmp_path / tag), "--threads", n])
        a = json.loads((tmp_path / "one.json").read_text())["result"]
        b = json.loads((tmp_path / "three.json").read_text())["result"]
        assert a == b

    def test_mu_banner(self, tmp_path, capsys):
        doc = tiny()
        doc["system"]["nondegrading_rate_per_time_unit"] = 50.0
        p = write(tmp_path, doc)
        assert main(["simulate", "--scenario", str(p), "--out", str(tmp_path / "mu")]) == EXIT_OK
        assert MU_BANNER in capsys.readouterr().err
        assert MU_BANNER in json.loads((tmp_path / "mu.json").read_text())["warnings"]

    def test_missing_policy(self, tmp_path):
        doc = tiny()
        doc.pop("policy")
        p = write(tmp_path, doc)
        assert main(["simulate", "--scenario", str(p), "--out", str(tmp_path / "x")]) == EXIT_INPUT


class TestErrors:
    def test_malformed_file_exit_2_and_no_output(self, tmp_path, capsys):
        doc = tiny()
        doc["system"]["components"][0]["shape_rate_per_time_unit"] = "fast"
        p = write(tmp_path, doc)
        out = tmp_path / "never"
        assert main(["simulate", "--scenario", str(p), "--out", str(out)]) == EXIT_INPUT
        assert "line " in capsys.readouterr().err
        assert not list(tmp_path.glob("never*"))

    def test_missing_file(self, tmp_path):
        assert main(["simulate", "--scenario", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == EXIT_INPUT

    def test_bad_arguments(self, tmp_path):
        p = write(tmp_path, tiny())
        for extra in (["--seed", "-1"], ["--threads", "0"], ["--effort", "huge"]):
            with pytest.raises(SystemExit) as exc:
                main(["simulate", "--scenario", str(p), "--out", str(tmp_path / "o"), *extra])
            assert exc.value.code == 2

    def test_validate_three_components_unsupported(self, tmp_path):
        p = write(tmp_path, tiny("identical-m3"))
        assert main(["validate", "--scenario", str(p)]) == EXIT_UNSUPPORTED


class TestValidateCommand:
    def test_no_nondegrading_failures(self, tmp_path, capsys):
        doc = tiny("validate-m1")
        doc["system"]["nondegrading_rate_per_time_unit"] = 0.0
        doc["validation"]["oracle_samples"] = 20000
        doc["validation"]["simulation"] = {"grid_step_time_units": 0.01, "horizon_cycles": 2000,
                                           "replications": 3, "base_seed": 4, "warmup_cycles": 0}
        p = write(tmp_path, doc)
        code = main(["validate", "--scenario", str(p), "--out", str(tmp_path / "v")])
        res = json.loads((tmp_path / "v.json").read_text())["result"]
        rows = {r["quantity"]: r for r in res["rows"]}
        assert rows["P_nondegrading_repair"]["oracle"] == 0.0
        assert rows["P_nondegrading_repair"]["simulated"] == 0.0
        assert code == (EXIT_OK if res["all_within_3"] else 4)
        assert "quantity" in capsys.readouterr().out


class TestOptimizeCommand:
    def test_trace_rows(self, tmp_path):
        doc = tiny()
        doc["optimization"].update(budget=6, seed_samples=2)
        p = write(tmp_path, doc)
        assert main(["optimize", "--scenario", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK
        res = json.loads((tmp_path / "o.json").read_text())["result"]
        rows = read_csv(tmp_path / "o.csv")
        assert rows[1][:3] == ["index", "phase", "T"]
        assert len(rows) - 2 == res["evaluations"] <= 6
        assert res["best_policy"]["T"] <= 12.0


class TestSensitivityCommand:
    def test_tables(self, tmp_path):
        doc = tiny("sensitivity")
        doc["optimization"].update(budget=4, seed_samples=2)
        doc["sensitivity"] = {"m_values": [2],
                              "plans": [{"parameter": "lambda", "grid": [0.025, 0.04]}]}
        p = write(tmp_path, doc)
        assert main(["sensitivity", "--scenario", str(p), "--out", str(tmp_path / "s")]) == EXIT_OK
        text = (tmp_path / "s.txt").read_text()
        assert text.startswith("V for lambda")
        rows = read_csv(tmp_path / "s.csv")
        assert [r[2] for r in rows[2:]] == ["0.025", "0.04"]
        assert rows[2][3] == "0.0"


class TestCurvesCommand:
    def test_points(self, tmp_path):
        doc = tiny("figures")
        crit = doc["curves"]["critical_probability"]
        crit.update(m_values=[2], taus_time_units=[0.0, 4.0],
                    simulation={**TINY_SIM, "horizon_cycles": 200})
        rew = doc["curves"]["reward_rate"]
        rew.update(shape_rates_per_time_unit=[1.0], points=4,
                   simulation={**TINY_SIM, "grid_step_time_units": 0.05, "warmup_cycles": 0})
        p = write(tmp_path, doc)
        assert main(["curves", "--scenario", str(p), "--out", str(tmp_path / "c")]) == EXIT_OK
        rows = read_csv(tmp_path / "c.csv")
        assert rows[1] == ["figure", "series", "x", "estimate", "std_error"]
        figs = [r[0] for r in rows[2:]]
        assert figs.count("critical_probability") == 2 and figs.count("reward_rate") == 4
        for r in rows[2:]:
            assert 0.0 <= float(r[3]) <= 4.0

    def test_csv_is_rfc4180(self, tmp_path):
        p = write(tmp_path, tiny())
        main(["simulate", "--scenario", str(p), "--out", str(tmp_path / "r")])
        raw = (tmp_path / "r.csv").read_bytes().decode()
        again = list(csv.reader(io.StringIO(raw, newline="")))
        assert again == read_csv(tmp_path / "r.csv")
        assert raw.count("\r\n") == len(again)
