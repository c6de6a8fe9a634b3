import json

import numpy as np
import pytest

from lazymdp import io as lio
from lazymdp.cli import ConfigError, build_parser, main, merge_settings, parse_eta_grid, parse_seeds
from lazymdp.gridworld import compile_grid, load_map

SMALL_EXPLORE = ["--seeds", "0:2", "--phases", "2", "--episodes-per-phase", "20", "--eval-episodes", "3"]


def run(tmp_path, *argv, out="out"):
    target = tmp_path / out
    code = main([*argv, "--out", str(target)])
    return code, target


class TestParsing:
    def test_eta_grid_forms(self):
        assert parse_eta_grid("0.3, 0.1,0.2") == [0.1, 0.2, 0.3]
        np.testing.assert_allclose(parse_eta_grid("lin:0:1:5"), [0, 0.25, 0.5, 0.75, 1])
        np.testing.assert_allclose(parse_eta_grid("log:0.001:1:4"), [0.001, 0.01, 0.1, 1])
        for bad in ("", "a,b", "log:0:1:3", "lin:0:1:0", "inf"):
            with pytest.raises(ConfigError):
                parse_eta_grid(bad)

    def test_seeds(self):
        assert parse_seeds({"seeds": "3:6"}) == [3, 4, 5]
        assert parse_seeds({"seeds": "1,4"}) == [1, 4]
        assert parse_seeds({"seed": 7, "seeds": "0:9"}) == [7]
        for bad in ("5:5", "x", "-1,2"):
            with pytest.raises(ConfigError):
                parse_seeds({"seeds": bad})

    def test_exclusive_flags(self):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["solve", "--eta", "0.1", "--eta-grid", "0.1,0.2"])
        assert info.value.code == 2

    def test_flags_override_ini(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text("[experiment]\nenv = kdt\neta_grid = 0.1,0.2\ntol = 1e-8\nseeds = 0:4\n")
        args = build_parser().parse_args(["sweep", "--config", str(ini), "--eta", "0.5", "--seed", "3"])
        s = merge_settings(args)
        assert s["env"] == "kdt" and s["tol"] == 1e-8
        assert s["eta"] == 0.5 and "eta_grid" not in s
        assert s["seed"] == 3 and "seeds" not in s

    @pytest.mark.parametrize("body", [
        "[other]\nenv = kdt\n",
        "[experiment]\ncolour = blue\n",
        "[experiment]\ntol = tiny\n",
        "[experiment]\neta = 0.1\neta_grid = 0.1,0.2\n",
        "not an ini file",
    ])
    def test_bad_ini(self, tmp_path, body, capsys):
        ini = tmp_path / "bad.ini"
        ini.write_text(body)
        code, out = run(tmp_path, "validate", "--config", str(ini))
        assert code == 2
        assert "config error" in capsys.readouterr().err
        assert not out.exists()


class TestExitCodes:
    def test_solve_between_bounds(self, tmp_path, rb):
        code, out = run(tmp_path, "solve", "--env", "rivers_bridges", "--eta", "0.05")
        assert code == 0
        doc = json.loads((out / "solution.json").read_text())
        assert 0 < len(doc["control_set"]) < int((~rb.mdp.absorbing).sum())
        cols = lio.read_csv_columns(out / "control_set.csv")
        assert cols["state"].astype(int).tolist() == doc["control_set"]
        assert (out / "heatmaps.txt").read_text().count("has_key=") == 2

    def test_malformed_map(self, tmp_path, capsys):
        bad = tmp_path / "bad.map"
        bad.write_text("#####\n#S?G#\n#####\n")
        code, out = run(tmp_path, "solve", "--env", str(bad), "--eta", "0.1")
        assert code == 2
        assert "line 2, col 3" in capsys.readouterr().err
        assert not out.exists()

    @pytest.mark.parametrize("argv", [
        ["solve", "--env", "nowhere"],
        ["solve", "--eta-grid", "0.1,0.2"],
        ["sweep"],
        ["solve", "--eta", "0.1", "--default", "optimal-except:lava"],
        ["solve", "--eta", "0.1", "--default", "file:/no/such.json"],
        ["solve", "--eta", "0.1", "--default", "greedy"],
        ["solve", "--eta", "0.1", "--gamma", "1.5"],
        ["explore", "--alpha", "0"],
        ["solve", "--eta", "0.1", "--workers", "0"],
    ])
    def test_config_errors(self, tmp_path, argv):
        code, out = run(tmp_path, *argv)
        assert code == 2
        assert not out.exists()

    def test_non_convergence(self, tmp_path, capsys):
        code, out = run(tmp_path, "solve", "--env", "kdt", "--eta", "0.02", "--max-iters", "1")
        assert code == 3
        assert "residual" in capsys.readouterr().err
        assert not out.exists()

    def test_validate_writes_nothing(self, tmp_path, capsys):
        code, out = run(tmp_path, "validate", "--env", "kdt", "--eta", "0.1")
        assert code == 0
        assert "config ok" in capsys.readouterr().out
        assert not out.exists()


class TestCommands:
    def test_eta_bounds(self, tmp_path):
        code, out = run(tmp_path, "eta-bounds", "--env", "rivers_bridges", "--default", "optimal-except")
        assert code == 0
        doc = json.loads((out / "bounds.json").read_text())
        assert doc["eta_min"] == 0.0 and doc["eta_max"] > 0
        header, rows = lio.read_csv(out / "bounds_states.csv")
        assert header[-5:] == ["u", "v", "ratio", "included", "gap_default"]

    def test_sweep_report(self, tmp_path):
        code, out = run(tmp_path, "sweep", "--env", "kdt", "--eta-grid", "log:1e-4:1:6")
        assert code == 0
        report = (out / "sweep_report.txt").read_text()
        assert "RESULT PASS" in report and "FAIL" not in report
        cols = lio.read_csv_columns(out / "sweep.csv")
        assert cols["lazy_frequency"][0] == 0.0 and cols["lazy_frequency"][-1] == 1.0

    def test_json_environment_and_file_default(self, tmp_path, rb):
        lio.save_mdp(tmp_path / "rb.json", rb.mdp)
        (tmp_path / "pi.json").write_text(json.dumps({"policy": np.full((rb.n_states, 4), 0.25).tolist()}))
        code, out = run(tmp_path, "solve", "--env", str(tmp_path / "rb.json"), "--eta", "0.05",
                        "--default", f"file:{tmp_path / 'pi.json'}")
        assert code == 0
        reference = json.loads((run(tmp_path, "solve", "--eta", "0.05", out="ref")[1] / "solution.json").read_text())
        assert json.loads((out / "solution.json").read_text())["control_set"] == reference["control_set"]

    def test_explore_smoke(self, tmp_path):
        code, out = run(tmp_path, "explore", "--eta-grid", "0,0.05", *SMALL_EXPLORE)
        assert code == 0
        curves = lio.read_csv_columns(out / "curves.csv")
        assert len(curves["phase"]) == 4
        final = lio.read_csv_columns(out / "final.csv")
        assert final["seed"].tolist() == [0, 1, 0, 1]
        grid = compile_grid(load_map("kdt_apple"))
        occ = lio.read_csv_columns(out / "occupancy.csv")
        assert len(occ["state"]) == grid.n_states
        np.testing.assert_allclose(occ["occupancy_eta_0"].sum(), 1.0, atol=1e-9)

    def test_importance(self, tmp_path, capsys):
        code, out = run(tmp_path, "importance")
        assert code == 0
        header, _ = lio.read_csv(out / "importance.csv")
        assert header[-4:] == ["action_gap", "importance_advice", "lazy_gap_eta_0.03", "lazy_gap_eta_0.05"]
        printed = capsys.readouterr().out
        assert "lazy_gap_eta_0.05: support" in printed


@pytest.mark.parametrize("argv", [
    ["solve", "--env", "kdt", "--eta", "0.02"],
    ["eta-bounds", "--env", "kdt", "--default", "second-best"],
    ["sweep", "--eta-grid", "log:1e-3:100:5", "--workers", "2"],
    ["explore", "--eta-grid", "0.03", *SMALL_EXPLORE, "--workers", "2"],
    ["importance", "--env", "kdt"],
])
def test_reruns_are_byte_identical(tmp_path, argv):
    code_a, a = run(tmp_path, *argv, out="a")
    code_b, b = run(tmp_path, *argv, out="b")
    assert code_a == code_b == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
