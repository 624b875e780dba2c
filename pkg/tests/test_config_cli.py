import csv
import json
import subprocess
import sys

import pytest

from ocdma_pc.cli import main
from ocdma_pc.config import config_from_dict, load_config
from ocdma_pc.errors import ConfigError
from ocdma_pc.harness import DynamicEvent


def test_config_defaults_and_scenario_users():
    assert config_from_dict({}).users == [8, 16, 32]
    assert config_from_dict({"scenario": "B"}).users == [48, 64, 128]
    assert config_from_dict({"scenario": "B", "users": [64]}).users == [64]


def test_config_full(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("""
scenario: Custom
users: [4]
qos_class: III
trials: 2
system: {p_max_dbm: 20.0, link_length_range: [2, 50]}
solvers:
  sqp: {fd_step: 1.0e-6}
events:
  - {kind: Perturbation, perturb_window: [2, 7], perturb_targets: [0, 1]}
""")
    cfg = load_config(path)
    assert cfg.qos_class == "III" and cfg.trials == 2
    assert cfg.system.link_length_range == (2, 50)
    assert cfg.events == [DynamicEvent("Perturbation", perturb_window=(2, 7),
                                       perturb_targets=[0, 1])]
    assert cfg.solver_options == {"sqp": {"fd_step": 1e-6}}


@pytest.mark.parametrize("d", [{"nope": 1}, {"system": {"warp": 9}}, {"solvers": {"newton": {}}},
                               {"solvers": {"alm": {"rho00": 1}}}, {"events": {"kind": "x"}},
                               {"events": [{"kind": "Perturbation", "perturb_alpha": 2}]},
                               {"trials": 0}, {"system": {"noise_sigma": -1}}])
def test_config_errors(d):
    with pytest.raises(ConfigError):
        config_from_dict(d)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def _run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_scenario_two_files_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a, "scenario", "--users", "8", "--solver", "sqp", "--seed", "3") == 0
    assert _run(b, "scenario", "--users", "8", "--solver", "sqp", "--seed", "3") == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == ["A_8_II_sqp_3.csv", "A_8_II_sqp_3.json"]
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()
    rows = list(csv.reader((a / files[0]).open()))
    summary = json.loads((a / files[1]).read_text())
    assert len(rows) - 1 == summary["iterations"] + 1
    assert summary["requested_seed"] == 3
    assert "A_8_II_sqp_3: Converged" in capsys.readouterr().out


def test_global_flags_after_subcommand(tmp_path):
    assert main(["scenario", "--users", "8", "--solver", "hopfield", "--trials", "2",
                 "--out", str(tmp_path)]) == 0
    assert len(list(tmp_path.iterdir())) == 4


def test_exit_code_some_failed(tmp_path):
    assert _run(tmp_path, "--max-iters", "1", "scenario", "--users", "8", "--solver", "alm") == 1


@pytest.mark.parametrize("argv", [["bogus"], ["scenario", "--qos", "IV"], [],
                                  ["scenario", "--trials", "0"],
                                  ["--config", "/nonexistent.yaml", "scenario"]])
def test_exit_code_usage(tmp_path, argv):
    assert main(argv) == 2


def test_replay_round_trip(tmp_path):
    inst_dir = tmp_path / "inst"
    assert _run(tmp_path / "s", "scenario", "--users", "8", "--solver", "sqp",
                "--instances", str(inst_dir)) == 0
    (path,) = inst_dir.iterdir()
    assert _run(tmp_path / "r", "replay", str(path), "--solver", "sqp") == 0
    s = json.loads((tmp_path / "s" / "A_8_II_sqp_0.json").read_text())
    r = json.loads((tmp_path / "r" / "replay_8_II_sqp_0.json").read_text())
    assert r["sum_power"] == s["sum_power"] and r["iterations"] == s["iterations"]


def test_dynamic_and_perturb_subcommands(tmp_path):
    assert _run(tmp_path, "dynamic", "--users", "8", "--factor", "2", "--solver", "sqp",
                "--warm-start", "all") == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "dynamic_16_II_sqp_0.csv", "dynamic_16_II_sqp_0.json",
        "dynamic_8_II_sqp_0.csv", "dynamic_8_II_sqp_0.json"]
    assert _run(tmp_path / "p", "perturb", "--users", "8", "--solver", "hopfield") == 0
    assert (tmp_path / "p" / "perturb_8_II_hopfield_0.json").exists()


def test_tarhuni_subcommand(tmp_path):
    assert _run(tmp_path, "tarhuni", "--users", "8", "--solver", "sqp") == 0
    rows = json.loads((tmp_path / "tarhuni_A_II_0.json").read_text())
    assert rows[0]["K"] == 8 and rows[0]["sqp_status"] == "Converged"


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "ocdma_pc.cli", "scenario", "--users", "8",
                          "--solver", "hopfield", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
