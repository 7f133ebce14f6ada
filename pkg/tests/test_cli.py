"""End-to-end command runs: exit codes, artifacts, and determinism."""

import json

import pytest

from ergotorus import cli
from ergotorus.config import emit_config, load_config, parse_config

SMALL_CONFIG = """\
[experiment]
dimension = 2
seed = 99
out_dir = "{out}"

[[atoms]]
matrix = [[2, 1], [1, 1]]
weight = "1/2"

[[atoms]]
matrix = [[1, 1], [1, 2]]
weight = "1/2"

[start]
preset = "sqrt2_sqrt3"

[function]
kind = "cosine"
frequency = [1, 0]

[budgets]
max_atoms = 1048576

[simulate]
n = 50
trials = 2

[lln]
n = 2000
trials = 20

[clt]
n = 500
trials = 120
series_l = 10

[poisson]
n_terms = 8

[dioph]
q_max = 20
B = 2.0
beta = 0.5
q_min = 2
check_diophantine = true
"""


def write_config(tmp_path, name="run.toml"):
    out_dir = tmp_path / "out"
    path = tmp_path / name
    path.write_text(SMALL_CONFIG.format(out=out_dir.as_posix()))
    return path, out_dir


def test_config_roundtrip_is_byte_stable(tmp_path):
    path, _ = write_config(tmp_path)
    cfg = load_config(str(path))
    text = emit_config(cfg)
    cfg2 = parse_config(text)
    assert emit_config(cfg2) == text
    assert cfg2.seed == 99
    assert cfg2.dimension == 2


def test_config_rejects_unknown_section(tmp_path):
    bad = SMALL_CONFIG.format(out="x") + "\n[mystery]\nvalue = 1\n"
    with pytest.raises(Exception) as info:
        parse_config(bad)
    assert "mystery" in str(info.value)


def test_config_rejects_float_weights():
    text = SMALL_CONFIG.format(out="x").replace('weight = "1/2"', "weight = 0.5")
    with pytest.raises(Exception) as info:
        parse_config(text)
    assert "weight" in str(info.value)


def test_simulate_writes_trajectories(tmp_path):
    path, out_dir = write_config(tmp_path)
    rc = cli.main([str(path), "simulate"])
    assert rc == 0
    csv0 = out_dir / "trajectory_000.csv"
    assert csv0.exists()
    header = csv0.read_text().splitlines()[0]
    assert header == "step,x_1,x_2,atom_index"
    summary = json.loads((out_dir / "simulate_summary.json").read_text())
    assert summary["command"] == "simulate"
    assert summary["seed"] == 99
    assert len(summary["config_sha256"]) == 64
    assert any("trajectory_000.csv" in a for a in summary["artifacts"])


def test_lln_command_passes_check(tmp_path):
    path, out_dir = write_config(tmp_path)
    rc = cli.main([str(path), "lln", "--check"])
    assert rc == 0
    summary = json.loads((out_dir / "lln_summary.json").read_text())
    assert abs(summary["report"]["gap"]) <= 0.02


def test_seed_override_lands_in_report(tmp_path):
    path, out_dir = write_config(tmp_path)
    rc = cli.main([str(path), "simulate", "--seed", "12345"])
    assert rc == 0
    summary = json.loads((out_dir / "simulate_summary.json").read_text())
    assert summary["seed"] == 12345


def test_clt_outputs_are_thread_independent(tmp_path):
    path, out_dir = write_config(tmp_path)
    assert cli.main([str(path), "clt", "--threads", "1"]) == 0
    samples_1 = (out_dir / "clt_samples.csv").read_bytes()
    summary_1 = (out_dir / "clt_summary.json").read_bytes()
    assert cli.main([str(path), "clt", "--threads", "4"]) == 0
    assert (out_dir / "clt_samples.csv").read_bytes() == samples_1
    assert (out_dir / "clt_summary.json").read_bytes() == summary_1


def test_missing_config_exits_2(tmp_path):
    rc = cli.main([str(tmp_path / "absent.toml"), "simulate"])
    assert rc == 2


def test_unknown_command_exits_2(tmp_path):
    path, _ = write_config(tmp_path)
    assert cli.main([str(path), "entropy"]) == 2


def test_invalid_weights_exit_2(tmp_path):
    path, out_dir = write_config(tmp_path)
    broken = path.read_text().replace('weight = "1/2"', 'weight = "1/3"', 1)
    path.write_text(broken)
    assert cli.main([str(path), "simulate"]) == 2


def test_budget_exhaustion_exits_3(tmp_path):
    path, _ = write_config(tmp_path)
    text = path.read_text().replace("max_atoms = 1048576", "max_atoms = 16")
    path.write_text(text)
    assert cli.main([str(path), "clt"]) == 3


def test_failed_check_exits_4(tmp_path):
    path, out_dir = write_config(tmp_path)
    # an impossibly tight gap check cannot pass
    text = path.read_text().replace(
        "[lln]\nn = 2000\ntrials = 20",
        "[lln]\nn = 2000\ntrials = 20\ncheck_gap = 1e-12",
    )
    path.write_text(text)
    # thresholds only gate the exit code under --check
    assert cli.main([str(path), "lln"]) == 0
    assert cli.main([str(path), "lln", "--check"]) == 4


def test_dioph_artifacts(tmp_path):
    path, out_dir = write_config(tmp_path)
    rc = cli.main([str(path), "dioph"])
    assert rc == 0
    table = (out_dir / "dioph_table.csv").read_text().splitlines()
    assert table[0].startswith("q,")
    assert len(table) == 20 + 1  # q = 1 .. q_max plus header
    summary = json.loads((out_dir / "dioph_summary.json").read_text())
    assert summary["report"]["verdict"] is True


def test_poisson_command_reports_residual(tmp_path):
    path, out_dir = write_config(tmp_path)
    rc = cli.main([str(path), "poisson"])
    assert rc == 0
    summary = json.loads((out_dir / "poisson_summary.json").read_text())
    rep = summary["report"]
    assert rep["n_terms"] == 8
    assert rep["residual"] < 0.05
    assert rep["variance_exact"] == pytest.approx(0.5, abs=0.01)
