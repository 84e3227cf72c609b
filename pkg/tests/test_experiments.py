import subprocess
import sys

import numpy as np
import pytest

from hsalab import cli
from hsalab.experiments import (
    CSV_HEADER, Curve, ExperimentConfig, count_evaluations, episodes_to_threshold, format_config,
    parse_config, pinned, read_curves_csv, run_curves, curves_csv, run_experiment, segment_summary,
)
from hsalab.grid_world import ConfigError

SMALL = """
# small smoke experiment
m = 4
n = 2
variant = standard
sensor = normal
grids = p,d
rule = sarsa
alpha = 0.5
q0 = 2.0
epsilon_mode = constant
epsilon = 0.05
realizations = 3
episodes = 40
seed = 11
segment = 10
schedule.levels = 2
"""


def test_parse_config():
    cfg = parse_config(SMALL)
    assert cfg.m == 4 and cfg.grid.t_max == 4 and cfg.learner.alpha == 0.5
    assert parse_config(format_config(cfg)).learner == cfg.learner


@pytest.mark.parametrize("text, field", [
    ("m = 3", "m"), ("variant = deep", "variant"), ("episodes = 0", "episodes"),
    ("alpha = fast", "alpha"), ("colour = red", "colour"), ("grids = p,x", "grids"),
])
def test_config_errors_name_field(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(text)


def test_csv_schema_and_order():
    cfg = parse_config(SMALL)
    text = curves_csv(run_curves(cfg, workers=1))
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    keys = [tuple(int(x) for x in l.split(",")[:2]) for l in lines[1:]]
    assert keys == sorted(keys) and len(keys) == 3 * 40
    assert all(0 <= int(l.split(",")[3]) <= 2 for l in lines[1:])


def test_parallel_matches_sequential():
    cfg = parse_config(SMALL)
    a = curves_csv(run_curves(cfg, workers=1))
    b = curves_csv(run_curves(cfg, workers=3))
    assert a == b and a == curves_csv(run_curves(cfg, workers=1))


def test_outputs_written(tmp_path):
    cfg = parse_config(SMALL + f"\noutput = {tmp_path / 'run.csv'}\n")
    res = run_experiment(cfg, workers=1)
    assert (tmp_path / "run.csv").read_text() == res.csv()
    assert (tmp_path / "run.segments.csv").read_text().startswith("episode_start,")
    assert "realization 2" in (tmp_path / "run.summary.txt").read_text()
    curves = read_curves_csv(tmp_path / "run.csv")
    assert np.array_equal(curves[1]["placed"], res.curves[1].placed)


def test_segment_summary_hand_values():
    c1 = Curve(np.zeros(4), np.array([0, 1, 2, 3]), np.zeros(4))
    c2 = Curve(np.zeros(4), np.array([2, 1, 0, 3]), np.zeros(4))
    s = segment_summary([c1, c2], 2)
    assert [x.mean_placed for x in s] == [1.0, 2.0]
    assert s[0].std_placed == 0.5 and s[1].std_placed == 0.5


def test_episodes_to_threshold():
    placed = np.r_[np.zeros(10), np.full(10, 3)]
    assert episodes_to_threshold(placed, 2.5, 4) == 14
    assert episodes_to_threshold(placed, 3.5, 4) is None
    assert episodes_to_threshold(placed[:3], 0, 4) is None


def test_count_evaluations():
    assert count_evaluations("standard", 16) == 32
    assert count_evaluations("lookahead", 8) == 24
    assert count_evaluations("deictic", 16) == 4096


def test_pinned_configs():
    cfg = pinned("fig7", sensor="faulty")
    assert (cfg.m, cfg.n, cfg.grid.levels, cfg.realizations, cfg.episodes) == (16, 3, 4, 5, 50_000)
    assert cfg.obs.mode == "faulty"
    with pytest.raises(ConfigError):
        pinned("fig9")


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("m = 5\n")
    assert cli.main(["run", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err
    good = tmp_path / "good.cfg"
    good.write_text(SMALL)
    assert cli.main(["run", str(good), "-o", str(tmp_path / "o.csv")]) == 0
    assert (tmp_path / "o.csv").exists()
    assert cli.main(["counts"]) == 0
    assert "786484666672821043200" in capsys.readouterr().out
    assert cli.main(["complexity"]) == 0
    assert cli.main(["count-evals", "--measure"]) == 0
    assert "4096" in capsys.readouterr().out
    assert cli.main(["sense-selftest", "--trials", "50"]) == 0


def test_cli_check_failure_exit_code(monkeypatch):
    monkeypatch.setattr(cli, "verify_geometry", lambda checks, *a: checks("forced", False))
    assert cli.main(["verify", "geometry"]) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "hsalab", "counts", "--m", "2", "--n", "1"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "ground states: 144" in out.stdout
