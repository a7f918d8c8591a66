import shutil
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from raceway_empc.cli import (EXIT_CONFIG, EXIT_OK, EXIT_SIM, PLOT_VARIABLES, compare_runs,
                              emit_plot_data, main)
from raceway_empc.sim import Trajectory

ROOT = Path(__file__).resolve().parents[1]
MIDDAY = ROOT / "scenarios" / "midday.toml"


def run(tmp_path, name, *extra, scenario=MIDDAY):
    out = tmp_path / name
    code = main(["run", "--scenario", str(scenario), "--out", str(out), *extra])
    return code, out


@pytest.fixture(scope="module")
def empc_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("empc")
    code, out = run(tmp, "a", "--controller", "empc", "--plot-data")
    assert code == EXIT_OK
    return out


@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("bench")
    code, out = run(tmp, "b", "--controller", "benchmark")
    assert code == EXIT_OK
    return out


def test_run_writes_outputs(empc_run):
    for name in ("trajectory.csv", "diagnostics.csv", "summary.txt", "plot_data.csv"):
        assert (empc_run / name).stat().st_size > 0
    raw = (empc_run / "trajectory.csv").read_bytes()
    assert raw.startswith(b"timestamp,X,h,T,DO,TIC,pH")
    assert b"\r\n" in raw
    assert not list(empc_run.glob("*.tmp"))


def test_deterministic(empc_run, tmp_path):
    code, again = run(tmp_path, "again", "--controller", "empc", "--plot-data")
    assert code == EXIT_OK
    for name in ("trajectory.csv", "diagnostics.csv", "summary.txt", "plot_data.csv"):
        assert (again / name).read_bytes() == (empc_run / name).read_bytes()


def test_summary_matches_rectangle_rule(empc_run):
    traj = pd.read_csv(empc_run / "trajectory.csv")
    total = float((traj["stage_cost"] * 300.0).sum())
    summary = (empc_run / "summary.txt").read_text()
    line = next(l for l in summary.splitlines() if l.startswith("total_cost_eur:"))
    assert float(line.split(":")[1]) == pytest.approx(total, abs=5e-5)
    assert traj["cumulative_cost"].iloc[-1] == pytest.approx(total, abs=1e-9)


def test_plot_data(empc_run):
    traj = pd.read_csv(empc_run / "trajectory.csv")
    plot = pd.read_csv(empc_run / "plot_data.csv")
    assert len(plot) == 9 * len(traj)
    assert list(plot.columns) == ["timestamp", "variable", "value"]
    for var in PLOT_VARIABLES:
        np.testing.assert_array_equal(plot.loc[plot["variable"] == var, "value"].to_numpy(),
                                      traj[var].to_numpy())


def test_plot_data_needs_rows():
    empty = Trajectory(pd.DataFrame(columns=["timestamp", *PLOT_VARIABLES]), None, pd.DataFrame(), 300.0)
    with pytest.raises(ValueError):
        emit_plot_data(empty)


def test_diagnostics_columns(empc_run, bench_run):
    diag = pd.read_csv(empc_run / "diagnostics.csv")
    assert {"horizon", "status", "iterations", "objective", "min_level_slack",
            "biomass_slack"} <= set(diag.columns)
    assert len(diag) == 12
    assert pd.read_csv(bench_run / "diagnostics.csv").empty


def test_compare(empc_run, bench_run, tmp_path, capsys):
    out = tmp_path / "cmp.txt"
    assert main(["compare", "--a", str(empc_run), "--b", str(bench_run), "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert text == out.read_text()
    for row in ("total", "best day", "worst day", "mean day"):
        assert row in text


def test_compare_identical_is_zero(bench_run):
    traj = pd.read_csv(bench_run / "trajectory.csv", parse_dates=["timestamp"])
    table = compare_runs(traj, traj)
    assert (table["improvement_pct"] == 0).all()


def test_compare_improvement_sign():
    ts = pd.date_range("2024-04-01", periods=2, freq="300s")
    a = pd.DataFrame({"timestamp": ts, "stage_cost": [-2.0, -2.0], "cumulative_cost": [-600.0, -1200.0]})
    b = pd.DataFrame({"timestamp": ts, "stage_cost": [-1.0, -1.0], "cumulative_cost": [-300.0, -600.0]})
    table = compare_runs(a, b).set_index("metric")
    assert table.loc["total", "improvement_pct"] == pytest.approx(100.0)


def test_compare_mismatched_windows(bench_run, tmp_path, capsys):
    other = tmp_path / "other"
    shutil.copytree(bench_run, other)
    traj = pd.read_csv(other / "trajectory.csv")
    traj.iloc[:-1].to_csv(other / "trajectory.csv", index=False)
    assert main(["compare", "--a", str(bench_run), "--b", str(other)]) == EXIT_CONFIG
    assert "different scenario windows" in capsys.readouterr().err


def test_missing_weather_file(tmp_path, capsys):
    sc = tmp_path / "s.toml"
    sc.write_text('[scenario]\nweather = "absent.csv"\n[initial]\nX = 0.5\nh = 0.1\n')
    code, _ = run(tmp_path, "out", scenario=sc)
    assert code == EXIT_CONFIG
    assert "weather file not found" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    code, _ = run(tmp_path, "o", "--controller", "pid")
    assert code == EXIT_CONFIG
    code, _ = run(tmp_path, "o", "--forecast", "crystal-ball")
    assert code == EXIT_CONFIG
    bad = tmp_path / "bad.toml"
    bad.write_text("[scenario\n")
    assert run(tmp_path, "o", scenario=bad)[0] == EXIT_CONFIG
    unknown = tmp_path / "unknown.toml"
    unknown.write_text(MIDDAY.read_text() + "\n[empc]\nhorizon = 3\n")
    assert run(tmp_path, "o", scenario=unknown)[0] == EXIT_CONFIG
    assert "unknown keys" in capsys.readouterr().err


def test_simulation_failure_exit_code(tmp_path, capsys):
    sc = tmp_path / "chem.toml"
    sc.write_text(MIDDAY.read_text().replace("pH = 8.0", "TIC = 1.0") + "\n[gas]\nalk = 50.0\n")
    code, _ = run(tmp_path, "o", "--controller", "benchmark", scenario=sc)
    assert code == EXIT_SIM
    assert "no pH root" in capsys.readouterr().err


def test_seed_changes_synthetic_weather(tmp_path):
    sc = tmp_path / "cloud.toml"
    sc.write_text(MIDDAY.read_text().replace('["high"]', '["cloudy"]'))
    a = run(tmp_path, "s1", "--controller", "benchmark", "--seed", "1", scenario=sc)[1]
    b = run(tmp_path, "s2", "--controller", "benchmark", "--seed", "2", scenario=sc)[1]
    assert (a / "trajectory.csv").read_bytes() != (b / "trajectory.csv").read_bytes()
    assert "seed: 1" in (a / "summary.txt").read_text()


def test_synth_and_config(tmp_path, capsys):
    out = tmp_path / "w.csv"
    assert main(["synth", "--days", "high,low", "--out", str(out), "--hourly",
                 str(tmp_path / "h.csv")]) == EXIT_OK
    assert out.read_text().startswith("# cadence: 60 s")
    assert main(["config"]) == EXIT_OK
    assert "[empc]" in capsys.readouterr().out
    assert main(["synth", "--days", "foggy", "--out", str(out)]) == EXIT_CONFIG
