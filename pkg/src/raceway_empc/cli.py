"""Command-line entry point.

Exit codes: 0 success, 1 simulation failure, 2 configuration or I/O error.
"""
from __future__ import annotations

import argparse
import io
import os
import sys
from pathlib import Path

import pandas as pd

from .forecast import MODES
from .params import ConfigError, dump_config
from .sim import INPUT_COLUMNS, SimulationError, Trajectory, load_scenario, run_scenario
from .weather import WeatherError, synthetic_weather, write_weather_csv

EXIT_OK, EXIT_SIM, EXIT_CONFIG = 0, 1, 2
CONTROLLERS = ("empc", "benchmark", "null")
PLOT_VARIABLES = ("DO", "pH", "X", "h", "Q_air", "Q_co2", "Q_d", "Q_h", "stage_cost")
LEVEL_FLOOR = 0.09  # [m] level bound minus the slack floor
FLOAT = "%.17g"


class UsageError(Exception):
    pass


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv(df: pd.DataFrame) -> str:
    buf = io.StringIO()
    df.to_csv(buf, index=False, float_format=FLOAT, lineterminator="\r\n",
              date_format="%Y-%m-%dT%H:%M:%S")
    return buf.getvalue()


def emit_plot_data(traj: Trajectory) -> pd.DataFrame:
    """Long format ``timestamp, variable, value`` for the plotted channels."""
    if len(traj.frame) == 0:
        raise ValueError("empty trajectory")
    long = traj.frame.melt(id_vars=["timestamp"], value_vars=list(PLOT_VARIABLES),
                           var_name="variable", value_name="value")
    return long


def summary_text(traj: Trajectory, scenario, x_min: float) -> str:
    f = traj.frame
    daily = traj.daily_costs()
    lines = [
        f"scenario: {scenario.name}",
        f"controller: {scenario.controller}",
        f"forecast: {scenario.forecast if scenario.controller == 'empc' else '-'}",
        f"seed: {scenario.seed}",
        f"window: {scenario.start.isoformat()} .. {scenario.end.isoformat()}",
        f"periods: {len(f)} x {traj.period:g} s",
        f"total_cost_eur: {traj.total_cost:.4f}",
        f"total_full_cost_eur: {traj.total_full_cost:.4f}",
        f"min_level_m: {f['h'].min():.4f}",
        f"level_violations: {int((f['h'] < LEVEL_FLOOR).sum())}",
        f"terminal_biomass_violations: {int((daily['end_X'] < x_min - 0.3).sum())}",
    ]
    if len(traj.diagnostics):
        counts = traj.diagnostics["status"].value_counts().sort_index()
        lines.append("solver: " + ", ".join(f"{k} {v}" for k, v in counts.items()))
    lines.append("")
    lines.append("day,cost_eur,full_cost_eur,min_level_m,end_X_g_per_L")
    for day, row in daily.iterrows():
        lines.append(f"{day.date()},{row.cost:.4f},{row.full_cost:.4f},{row.min_level:.4f},"
                     f"{row.end_X:.4f}")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    if args.controller not in CONTROLLERS:
        raise UsageError(f"unknown controller {args.controller!r}")
    if args.forecast not in MODES:
        raise UsageError(f"unknown forecast mode {args.forecast!r}")
    scenario = load_scenario(args.scenario, controller=args.controller, forecast=args.forecast,
                             seed=args.seed)
    traj = run_scenario(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / "trajectory.csv", _csv(traj.frame))
    diag = traj.diagnostics
    if diag.empty:
        diag = pd.DataFrame(columns=["timestamp", "horizon", "status", "iterations", "objective",
                                     "optimality", "min_level_slack", "biomass_slack",
                                     *[c for c in INPUT_COLUMNS if c != "Q_co2"], "fallback"])
    _write_atomic(out / "diagnostics.csv", _csv(diag))
    _write_atomic(out / "summary.txt", summary_text(traj, scenario, scenario.initial_state.X))
    if args.plot_data:
        _write_atomic(out / "plot_data.csv", _csv(emit_plot_data(traj)))
    print(f"{scenario.name}: {scenario.controller} total cost {traj.total_cost:.4f} EUR "
          f"-> {out}")
    return EXIT_OK


def _load_run(directory: str) -> pd.DataFrame:
    path = Path(directory) / "trajectory.csv"
    if not path.exists():
        raise FileNotFoundError(f"no trajectory.csv in {directory}")
    return pd.read_csv(path, parse_dates=["timestamp"])


def compare_runs(a: pd.DataFrame, b: pd.DataFrame) -> pd.DataFrame:
    """Side-by-side costs of run ``a`` against reference ``b``."""
    if len(a) != len(b) or not (a["timestamp"].values == b["timestamp"].values).all():
        raise ValueError("runs cover different scenario windows")
    period = float((a["timestamp"].iloc[1] - a["timestamp"].iloc[0]).total_seconds()) if len(a) > 1 else 0.0

    def daily(df):
        return (df["stage_cost"] * period).groupby(df["timestamp"].dt.normalize()).sum()

    da, db = daily(a), daily(b)
    total_a, total_b = float(a["cumulative_cost"].iloc[-1]), float(b["cumulative_cost"].iloc[-1])

    def improvement(ja, jb):
        return 0.0 if jb == ja else (jb - ja) / abs(jb) * 100.0 if jb != 0 else float("nan")

    rows = [
        ("total", total_a, total_b),
        ("best day", float(da.min()), float(db.min())),
        ("worst day", float(da.max()), float(db.max())),
        ("mean day", float(da.mean()), float(db.mean())),
    ]
    return pd.DataFrame([(name, ja, jb, improvement(ja, jb)) for name, ja, jb in rows],
                        columns=["metric", "cost_a_eur", "cost_b_eur", "improvement_pct"])


def format_comparison(table: pd.DataFrame, a: str, b: str) -> str:
    lines = [f"a: {a}", f"b: {b}", "",
             f"{'metric':<10} {'a [EUR]':>12} {'b [EUR]':>12} {'improvement':>12}"]
    for row in table.itertuples():
        lines.append(f"{row.metric:<10} {row.cost_a_eur:>12.4f} {row.cost_b_eur:>12.4f} "
                     f"{row.improvement_pct:>11.2f}%")
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    table = compare_runs(_load_run(args.a), _load_run(args.b))
    text = format_comparison(table, args.a, args.b)
    if args.out:
        _write_atomic(Path(args.out), text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    kinds = [k.strip() for k in args.days.split(",") if k.strip()]
    series = synthetic_weather(args.start, kinds, seed=args.seed)
    write_weather_csv(series, Path(args.out))
    if args.hourly:
        write_weather_csv(series.downsample(3600.0), Path(args.hourly))
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(dump_config())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="raceway-empc",
                                     description="Raceway reactor EMPC simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    run.add_argument("--scenario", required=True, help="scenario TOML file")
    run.add_argument("--controller", default="empc", help="empc | benchmark | null")
    run.add_argument("--forecast", default="perfect", help=" | ".join(MODES))
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="seed for synthetic weather")
    run.add_argument("--plot-data", action="store_true", help="also write plot_data.csv")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="compare two run directories (a against reference b)")
    cmp_.add_argument("--a", required=True)
    cmp_.add_argument("--b", required=True)
    cmp_.add_argument("--out", help="also write the table to this file")
    cmp_.set_defaults(func=cmd_compare)

    syn = sub.add_parser("synth", help="write a synthetic weather CSV")
    syn.add_argument("--days", required=True, help="comma-separated day kinds: high, low, cloudy")
    syn.add_argument("--start", default="2024-04-01")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", required=True)
    syn.add_argument("--hourly", help="also write an hourly forecast CSV")
    syn.set_defaults(func=cmd_synth)

    cfg = sub.add_parser("config", help="print the default configuration")
    cfg.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, WeatherError, UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
