"""Fixed-step plant integration and closed-loop scenario runs."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
import pandas as pd

from . import kernels
from .chemistry import carbon_rhs, oxygen_rhs, speciate, tic_for_ph
from .model import (ControlInput, Disturbance, ReactorState, average_irradiance, biomass_rhs,
                    evaporation_rate, growth_rate, heat_exchange, level_rhs, maintenance,
                    temperature_rhs)
from .params import LPM_TO_M3S, Config, ConfigError, GasParams, ModelParams, config_from_dict, load_toml
from .weather import DisturbanceSeries, read_weather_csv, resample_median, synthetic_weather  # noqa: F401

STATE_COLUMNS = ("X", "h", "T", "DO", "TIC")
INPUT_COLUMNS = ("Q_air", "Q_co2", "Q_d", "Q_h")


class SimulationError(RuntimeError):
    pass


class NonFiniteStateError(SimulationError):
    pass


def combined_rhs(state: ReactorState, u: ControlInput, d: Disturbance, model: ModelParams,
                 gas: GasParams) -> np.ndarray:
    """Time derivative of ``[X, h, T, DO, TIC]`` built from the model functions.

    Same equations as the compiled kernels; kept as the readable reference.
    """
    pH, co2 = speciate(state.TIC, gas.alk, gas)
    Iav = average_irradiance(d.I0, state.X, state.h, model)
    mu = growth_rate(state, pH, Iav, model)
    gross = mu + maintenance(Iav, model)
    g_s = evaporation_rate(state.T, d.T_amb, d.RH, d.WS, u.Q_air, model)
    return np.array([
        biomass_rhs(state, u, mu, g_s, model),
        level_rhs(state, u, g_s, model),
        temperature_rhs(state, u, heat_exchange(state, d, g_s, model), model),
        oxygen_rhs(state, u, d, gross, gas, model),
        carbon_rhs(state, u, d, gross, gas, model, co2=co2),
    ])


def _params(model: ModelParams | None, gas: GasParams | None) -> np.ndarray:
    cfg = Config()
    return kernels.pack_params(model or cfg.model, gas or cfg.gas, cfg.cost)


def rk4_step(state: ReactorState, u: ControlInput, d: Disturbance, dt: float,
             model: ModelParams | None = None, gas: GasParams | None = None, *,
             d_mid: Disturbance | None = None, d_end: Disturbance | None = None) -> ReactorState:
    """Classical RK4 step of the full plant, then the state floors.

    Disturbances are held at ``d`` unless midpoint/end samples are given.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    d0 = d.as_array()
    dm = d0 if d_mid is None else d_mid.as_array()
    d1 = dm if d_end is None else d_end.as_array()
    new = kernels.backend.plant_step(state.as_array(), u.as_array(), d0, dm, d1, float(dt),
                                     _params(model, gas))
    if not np.all(np.isfinite(new)):
        raise NonFiniteStateError(f"non-finite state after RK4 step: {new}")
    return ReactorState.from_array(new)


# ---------------------------------------------------------------- controllers

class Controller(Protocol):
    """Closed-loop controller driven by :func:`run_scenario`.

    ``period`` is called at every controller period start, ``substep`` at
    every integration step with the delayed pH measurement.
    """

    name: str
    diagnostics: list

    def start(self, clock: pd.Timestamp, state: ReactorState) -> None: ...

    def period(self, clock: pd.Timestamp, state: ReactorState, active: bool) -> None: ...

    def substep(self, clock: pd.Timestamp, state: ReactorState, measured_ph: float, dt: float,
                active: bool) -> ControlInput: ...


class NullController:
    name = "null"

    def __init__(self):
        self.diagnostics = []

    def start(self, clock, state):
        pass

    def period(self, clock, state, active):
        pass

    def substep(self, clock, state, measured_ph, dt, active):
        return ControlInput()


class BenchmarkRunner:
    """Adapts :class:`~raceway_empc.regulatory.BenchmarkController` to the loop."""

    name = "benchmark"

    def __init__(self, config: Config):
        from .regulatory import BenchmarkController
        self.inner = BenchmarkController(config.benchmark, config.model)
        self.diagnostics = []

    def start(self, clock, state):
        self.inner.reset()

    def period(self, clock, state, active):
        pass

    def substep(self, clock, state, measured_ph, dt, active):
        return self.inner.step(state, measured_ph, clock, active)


# ---------------------------------------------------------------- scenarios

@dataclass(frozen=True)
class Scenario:
    initial_state: ReactorState
    weather: DisturbanceSeries
    start: pd.Timestamp
    end: pd.Timestamp
    controller: str = "benchmark"
    forecast: str = "perfect"
    config: Config = field(default_factory=Config)
    hourly: DisturbanceSeries | None = None
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "start", pd.Timestamp(self.start))
        object.__setattr__(self, "end", pd.Timestamp(self.end))
        if not self.end > self.start:
            raise ConfigError("scenario end must be after its start")
        t0, t1 = self.weather.offset(self.start), self.weather.offset(self.end)
        if not self.weather.covers(t0, t1):
            raise ConfigError(
                f"weather {self.weather.start} .. {self.weather.timestamp(self.weather.duration)} "
                f"does not cover {self.start} .. {self.end}")
        ts, sub = self.config.empc.ts, self.config.sim.substep
        if abs(ts / sub - round(ts / sub)) > 1e-9:
            raise ConfigError("controller period must be a multiple of the integration substep")

    @property
    def n_periods(self) -> int:
        return int(np.floor((self.end - self.start).total_seconds() / self.config.empc.ts + 1e-9))


@dataclass
class Trajectory:
    """One row per controller period.

    State, pH and growth are sampled at the period start; flows are period
    means; ``stage_cost``/``full_cost`` are period-mean cost rates [EUR/s]
    and the cumulative columns their running sums times the period.
    """

    frame: pd.DataFrame
    final_state: ReactorState
    diagnostics: pd.DataFrame
    period: float

    def __len__(self):
        return len(self.frame)

    @property
    def total_cost(self) -> float:
        return float(self.frame["cumulative_cost"].iloc[-1])

    @property
    def total_full_cost(self) -> float:
        return float(self.frame["cumulative_full_cost"].iloc[-1])

    def daily_costs(self) -> pd.DataFrame:
        day = self.frame["timestamp"].dt.normalize()
        grouped = self.frame.assign(day=day).groupby("day")
        out = pd.DataFrame({
            "cost": grouped["stage_cost"].sum() * self.period,
            "full_cost": grouped["full_cost"].sum() * self.period,
            "min_level": grouped["h"].min(),
            "end_X": grouped["X"].last(),
        })
        return out


def make_controller(scenario: Scenario):
    name = scenario.controller
    if name == "null":
        return NullController()
    if name == "benchmark":
        return BenchmarkRunner(scenario.config)
    if name == "empc":
        from .empc import EmpcController
        from .forecast import ForecastProvider
        if scenario.forecast == "hourly":
            series = scenario.hourly if scenario.hourly is not None else scenario.weather.downsample(3600.0)
        else:
            series = scenario.weather
        return EmpcController(scenario.config, ForecastProvider(scenario.forecast, series))
    raise ConfigError(f"unknown controller {name!r}; choose empc, benchmark or null")


def run_scenario(scenario: Scenario, controller: Controller | None = None) -> Trajectory:
    """Closed-loop simulation on the controller grid with RK4 substeps.

    Flows are forced to zero whenever irradiance at the period start is at
    or below the activation threshold. The controller sees pH through a
    dead-time buffer of ``sim.sensor_delay`` seconds.
    """
    cfg = scenario.config
    controller = controller or make_controller(scenario)
    ts, sub = cfg.empc.ts, cfg.sim.substep
    nsub = int(round(ts / sub))
    n = scenario.n_periods
    if n < 1:
        raise ConfigError("scenario shorter than one controller period")
    p = kernels.pack_params(cfg.model, cfg.gas, cfg.cost)
    be = kernels.backend
    cost = cfg.cost
    t_base = scenario.weather.offset(scenario.start)
    grid = t_base + np.arange(n * nsub + 1) * sub
    d_nodes = scenario.weather.sample(grid)
    d_mids = scenario.weather.sample(grid[:-1] + 0.5 * sub)

    state = scenario.initial_state
    x = state.as_array()
    pH0 = be.speciate(x[4], p)[0]
    if not np.isfinite(pH0):
        raise SimulationError(f"{scenario.start}: no pH root for initial TIC {x[4]:g} "
                              f"at alkalinity {cfg.gas.alk:g}")
    delay_steps = int(round(cfg.sim.sensor_delay / sub))
    fifo = deque([pH0] * (delay_steps + 1), maxlen=delay_steps + 1)

    rows = np.empty((n, 18))
    controller.start(scenario.start, state)
    threshold = cfg.empc.activation_threshold
    for k in range(n):
        j0 = k * nsub
        clock = scenario.start + pd.Timedelta(seconds=k * ts)
        state = ReactorState.from_array(x)
        I0 = d_nodes[j0, 0]
        active = I0 > threshold
        try:
            pH, mu, _, _ = be.plant_outputs(x, (0.0, 0.0, 0.0, 0.0), d_nodes[j0], p)
            controller.period(clock, state, active)
        except SimulationError:
            raise
        except Exception as exc:
            raise SimulationError(f"{clock}: controller failed: {exc}") from exc
        start_row = (*x, pH, mu, I0, float(active))
        u_acc = np.zeros(4)
        c_acc = 0.0
        f_acc = 0.0
        for j in range(j0, j0 + nsub):
            sub_clock = clock + pd.Timedelta(seconds=(j - j0) * sub)
            try:
                pH_true = be.speciate(x[4], p)[0]
                fifo.append(pH_true)
                u = controller.substep(sub_clock, ReactorState.from_array(x), fifo[0], sub, active)
                ua = u.as_array() if active else np.zeros(4)
                rate = be.plant_outputs(x, ua, d_nodes[j], p)[3]
                x = be.plant_step(x, ua, d_nodes[j], d_mids[j], d_nodes[j + 1], sub, p)
            except SimulationError:
                raise
            except Exception as exc:
                raise SimulationError(f"{sub_clock}: {exc}") from exc
            if not np.all(np.isfinite(x)):
                raise NonFiniteStateError(f"{sub_clock}: non-finite state {x}")
            u_acc += ua
            c_acc += rate
            f_acc += rate + (cost.c_nut * ua[2] + cost.c_co2 * ua[1]) * LPM_TO_M3S
        rows[k, :9] = start_row
        rows[k, 9:13] = u_acc / nsub
        rows[k, 13] = c_acc / nsub
        rows[k, 14] = f_acc / nsub
    rows[:, 15] = np.cumsum(rows[:, 13] * ts)
    rows[:, 16] = np.cumsum(rows[:, 14] * ts)
    rows[:, 17] = np.arange(n) * ts
    cols = [*STATE_COLUMNS, "pH", "mu", "I0", "active", *INPUT_COLUMNS, "stage_cost", "full_cost",
            "cumulative_cost", "cumulative_full_cost", "t"]
    frame = pd.DataFrame(rows, columns=cols)
    frame["active"] = frame["active"].astype(bool)
    frame.insert(0, "timestamp", scenario.start + pd.to_timedelta(frame.pop("t"), unit="s"))
    diag = pd.DataFrame(list(getattr(controller, "diagnostics", []) or []))
    return Trajectory(frame=frame, final_state=ReactorState.from_array(x), diagnostics=diag,
                      period=ts)


def initial_state_from(values: dict, weather: DisturbanceSeries, start, gas: GasParams) -> ReactorState:
    """Initial state from scenario keys; T defaults to the first ambient sample, TIC to pH 8."""
    try:
        X, h = float(values["X"]), float(values["h"])
    except KeyError as exc:
        raise ConfigError(f"[initial] missing {exc.args[0]}") from None
    T = float(values.get("T", weather.at(weather.offset(start))[1]))
    DO = float(values.get("DO", 100.0))
    if "TIC" in values:
        TIC = float(values["TIC"])
    else:
        TIC = tic_for_ph(float(values.get("pH", 8.0)), gas.alk, gas)
    return ReactorState(X, h, T, DO, TIC)


def load_scenario(path: str | Path, *, controller: str | None = None,
                  forecast: str | None = None, seed: int | None = None) -> Scenario:
    """Read a scenario TOML file.

    ``[scenario]`` names either a weather CSV (relative to the file) or a
    ``synthetic`` list of day kinds generated with ``seed`` from
    ``synthetic_start`` (default: the day of ``start``), the window and
    optionally an hourly forecast CSV. ``[initial]`` holds the initial state;
    the parameter tables override defaults.
    """
    path = Path(path)
    data = load_toml(path)
    sc = data.get("scenario")
    if not isinstance(sc, dict) or not ("weather" in sc or "synthetic" in sc):
        raise ConfigError(f"{path}: [scenario] needs a 'weather' file or a 'synthetic' day list")
    config = config_from_dict(data)
    seed = int(seed if seed is not None else sc.get("seed", 0))
    if "weather" in sc:
        weather = read_weather_csv(path.parent / sc["weather"])
    else:
        day0 = pd.Timestamp(sc.get("synthetic_start", sc.get("start", "2024-04-01"))).normalize()
        weather = synthetic_weather(day0, list(sc["synthetic"]), seed=seed)
    hourly = None
    if sc.get("hourly_forecast"):
        hourly = read_weather_csv(path.parent / sc["hourly_forecast"])
    start = pd.Timestamp(sc.get("start", weather.start))
    end = pd.Timestamp(sc.get("end", weather.timestamp(weather.duration)))
    state = initial_state_from(data.get("initial", {}), weather, start, config.gas)
    return Scenario(initial_state=state, weather=weather, start=start, end=end,
                    controller=controller or sc.get("controller", "benchmark"),
                    forecast=forecast or sc.get("forecast", "perfect"), config=config,
                    hourly=hourly, seed=seed,
                    name=str(sc.get("name", path.stem)))
