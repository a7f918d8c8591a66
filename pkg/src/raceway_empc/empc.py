"""Economic MPC: cost rates, activation, horizon scheduling and the control loop."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .forecast import ForecastProvider
from .model import ControlInput, ReactorState
from .nlp import NlpSolution, PlantLayout, solve, transcribe, warm_start
from .params import LPM_TO_M3S, Config, CostParams
from .regulatory import PiController


def stage_cost(state: ReactorState, u: ControlInput, cost: CostParams) -> float:
    """Operating cost rate [EUR/s]: wheel and blower power minus harvested biomass.

    With X in g/L (= kg/m3) and flows in m3/s the revenue term is in EUR/s.
    """
    revenue = cost.price_biomass * state.X * u.Q_h * LPM_TO_M3S
    blower = cost.c_power * cost.p_blower * u.Q_air * LPM_TO_M3S
    wheel = cost.c_power * cost.p_wheel * cost.v_l * state.h ** 2
    return blower + wheel - revenue


def full_stage_cost(state: ReactorState, u: ControlInput, cost: CostParams) -> float:
    """:func:`stage_cost` plus nutrient (dilution) and CO2 consumption [EUR/s]."""
    return (stage_cost(state, u, cost) + cost.c_nut * u.Q_d * LPM_TO_M3S
            + cost.c_co2 * u.Q_co2 * LPM_TO_M3S)


def should_activate(I0: float, threshold: float = 100.0) -> bool:
    return I0 > threshold


def horizon_for(now, day_end, ts: float = 300.0, np_max: int = 24) -> int:
    """Prediction steps: ``np_max`` until the remaining day is shorter, then shrinking.

    ``now`` and ``day_end`` may be timestamps or seconds. Never returns 0.
    """
    if day_end is None:
        return np_max
    if isinstance(now, (pd.Timestamp, np.datetime64)) or isinstance(day_end, (pd.Timestamp, np.datetime64)):
        remaining = (pd.Timestamp(day_end) - pd.Timestamp(now)).total_seconds()
    else:
        remaining = float(day_end) - float(now)
    steps = math.ceil(remaining / ts - 1e-9)
    return max(1, min(np_max, steps))


def day_end_from_forecast(I0, now, ts: float = 300.0, threshold: float = 100.0):
    """First forecast sample after ``now`` at or below the activation threshold.

    ``I0[0]`` is the sample at ``now``. Returns ``None`` when the forecast
    stays above the threshold.
    """
    I0 = np.asarray(I0, dtype=float)
    below = np.nonzero(I0[1:] <= threshold)[0]
    if below.size == 0:
        return None
    steps = int(below[0]) + 1
    if isinstance(now, pd.Timestamp):
        return now + pd.Timedelta(seconds=steps * ts)
    return now + steps * ts


@dataclass
class StepDiagnostics:
    timestamp: pd.Timestamp
    horizon: int
    status: str
    iterations: int
    objective: float
    optimality: float
    min_level_slack: float
    biomass_slack: float
    Q_air: float
    Q_d: float
    Q_h: float
    fallback: bool = False

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def control_step(state: ReactorState, forecast, config: Config, x_min: float,
                 previous: NlpSolution | None = None, horizon: int | None = None):
    """Solve one EMPC problem and return ``(first move, solution)``.

    The move is ``(Q_air, Q_d, Q_h)`` in L/min; the CO2 flow is left to the
    pH loop.
    """
    cfg = config.empc
    forecast = np.asarray(forecast, dtype=float)
    horizon = forecast.shape[0] if horizon is None else horizon
    layout = PlantLayout.for_horizon(horizon, cfg.nc)
    guess = warm_start(previous, layout, cfg.initial_flow)
    problem = transcribe(state, horizon, cfg.nc, forecast, config, x_min, guess=guess)
    sol = solve(problem, max_iters=cfg.solver_max_iters, tol=cfg.solver_tol)
    moves, _, _ = layout.split(sol.x)
    return moves[0], sol


class EmpcController:
    """Supervisory EMPC with a PI loop on the CO2 flow.

    The NLP is solved once per controller period while irradiance exceeds the
    activation threshold; the first move is held for the period. ``x_min``
    is captured from the initial state unless given.
    """

    name = "empc"

    def __init__(self, config: Config, provider: ForecastProvider, x_min: float | None = None):
        self.config = config
        self.provider = provider
        self.x_min = x_min
        self.pi = PiController.from_config(config.pi)
        self.diagnostics: list[dict] = []
        self._move = np.zeros(3)
        self._previous: NlpSolution | None = None
        self._was_active = False

    def start(self, clock: pd.Timestamp, state: ReactorState) -> None:
        if self.x_min is None:
            self.x_min = state.X
        self.pi.reset()
        self.diagnostics = []
        self._previous = None
        self._was_active = False
        self._move = np.zeros(3)

    def plan_horizon(self, clock: pd.Timestamp) -> tuple[int, np.ndarray]:
        cfg = self.config.empc
        available = self.provider.max_steps(clock, cfg.ts)
        look = min(cfg.np, available)
        if look < 1:
            raise RuntimeError(f"no forecast available at {clock}")
        fc = self.provider(clock, look, cfg.ts)
        end = day_end_from_forecast(fc[:, 0], clock, cfg.ts, cfg.activation_threshold)
        horizon = horizon_for(clock, end, cfg.ts, look)
        return horizon, fc[:horizon]

    def period(self, clock: pd.Timestamp, state: ReactorState, active: bool) -> None:
        if not active:
            self._move = np.zeros(3)
            self._previous = None
            self._was_active = False
            return
        if not self._was_active:
            self.pi.reset()
            self._was_active = True
        horizon, fc = self.plan_horizon(clock)
        move, sol = control_step(state, fc, self.config, self.x_min, self._previous, horizon)
        fallback = not np.isfinite(sol.objective)
        if fallback:
            move = self._move
        else:
            self._previous = sol
        self._move = np.asarray(move, dtype=float)
        _, s_h, s_xb = sol.layout.split(sol.x)
        self.diagnostics.append(StepDiagnostics(
            timestamp=clock, horizon=horizon, status=sol.status, iterations=sol.iterations,
            objective=sol.objective, optimality=sol.optimality,
            min_level_slack=float(s_h.min()), biomass_slack=s_xb,
            Q_air=float(self._move[0]), Q_d=float(self._move[1]), Q_h=float(self._move[2]),
            fallback=fallback).as_dict())

    def substep(self, clock: pd.Timestamp, state: ReactorState, measured_ph: float, dt: float,
                active: bool) -> ControlInput:
        if not active:
            return ControlInput()
        q_co2 = self.pi.step(measured_ph, dt)
        q_air, q_d, q_h = self._move
        return ControlInput(Q_air=q_air, Q_co2=q_co2, Q_d=q_d, Q_h=q_h)
