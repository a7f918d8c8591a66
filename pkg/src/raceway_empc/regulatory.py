"""pH regulation and the rule-based reference operation.

The PI loop manipulates the CO2 flow to hold pH at its setpoint. The
benchmark controller reproduces the usual industrial practice: a fixed
morning harvest, on/off level refill, constant aeration and on/off CO2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import pandas as pd

from .model import ControlInput, ReactorState
from .params import LPM_TO_M3S, BenchmarkConfig, ModelParams, PiConfig


@dataclass(frozen=True)
class FirstOrderModel:
    """First-order-plus-dead-time response of pH to the CO2 flow."""

    k: float  # [1/(L/min)]
    tau: float  # [s]
    delay: float = 0.0  # [s]

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("time constant must be positive")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")


def simc_tune(model: FirstOrderModel, tau_c: float) -> tuple[float, float]:
    """SIMC PI rules: ``Kp = tau / (k (tau_c + L))``, ``Ti = min(tau, 4 (tau_c + L))``."""
    if not tau_c > 0:
        raise ValueError("tau_c must be positive")
    if model.k == 0:
        raise ZeroDivisionError("process gain is zero")
    kp = model.tau / (model.k * (tau_c + model.delay))
    ti = min(model.tau, 4.0 * (tau_c + model.delay))
    return kp, ti


class PiController:
    """Discrete PI with back-calculation anti-windup.

    ``u = Kp e + I`` with ``e = setpoint - measurement``. The integrator is
    driven by the control error and by the saturation excess ``u_sat - u``
    weighted by the tracking time constant ``Tt``. The tracking term uses its
    exact first-order discretisation so that ``dt > Tt`` stays stable.

    ``Tt`` starts at ``tt_initial`` and switches to ``tt_after`` the first time
    the measurement reaches the setpoint after :meth:`reset`.
    """

    def __init__(self, kp: float, ti: float, *, setpoint: float = 8.0, u_min: float = 0.0,
                 u_max: float = 15.0, tt_initial: float = 1.0, tt_after: float | None = None):
        if not ti > 0:
            raise ValueError("Ti must be positive")
        if u_min > u_max:
            raise ValueError("u_min exceeds u_max")
        self.kp = kp
        self.ti = ti
        self.setpoint = setpoint
        self.u_min = u_min
        self.u_max = u_max
        self.tt_initial = tt_initial
        self.tt_after = ti if tt_after is None else tt_after
        if not (self.tt_initial > 0 and self.tt_after > 0):
            raise ValueError("tracking constants must be positive")
        self.reset()

    @classmethod
    def from_config(cls, cfg: PiConfig) -> "PiController":
        kp, ti = simc_tune(FirstOrderModel(cfg.k, cfg.tau, cfg.delay), cfg.tau_c)
        if cfg.kp is not None:
            kp = cfg.kp
        return cls(kp, ti, setpoint=cfg.setpoint, u_min=cfg.u_min, u_max=cfg.u_max,
                   tt_initial=cfg.tt_initial, tt_after=cfg.tt_after)

    def reset(self) -> None:
        self.integral = 0.0
        self.reached = False
        self._first_sign = 0.0
        self.output = 0.0

    @property
    def tt(self) -> float:
        return self.tt_after if self.reached else self.tt_initial

    def step(self, measured: float, dt: float) -> float:
        if not dt > 0:
            raise ValueError("dt must be positive")
        e = self.setpoint - measured
        if not self.reached:
            sign = math.copysign(1.0, e) if e != 0 else 0.0
            if self._first_sign == 0.0:
                self._first_sign = sign
            if sign == 0.0 or sign != self._first_sign:
                self.reached = True
        u = self.kp * e + self.integral
        u_sat = min(max(u, self.u_min), self.u_max)
        self.integral += dt * self.kp * e / self.ti + (-math.expm1(-dt / self.tt)) * (u_sat - u)
        self.output = u_sat
        return u_sat


def pi_step(pi: PiController, measured_ph: float, dt: float) -> float:
    """Advance the PI loop by ``dt`` seconds and return the CO2 flow [L/min]."""
    return pi.step(measured_ph, dt)


class BenchmarkController:
    """Rule-based operation.

    The only memory is the harvest window of the current day and the two
    on/off latches (level refill and CO2).
    """

    def __init__(self, cfg: BenchmarkConfig, model: ModelParams):
        self.cfg = cfg
        self.model = model
        self.reset()

    def reset(self) -> None:
        self._window_day = None
        self._window = None  # (start, end) timestamps
        self._refilling = False
        self._co2_on = False

    def harvest_window(self, clock: pd.Timestamp, state: ReactorState):
        """Open today's window at the configured hour; its length takes ``D V_ref``."""
        day = clock.normalize()
        opens = day + pd.Timedelta(hours=self.cfg.harvest_start_hour)
        if self._window_day != day and clock >= opens:
            v_ref = self.model.A * state.h
            duration = self.cfg.dilution_rate * v_ref / (self.cfg.q_h * LPM_TO_M3S) if self.cfg.q_h else 0.0
            self._window_day = day
            self._window = (clock, clock + pd.Timedelta(seconds=duration))
        return self._window if self._window_day == day else None

    def step(self, state: ReactorState, measured_ph: float, clock: pd.Timestamp,
             active: bool = True) -> ControlInput:
        cfg = self.cfg
        if state.h < cfg.level_threshold:
            self._refilling = True
        elif state.h >= cfg.level_threshold + cfg.level_hysteresis:
            self._refilling = False
        half = cfg.ph_band / 2.0
        if measured_ph > cfg.ph_setpoint + half:
            self._co2_on = True
        elif measured_ph < cfg.ph_setpoint - half:
            self._co2_on = False
        if not active:
            return ControlInput()
        window = self.harvest_window(clock, state)
        harvesting = window is not None and window[0] <= clock < window[1]
        return ControlInput(
            Q_air=cfg.q_air,
            Q_co2=cfg.q_co2 if self._co2_on else 0.0,
            Q_d=cfg.q_d if self._refilling else 0.0,
            Q_h=cfg.q_h if harvesting else 0.0,
        )


def benchmark_step(controller: BenchmarkController, state: ReactorState, measured_ph: float,
                   clock: pd.Timestamp, active: bool = True) -> ControlInput:
    return controller.step(state, measured_ph, clock, active)
