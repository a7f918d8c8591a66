"""Biological, water-level and thermal dynamics of the raceway reactor.

All functions are pure. Flows cross the API in L/min and are converted to
m3/s internally; rates in 1/day are converted to 1/s only where a time
derivative is formed.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from .params import LPM_TO_M3S, SECONDS_PER_DAY, ModelParams

STEFAN_BOLTZMANN = 5.670374419e-8  # W/(m2 K4)
KELVIN = 273.15


@dataclass(frozen=True)
class ReactorState:
    X: float  # biomass [g/L]
    h: float  # level [m]
    T: float  # water temperature [degC]
    DO: float  # dissolved oxygen [% sat]
    TIC: float  # total inorganic carbon [mol/m3]

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, arr) -> "ReactorState":
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class ControlInput:
    Q_air: float = 0.0  # [L/min]
    Q_co2: float = 0.0
    Q_d: float = 0.0
    Q_h: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, arr) -> "ControlInput":
        return cls(*(float(v) for v in arr))


# Actuator limits [L/min].
INPUT_BOUNDS = {"Q_air": (0.0, 500.0), "Q_co2": (0.0, 15.0), "Q_d": (0.0, 75.0), "Q_h": (0.0, 75.0)}


@dataclass(frozen=True)
class Disturbance:
    I0: float  # global irradiance [W/m2]
    T_amb: float  # [degC]
    T_soil: float  # [degC]
    WS: float  # wind speed [m/s]
    RH: float  # relative humidity [%]

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, arr) -> "Disturbance":
        return cls(*(float(v) for v in arr))


def volume(h: float, params: ModelParams) -> float:
    return params.A * h


def average_irradiance(I0: float, X: float, h: float, params: ModelParams) -> float:
    """Depth-averaged irradiance with Lambert-Beer attenuation.

    Biomass enters in g/m3 so that ``K_a * X * h`` is dimensionless.
    """
    kxh = params.K_a * X * 1000.0 * h
    if kxh < 1e-9:
        return I0
    return I0 * -math.expm1(-kxh) / kxh


def mu_light(Iav: float, params: ModelParams) -> float:
    """Light-limited maximum growth rate [1/day] (Hill form)."""
    if Iav <= 0.0:
        return 0.0
    a = Iav ** params.n
    return params.mu_max * a / (a + params.I_k ** params.n)


def cardinal_factor(v: float, v_min: float, v_opt: float, v_max: float) -> float:
    """Cardinal temperature/pH model: 1 at ``v_opt``, 0 at and beyond the extremes."""
    if not v_min < v_opt < v_max:
        raise ValueError(f"cardinal factor needs v_min < v_opt < v_max, got {v_min}, {v_opt}, {v_max}")
    if v <= v_min or v >= v_max:
        return 0.0
    num = (v - v_max) * (v - v_min) ** 2
    den = (v_opt - v_min) * ((v_opt - v_min) * (v - v_opt) - (v_opt - v_max) * (v_opt + v_min - 2.0 * v))
    return min(1.0, max(0.0, num / den))


def mu_do(DO: float, params: ModelParams) -> float:
    """Oxygen inhibition factor."""
    ratio = max(DO, 0.0) / params.DO2_max
    return max(0.0, 1.0 - ratio ** params.m_DO2)


def maintenance(Iav: float, params: ModelParams) -> float:
    """Respiration/decay rate [1/day]; never below ``m_min``."""
    if Iav <= 0.0:
        return params.m_min
    a = Iav ** params.n_m
    return params.m_min + params.m_max * a / (a + params.I_km ** params.n_m)


def growth_rate(state: ReactorState, pH: float, Iav: float, params: ModelParams) -> float:
    """Net specific growth rate [1/day]; negative when respiration dominates.

    Nitrogen, phosphorus and CO2 limitation factors are taken as 1.
    """
    f_T = cardinal_factor(state.T, params.T_min, params.T_opt, params.T_max)
    f_pH = cardinal_factor(pH, params.pH_min, params.pH_opt, params.pH_max)
    gross = mu_light(Iav, params) * f_T * f_pH * mu_do(state.DO, params)
    return gross - maintenance(Iav, params)


def saturation_vapor_pressure(T: float) -> float:
    """Tetens correlation over water [Pa], T in degC."""
    return 610.78 * math.exp(17.27 * T / (T + 237.3))


def latent_heat(T: float) -> float:
    """Latent heat of vaporisation [J/kg], linear in T [degC]."""
    return 2.501e6 - 2361.0 * T


def evaporation_rate(T: float, T_amb: float, RH: float, WS: float, Q_air: float,
                     params: ModelParams) -> float:
    """Evaporated liquid volume per time [m3/s]. Negative means condensation."""
    k_l = params.kl_0 + params.kl_ws * WS + params.kl_air * Q_air
    e_w = saturation_vapor_pressure(T)
    e_a = RH / 100.0 * saturation_vapor_pressure(T_amb)
    return k_l * params.A * (e_w - e_a) / (latent_heat(T) * params.rho)


def level_rhs(state: ReactorState, u: ControlInput, g_s: float, params: ModelParams) -> float:
    """dh/dt [m/s]."""
    return ((u.Q_d - u.Q_h) * LPM_TO_M3S - g_s) / params.A


def biomass_rhs(state: ReactorState, u: ControlInput, mu: float, g_s: float,
                params: ModelParams) -> float:
    """dX/dt [g/L/s]; ``mu`` in 1/day."""
    V = volume(state.h, params)
    return state.X * (mu / SECONDS_PER_DAY - (u.Q_d * LPM_TO_M3S - g_s) / V)


def heat_exchange(state: ReactorState, d: Disturbance, g_s: float, params: ModelParams) -> float:
    """Net environmental heat flow into the culture [W].

    Absorbed solar, minus evaporative, convective, soil-conductive and
    long-wave radiative losses.
    """
    A = params.A
    solar = params.eta_sol * d.I0 * A
    evap = params.rho * latent_heat(state.T) * g_s
    conv = (params.h_conv_0 + params.h_conv_ws * d.WS) * A * (state.T - d.T_amb)
    cond = params.h_cond * A * (state.T - d.T_soil)
    t_sky = d.T_amb + params.sky_offset + KELVIN
    rad = params.emissivity * STEFAN_BOLTZMANN * A * ((state.T + KELVIN) ** 4 - t_sky ** 4)
    return solar - evap - conv - cond - rad


def temperature_rhs(state: ReactorState, u: ControlInput, Q_ac: float, params: ModelParams) -> float:
    """dT/dt [degC/s]. Colder dilution water cools the culture."""
    V = volume(state.h, params)
    return Q_ac / (V * params.C_p * params.rho) + (u.Q_d * LPM_TO_M3S / V) * (params.T_d - state.T)
