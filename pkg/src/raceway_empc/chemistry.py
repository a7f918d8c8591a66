"""Dissolved oxygen and carbonate balances, and carbonate speciation.

Concentrations are mol/m3 (= mmol/L). Equilibrium constants are stored in
mol/L and rescaled here.
"""
from __future__ import annotations

from .model import ControlInput, Disturbance, ReactorState, volume
from .params import LPM_TO_M3S, SECONDS_PER_DAY, GasParams, ModelParams

MOLAR_VOLUME = 22.414  # L/mol at standard conditions
PH_BRACKET = (2.0, 12.0)


class SpeciationError(ValueError):
    """The charge balance has no root inside the pH bracket."""


def _alphas(H: float, K1: float, K2: float) -> tuple[float, float, float]:
    den = H * H + K1 * H + K1 * K2
    return H * H / den, K1 * H / den, K1 * K2 / den


def charge_balance_residual(pH: float, TIC: float, alk: float, gas: GasParams) -> float:
    """HCO3 + 2 CO3 + OH - H - ALK [mol/m3]; increasing in pH."""
    H = 1000.0 * 10.0 ** -pH
    K1, K2, Kw = gas.K1 * 1000.0, gas.K2 * 1000.0, gas.Kw * 1e6
    _, a1, a2 = _alphas(H, K1, K2)
    return TIC * (a1 + 2.0 * a2) + Kw / H - H - alk


def speciate(TIC: float, alk: float, gas: GasParams) -> tuple[float, float]:
    """Solve the charge balance for pH by bisection.

    Returns ``(pH, co2)`` with ``co2`` the dissolved CO2 in mol/m3.
    """
    lo, hi = PH_BRACKET
    r_lo = charge_balance_residual(lo, TIC, alk, gas)
    r_hi = charge_balance_residual(hi, TIC, alk, gas)
    if r_lo > 0 or r_hi < 0:
        raise SpeciationError(f"no pH root in {PH_BRACKET} for TIC={TIC}, ALK={alk}")
    tol = 1e-12 * alk
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = charge_balance_residual(mid, TIC, alk, gas)
        if abs(r) < tol:
            break
        if r < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    H = 1000.0 * 10.0 ** -mid
    a0, _, _ = _alphas(H, gas.K1 * 1000.0, gas.K2 * 1000.0)
    return mid, TIC * a0


def tic_for_ph(pH: float, alk: float, gas: GasParams) -> float:
    """TIC that yields ``pH`` at alkalinity ``alk`` (closed form)."""
    H = 1000.0 * 10.0 ** -pH
    _, a1, a2 = _alphas(H, gas.K1 * 1000.0, gas.K2 * 1000.0)
    return (alk - gas.Kw * 1e6 / H + H) / (a1 + 2.0 * a2)


def kla_o2(WS: float, Q_air: float, gas: GasParams) -> float:
    return gas.kla_o2_0 + gas.kla_o2_ws * WS + gas.kla_o2_air * Q_air


def kla_co2(WS: float, Q_air: float, gas: GasParams) -> float:
    return gas.kla_co2_0 + gas.kla_co2_ws * WS + gas.kla_co2_air * Q_air


def co2_molar_flow(Q_co2: float) -> float:
    """Injected CO2 [mol/s] for a gas flow in L/min at standard conditions."""
    return Q_co2 / 60.0 / MOLAR_VOLUME


def oxygen_rhs(state: ReactorState, u: ControlInput, d: Disturbance, mu_photo: float,
               gas: GasParams, params: ModelParams) -> float:
    """dDO/dt [%/s].

    ``mu_photo`` is the gross photosynthetic rate in 1/day (net growth plus
    maintenance). Aeration pulls DO towards air saturation.
    """
    V = volume(state.h, params)
    production = gas.y_o2 * state.X * max(mu_photo, 0.0) / SECONDS_PER_DAY
    transfer = kla_o2(d.WS, u.Q_air, gas) * (state.DO - gas.do_sat)
    dilution = u.Q_d * LPM_TO_M3S / V * (state.DO - gas.do_d)
    return production - transfer - dilution


def carbon_rhs(state: ReactorState, u: ControlInput, d: Disturbance, mu_photo: float,
               gas: GasParams, params: ModelParams, co2: float | None = None) -> float:
    """dTIC/dt [mol/m3/s].

    ``co2`` may be passed when the speciation is already known.
    """
    if co2 is None:
        _, co2 = speciate(state.TIC, gas.alk, gas)
    V = volume(state.h, params)
    uptake = gas.y_c * state.X * 1000.0 * max(mu_photo, 0.0) / SECONDS_PER_DAY
    exchange = kla_co2(d.WS, u.Q_air, gas) * (co2 - gas.co2_atm_eq)
    injection = gas.eta_inj * co2_molar_flow(u.Q_co2) / V
    dilution = u.Q_d * LPM_TO_M3S / V * (state.TIC - gas.tic_d)
    return -uptake - exchange + injection - dilution


def saturation_ph(gas: GasParams) -> float:
    """pH of the medium at equilibrium with atmospheric CO2."""
    lo, hi = PH_BRACKET
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        H = 1000.0 * 10.0 ** -mid
        a0, _, _ = _alphas(H, gas.K1 * 1000.0, gas.K2 * 1000.0)
        tic = tic_for_ph(mid, gas.alk, gas)
        if tic * a0 > gas.co2_atm_eq:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ph_from_state(state: ReactorState, gas: GasParams) -> float:
    return speciate(state.TIC, gas.alk, gas)[0]


__all__ = [
    "SpeciationError", "charge_balance_residual", "speciate", "tic_for_ph", "kla_o2", "kla_co2",
    "co2_molar_flow", "oxygen_rhs", "carbon_rhs", "saturation_ph", "ph_from_state",
]
