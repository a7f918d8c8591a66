"""Flat parameter vector shared by the compiled and pure-Python kernels.

The index order here is mirrored by hand in ``_ckernels.pyx``; the kernel
equivalence tests catch any drift.
"""
from __future__ import annotations

import numpy as np

from ..params import CostParams, GasParams, ModelParams

PARAM_NAMES = (
    # model
    "A", "mu_max", "m_min", "m_max", "T_min", "T_max", "T_opt", "T_d", "C_p", "rho",
    "K_a", "I_k", "n", "n_m", "pH_min", "pH_max", "pH_opt", "DO2_max", "m_DO2", "I_km",
    "kl_0", "kl_ws", "kl_air", "eta_sol", "h_conv_0", "h_conv_ws", "h_cond", "emissivity",
    "sky_offset",
    # gas
    "kla_o2_0", "kla_o2_ws", "kla_o2_air", "kla_co2_0", "kla_co2_ws", "kla_co2_air",
    "y_o2", "y_c", "eta_inj", "do_sat", "do_d", "tic_d", "alk", "co2_atm_eq", "K1", "K2", "Kw",
    # cost
    "price_biomass", "c_power", "p_blower", "p_wheel", "v_l",
    # prediction
    "ph_assumed",
)
IDX = {name: i for i, name in enumerate(PARAM_NAMES)}
N_PARAMS = len(PARAM_NAMES)


def pack_params(model: ModelParams, gas: GasParams, cost: CostParams,
                ph_assumed: float = 8.0) -> np.ndarray:
    values = {}
    for group in (model, gas, cost):
        for name in PARAM_NAMES:
            if hasattr(group, name):
                values[name] = float(getattr(group, name))
    values["ph_assumed"] = float(ph_assumed)
    return np.array([values[name] for name in PARAM_NAMES], dtype=np.float64)
