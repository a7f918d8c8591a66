"""Pure-Python kernels: the reference path and the import-time fallback.

State vectors are ``[X, h, T, DO, TIC]`` for the plant and ``[X, h, T, DO]``
for predictions (pH held at ``ph_assumed``). Inputs are
``[Q_air, Q_co2, Q_d, Q_h]`` for the plant and blocked ``[Q_air, Q_d, Q_h]``
moves for predictions. Disturbances are ``[I0, T_amb, T_soil, WS, RH]``.
"""
from __future__ import annotations

import math

import numpy as np

from .layout import IDX

NAME = "python"

_DAY = 86400.0
_LPM = 1.0 / 60000.0
_SIGMA = 5.670374419e-8
_K0 = 273.15

(_A, _MU_MAX, _M_MIN, _M_MAX, _T_MIN, _T_MAX, _T_OPT, _T_D, _C_P, _RHO, _K_A, _I_K, _N, _N_M,
 _PH_MIN, _PH_MAX, _PH_OPT, _DO2_MAX, _M_DO2, _I_KM, _KL_0, _KL_WS, _KL_AIR, _ETA_SOL,
 _H_CONV_0, _H_CONV_WS, _H_COND, _EMISS, _SKY, _KO_0, _KO_WS, _KO_AIR, _KC_0, _KC_WS, _KC_AIR,
 _Y_O2, _Y_C, _ETA_INJ, _DO_SAT, _DO_D, _TIC_D, _ALK, _CO2_EQ, _K1, _K2, _KW, _PRICE, _C_POWER,
 _P_BLOWER, _P_WHEEL, _V_L, _PH_ASSUMED) = range(len(IDX))


def _cardinal(v, vmin, vopt, vmax):
    if v <= vmin or v >= vmax:
        return 0.0
    num = (v - vmax) * (v - vmin) ** 2
    den = (vopt - vmin) * ((vopt - vmin) * (v - vopt) - (vopt - vmax) * (vopt + vmin - 2.0 * v))
    r = num / den
    return 0.0 if r < 0.0 else (1.0 if r > 1.0 else r)


def _growth(X, h, T, DO, pH, I0, p):
    """Return (net growth, gross photosynthesis) in 1/day."""
    kxh = p[_K_A] * X * 1000.0 * h
    iav = I0 if kxh < 1e-9 else I0 * -math.expm1(-kxh) / kxh
    if iav > 0.0:
        a = iav ** p[_N]
        mul = p[_MU_MAX] * a / (a + p[_I_K] ** p[_N])
        b = iav ** p[_N_M]
        m = p[_M_MIN] + p[_M_MAX] * b / (b + p[_I_KM] ** p[_N_M])
    else:
        mul = 0.0
        m = p[_M_MIN]
    ratio = (DO if DO > 0.0 else 0.0) / p[_DO2_MAX]
    fdo = 1.0 - ratio ** p[_M_DO2]
    if fdo < 0.0:
        fdo = 0.0
    gross = (mul * _cardinal(T, p[_T_MIN], p[_T_OPT], p[_T_MAX])
             * _cardinal(pH, p[_PH_MIN], p[_PH_OPT], p[_PH_MAX]) * fdo)
    return gross - m, gross


def _evap(T, T_amb, RH, WS, Q_air, p):
    kl = p[_KL_0] + p[_KL_WS] * WS + p[_KL_AIR] * Q_air
    e_w = 610.78 * math.exp(17.27 * T / (T + 237.3))
    e_a = RH / 100.0 * 610.78 * math.exp(17.27 * T_amb / (T_amb + 237.3))
    lv = 2.501e6 - 2361.0 * T
    return kl * p[_A] * (e_w - e_a) / (lv * p[_RHO])


def _heat(T, d, g_s, p):
    A = p[_A]
    lv = 2.501e6 - 2361.0 * T
    tk = T + _K0
    tsky = d[1] + p[_SKY] + _K0
    return (p[_ETA_SOL] * d[0] * A - p[_RHO] * lv * g_s
            - (p[_H_CONV_0] + p[_H_CONV_WS] * d[3]) * A * (T - d[1])
            - p[_H_COND] * A * (T - d[2])
            - p[_EMISS] * _SIGMA * A * (tk ** 4 - tsky ** 4))


def _residual(pH, tic, p):
    H = 1000.0 * 10.0 ** -pH
    k1 = p[_K1] * 1000.0
    k2 = p[_K2] * 1000.0
    den = H * H + k1 * H + k1 * k2
    return tic * (k1 * H + 2.0 * k1 * k2) / den + p[_KW] * 1e6 / H - H - p[_ALK]


def speciate(tic, p):
    """Return (pH, dissolved CO2); NaN pH when no root is bracketed."""
    lo, hi = 2.0, 12.0
    if _residual(lo, tic, p) > 0.0 or _residual(hi, tic, p) < 0.0:
        return math.nan, math.nan
    tol = 1e-12 * p[_ALK]
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = _residual(mid, tic, p)
        if abs(r) < tol:
            break
        if r < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    H = 1000.0 * 10.0 ** -mid
    k1 = p[_K1] * 1000.0
    k2 = p[_K2] * 1000.0
    return mid, tic * H * H / (H * H + k1 * H + k1 * k2)


def _plant_rhs(s, u, d, p):
    X, h, T, DO, tic = s
    q_air, q_co2, q_d, q_h = u
    A = p[_A]
    V = A * h
    pH, co2 = speciate(tic, p)
    mu, gross = _growth(X, h, T, DO, pH, d[0], p)
    g_s = _evap(T, d[1], d[4], d[3], q_air, p)
    qd = q_d * _LPM
    dil = qd / V
    dX = X * (mu / _DAY - (qd - g_s) / V)
    dh = (qd - q_h * _LPM - g_s) / A
    dT = _heat(T, d, g_s, p) / (V * p[_C_P] * p[_RHO]) + dil * (p[_T_D] - T)
    kla_o = p[_KO_0] + p[_KO_WS] * d[3] + p[_KO_AIR] * q_air
    dDO = p[_Y_O2] * X * gross / _DAY - kla_o * (DO - p[_DO_SAT]) - dil * (DO - p[_DO_D])
    kla_c = p[_KC_0] + p[_KC_WS] * d[3] + p[_KC_AIR] * q_air
    dTIC = (-p[_Y_C] * X * 1000.0 * gross / _DAY - kla_c * (co2 - p[_CO2_EQ])
            + p[_ETA_INJ] * q_co2 / 60.0 / 22.414 / V - dil * (tic - p[_TIC_D]))
    return (dX, dh, dT, dDO, dTIC)


def plant_rhs(s, u, d, p):
    return np.array(_plant_rhs(tuple(s), tuple(u), tuple(d), p))


def plant_outputs(s, u, d, p):
    """Return (pH, net growth [1/day], evaporation [m3/s], Eq.-19 cost rate [EUR/s])."""
    X, h, T, DO, tic = (float(v) for v in s)
    pH, _ = speciate(tic, p)
    mu, _ = _growth(X, h, T, DO, pH, d[0], p)
    g_s = _evap(T, d[1], d[4], d[3], u[0], p)
    cost = _cost_rate(X, h, u[0], u[3], p)
    return pH, mu, g_s, cost


def _cost_rate(X, h, q_air, q_h, p):
    return (-p[_PRICE] * X * q_h * _LPM + p[_C_POWER] * p[_P_BLOWER] * q_air * _LPM
            + p[_C_POWER] * p[_P_WHEEL] * p[_V_L] * h * h)


def _floor(s):
    X, h, T, DO = s[0], s[1], s[2], s[3]
    out = [X if X > 0.0 else 0.0, h if h > 1e-3 else 1e-3, T, DO if DO > 0.0 else 0.0]
    if len(s) > 4:
        out.append(s[4] if s[4] > 0.0 else 0.0)
    return out


def plant_step(s, u, d0, dm, d1, dt, p):
    """One RK4 step of the full plant with disturbances at start, middle and end."""
    s = tuple(float(v) for v in s)
    u = tuple(float(v) for v in u)
    d0, dm, d1 = (tuple(float(v) for v in d) for d in (d0, dm, d1))
    k1 = _plant_rhs(s, u, d0, p)
    k2 = _plant_rhs(tuple(a + 0.5 * dt * b for a, b in zip(s, k1)), u, dm, p)
    k3 = _plant_rhs(tuple(a + 0.5 * dt * b for a, b in zip(s, k2)), u, dm, p)
    k4 = _plant_rhs(tuple(a + dt * b for a, b in zip(s, k3)), u, d1, p)
    new = [a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
           for a, b1, b2, b3, b4 in zip(s, k1, k2, k3, k4)]
    return np.array(_floor(new))


def _reduced_rhs(X, h, T, DO, q_air, q_d, q_h, d, p):
    A = p[_A]
    V = A * h
    mu, gross = _growth(X, h, T, DO, p[_PH_ASSUMED], d[0], p)
    g_s = _evap(T, d[1], d[4], d[3], q_air, p)
    qd = q_d * _LPM
    dil = qd / V
    dX = X * (mu / _DAY - (qd - g_s) / V)
    dh = (qd - q_h * _LPM - g_s) / A
    dT = _heat(T, d, g_s, p) / (V * p[_C_P] * p[_RHO]) + dil * (p[_T_D] - T)
    kla_o = p[_KO_0] + p[_KO_WS] * d[3] + p[_KO_AIR] * q_air
    dDO = p[_Y_O2] * X * gross / _DAY - kla_o * (DO - p[_DO_SAT]) - dil * (DO - p[_DO_D])
    return dX, dh, dT, dDO


def _reduced_step(x, q_air, q_d, q_h, d, p, dt):
    X, h, T, DO = x
    a1 = _reduced_rhs(X, h, T, DO, q_air, q_d, q_h, d, p)
    hd = 0.5 * dt
    a2 = _reduced_rhs(X + hd * a1[0], h + hd * a1[1], T + hd * a1[2], DO + hd * a1[3],
                      q_air, q_d, q_h, d, p)
    a3 = _reduced_rhs(X + hd * a2[0], h + hd * a2[1], T + hd * a2[2], DO + hd * a2[3],
                      q_air, q_d, q_h, d, p)
    a4 = _reduced_rhs(X + dt * a3[0], h + dt * a3[1], T + dt * a3[2], DO + dt * a3[3],
                      q_air, q_d, q_h, d, p)
    w = dt / 6.0
    return _floor((X + w * (a1[0] + 2 * a2[0] + 2 * a3[0] + a4[0]),
                   h + w * (a1[1] + 2 * a2[1] + 2 * a3[1] + a4[1]),
                   T + w * (a1[2] + 2 * a2[2] + 2 * a3[2] + a4[2]),
                   DO + w * (a1[3] + 2 * a2[3] + 2 * a3[3] + a4[3])))


def _rollout(x, moves, blk, start, N, dist, p, dt_sub, nsub, econ, h_out, X_out, states, econs):
    nc = len(moves)
    for i in range(start, N):
        if states is not None:
            states[i] = x
            econs[i] = econ
        k = i // blk
        if k >= nc:
            k = nc - 1
        q_air, q_d, q_h = moves[k]
        d = dist[i]
        for _ in range(nsub):
            econ += _cost_rate(x[0], x[1], q_air, q_h, p) * dt_sub
            x = _reduced_step(x, q_air, q_d, q_h, d, p, dt_sub)
        h_out[i] = x[1]
        X_out[i] = x[0]
    return econ


def predict(x0, moves, blk, N, dist, p, dt_sub, nsub):
    """Roll the prediction model ``N`` controller steps ahead.

    Returns the integrated economic cost [EUR] and the level and biomass at
    the end of every step.
    """
    mv = [tuple(float(v) for v in row) for row in np.asarray(moves)]
    dl = [tuple(float(v) for v in row) for row in np.asarray(dist)]
    h_out = np.empty(N)
    X_out = np.empty(N)
    econ = _rollout(list(map(float, x0)), mv, int(blk), 0, int(N), dl, p, float(dt_sub),
                    int(nsub), 0.0, h_out, X_out, None, None)
    return econ, h_out, X_out


def predict_jac(x0, moves, blk, N, dist, p, dt_sub, nsub, rel_step):
    """Forward-difference sensitivities of ``predict`` to every blocked move.

    Columns follow the decision layout: all air moves, then dilution, then
    harvest. Perturbed rollouts restart from the stored state at the start of
    the perturbed block.
    """
    moves = np.asarray(moves, dtype=float)
    nc = moves.shape[0]
    N, blk, nsub, dt_sub = int(N), int(blk), int(nsub), float(dt_sub)
    dl = [tuple(float(v) for v in row) for row in np.asarray(dist)]
    base = [tuple(row) for row in moves.tolist()]
    h0 = np.empty(N)
    X0 = np.empty(N)
    states = [None] * N
    econs = [0.0] * N
    econ0 = _rollout(list(map(float, x0)), base, blk, 0, N, dl, p, dt_sub, nsub, 0.0, h0, X0,
                     states, econs)
    ncol = 3 * nc
    g = np.zeros(ncol)
    jh = np.zeros((N, ncol))
    jx = np.zeros((N, ncol))
    hp = np.empty(N)
    xp = np.empty(N)
    for col in range(3):
        for k in range(nc):
            start = k * blk
            if start >= N:
                continue
            val = moves[k, col]
            step = rel_step * max(1.0, abs(val))
            pert = [list(r) for r in base]
            pert[k][col] = val + step
            pert = [tuple(r) for r in pert]
            hp[:start] = h0[:start]
            xp[:start] = X0[:start]
            econ = _rollout(list(states[start]), pert, blk, start, N, dl, p, dt_sub, nsub,
                            econs[start], hp, xp, None, None)
            j = col * nc + k
            g[j] = (econ - econ0) / step
            jh[:, j] = (hp - h0) / step
            jx[:, j] = (xp - X0) / step
    return econ0, h0, X0, g, jh, jx
