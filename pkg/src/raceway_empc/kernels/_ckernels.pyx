# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Same API and arithmetic as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, pow, fabs, NAN

cnp.import_array()

NAME = "cython"

cdef double DAY = 86400.0
cdef double LPM = 1.0 / 60000.0
cdef double SIGMA = 5.670374419e-8
cdef double K0 = 273.15

# Indices into the packed parameter vector (see layout.PARAM_NAMES).
cdef enum:
    P_A = 0
    P_MU_MAX = 1
    P_M_MIN = 2
    P_M_MAX = 3
    P_T_MIN = 4
    P_T_MAX = 5
    P_T_OPT = 6
    P_T_D = 7
    P_C_P = 8
    P_RHO = 9
    P_K_A = 10
    P_I_K = 11
    P_N = 12
    P_N_M = 13
    P_PH_MIN = 14
    P_PH_MAX = 15
    P_PH_OPT = 16
    P_DO2_MAX = 17
    P_M_DO2 = 18
    P_I_KM = 19
    P_KL_0 = 20
    P_KL_WS = 21
    P_KL_AIR = 22
    P_ETA_SOL = 23
    P_H_CONV_0 = 24
    P_H_CONV_WS = 25
    P_H_COND = 26
    P_EMISS = 27
    P_SKY = 28
    P_KO_0 = 29
    P_KO_WS = 30
    P_KO_AIR = 31
    P_KC_0 = 32
    P_KC_WS = 33
    P_KC_AIR = 34
    P_Y_O2 = 35
    P_Y_C = 36
    P_ETA_INJ = 37
    P_DO_SAT = 38
    P_DO_D = 39
    P_TIC_D = 40
    P_ALK = 41
    P_CO2_EQ = 42
    P_K1 = 43
    P_K2 = 44
    P_KW = 45
    P_PRICE = 46
    P_C_POWER = 47
    P_P_BLOWER = 48
    P_P_WHEEL = 49
    P_V_L = 50
    P_PH_ASSUMED = 51
    N_PARAMS = 52

PARAM_COUNT = N_PARAMS


cdef inline double cardinal(double v, double vmin, double vopt, double vmax) nogil:
    cdef double num, den, r
    if v <= vmin or v >= vmax:
        return 0.0
    num = (v - vmax) * (v - vmin) * (v - vmin)
    den = (vopt - vmin) * ((vopt - vmin) * (v - vopt) - (vopt - vmax) * (vopt + vmin - 2.0 * v))
    r = num / den
    if r < 0.0:
        return 0.0
    if r > 1.0:
        return 1.0
    return r


cdef inline void growth(double X, double h, double T, double DO, double pH, double I0,
                        const double[::1] p, double* mu, double* gross) nogil:
    cdef double kxh = p[P_K_A] * X * 1000.0 * h
    cdef double iav, a, b, mul, m, ratio, fdo
    if kxh < 1e-9:
        iav = I0
    else:
        iav = I0 * -expm1(-kxh) / kxh
    if iav > 0.0:
        a = pow(iav, p[P_N])
        mul = p[P_MU_MAX] * a / (a + pow(p[P_I_K], p[P_N]))
        b = pow(iav, p[P_N_M])
        m = p[P_M_MIN] + p[P_M_MAX] * b / (b + pow(p[P_I_KM], p[P_N_M]))
    else:
        mul = 0.0
        m = p[P_M_MIN]
    ratio = (DO if DO > 0.0 else 0.0) / p[P_DO2_MAX]
    fdo = 1.0 - pow(ratio, p[P_M_DO2])
    if fdo < 0.0:
        fdo = 0.0
    gross[0] = (mul * cardinal(T, p[P_T_MIN], p[P_T_OPT], p[P_T_MAX])
                * cardinal(pH, p[P_PH_MIN], p[P_PH_OPT], p[P_PH_MAX]) * fdo)
    mu[0] = gross[0] - m


cdef inline double evap(double T, double T_amb, double RH, double WS, double q_air,
                        const double[::1] p) nogil:
    cdef double kl = p[P_KL_0] + p[P_KL_WS] * WS + p[P_KL_AIR] * q_air
    cdef double e_w = 610.78 * exp(17.27 * T / (T + 237.3))
    cdef double e_a = RH / 100.0 * 610.78 * exp(17.27 * T_amb / (T_amb + 237.3))
    cdef double lv = 2.501e6 - 2361.0 * T
    return kl * p[P_A] * (e_w - e_a) / (lv * p[P_RHO])


cdef inline double heat(double T, const double* d, double g_s, const double[::1] p) nogil:
    cdef double A = p[P_A]
    cdef double lv = 2.501e6 - 2361.0 * T
    cdef double tk = T + K0
    cdef double tsky = d[1] + p[P_SKY] + K0
    return (p[P_ETA_SOL] * d[0] * A - p[P_RHO] * lv * g_s
            - (p[P_H_CONV_0] + p[P_H_CONV_WS] * d[3]) * A * (T - d[1])
            - p[P_H_COND] * A * (T - d[2])
            - p[P_EMISS] * SIGMA * A * (tk * tk * tk * tk - tsky * tsky * tsky * tsky))


cdef inline double residual(double pH, double tic, const double[::1] p) nogil:
    cdef double H = 1000.0 * pow(10.0, -pH)
    cdef double k1 = p[P_K1] * 1000.0
    cdef double k2 = p[P_K2] * 1000.0
    cdef double den = H * H + k1 * H + k1 * k2
    return tic * (k1 * H + 2.0 * k1 * k2) / den + p[P_KW] * 1e6 / H - H - p[P_ALK]


cdef inline void c_speciate(double tic, const double[::1] p, double* pH, double* co2) nogil:
    cdef double lo = 2.0, hi = 12.0, mid, r, tol, H, k1, k2
    cdef int it
    if residual(lo, tic, p) > 0.0 or residual(hi, tic, p) < 0.0:
        pH[0] = NAN
        co2[0] = NAN
        return
    tol = 1e-12 * p[P_ALK]
    mid = 0.5 * (lo + hi)
    for it in range(200):
        mid = 0.5 * (lo + hi)
        r = residual(mid, tic, p)
        if fabs(r) < tol:
            break
        if r < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    H = 1000.0 * pow(10.0, -mid)
    k1 = p[P_K1] * 1000.0
    k2 = p[P_K2] * 1000.0
    pH[0] = mid
    co2[0] = tic * H * H / (H * H + k1 * H + k1 * k2)


def speciate(double tic, const double[::1] p):
    cdef double pH, co2
    c_speciate(tic, p, &pH, &co2)
    return pH, co2


cdef inline double cost_rate(double X, double h, double q_air, double q_h, const double[::1] p) nogil:
    return (-p[P_PRICE] * X * q_h * LPM + p[P_C_POWER] * p[P_P_BLOWER] * q_air * LPM
            + p[P_C_POWER] * p[P_P_WHEEL] * p[P_V_L] * h * h)


cdef void c_plant_rhs(const double* s, const double* u, const double* d, const double[::1] p,
                      double* out) nogil:
    cdef double X = s[0], h = s[1], T = s[2], DO = s[3], tic = s[4]
    cdef double A = p[P_A]
    cdef double V = A * h
    cdef double pH, co2, mu, gross, g_s, qd, dil, kla_o, kla_c
    c_speciate(tic, p, &pH, &co2)
    growth(X, h, T, DO, pH, d[0], p, &mu, &gross)
    g_s = evap(T, d[1], d[4], d[3], u[0], p)
    qd = u[2] * LPM
    dil = qd / V
    out[0] = X * (mu / DAY - (qd - g_s) / V)
    out[1] = (qd - u[3] * LPM - g_s) / A
    out[2] = heat(T, d, g_s, p) / (V * p[P_C_P] * p[P_RHO]) + dil * (p[P_T_D] - T)
    kla_o = p[P_KO_0] + p[P_KO_WS] * d[3] + p[P_KO_AIR] * u[0]
    out[3] = p[P_Y_O2] * X * gross / DAY - kla_o * (DO - p[P_DO_SAT]) - dil * (DO - p[P_DO_D])
    kla_c = p[P_KC_0] + p[P_KC_WS] * d[3] + p[P_KC_AIR] * u[0]
    out[4] = (-p[P_Y_C] * X * 1000.0 * gross / DAY - kla_c * (co2 - p[P_CO2_EQ])
              + p[P_ETA_INJ] * u[1] / 60.0 / 22.414 / V - dil * (tic - p[P_TIC_D]))


cdef inline void floor_state(double* s, int n) nogil:
    if s[0] < 0.0:
        s[0] = 0.0
    if s[1] < 1e-3:
        s[1] = 1e-3
    if s[3] < 0.0:
        s[3] = 0.0
    if n > 4 and s[4] < 0.0:
        s[4] = 0.0


def plant_rhs(s, u, d, const double[::1] p):
    cdef double cs[5]
    cdef double cu[4]
    cdef double cd[5]
    cdef double out[5]
    cdef int i
    for i in range(5):
        cs[i] = s[i]
        cd[i] = d[i]
    for i in range(4):
        cu[i] = u[i]
    c_plant_rhs(cs, cu, cd, p, out)
    return np.array([out[0], out[1], out[2], out[3], out[4]])


def plant_outputs(s, u, d, const double[::1] p):
    cdef double pH, co2, mu, gross, g_s
    c_speciate(s[4], p, &pH, &co2)
    growth(s[0], s[1], s[2], s[3], pH, d[0], p, &mu, &gross)
    g_s = evap(s[2], d[1], d[4], d[3], u[0], p)
    return pH, mu, g_s, cost_rate(s[0], s[1], u[0], u[3], p)


def plant_step(s, u, d0, dm, d1, double dt, const double[::1] p):
    cdef double x[5]
    cdef double tmp[5]
    cdef double k1[5]
    cdef double k2[5]
    cdef double k3[5]
    cdef double k4[5]
    cdef double cu[4]
    cdef double e0[5]
    cdef double em[5]
    cdef double e1[5]
    cdef int i
    for i in range(5):
        x[i] = s[i]
        e0[i] = d0[i]
        em[i] = dm[i]
        e1[i] = d1[i]
    for i in range(4):
        cu[i] = u[i]
    c_plant_rhs(x, cu, e0, p, k1)
    for i in range(5):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    c_plant_rhs(tmp, cu, em, p, k2)
    for i in range(5):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    c_plant_rhs(tmp, cu, em, p, k3)
    for i in range(5):
        tmp[i] = x[i] + dt * k3[i]
    c_plant_rhs(tmp, cu, e1, p, k4)
    for i in range(5):
        x[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    floor_state(x, 5)
    return np.array([x[0], x[1], x[2], x[3], x[4]])


cdef inline void reduced_rhs(const double* x, double q_air, double q_d, double q_h,
                             const double* d, const double[::1] p, double* out) nogil:
    cdef double X = x[0], h = x[1], T = x[2], DO = x[3]
    cdef double A = p[P_A]
    cdef double V = A * h
    cdef double mu, gross, g_s, qd, dil, kla_o
    growth(X, h, T, DO, p[P_PH_ASSUMED], d[0], p, &mu, &gross)
    g_s = evap(T, d[1], d[4], d[3], q_air, p)
    qd = q_d * LPM
    dil = qd / V
    out[0] = X * (mu / DAY - (qd - g_s) / V)
    out[1] = (qd - q_h * LPM - g_s) / A
    out[2] = heat(T, d, g_s, p) / (V * p[P_C_P] * p[P_RHO]) + dil * (p[P_T_D] - T)
    kla_o = p[P_KO_0] + p[P_KO_WS] * d[3] + p[P_KO_AIR] * q_air
    out[3] = p[P_Y_O2] * X * gross / DAY - kla_o * (DO - p[P_DO_SAT]) - dil * (DO - p[P_DO_D])


cdef inline void reduced_step(double* x, double q_air, double q_d, double q_h, const double* d,
                              const double[::1] p, double dt) nogil:
    cdef double a1[4]
    cdef double a2[4]
    cdef double a3[4]
    cdef double a4[4]
    cdef double tmp[4]
    cdef double hd = 0.5 * dt
    cdef double w = dt / 6.0
    cdef int i
    reduced_rhs(x, q_air, q_d, q_h, d, p, a1)
    for i in range(4):
        tmp[i] = x[i] + hd * a1[i]
    reduced_rhs(tmp, q_air, q_d, q_h, d, p, a2)
    for i in range(4):
        tmp[i] = x[i] + hd * a2[i]
    reduced_rhs(tmp, q_air, q_d, q_h, d, p, a3)
    for i in range(4):
        tmp[i] = x[i] + dt * a3[i]
    reduced_rhs(tmp, q_air, q_d, q_h, d, p, a4)
    for i in range(4):
        x[i] = x[i] + w * (a1[i] + 2 * a2[i] + 2 * a3[i] + a4[i])
    floor_state(x, 4)


cdef double rollout(double* x, const double[:, ::1] moves, int blk, int start, int N,
                    const double[:, ::1] dist, const double[::1] p, double dt_sub, int nsub,
                    double econ, double[::1] h_out, double[::1] X_out,
                    double[:, ::1] states, double[::1] econs, bint store) nogil:
    cdef int nc = moves.shape[0]
    cdef int i, k, j, c
    cdef double q_air, q_d, q_h
    cdef double d[5]
    for i in range(start, N):
        if store:
            for c in range(4):
                states[i, c] = x[c]
            econs[i] = econ
        k = i // blk
        if k >= nc:
            k = nc - 1
        q_air = moves[k, 0]
        q_d = moves[k, 1]
        q_h = moves[k, 2]
        for c in range(5):
            d[c] = dist[i, c]
        for j in range(nsub):
            econ += cost_rate(x[0], x[1], q_air, q_h, p) * dt_sub
            reduced_step(x, q_air, q_d, q_h, d, p, dt_sub)
        h_out[i] = x[1]
        X_out[i] = x[0]
    return econ


def predict(x0, moves, int blk, int N, dist, const double[::1] p, double dt_sub, int nsub):
    cdef double[:, ::1] mv = np.ascontiguousarray(moves, dtype=np.float64)
    cdef double[:, ::1] dl = np.ascontiguousarray(dist, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] h_out = np.empty(N)
    cdef cnp.ndarray[double, ndim=1] X_out = np.empty(N)
    cdef double[:, ::1] dummy = np.empty((1, 4))
    cdef double[::1] dummy_e = np.empty(1)
    cdef double x[4]
    cdef int c
    for c in range(4):
        x[c] = x0[c]
    econ = rollout(x, mv, blk, 0, N, dl, p, dt_sub, nsub, 0.0, h_out, X_out, dummy, dummy_e, False)
    return econ, h_out, X_out


def predict_jac(x0, moves, int blk, int N, dist, const double[::1] p, double dt_sub, int nsub,
                double rel_step):
    cdef cnp.ndarray[double, ndim=2] base_arr = np.ascontiguousarray(moves, dtype=np.float64)
    cdef double[:, ::1] base = base_arr
    cdef double[:, ::1] dl = np.ascontiguousarray(dist, dtype=np.float64)
    cdef int nc = base.shape[0]
    cdef int ncol = 3 * nc
    cdef cnp.ndarray[double, ndim=1] h0 = np.empty(N)
    cdef cnp.ndarray[double, ndim=1] X0 = np.empty(N)
    cdef double[:, ::1] states = np.empty((N, 4))
    cdef double[::1] econs = np.empty(N)
    cdef cnp.ndarray[double, ndim=1] g = np.zeros(ncol)
    cdef cnp.ndarray[double, ndim=2] jh = np.zeros((N, ncol))
    cdef cnp.ndarray[double, ndim=2] jx = np.zeros((N, ncol))
    cdef double[::1] hp = np.empty(N)
    cdef double[::1] xp = np.empty(N)
    cdef double[:, ::1] pert = base_arr.copy()
    cdef double x[4]
    cdef double econ0, econ, val, step
    cdef int c, col, k, start, i, j
    for c in range(4):
        x[c] = x0[c]
    econ0 = rollout(x, base, blk, 0, N, dl, p, dt_sub, nsub, 0.0, h0, X0, states, econs, True)
    for col in range(3):
        for k in range(nc):
            start = k * blk
            if start >= N:
                continue
            val = base[k, col]
            step = rel_step * (fabs(val) if fabs(val) > 1.0 else 1.0)
            pert[k, col] = val + step
            for c in range(4):
                x[c] = states[start, c]
            econ = rollout(x, pert, blk, start, N, dl, p, dt_sub, nsub, econs[start], hp, xp,
                           states, econs, False)
            pert[k, col] = val
            j = col * nc + k
            g[j] = (econ - econ0) / step
            for i in range(start, N):
                jh[i, j] = (hp[i] - h0[i]) / step
                jx[i, j] = (xp[i] - X0[i]) / step
    return econ0, h0, X0, g, jh, jx
