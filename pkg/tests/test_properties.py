"""Randomised invariants of the model, chemistry, controllers and solver."""
import math

import numpy as np
import pandas as pd
from hypothesis import given, settings
from hypothesis import strategies as st

from raceway_empc.chemistry import charge_balance_residual, speciate, tic_for_ph
from raceway_empc.empc import horizon_for, should_activate
from raceway_empc.model import (ControlInput, Disturbance, ReactorState, average_irradiance,
                                biomass_rhs, cardinal_factor, evaporation_rate, growth_rate,
                                heat_exchange, level_rhs, maintenance, mu_do, mu_light)
from raceway_empc.nlp import NlpProblem, PlantLayout, solve, warm_start
from raceway_empc.params import GasParams, ModelParams
from raceway_empc.regulatory import PiController
from raceway_empc.weather import DisturbanceSeries

P, G = ModelParams(), GasParams()

finite = dict(allow_nan=False, allow_infinity=False)
biomass = st.floats(0.0, 5.0, **finite)
level = st.floats(0.02, 0.3, **finite)
irr = st.floats(0.0, 2000.0, **finite)
temp = st.floats(-5.0, 50.0, **finite)
flow75 = st.floats(0.0, 75.0, **finite)


@given(irr, irr)
def test_mu_light_monotone_and_bounded(a, b):
    lo, hi = sorted((a, b))
    assert 0.0 <= mu_light(lo, P) <= mu_light(hi, P) <= P.mu_max


@given(irr, biomass, biomass, level, level)
def test_average_irradiance_decreases_with_biomass_and_depth(I0, x1, x2, h1, h2):
    (xa, xb), (ha, hb) = sorted((x1, x2)), sorted((h1, h2))
    assert average_irradiance(I0, xb, ha, P) <= average_irradiance(I0, xa, ha, P) * (1 + 1e-12)
    assert average_irradiance(I0, xa, hb, P) <= average_irradiance(I0, xa, ha, P) * (1 + 1e-12)
    assert 0.0 <= average_irradiance(I0, xa, ha, P) <= I0 * (1 + 1e-12)


@given(temp, st.floats(0.0, 14.0, **finite), st.floats(0.0, 800.0, **finite))
def test_growth_factors_in_unit_interval(T, pH, DO):
    for f in (cardinal_factor(T, P.T_min, P.T_opt, P.T_max),
              cardinal_factor(pH, P.pH_min, P.pH_opt, P.pH_max), mu_do(DO, P)):
        assert 0.0 <= f <= 1.0


@given(irr)
def test_maintenance_range(Iav):
    assert P.m_min <= maintenance(Iav, P) <= P.m_min + P.m_max


@given(biomass, level, temp, st.floats(0.0, 500.0, **finite), flow75, flow75,
       st.floats(-1.0, 3.0, **finite), st.floats(-3e-5, 3e-5, **finite))
@settings(max_examples=300)
def test_total_biomass_identity(X, h, T, DO, qd, qh, mu, g_s):
    s = ReactorState(X, h, T, DO, 5.0)
    u = ControlInput(Q_d=qd, Q_h=qh)
    V = P.A * h
    lhs = biomass_rhs(s, u, mu, g_s, P) * V + X * P.A * level_rhs(s, u, g_s, P)
    rhs = X * V * mu / 86400.0 - qh / 60000.0 * X
    assert math.isclose(lhs, rhs, rel_tol=1e-10, abs_tol=1e-18)


@given(temp, st.floats(0.0, 500.0, **finite), level)
def test_dark_growth_is_minus_m_min(T, DO, h):
    s = ReactorState(1.0, h, T, DO, 5.0)
    assert growth_rate(s, 8.0, 0.0, P) == -P.m_min


@given(temp, st.floats(0.0, 15.0, **finite), st.floats(0.0, 500.0, **finite))
def test_no_evaporation_in_saturated_air(T, WS, q_air):
    assert evaporation_rate(T, T, 100.0, WS, q_air, P) == 0.0


@given(temp, st.floats(0.0, 15.0, **finite))
def test_thermal_equilibrium(T, WS):
    m = ModelParams(sky_offset=0.0)
    d = Disturbance(0.0, T, T, WS, 50.0)
    assert heat_exchange(ReactorState(1.0, 0.1, T, 100.0, 5.0), d, 0.0, m) == 0.0


@given(st.floats(0.3, 80.0, **finite), st.floats(1.01, 3.0, **finite))
def test_speciation_monotone_with_small_residual(tic, factor):
    pH1, _ = speciate(tic, G.alk, G)
    pH2, _ = speciate(tic * factor, G.alk, G)
    assert pH2 < pH1
    assert abs(charge_balance_residual(pH1, tic, G.alk, G)) < 1e-12 * G.alk


@given(st.floats(6.0, 10.0, **finite))
def test_tic_for_ph_round_trip(pH):
    assert math.isclose(speciate(tic_for_ph(pH, G.alk, G), G.alk, G)[0], pH, abs_tol=1e-9)


@given(st.lists(st.floats(4.0, 12.0, **finite), min_size=1, max_size=60),
       st.floats(-20.0, -0.1, **finite), st.floats(1.0, 5000.0, **finite))
def test_pi_output_within_limits(measurements, kp, ti):
    pi = PiController(kp, ti)
    for pH in measurements:
        assert 0.0 <= pi.step(pH, 30.0) <= 15.0


@given(st.floats(0.0, 2000.0, **finite))
def test_activation_is_threshold(I0):
    assert should_activate(I0) == (I0 > 100.0)


@given(st.integers(1, 24), st.integers(1, 24))
def test_layout_length(np_, nc):
    layout = PlantLayout.for_horizon(np_, nc)
    assert layout.nc <= min(nc, np_)
    assert layout.nc * layout.blk >= np_ > (layout.nc - 1) * layout.blk
    assert layout.n == 3 * layout.nc + np_ + 1


@given(st.integers(1, 48), st.integers(0, 3000))
def test_horizon_never_zero(np_max, remaining_s):
    h = horizon_for(0.0, float(remaining_s), 300.0, np_max)
    assert 1 <= h <= np_max


@given(st.lists(st.floats(-3.0, 3.0, **finite), min_size=3, max_size=3),
       st.lists(st.floats(-2.0, 2.0, **finite), min_size=3, max_size=3))
@settings(max_examples=40, deadline=None)
def test_solver_stays_in_box(centre, start):
    c = np.array(centre)
    p = NlpProblem(x0=np.clip(start, -1, 1), lb=-np.ones(3), ub=np.ones(3),
                   fun=lambda x: (float(np.sum((x - c) ** 2) + 0.1 * np.sum(x ** 4)),
                                  np.array([1.5 - x.sum()])))
    sol = solve(p, max_iters=60)
    assert np.all(sol.x >= -1 - 1e-9) and np.all(sol.x <= 1 + 1e-9)
    assert sol.optimality >= 0


@given(st.integers(1, 24), st.integers(1, 24), st.integers(1, 6), st.integers(0, 2 ** 31))
def test_warm_start_within_bounds(np_old, np_new, nc, seed):
    rng = np.random.default_rng(seed)
    old = PlantLayout.for_horizon(np_old, nc)
    x = old.pack(rng.uniform(0, [500, 75, 75], (old.nc, 3)), 0.0, 0.0)

    class Prev:
        layout = old
    Prev.x = x
    new = PlantLayout.for_horizon(np_new, nc)
    guess = warm_start(Prev, new)
    moves, s_h, s_xb = new.split(guess)
    assert guess.shape == (new.n,)
    assert (moves >= 0).all() and (moves <= [500, 75, 75]).all()
    assert (s_h == 0).all() and s_xb == 0


@given(st.lists(st.floats(-50.0, 50.0, **finite), min_size=2, max_size=20),
       st.floats(1.0, 3600.0, **finite), st.floats(0.0, 1.0, **finite))
def test_series_interpolation_brackets_samples(vals, step, frac):
    values = np.tile(np.asarray(vals)[:, None], (1, 5))
    s = DisturbanceSeries(pd.Timestamp("2024-01-01"), step, values)
    t = frac * s.duration
    got = s.at(t)[0]
    i = min(int(t // step), len(vals) - 2)
    lo, hi = sorted((vals[i], vals[i + 1]))
    assert lo - 1e-9 <= got <= hi + 1e-9
