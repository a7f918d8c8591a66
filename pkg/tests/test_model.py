import math
from fractions import Fraction

import numpy as np
import pytest

from raceway_empc.model import (ControlInput, Disturbance, ReactorState, average_irradiance,
                                biomass_rhs, cardinal_factor, evaporation_rate, growth_rate,
                                heat_exchange, latent_heat, level_rhs, maintenance, mu_do,
                                mu_light, temperature_rhs)
from raceway_empc.params import ConfigError, ModelParams

P = ModelParams()


def st(**kw):
    base = dict(X=1.0, h=0.1, T=30.0, DO=0.0, TIC=2.0)
    base.update(kw)
    return ReactorState(**base)


class TestAverageIrradiance:
    def test_zero_attenuation_limit(self):
        assert average_irradiance(1000.0, 0.0, 0.1, P) == 1000.0
        assert average_irradiance(1000.0, 1e-15, 0.1, P) == pytest.approx(1000.0, rel=1e-12)

    def test_one_gram_per_litre_ten_centimetres(self):
        # Ka X h = 0.1 * 1000 * 0.1 = 10, so I0 (1 - e^-10) / 10
        assert average_irradiance(1000.0, 1.0, 0.1, P) == pytest.approx(99.99546000702375, rel=1e-12)
        assert round(average_irradiance(1000.0, 1.0, 0.1, P), 4) == 99.9955

    def test_dark(self):
        assert average_irradiance(0.0, 2.0, 0.15, P) == 0.0

    def test_continuous_across_series_switch(self):
        below = average_irradiance(500.0, 0.9e-11, 1.0, P)
        above = average_irradiance(500.0, 1.1e-11, 1.0, P)
        assert below == pytest.approx(above, rel=1e-8)


class TestLightAndMaintenance:
    def test_half_saturation(self):
        assert mu_light(120.0, P) == pytest.approx(0.9072, abs=1e-12)

    def test_dark_and_saturated(self):
        assert mu_light(0.0, P) == 0.0
        assert mu_light(1e6, P) == pytest.approx(1.8144, rel=1e-9)

    def test_maintenance_limits(self):
        assert maintenance(0.0, P) == 0.0173
        assert maintenance(1e9, P) == pytest.approx(0.0346, rel=1e-12)
        assert maintenance(P.I_km, P) == pytest.approx(0.02595, abs=1e-15)


class TestCardinal:
    def test_optimum_and_roots(self):
        assert cardinal_factor(30.0, 12.0, 30.0, 46.0) == 1.0
        assert cardinal_factor(12.0, 12.0, 30.0, 46.0) == 0.0
        assert cardinal_factor(46.0, 12.0, 30.0, 46.0) == 0.0
        assert cardinal_factor(5.0, 12.0, 30.0, 46.0) == 0.0

    def test_interior_value_by_exact_arithmetic(self):
        v, lo, opt, hi = (Fraction(x) for x in (21, 12, 30, 46))
        num = (v - hi) * (v - lo) ** 2
        den = (opt - lo) * ((opt - lo) * (v - opt) - (opt - hi) * (opt + lo - 2 * v))
        expected = num / den
        assert expected == Fraction(25, 36)
        assert cardinal_factor(21.0, 12.0, 30.0, 46.0) == pytest.approx(float(expected), abs=1e-15)

    def test_unimodal(self):
        v = np.linspace(12.0, 46.0, 2001)
        f = np.array([cardinal_factor(x, 12.0, 30.0, 46.0) for x in v])
        peak = int(np.argmax(f))
        assert v[peak] == pytest.approx(30.0, abs=0.02)
        assert np.all(np.diff(f[:peak + 1]) >= 0)
        assert np.all(np.diff(f[peak:]) <= 0)

    def test_bad_ordering(self):
        with pytest.raises(ValueError):
            cardinal_factor(20.0, 30.0, 12.0, 46.0)


class TestOxygenInhibition:
    def test_values(self):
        assert mu_do(0.0, P) == 1.0
        assert mu_do(500.0, P) == 0.0
        assert mu_do(250.0, P) == 0.75
        assert mu_do(800.0, P) == 0.0


class TestGrowth:
    def test_all_factors_at_one(self):
        assert growth_rate(st(), 8.0, 1e9, P) == pytest.approx(1.7798, abs=1e-9)

    def test_dark_respiration(self):
        assert growth_rate(st(), 8.0, 0.0, P) == -0.0173

    def test_at_minimum_temperature(self):
        for Iav in (0.0, 50.0, 600.0):
            assert growth_rate(st(T=12.0), 8.0, Iav, P) == -maintenance(Iav, P)


class TestEvaporation:
    def test_no_deficit(self):
        assert evaporation_rate(22.0, 22.0, 100.0, 3.0, 250.0, P) == 0.0

    def test_no_transfer(self):
        assert evaporation_rate(25.0, 20.0, 50.0, 0.0, 0.0, P) == 0.0

    def test_golden(self, golden):
        ref = golden("evaporation.json")
        args = ref["inputs"]
        got = evaporation_rate(args["T"], args["T_amb"], args["RH"], args["WS"], args["Q_air"], P)
        assert got > 0
        assert got == pytest.approx(ref["g_s"], rel=1e-12)

    def test_golden_matches_hand_evaluation(self, golden):
        # Tetens over water, linear latent heat, K_l = 0.04 WS + 4e-5 Q_air
        e_w = 610.78 * math.exp(17.27 * 25.0 / (25.0 + 237.3))
        e_a = 0.5 * 610.78 * math.exp(17.27 * 20.0 / (20.0 + 237.3))
        k_l = 0.04 * 2.0 + 4e-5 * 250.0
        expected = k_l * 80.0 * (e_w - e_a) / ((2.501e6 - 2361.0 * 25.0) * 1000.0)
        assert golden("evaporation.json")["g_s"] == pytest.approx(expected, rel=1e-14)


class TestLevelAndBiomass:
    def test_level(self):
        s = st()
        assert level_rhs(s, ControlInput(Q_d=30.0, Q_h=30.0), 0.0, P) == 0.0
        assert level_rhs(s, ControlInput(Q_d=75.0), 0.0, P) == pytest.approx(1.5625e-5, rel=1e-12)
        assert level_rhs(s, ControlInput(Q_h=75.0), 0.0, P) == pytest.approx(-1.5625e-5, rel=1e-12)

    def test_biomass(self):
        assert biomass_rhs(st(), ControlInput(), 0.0, 0.0, P) == 0.0
        assert biomass_rhs(st(), ControlInput(), 1.7798, 0.0, P) == pytest.approx(2.0599e-5, rel=1e-4)
        assert biomass_rhs(st(), ControlInput(), 1.7798, 0.0, P) == 1.7798 / 86400

    def test_total_biomass_identity(self):
        s, u, mu, g_s = st(X=0.8, h=0.13), ControlInput(Q_d=40.0, Q_h=25.0), 0.9, 2e-5
        V = P.A * s.h
        dV = P.A * level_rhs(s, u, g_s, P)
        dXV = biomass_rhs(s, u, mu, g_s, P) * V + s.X * dV
        assert dXV == pytest.approx(s.X * V * mu / 86400 - u.Q_h / 60000 * s.X, rel=1e-12)


class TestThermal:
    def test_equilibrium(self):
        # sky temperature equals the water temperature when the offset is zero
        calm = Disturbance(I0=0.0, T_amb=20.0, T_soil=20.0, WS=2.0, RH=50.0)
        assert heat_exchange(st(T=20.0), calm, 0.0, ModelParams(sky_offset=0.0)) == 0.0

    def test_solar_term(self):
        s = st(T=20.0)
        d = Disturbance(I0=1000.0, T_amb=20.0, T_soil=20.0, WS=0.0, RH=50.0)
        assert heat_exchange(s, d, 0.0, ModelParams(sky_offset=0.0)) == pytest.approx(72000.0, rel=1e-12)

    def test_evaporation_cools(self):
        s = st(T=20.0)
        d = Disturbance(I0=0.0, T_amb=20.0, T_soil=20.0, WS=0.0, RH=50.0)
        m = ModelParams(sky_offset=0.0)
        assert heat_exchange(s, d, 1e-5, m) - heat_exchange(s, d, 0.0, m) == pytest.approx(
            -1000.0 * latent_heat(20.0) * 1e-5, rel=1e-12)

    def test_temperature_rhs(self):
        assert temperature_rhs(st(T=10.0), ControlInput(Q_d=50.0), 0.0, P) == 0.0
        assert temperature_rhs(st(T=20.0), ControlInput(Q_d=50.0), 0.0, P) < 0.0
        assert temperature_rhs(st(h=0.1), ControlInput(), 72000.0, P) == pytest.approx(2.1511e-3, rel=1e-4)


def test_parameter_ordering_rejected():
    with pytest.raises(ConfigError):
        ModelParams(T_opt=50.0)
