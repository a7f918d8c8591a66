import dataclasses

import numpy as np
import pytest

from raceway_empc import kernels
from raceway_empc.kernels import PARAM_NAMES, available_backends, load_backend, pack_params
from raceway_empc.model import ControlInput, Disturbance, ReactorState
from raceway_empc.params import Config
from raceway_empc.sim import combined_rhs

CFG = Config()
P = pack_params(CFG.model, CFG.gas, CFG.cost)
BACKENDS = available_backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")


def random_points(rng, n):
    s = np.column_stack([rng.uniform(0.05, 3.0, n), rng.uniform(0.05, 0.25, n),
                         rng.uniform(5.0, 40.0, n), rng.uniform(0.0, 400.0, n),
                         rng.uniform(1.0, 40.0, n)])
    u = np.column_stack([rng.uniform(0, 500, n), rng.uniform(0, 15, n),
                         rng.uniform(0, 75, n), rng.uniform(0, 75, n)])
    d = np.column_stack([rng.uniform(0, 1200, n), rng.uniform(0, 35, n), rng.uniform(5, 30, n),
                         rng.uniform(0, 10, n), rng.uniform(5, 100, n)])
    return s, u, d


def test_layout_covers_every_parameter():
    assert len(set(PARAM_NAMES)) == len(PARAM_NAMES) == kernels.N_PARAMS
    for group in (CFG.model, CFG.gas, CFG.cost):
        for f in dataclasses.fields(group):
            if f.name in kernels.IDX:
                assert P[kernels.IDX[f.name]] == float(getattr(group, f.name))
    assert P[kernels.IDX["ph_assumed"]] == 8.0


def test_python_backend_always_loads():
    assert "python" in BACKENDS
    assert load_backend("python").NAME == "python"
    with pytest.raises(ValueError):
        load_backend("fortran")


@pytest.mark.parametrize("name", BACKENDS)
def test_rhs_matches_reference_functions(name):
    be = load_backend(name)
    rng = np.random.default_rng(3)
    s, u, d = random_points(rng, 200)
    for i in range(len(s)):
        ref = combined_rhs(ReactorState.from_array(s[i]), ControlInput.from_array(u[i]),
                           Disturbance.from_array(d[i]), CFG.model, CFG.gas)
        np.testing.assert_allclose(be.plant_rhs(s[i], u[i], d[i], P), ref, rtol=1e-9, atol=1e-18)


@needs_both
def test_backends_agree_on_plant():
    c, py = load_backend("cython"), load_backend("python")
    rng = np.random.default_rng(11)
    s, u, d = random_points(rng, 300)
    for i in range(len(s)):
        np.testing.assert_allclose(c.plant_rhs(s[i], u[i], d[i], P), py.plant_rhs(s[i], u[i], d[i], P),
                                   rtol=1e-12, atol=1e-20)
        np.testing.assert_allclose(c.plant_outputs(s[i], u[i], d[i], P),
                                   py.plant_outputs(s[i], u[i], d[i], P), rtol=1e-12, atol=1e-20)
        np.testing.assert_allclose(c.plant_step(s[i], u[i], d[i], d[i], d[i], 30.0, P),
                                   py.plant_step(s[i], u[i], d[i], d[i], d[i], 30.0, P),
                                   rtol=1e-12, atol=1e-15)
        assert c.speciate(s[i, 4], P) == pytest.approx(py.speciate(s[i, 4], P), rel=1e-12)


def _prediction_inputs(rng, N=24, nc=6):
    x0 = np.array([0.8, 0.12, 24.0, 140.0])
    moves = np.column_stack([rng.uniform(0, 500, nc), rng.uniform(0, 75, nc), rng.uniform(0, 75, nc)])
    dist = np.column_stack([np.linspace(900, 200, N), np.full(N, 22.0), np.full(N, 19.0),
                            np.full(N, 3.0), np.full(N, 50.0)])
    return x0, moves, dist


@needs_both
def test_backends_agree_on_prediction():
    c, py = load_backend("cython"), load_backend("python")
    x0, moves, dist = _prediction_inputs(np.random.default_rng(5))
    a = c.predict(x0, moves, 4, 24, dist, P, 60.0, 5)
    b = py.predict(x0, moves, 4, 24, dist, P, 60.0, 5)
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, rtol=1e-11)
    a = c.predict_jac(x0, moves, 4, 24, dist, P, 60.0, 5, 1e-6)
    b = py.predict_jac(x0, moves, 4, 24, dist, P, 60.0, 5, 1e-6)
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("name", BACKENDS)
def test_jacobian_column_order(name):
    be = load_backend(name)
    x0, moves, dist = _prediction_inputs(np.random.default_rng(8))
    nc, step = moves.shape[0], 1e-6
    econ, h, X, g, jh, jx = be.predict_jac(x0, moves, 4, 24, dist, P, 60.0, 5, step)
    for col, k in ((0, 2), (1, 0), (2, 5)):
        pert = moves.copy()
        dv = step * max(1.0, abs(pert[k, col]))
        pert[k, col] += dv
        e2, h2, X2 = be.predict(x0, pert, 4, 24, dist, P, 60.0, 5)
        j = col * nc + k
        assert g[j] == pytest.approx((e2 - econ) / dv, rel=1e-6, abs=1e-12)
        np.testing.assert_allclose(jh[:, j], (h2 - h) / dv, rtol=1e-6, atol=1e-12)
        np.testing.assert_allclose(jx[:, j], (X2 - X) / dv, rtol=1e-6, atol=1e-12)


def test_state_floors():
    be = kernels.backend
    s = np.array([1e-6, 1.5e-3, 20.0, 0.1, 0.01])
    out = be.plant_step(s, [0, 0, 0, 75.0], [0, 20, 20, 0, 50], [0, 20, 20, 0, 50],
                        [0, 20, 20, 0, 50], 30.0, P)
    assert out[1] >= 1e-3 and out[0] >= 0 and out[3] >= 0 and out[4] >= 0
