import numpy as np
import pandas as pd
import pytest

from raceway_empc.chemistry import tic_for_ph
from raceway_empc.model import ControlInput, Disturbance, ReactorState
from raceway_empc.params import Config


@pytest.fixture
def config():
    return Config()


@pytest.fixture
def state(config):
    return ReactorState(X=1.0, h=0.12, T=25.0, DO=150.0,
                        TIC=tic_for_ph(8.0, config.gas.alk, config.gas))


@pytest.fixture
def noon():
    return Disturbance(I0=900.0, T_amb=24.0, T_soil=21.0, WS=3.0, RH=45.0)


@pytest.fixture
def flows():
    return ControlInput(Q_air=200.0, Q_co2=3.0, Q_d=20.0, Q_h=10.0)


def flat_series(start="2024-04-01", hours=2, step=60.0, values=(0.0, 20.0, 20.0, 0.0, 100.0)):
    """Constant-weather series, handy for equilibrium checks."""
    from raceway_empc.weather import DisturbanceSeries
    n = int(hours * 3600 / step) + 1
    return DisturbanceSeries(pd.Timestamp(start), step, np.tile(np.asarray(values, float), (n, 1)))


@pytest.fixture
def golden():
    import json
    from pathlib import Path

    root = Path(__file__).parent / "golden"

    def load(name):
        return json.loads((root / name).read_text())
    return load


def pytest_terminal_summary(terminalreporter):
    from scenario_suite import REPORT
    if not REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(REPORT):
        terminalreporter.write_line(REPORT[number])
