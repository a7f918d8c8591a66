"""Economic MPC and rule-based operation of a simulated microalgae raceway."""
from .model import ControlInput, Disturbance, ReactorState
from .params import Config, load_config
from .sim import Scenario, Trajectory, run_scenario
from .weather import DisturbanceSeries, read_weather_csv, synthetic_weather

__version__ = "0.1.0"

__all__ = ["ControlInput", "Disturbance", "ReactorState", "Config", "load_config", "Scenario",
           "Trajectory", "run_scenario", "DisturbanceSeries", "read_weather_csv",
           "synthetic_weather", "__version__"]
