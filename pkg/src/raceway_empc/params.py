"""Parameter sets and the flat TOML configuration format.

Every parameter group is a plain dataclass whose defaults are the values the
toolkit ships with. A config file holds one TOML table per group::

    [model]
    mu_max = 1.8144   # [1/day]

Unknown keys are rejected so typos do not silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

SECONDS_PER_DAY = 86400.0
LPM_TO_M3S = 1.0 / 60000.0  # L/min -> m3/s


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration."""


def _meta(unit: str, doc: str = "") -> dict:
    return {"unit": unit, "doc": doc}


@dataclass(frozen=True)
class ModelParams:
    """Biological, level and thermal model parameters.

    The first block mirrors the calibrated raceway values; the second block
    holds the evaporation and environmental-heat surrogate coefficients.
    """

    A: float = field(default=80.0, metadata=_meta("m2", "reactor surface"))
    mu_max: float = field(default=1.8144, metadata=_meta("1/day"))
    m_min: float = field(default=0.0173, metadata=_meta("1/day"))
    m_max: float = field(default=0.0173, metadata=_meta("1/day"))
    T_min: float = field(default=12.0, metadata=_meta("degC"))
    T_max: float = field(default=46.0, metadata=_meta("degC"))
    T_opt: float = field(default=30.0, metadata=_meta("degC"))
    T_d: float = field(default=10.0, metadata=_meta("degC", "dilution water"))
    C_p: float = field(default=4184.0, metadata=_meta("J/(kg K)"))
    rho: float = field(default=1000.0, metadata=_meta("kg/m3"))
    K_a: float = field(default=0.1, metadata=_meta("m2/g"))
    I_k: float = field(default=120.0, metadata=_meta("uE/(m2 s)"))
    n: float = field(default=3.0, metadata=_meta("-"))
    n_m: float = field(default=4.0, metadata=_meta("-"))
    pH_min: float = field(default=4.0, metadata=_meta("-"))
    pH_max: float = field(default=12.0, metadata=_meta("-"))
    pH_opt: float = field(default=8.0, metadata=_meta("-"))
    DO2_max: float = field(default=500.0, metadata=_meta("%"))
    m_DO2: float = field(default=2.0, metadata=_meta("-"))
    I_km: float = field(default=120.0, metadata=_meta("uE/(m2 s)", "maintenance half-saturation"))
    # evaporation transfer coefficient K_l = kl_0 + kl_ws*WS + kl_air*Q_air
    kl_0: float = field(default=0.0, metadata=_meta("m/s"))
    kl_ws: float = field(default=0.04, metadata=_meta("(m/s)/(m/s)"))
    kl_air: float = field(default=4e-5, metadata=_meta("(m/s)/(L/min)"))
    # environmental heat exchange surrogate
    eta_sol: float = field(default=0.9, metadata=_meta("-", "absorbed solar fraction"))
    h_conv_0: float = field(default=5.7, metadata=_meta("W/(m2 K)"))
    h_conv_ws: float = field(default=3.8, metadata=_meta("W/(m2 K)/(m/s)"))
    h_cond: float = field(default=2.0, metadata=_meta("W/(m2 K)", "soil conduction"))
    emissivity: float = field(default=0.97, metadata=_meta("-"))
    sky_offset: float = field(default=-10.0, metadata=_meta("K", "T_sky - T_amb"))

    def __post_init__(self):
        if not self.T_min < self.T_opt < self.T_max:
            raise ConfigError("model: need T_min < T_opt < T_max")
        if not self.pH_min < self.pH_opt < self.pH_max:
            raise ConfigError("model: need pH_min < pH_opt < pH_max")
        for name in ("A", "mu_max", "C_p", "rho", "K_a", "I_k", "n", "n_m",
                     "DO2_max", "m_DO2", "I_km"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"model: {name} must be positive")
        if self.m_min < 0 or self.m_max < 0:
            raise ConfigError("model: maintenance terms must be non-negative")


@dataclass(frozen=True)
class GasParams:
    """Oxygen and carbonate balance coefficients.

    Transfer coefficients are affine in wind speed and air flow. Equilibrium
    constants are in mol/L at 25 degC.
    """

    kla_o2_0: float = field(default=3.0e-4, metadata=_meta("1/s", "passive O2 transfer"))
    kla_o2_ws: float = field(default=1.0e-4, metadata=_meta("1/s per m/s"))
    kla_o2_air: float = field(default=6.0e-6, metadata=_meta("1/s per L/min"))
    kla_co2_0: float = field(default=2.7e-4, metadata=_meta("1/s"))
    kla_co2_ws: float = field(default=0.9e-4, metadata=_meta("1/s per m/s"))
    kla_co2_air: float = field(default=2.0e-6, metadata=_meta("1/s per L/min"))
    y_o2: float = field(default=12000.0, metadata=_meta("% per g/L", "DO yield of gross growth"))
    y_c: float = field(default=0.041, metadata=_meta("mol C/g", "carbon uptake per biomass"))
    eta_inj: float = field(default=0.8, metadata=_meta("-", "CO2 injection efficiency"))
    do_sat: float = field(default=100.0, metadata=_meta("%", "air-saturation reference"))
    do_d: float = field(default=80.0, metadata=_meta("%", "dilution water DO"))
    tic_d: float = field(default=5.1, metadata=_meta("mol/m3", "dilution water TIC"))
    alk: float = field(default=5.0, metadata=_meta("mol/m3", "alkalinity"))
    co2_atm_eq: float = field(default=0.0143, metadata=_meta("mol/m3", "CO2 in equilibrium with air"))
    K1: float = field(default=10 ** -6.35, metadata=_meta("mol/L"))
    K2: float = field(default=10 ** -10.33, metadata=_meta("mol/L"))
    Kw: float = field(default=1.0e-14, metadata=_meta("(mol/L)^2"))

    def __post_init__(self):
        for name in ("kla_o2_0", "kla_o2_ws", "kla_o2_air", "kla_co2_0",
                     "kla_co2_ws", "kla_co2_air", "y_o2", "y_c"):
            if getattr(self, name) < 0:
                raise ConfigError(f"gas: {name} must be non-negative")
        if not 0 < self.eta_inj <= 1:
            raise ConfigError("gas: eta_inj must lie in (0, 1]")
        if not self.K1 > self.K2 > 0:
            raise ConfigError("gas: need K1 > K2 > 0")
        if not self.alk > 0:
            raise ConfigError("gas: alkalinity must be positive")


@dataclass(frozen=True)
class CostParams:
    price_biomass: float = field(default=9.7, metadata=_meta("EUR/kg", "net selling price"))
    c_power: float = field(default=0.086, metadata=_meta("EUR/kWh"))
    p_blower: float = field(default=0.0178, metadata=_meta("kWh/m3"))
    p_wheel: float = field(default=0.1737, metadata=_meta("kWh/m3"))
    v_l: float = field(default=0.2, metadata=_meta("m/s"))
    c_nut: float = field(default=0.3125, metadata=_meta("EUR/m3"))
    c_co2: float = field(default=0.44, metadata=_meta("EUR/m3"))

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"cost: {f.name} must be non-negative")


@dataclass(frozen=True)
class EmpcConfig:
    ts: float = field(default=300.0, metadata=_meta("s", "controller period"))
    np: int = field(default=24, metadata=_meta("samples", "prediction horizon"))
    nc: int = field(default=6, metadata=_meta("samples", "control moves"))
    w_sh: float = field(default=1e4, metadata=_meta("EUR/cm2", "level slack weight"))
    w_sxb: float = field(default=1e11, metadata=_meta("EUR/(g/L)2", "terminal biomass slack weight"))
    s_h_min: float = field(default=-1.0, metadata=_meta("cm"))
    s_xb_min: float = field(default=-0.3, metadata=_meta("g/L"))
    activation_threshold: float = field(default=100.0, metadata=_meta("W/m2"))
    h_min: float = field(default=0.10, metadata=_meta("m"))
    ph_assumed: float = field(default=8.0, metadata=_meta("-", "pH held by the regulatory loop"))
    initial_flow: float = field(default=5.0, metadata=_meta("L/min", "default initial guess"))
    predict_substep: float = field(default=60.0, metadata=_meta("s", "RK4 step inside predictions"))
    solver_max_iters: int = field(default=200, metadata=_meta("-"))
    solver_tol: float = field(default=1e-3, metadata=_meta("EUR", "projected-gradient tolerance"))

    def __post_init__(self):
        if not 1 <= self.nc <= self.np:
            raise ConfigError("empc: need 1 <= nc <= np")
        if not (self.ts > 0 and self.activation_threshold > 0 and self.h_min > 0):
            raise ConfigError("empc: ts, activation_threshold and h_min must be positive")
        if self.s_h_min > 0 or self.s_xb_min > 0:
            raise ConfigError("empc: slack floors must be non-positive")
        if self.ts % self.predict_substep:
            raise ConfigError("empc: predict_substep must divide ts")


@dataclass(frozen=True)
class PiConfig:
    k: float = field(default=-0.55, metadata=_meta("min/L", "process gain"))
    tau: float = field(default=1250.0, metadata=_meta("s"))
    delay: float = field(default=300.0, metadata=_meta("s"))
    tau_c: float = field(default=300.0, metadata=_meta("s", "closed-loop time constant"))
    kp: float | None = field(default=-7.5, metadata=_meta("L/min", "overrides the tuned gain when set"))
    setpoint: float = field(default=8.0, metadata=_meta("-"))
    u_min: float = field(default=0.0, metadata=_meta("L/min"))
    u_max: float = field(default=15.0, metadata=_meta("L/min"))
    tt_initial: float = field(default=1.0, metadata=_meta("s", "tracking constant before setpoint"))
    tt_after: float | None = field(default=None, metadata=_meta("s", "tracking constant after; None = Ti"))


@dataclass(frozen=True)
class BenchmarkConfig:
    dilution_rate: float = field(default=0.3, metadata=_meta("1/day"))
    q_h: float = field(default=75.0, metadata=_meta("L/min"))
    q_d: float = field(default=75.0, metadata=_meta("L/min"))
    level_threshold: float = field(default=0.10, metadata=_meta("m"))
    level_hysteresis: float = field(default=0.005, metadata=_meta("m"))
    q_air: float = field(default=250.0, metadata=_meta("L/min"))
    q_co2: float = field(default=5.0, metadata=_meta("L/min"))
    ph_band: float = field(default=0.2, metadata=_meta("-", "on/off band centred on the setpoint"))
    ph_setpoint: float = field(default=8.0, metadata=_meta("-"))
    harvest_start_hour: float = field(default=9.0, metadata=_meta("h", "local time"))

    def __post_init__(self):
        if not 0.1 <= self.dilution_rate <= 0.3:
            raise ConfigError("benchmark: dilution_rate must lie in [0.1, 0.3]")
        if not (0 <= self.q_h <= 75 and 0 <= self.q_d <= 75 and 0 <= self.q_air <= 500
                and 0 <= self.q_co2 <= 15):
            raise ConfigError("benchmark: flows outside actuator bounds")


@dataclass(frozen=True)
class SimConfig:
    substep: float = field(default=30.0, metadata=_meta("s", "plant RK4 step"))
    sensor_delay: float = field(default=300.0, metadata=_meta("s", "pH measurement dead time"))


@dataclass(frozen=True)
class Config:
    model: ModelParams = field(default_factory=ModelParams)
    gas: GasParams = field(default_factory=GasParams)
    cost: CostParams = field(default_factory=CostParams)
    empc: EmpcConfig = field(default_factory=EmpcConfig)
    pi: PiConfig = field(default_factory=PiConfig)
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def replace(self, **groups: dict) -> "Config":
        """Return a copy with some fields of some groups overridden."""
        updated = {}
        for name, overrides in groups.items():
            updated[name] = dataclasses.replace(getattr(self, name), **overrides)
        return dataclasses.replace(self, **updated)


GROUPS = tuple(f.name for f in fields(Config))


def config_from_dict(data: dict[str, Any]) -> Config:
    groups = {}
    for name, section in data.items():
        if name not in GROUPS:
            continue
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        cls = type(getattr(Config(), name))
        known = {f.name for f in fields(cls)}
        unknown = set(section) - known
        if unknown:
            raise ConfigError(f"[{name}] unknown keys: {', '.join(sorted(unknown))}")
        groups[name] = section
    try:
        return Config().replace(**groups)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_toml(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path: str | Path) -> Config:
    return config_from_dict(load_toml(path))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return f'"{value}"'
    return str(value)


def dump_config(config: Config | None = None) -> str:
    """Render a config as commented TOML. ``None`` values are omitted."""
    config = config or Config()
    lines = []
    for group in GROUPS:
        obj = getattr(config, group)
        lines.append(f"[{group}]")
        for f in fields(obj):
            value = getattr(obj, f.name)
            unit = f.metadata.get("unit", "")
            doc = f.metadata.get("doc", "")
            comment = f"[{unit}]" + (f" {doc}" if doc else "")
            if value is None:
                lines.append(f"# {f.name} =   # {comment}")
            else:
                lines.append(f"{f.name} = {_fmt(value)}   # {comment}")
        lines.append("")
    return "\n".join(lines)
