"""Weather/disturbance series: CSV ingestion, resampling and synthetic days."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

COLUMNS = ("I0", "T_amb", "T_soil", "WS", "RH")
HEADER = ("timestamp",) + COLUMNS


class WeatherError(ValueError):
    pass


@dataclass(frozen=True)
class DisturbanceSeries:
    """Uniformly sampled disturbances, linearly interpolated between samples.

    Times are seconds relative to ``start``.
    """

    start: pd.Timestamp
    step: float
    values: np.ndarray  # (n, 5)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != len(COLUMNS) or len(vals) < 2:
            raise WeatherError("disturbance series needs at least two rows of five channels")
        if not np.all(np.isfinite(vals)):
            raise WeatherError("disturbance series contains non-finite values")
        if self.step <= 0:
            raise WeatherError("sample step must be positive")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "start", pd.Timestamp(self.start))

    def __len__(self):
        return len(self.values)

    @property
    def duration(self) -> float:
        return (len(self.values) - 1) * self.step

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.step

    def offset(self, when) -> float:
        """Seconds from ``start`` to a timestamp."""
        return (pd.Timestamp(when) - self.start).total_seconds()

    def timestamp(self, t: float) -> pd.Timestamp:
        return self.start + pd.Timedelta(seconds=float(t))

    def covers(self, t0: float, t1: float) -> bool:
        eps = 1e-6
        return t0 >= -eps and t1 <= self.duration + eps

    def sample(self, t) -> np.ndarray:
        """Interpolated rows at times ``t`` (seconds); shape (len(t), 5)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.size and (t.min() < -1e-6 or t.max() > self.duration + 1e-6):
            raise WeatherError(
                f"requested {self.timestamp(t.min())} .. {self.timestamp(t.max())} outside series "
                f"{self.start} .. {self.timestamp(self.duration)}")
        pos = np.clip(t / self.step, 0.0, len(self.values) - 1)
        i0 = np.minimum(np.floor(pos).astype(int), len(self.values) - 2)
        w = (pos - i0)[:, None]
        return self.values[i0] * (1.0 - w) + self.values[i0 + 1] * w

    def at(self, t: float) -> np.ndarray:
        return self.sample([t])[0]

    def to_frame(self) -> pd.DataFrame:
        index = self.start + pd.to_timedelta(self.times, unit="s")
        return pd.DataFrame(self.values, index=pd.DatetimeIndex(index, name="timestamp"),
                            columns=list(COLUMNS))

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "DisturbanceSeries":
        if len(df) < 2:
            raise WeatherError("need at least two samples")
        idx = pd.DatetimeIndex(df.index)
        deltas = np.diff(idx.asi8) / 1e9
        if np.any(deltas <= 0):
            raise WeatherError("timestamps must be strictly increasing")
        if not np.allclose(deltas, deltas[0]):
            raise WeatherError("timestamps must be uniformly spaced")
        return cls(idx[0], float(deltas[0]), df[list(COLUMNS)].to_numpy(dtype=float))

    def downsample(self, step: float) -> "DisturbanceSeries":
        """Point samples every ``step`` seconds (e.g. an hourly forecast)."""
        n = int(math.floor(self.duration / step + 1e-9)) + 1
        return DisturbanceSeries(self.start, step, self.sample(np.arange(n) * step))


def resample_median(raw: pd.DataFrame, rule: str = "1min") -> pd.DataFrame:
    """Per-minute median of each channel; empty minutes repeat the previous value."""
    if raw is None or len(raw) == 0:
        raise WeatherError("cannot resample an empty series")
    if not isinstance(raw.index, pd.DatetimeIndex):
        raise WeatherError("raw series must be indexed by timestamp")
    if not raw.index.is_monotonic_increasing:
        raise WeatherError("raw timestamps must be sorted")
    return raw.resample(rule).median().ffill()


def read_weather_csv(path: str | Path) -> DisturbanceSeries:
    """Read ``timestamp,I0,T_amb,T_soil,WS,RH`` rows.

    Sub-minute data are median-resampled to one minute. Lines starting with
    ``#`` are comments.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"weather file not found: {path}")
    df = pd.read_csv(path, comment="#")
    missing = [c for c in HEADER if c not in df.columns]
    if missing:
        raise WeatherError(f"{path}: missing columns {', '.join(missing)}")
    df["timestamp"] = pd.to_datetime(df["timestamp"])
    df = df.set_index("timestamp")[list(COLUMNS)].astype(float)
    if len(df) > 1:
        spacing = np.median(np.diff(df.index.asi8)) / 1e9
        if spacing < 60.0:
            df = resample_median(df)
    return DisturbanceSeries.from_frame(df)


def write_weather_csv(series: DisturbanceSeries, path: str | Path) -> None:
    df = series.to_frame()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# cadence: {series.step:g} s\n")
        df.to_csv(fh, date_format="%Y-%m-%dT%H:%M:%S", float_format="%.6g", lineterminator="\r\n")
    tmp.replace(path)


# Synthetic day kinds: peak irradiance [W/m2], cloud depth [-], mean and amplitude of the
# ambient temperature [degC], sunrise and sunset [h]. "high" resembles a clear spring day,
# "low" a clear autumn day, "cloudy" a spring day with passing clouds.
DAY_KINDS = {
    "high": (850.0, 0.0, 20.0, 6.0, 7.0, 20.0),
    "low": (560.0, 0.0, 21.0, 4.0, 7.5, 18.5),
    "cloudy": (900.0, 0.5, 19.0, 4.0, 7.0, 20.0),
}


def synthetic_weather(start: str | pd.Timestamp, kinds: list[str], *, seed: int = 0,
                      step: float = 60.0) -> DisturbanceSeries:
    """Deterministic synthetic disturbances, one entry of ``kinds`` per day.

    ``cloudy`` days modulate the clear-sky irradiance with smooth seeded noise.
    """
    start = pd.Timestamp(start).normalize()
    rng = np.random.default_rng(seed)
    n_day = int(round(86400 / step))
    hours = np.arange(n_day) * step / 3600.0
    rows = []
    for kind in kinds:
        if kind not in DAY_KINDS:
            raise WeatherError(f"unknown day kind {kind!r}; choose from {sorted(DAY_KINDS)}")
        peak, cloud, t_mean, t_amp, sunrise, sunset = DAY_KINDS[kind]
        phase = np.clip((hours - sunrise) / (sunset - sunrise), 0.0, 1.0)
        I0 = peak * np.sin(np.pi * phase) ** 1.2
        if cloud > 0:
            knots = rng.uniform(0.0, 1.0, size=25)
            I0 = I0 * (1.0 - cloud * np.interp(hours, np.arange(25), knots))
        diurnal = np.sin(2 * np.pi * (hours - 9.0) / 24.0)
        T_amb = t_mean + t_amp * diurnal
        T_soil = t_mean + 2.0 + 0.5 * t_amp * np.sin(2 * np.pi * (hours - 11.0) / 24.0)
        WS = 2.0 + 1.5 * np.clip(diurnal, 0, None)
        RH = np.clip(60.0 - 20.0 * diurnal, 5.0, 100.0)
        rows.append(np.column_stack([I0, T_amb, T_soil, WS, RH]))
    values = np.vstack(rows)
    # close the last day so the series covers its full 24 h
    values = np.vstack([values, values[-1]])
    return DisturbanceSeries(start, step, values)
