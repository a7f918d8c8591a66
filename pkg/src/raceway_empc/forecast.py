"""Disturbance forecasts on the controller grid.

Every provider returns exactly ``horizon`` rows ``[I0, T_amb, T_soil, WS, RH]``
sampled at ``t, t + ts, ..., t + (horizon - 1) ts``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .weather import DisturbanceSeries

DAY = pd.Timedelta(days=1)
MODES = ("perfect", "previous_day", "hourly", "hold")


class ForecastError(ValueError):
    pass


def _grid(series: DisturbanceSeries, t, horizon: int, ts: float) -> np.ndarray:
    if horizon < 1:
        raise ForecastError("horizon must be at least 1")
    t0 = series.offset(t)
    times = t0 + np.arange(horizon) * ts
    if not series.covers(times[0], times[-1]):
        raise ForecastError(
            f"forecast {pd.Timestamp(t)} + {horizon} x {ts:g} s outside "
            f"{series.start} .. {series.timestamp(series.duration)}")
    return series.sample(times)


def perfect(series: DisturbanceSeries, t, horizon: int, ts: float = 300.0) -> np.ndarray:
    """The true future disturbances."""
    return _grid(series, t, horizon, ts)


def previous_day(series: DisturbanceSeries, t, horizon: int, ts: float = 300.0) -> np.ndarray:
    """What happened 24 h earlier over the same clock times."""
    earlier = pd.Timestamp(t) - DAY
    if series.offset(earlier) < -1e-6:
        raise ForecastError(f"no previous day available at {pd.Timestamp(t)}")
    return _grid(series, earlier, horizon, ts)


def hourly_interpolated(hourly: DisturbanceSeries, t, horizon: int, ts: float = 300.0) -> np.ndarray:
    """Linear interpolation of a coarse (typically hourly) forecast series."""
    try:
        return _grid(hourly, t, horizon, ts)
    except ForecastError as exc:
        raise ForecastError(f"hourly samples do not bracket the horizon: {exc}") from None


def hold_current(series: DisturbanceSeries, t, horizon: int, ts: float = 300.0) -> np.ndarray:
    """Persistence of the current measurement."""
    return np.repeat(_grid(series, t, 1, ts), horizon, axis=0)


@dataclass(frozen=True)
class ForecastProvider:
    """A forecast mode bound to its backing series."""

    mode: str
    series: DisturbanceSeries

    def __post_init__(self):
        if self.mode not in MODES:
            raise ForecastError(f"unknown forecast mode {self.mode!r}; choose from {', '.join(MODES)}")

    def __call__(self, t, horizon: int, ts: float = 300.0) -> np.ndarray:
        fn = {"perfect": perfect, "previous_day": previous_day,
              "hourly": hourly_interpolated, "hold": hold_current}[self.mode]
        out = fn(self.series, t, horizon, ts)
        if not np.all(np.isfinite(out)):
            raise ForecastError("forecast contains non-finite values")
        return out

    def max_steps(self, t, ts: float = 300.0) -> int:
        """Longest horizon this provider can serve from ``t``."""
        if self.mode == "hold":
            return 1 << 30
        base = pd.Timestamp(t) - (DAY if self.mode == "previous_day" else pd.Timedelta(0))
        remaining = self.series.duration - self.series.offset(base)
        return max(0, int(np.floor(remaining / ts + 1e-9)) + 1)
