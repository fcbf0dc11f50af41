"""Sea-level and wind scenarios, plus perturbed forecasts of them.

A scenario is a pair of aligned 10-minute time series (sea level, wind
speed) with a start date and an initial fjord level.  Three synthetic 3-day
profiles are provided: ``normal`` tides, a ``low`` period where the sea
stays below the fjord's lower threshold for more than a day, and a ``high``
period where it stays above the upper threshold for more than a day.

A forecast is the same data seen through bounded uniform sensor noise;
evaluation always consumes the unperturbed scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .util import rng_for

#: Control/sensor period of the plant, minutes.
STEP_MINUTES = 10.0

#: Episode horizon: three days of 10-minute periods.
HORIZON_STEPS = 432
HORIZON_MINUTES = HORIZON_STEPS * STEP_MINUTES

SEA_NOISE_HALF_WIDTH = 0.005   # m, forecast uncertainty for the sea level
WIND_NOISE_HALF_WIDTH = 0.5    # m/s, forecast uncertainty for the wind

SCENARIO_KINDS = ("normal", "low", "high")

#: Start dates for the synthetic profiles (tidal month differs per profile).
_KIND_START = {
    "normal": datetime(2018, 11, 5),
    "low": datetime(2018, 3, 5),
    "high": datetime(2018, 2, 5),
}

TIDE_PERIOD_MINUTES = 750.0   # a little over twelve hours per tide cycle
TIDE_AMPLITUDE = 0.5          # m


class ScenarioFormatError(ValueError):
    """A scenario file failed validation; the message names the offending line."""


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled series, piecewise-constant over left-closed intervals."""

    start: datetime
    step: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.step <= 0:
            raise ValueError("step must be positive")
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must all be finite")

    @property
    def span(self) -> float:
        """Minutes from the first to the last sample."""
        return (len(self.values) - 1) * self.step


def sample_at(series: TimeSeries, t: float) -> float:
    """Value of the enclosing interval at ``t`` minutes past the series start.

    Intervals are left-closed: t = step lands on the second sample.  Lookups
    past the last sample are an error, never an extrapolation.
    """
    if t < 0 or t > series.span:
        raise ValueError(f"t={t} outside series span [0, {series.span}]")
    idx = int(t // series.step)
    if idx >= len(series.values):
        idx = len(series.values) - 1
    return float(series.values[idx])


@dataclass(frozen=True)
class Scenario:
    """True environment data for one experiment window."""

    sea_level: TimeSeries
    wind_speed: TimeSeries
    initial_fjord_level: float
    start_month: int
    label: str

    def __post_init__(self):
        if self.sea_level.start != self.wind_speed.start:
            raise ValueError("sea and wind series must share a start date")
        if self.sea_level.step != self.wind_speed.step:
            raise ValueError("sea and wind series must share a step")
        if len(self.sea_level.values) != len(self.wind_speed.values):
            raise ValueError("sea and wind series must have equal length")
        if not 1 <= self.start_month <= 12:
            raise ValueError("start_month must be in 1..12")
        if not math.isfinite(self.initial_fjord_level):
            raise ValueError("initial fjord level must be finite")

    @property
    def span(self) -> float:
        return self.sea_level.span


@dataclass(frozen=True)
class Forecast:
    """A noise-perturbed view of a scenario, used only for training."""

    sea_level: TimeSeries
    wind_speed: TimeSeries
    initial_fjord_level: float
    start_month: int
    label: str
    source_label: str
    seed: int

    @property
    def span(self) -> float:
        return self.sea_level.span


def make_tidal_scenario(kind: str, seed: int) -> Scenario:
    """Synthesize a 3-day scenario of the given kind, deterministic per seed.

    ``normal``: sinusoidal tide, mean 0.0 m, amplitude 0.5 m, 12.5 h cycle.
    ``low``: one day of normal tides, then the mean ramps down far enough
    that the sea stays below 0.0 m continuously for over 24 hours.
    ``high``: symmetric, staying above 0.25 m continuously for over 24 hours.

    Wind is a mean-reverting process around 6 m/s clamped to [0, 25], chosen
    so it crosses the 8 m/s mixing threshold repeatedly.
    """
    if kind not in SCENARIO_KINDS:
        raise ValueError(f"unknown scenario kind {kind!r}, expected one of {SCENARIO_KINDS}")
    rng = rng_for(seed, 11, SCENARIO_KINDS.index(kind))
    n = HORIZON_STEPS + 1
    t = np.arange(n) * STEP_MINUTES

    tide = TIDE_AMPLITUDE * np.sin(2.0 * math.pi * t / TIDE_PERIOD_MINUTES)
    if kind == "normal":
        offset = np.zeros(n)
    else:
        # One tidal day as usual, a 6 h ramp, then a sustained extreme.
        target = -0.75 if kind == "low" else 1.0
        ramp_start, ramp_end = 1440.0, 1800.0
        frac = np.clip((t - ramp_start) / (ramp_end - ramp_start), 0.0, 1.0)
        offset = target * frac
    sea = offset + tide + rng.uniform(-0.01, 0.01, size=n)

    wind = np.empty(n)
    wind[0] = 6.0
    kicks = rng.normal(0.0, 1.0, size=n - 1)
    for i in range(n - 1):
        w = wind[i] + 0.1 * (6.0 - wind[i]) + kicks[i]
        wind[i + 1] = min(25.0, max(0.0, w))

    start = _KIND_START[kind]
    return Scenario(
        sea_level=TimeSeries(start, STEP_MINUTES, sea),
        wind_speed=TimeSeries(start, STEP_MINUTES, wind),
        initial_fjord_level=0.05,
        start_month=start.month,
        label=kind,
    )


def perturb_forecast(scenario: Scenario, seed: int,
                     sea_half_width: float = SEA_NOISE_HALF_WIDTH,
                     wind_half_width: float = WIND_NOISE_HALF_WIDTH) -> Forecast:
    """Apply independent bounded uniform noise to every sample.

    Every sea sample is shifted by a draw from [-sea_half_width,
    +sea_half_width] and every wind sample from the wind interval;
    zero-width intervals reproduce the scenario exactly.  Wind readings are
    not clamped, so values slightly below zero can occur near calm truth.
    """
    rng = rng_for(seed, 17)
    n = len(scenario.sea_level.values)
    sea = scenario.sea_level.values + rng.uniform(-sea_half_width, sea_half_width, size=n)
    wind = scenario.wind_speed.values + rng.uniform(-wind_half_width, wind_half_width, size=n)
    return Forecast(
        sea_level=TimeSeries(scenario.sea_level.start, scenario.sea_level.step, sea),
        wind_speed=TimeSeries(scenario.wind_speed.start, scenario.wind_speed.step, wind),
        initial_fjord_level=scenario.initial_fjord_level,
        start_month=scenario.start_month,
        label=f"{scenario.label}+noise",
        source_label=scenario.label,
        seed=seed,
    )


def forecast_window(scenario: Scenario, start_minutes: float, horizon_minutes: float,
                    seed: int, initial_fjord_level: float | None = None) -> Forecast:
    """Perturbed forecast over ``[start_minutes, start_minutes + horizon]``.

    Used by the online loop: the window is re-anchored at the current clock
    and, if given, at the currently observed fjord level.  The window is
    clipped to the available data.
    """
    step = scenario.sea_level.step
    if start_minutes < 0 or start_minutes % step != 0:
        raise ValueError("window start must be a nonnegative multiple of the step")
    first = int(start_minutes // step)
    last = min(len(scenario.sea_level.values) - 1,
               first + int(math.ceil(horizon_minutes / step)))
    if last <= first:
        raise ValueError("forecast window lies outside the scenario data")
    start_dt = scenario.sea_level.start + timedelta(minutes=start_minutes)
    window = Scenario(
        sea_level=TimeSeries(start_dt, step, scenario.sea_level.values[first:last + 1]),
        wind_speed=TimeSeries(start_dt, step, scenario.wind_speed.values[first:last + 1]),
        initial_fjord_level=(scenario.initial_fjord_level
                             if initial_fjord_level is None else initial_fjord_level),
        start_month=start_dt.month,
        label=f"{scenario.label}@{start_minutes:g}",
    )
    return perturb_forecast(window, seed)


# ---------------------------------------------------------------------------
# File formats
#
# Scenario CSV: header "minutes,sea_level_m,wind_mps", one row per 10-minute
# step, `minutes` counted from the scenario start.  A sidecar key-value file
# (same path, .cfg suffix) carries start_date, initial_fjord_level_m, label.
# ---------------------------------------------------------------------------

CSV_HEADER = "minutes,sea_level_m,wind_mps"


def sidecar_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".cfg")


def save_scenario(scenario: Scenario, csv_path: str | Path) -> None:
    """Write the scenario CSV and its sidecar config next to it."""
    csv_path = Path(csv_path)
    lines = [CSV_HEADER]
    step = scenario.sea_level.step
    for i, (sea, wind) in enumerate(zip(scenario.sea_level.values,
                                        scenario.wind_speed.values)):
        lines.append(f"{i * step:g},{float(sea)!r},{float(wind)!r}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = "\n".join([
        f"start_date = {scenario.sea_level.start.date().isoformat()}",
        f"initial_fjord_level_m = {scenario.initial_fjord_level!r}",
        f"label = {scenario.label}",
    ]) + "\n"
    sidecar_path(csv_path).write_text(sidecar, encoding="utf-8")


def _parse_sidecar(path: Path) -> dict[str, str]:
    if not path.exists():
        raise ScenarioFormatError(f"missing sidecar config {path}")
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioFormatError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def load_scenario(csv_path: str | Path) -> Scenario:
    """Load and validate a scenario CSV plus its sidecar config."""
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise ScenarioFormatError(f"no such scenario file: {csv_path}")
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ScenarioFormatError(f"{csv_path}:1: expected header '{CSV_HEADER}'")

    minutes: list[float] = []
    sea: list[float] = []
    wind: list[float] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 3:
            raise ScenarioFormatError(f"{csv_path}:{lineno}: expected 3 fields, got {len(parts)}")
        try:
            m, s, w = (float(p) for p in parts)
        except ValueError:
            raise ScenarioFormatError(f"{csv_path}:{lineno}: non-numeric field") from None
        if not (math.isfinite(m) and math.isfinite(s) and math.isfinite(w)):
            raise ScenarioFormatError(f"{csv_path}:{lineno}: non-finite value")
        minutes.append(m)
        sea.append(s)
        wind.append(w)
    if not minutes:
        raise ScenarioFormatError(f"{csv_path}: no data rows")

    step = STEP_MINUTES
    for i, m in enumerate(minutes):
        if m != i * step:
            raise ScenarioFormatError(
                f"{csv_path}:{i + 2}: expected minutes={i * step:g}, got {m:g}"
            )

    cfg = _parse_sidecar(sidecar_path(csv_path))
    for key in ("start_date", "initial_fjord_level_m", "label"):
        if key not in cfg:
            raise ScenarioFormatError(f"{sidecar_path(csv_path)}: missing key '{key}'")
    try:
        start = datetime.fromisoformat(cfg["start_date"])
    except ValueError:
        raise ScenarioFormatError(
            f"{sidecar_path(csv_path)}: start_date is not an ISO 8601 date"
        ) from None
    try:
        initial = float(cfg["initial_fjord_level_m"])
    except ValueError:
        raise ScenarioFormatError(
            f"{sidecar_path(csv_path)}: initial_fjord_level_m is not a number"
        ) from None

    return Scenario(
        sea_level=TimeSeries(start, step, np.array(sea)),
        wind_speed=TimeSeries(start, step, np.array(wind)),
        initial_fjord_level=initial,
        start_month=start.month,
        label=cfg["label"],
    )
