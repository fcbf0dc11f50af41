"""Shared fixtures and scenario builders for the test suite."""

from datetime import datetime

import numpy as np
import pytest

from fjordtwin.hydro import HydroParams
from fjordtwin.scenario import Scenario, TimeSeries


@pytest.fixture
def params() -> HydroParams:
    return HydroParams()


def flat_scenario(n_steps: int = 36, sea: float = 0.05, wind: float = 5.0,
                  fjord: float = 0.05, start: datetime = datetime(2018, 1, 1),
                  label: str = "flat") -> Scenario:
    """Constant-forcing scenario, handy for deterministic hand analysis."""
    n = n_steps + 1
    return Scenario(
        sea_level=TimeSeries(start, 10.0, np.full(n, float(sea))),
        wind_speed=TimeSeries(start, 10.0, np.full(n, float(wind))),
        initial_fjord_level=fjord,
        start_month=start.month,
        label=label,
    )


def series_scenario(sea_values, wind_values, fjord: float = 0.05,
                    start: datetime = datetime(2018, 1, 1),
                    label: str = "custom") -> Scenario:
    """Scenario from explicit sample arrays (10-minute step)."""
    return Scenario(
        sea_level=TimeSeries(start, 10.0, np.asarray(sea_values, dtype=float)),
        wind_speed=TimeSeries(start, 10.0, np.asarray(wind_values, dtype=float)),
        initial_fjord_level=fjord,
        start_month=start.month,
        label=label,
    )
