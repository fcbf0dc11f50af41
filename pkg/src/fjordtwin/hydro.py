"""Water-level physics for a gated tidal basin.

The basin (a brackish inland fjord) exchanges water with the sea through a
row of identical vertically-lifted sluice gates and receives a monthly-varying
freshwater inflow from land streams.  Levels are meters relative to the DVR90
datum, time is minutes, flow is m^3/min.

Gate flow follows the coastal authority's orifice-style estimate

    Q_gates = K * A * sqrt(|h_s - h_f|)

with a direction-dependent flow constant K (inflow pushes harder than
outflow) and A the total submerged cross-section of the open gates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

# Per-gate modes available to the controller: none, one, or all gates.
SECONDS_PER_MINUTE = 60.0

#: Monthly stream-inflow weights, January..December.
DEFAULT_MONTHLY_WEIGHTS = (
    1.45, 1.39, 1.30, 1.01, 0.82, 0.71,
    0.66, 0.64, 0.72, 0.87, 1.12, 1.29,
)


class WaterLevels(NamedTuple):
    """Fjord and sea levels in meters DVR90."""

    h_f: float
    h_s: float


@dataclass(frozen=True)
class HydroParams:
    """Physical constants of the basin and its gates.

    Flow constants are stored per minute; the conventional per-second values
    (3.8 and -3.5 m^(1/2)/s) are converted with the factor 60 so they match
    the per-minute stream flow and the 1-minute model time unit.

    ``gate_width`` and ``gate_raised_bottom`` are not published for the real
    plant; the defaults are working assumptions.  A fully raised gate bottom
    of +3.0 m sits above any realistic water level, so an open gate's
    cross-section is limited by the water surface, matching the plant's
    open/closed operating practice.
    """

    k_inflow: float = 3.8 * SECONDS_PER_MINUTE    # m^(1/2)/min, sea -> fjord
    k_outflow: float = -3.5 * SECONDS_PER_MINUTE  # m^(1/2)/min, fjord -> sea
    gate_width: float = 10.0                      # m per gate (assumed)
    gate_bottom: float = -4.1                     # m DVR90, gate sill
    gate_raised_bottom: float = 3.0               # m DVR90 when fully open (assumed)
    num_gates: int = 14
    fjord_area: float = 2.9e8                     # m^2
    stream_base_flow: float = 3558.0              # m^3/min
    monthly_weights: tuple[float, ...] = field(default=DEFAULT_MONTHLY_WEIGHTS)

    def __post_init__(self):
        if not self.k_inflow > 0:
            raise ValueError("k_inflow must be positive")
        if not self.k_outflow < 0:
            raise ValueError("k_outflow must be negative")
        if not abs(self.k_inflow) > abs(self.k_outflow):
            raise ValueError("inflow constant must exceed outflow in magnitude")
        if self.gate_width <= 0 or self.fjord_area <= 0:
            raise ValueError("gate_width and fjord_area must be positive")
        if self.num_gates < 1:
            raise ValueError("num_gates must be at least 1")
        if self.gate_raised_bottom <= self.gate_bottom:
            raise ValueError("raised gate bottom must sit above the sill")
        if len(self.monthly_weights) != 12:
            raise ValueError("monthly_weights needs exactly 12 entries")
        if any(w <= 0 for w in self.monthly_weights):
            raise ValueError("monthly weights must be positive")
        if self.stream_base_flow < 0:
            raise ValueError("stream_base_flow must be nonnegative")

    @property
    def gate_actions(self) -> tuple[int, int, int]:
        """Gate counts the controller can choose: none, one, or all."""
        return (0, 1, self.num_gates)


def cross_section_single(levels: WaterLevels, params: HydroParams, open: bool) -> float:
    """Submerged cross-section of one gate, m^2.

    The flow window of an open gate spans from the sill up to the lower of
    the raised gate bottom and the higher water surface.  Degenerate cases
    (water below the sill) clamp to zero rather than going negative.
    """
    if not open:
        return 0.0
    h_w = levels.h_f if levels.h_f > levels.h_s else levels.h_s
    top = min(params.gate_raised_bottom, h_w)
    height = top - params.gate_bottom
    if height <= 0.0:
        return 0.0
    return params.gate_width * height


def cross_section_total(levels: WaterLevels, params: HydroParams, open_gates: int) -> float:
    """Total cross-section of ``open_gates`` identical gates, m^2."""
    if open_gates < 0 or open_gates > params.num_gates:
        raise ValueError(f"open_gates must be in 0..{params.num_gates}, got {open_gates}")
    if open_gates == 0:
        return 0.0
    return open_gates * cross_section_single(levels, params, open=True)


def gate_flow(levels: WaterLevels, area: float, params: HydroParams) -> float:
    """Water flow through the gates, m^3/min; positive means sea to fjord."""
    if area < 0:
        raise ValueError("cross-section area must be nonnegative")
    if area == 0.0:
        return 0.0
    dh = levels.h_s - levels.h_f
    if dh >= 0.0:
        return params.k_inflow * area * math.sqrt(dh)
    return params.k_outflow * area * math.sqrt(-dh)


def stream_flow(month: int, params: HydroParams) -> float:
    """Average freshwater inflow from land streams for a calendar month, m^3/min."""
    if not 1 <= month <= 12:
        raise ValueError(f"month must be in 1..12, got {month}")
    return params.stream_base_flow * params.monthly_weights[month - 1]


def fjord_derivative(levels: WaterLevels, open_gates: int, month: int,
                     params: HydroParams) -> float:
    """Rate of change of the fjord level, m/min, for the current gate setting."""
    area = cross_section_total(levels, params, open_gates)
    q = gate_flow(levels, area, params) + stream_flow(month, params)
    return q / params.fjord_area


def substep_update(h_f: float, h_s: float, open_gates: int, month: int,
                   params: HydroParams, dt: float) -> float:
    """Advance the fjord level by one explicit-Euler sub-step of ``dt`` minutes.

    The gate-flow contribution is clamped so it never carries ``h_f`` past
    ``h_s`` within the sub-step: the sqrt(|dh|) right-hand side is not
    Lipschitz at dh = 0 and plain Euler would oscillate around equalization.
    """
    if open_gates > 0 and h_f != h_s:
        levels = WaterLevels(h_f, h_s)
        q = gate_flow(levels, cross_section_total(levels, params, open_gates), params)
        h_mid = h_f + dt * q / params.fjord_area
        if h_s >= h_f:
            h_mid = min(h_mid, h_s)  # inflow cannot overshoot the sea level
        else:
            h_mid = max(h_mid, h_s)  # outflow cannot undershoot it
    else:
        h_mid = h_f
    return h_mid + dt * stream_flow(month, params) / params.fjord_area


def integrate_step(levels: WaterLevels, open_gates: int, month: int,
                   params: HydroParams, duration: float,
                   substep: float = 0.5) -> WaterLevels:
    """Integrate the fjord level over ``duration`` minutes of constant forcing.

    The sea level is held constant over the step (piecewise-constant sensor
    forcing); sub-stepping uses ``substep`` minutes with a shorter final
    sub-step when ``duration`` is not a multiple of it.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if substep <= 0:
        raise ValueError("substep must be positive")
    h_f = levels.h_f
    h_s = levels.h_s
    remaining = duration
    while remaining > 1e-12:
        dt = substep if remaining >= substep else remaining
        h_f = substep_update(h_f, h_s, open_gates, month, params, dt)
        remaining -= dt
    if not math.isfinite(h_f):
        raise ArithmeticError("fjord level integration produced a non-finite value")
    return WaterLevels(h_f, h_s)
