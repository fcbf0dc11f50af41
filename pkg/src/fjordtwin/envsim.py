"""Discrete-time plant environment: 10-minute control periods over the basin.

Each period the controller picks a gate count from the currently allowed
set, any waiting boat is released if the choice is zero gates, the fjord
level is integrated under constant sea forcing, a stochastic boat arrival
may occur, and four cost monitors advance:

* ``out_of_range``   minutes with the fjord level outside [0.0, 0.25] m,
* ``no_migration``   minutes with all gates shut while levels are within
                     0.1 m of each other (fish could have migrated),
* ``accum_cost_wait``  integral of the current boat waiting time (so each
                       boat contributes wait^2 / 2),
* ``gate_changes``   number of configuration changes.

Hard gating: a head difference of 1 m or more forces all gates shut, and
letting water in with all gates needs wind of at least 8 m/s for mixing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import timedelta
from typing import NamedTuple, Sequence

import numpy as np

from .control import ControlContext, Strategy
from .hydro import HydroParams, WaterLevels, substep_update
from .util import rng_for

PERIOD_MINUTES = 10.0
SUBSTEP_MINUTES = 0.5

SAFE_LEVEL_LOW = 0.0
SAFE_LEVEL_HIGH = 0.25
MIGRATION_BAND = 0.1
HARD_CLOSE_DIFF = 1.0
WIND_MIXING_THRESHOLD = 8.0

BOAT_MEAN_INTERARRIVAL = 480.0  # minutes; nonpositive disables boats

TRACE_COLUMNS = ("t_min", "h_f", "h_s", "wind", "gates", "boat_incoming",
                 "out_of_range", "no_migration", "boat_wait",
                 "accum_cost_wait", "gate_changes")


class DisallowedActionError(ValueError):
    """An action outside the currently allowed set was submitted."""


class MonitorDeltas(NamedTuple):
    """Per-period increments of the four cost monitors."""

    out_of_range: float
    accum_cost_wait: float
    gate_changes: int
    no_migration: float


@dataclass
class Monitors:
    """Cumulative monitor state of one episode."""

    out_of_range: float = 0.0
    no_migration: float = 0.0
    migration_eligible: float = 0.0
    boat_wait_time: float = 0.0
    accum_cost_wait: float = 0.0
    gate_changes: int = 0
    max_boat_wait: float = 0.0
    min_level: float = math.inf
    max_level: float = -math.inf


@dataclass
class EnvState:
    """Full simulation state at a control tick."""

    t: float
    h_f: float
    h_s: float
    wind: float
    open_gates: int
    boat_incoming: bool
    month: int
    monitors: Monitors = field(default_factory=Monitors)

    @property
    def levels(self) -> WaterLevels:
        return WaterLevels(self.h_f, self.h_s)

    def context(self) -> ControlContext:
        return ControlContext(self.h_f, self.h_s, self.wind, self.boat_incoming)


def allowed_actions(ctx: ControlContext, num_gates: int = 14) -> tuple[int, ...]:
    """Gate counts the hard safety gating permits in this state."""
    if abs(ctx.h_s - ctx.h_f) >= HARD_CLOSE_DIFF:
        return (0,)
    if ctx.sea_higher and ctx.wind < WIND_MIXING_THRESHOLD:
        return (0, 1)
    return (0, 1, num_gates)


def clamp_to_allowed(action: int, allowed: Sequence[int]) -> int:
    """Nearest allowed gate count, preferring fewer gates on ties."""
    return min(allowed, key=lambda a: (abs(a - action), a))


def boat_process(rng: np.random.Generator, duration: float, boat_incoming: bool,
                 mean: float = BOAT_MEAN_INTERARRIVAL) -> bool:
    """Boat flag after ``duration`` minutes; at most one boat waits at a time.

    Arrivals are exponential with mean 480 minutes, so a vacant period sees
    an arrival with probability 1 - exp(-duration/480).  Arrivals while a
    boat is already waiting are ignored.
    """
    if boat_incoming:
        return True
    if duration <= 0:
        return False
    return rng.random() < -math.expm1(-duration / mean)


def _arrival_offset(rng: np.random.Generator, duration: float, mean: float) -> float:
    """Arrival time within the period, given that an arrival occurred.

    Inverse CDF of the exponential distribution truncated to [0, duration];
    waiting time then starts at the true arrival instant rather than at a
    period boundary.
    """
    total = -math.expm1(-duration / mean)
    return -mean * math.log1p(-rng.random() * total)


def env_step(state: EnvState, action: int, sea_next: float, wind_next: float,
             rng: np.random.Generator, params: HydroParams,
             boat_mean_interarrival: float = BOAT_MEAN_INTERARRIVAL,
             period: float = PERIOD_MINUTES,
             substep: float = SUBSTEP_MINUTES) -> EnvState:
    """Advance one control period in place and return the state.

    The decision and any boat release happen atomically at the period start,
    before integration; sea level and wind switch to the next sensor reading
    at the period end.
    """
    mon = state.monitors
    allowed = allowed_actions(state.context(), params.num_gates)
    if action not in allowed:
        raise DisallowedActionError(
            f"action {action} not in allowed set {allowed} at t={state.t}"
        )

    if action != state.open_gates:
        mon.gate_changes += 1
        state.open_gates = action
    if action == 0 and state.boat_incoming:
        mon.max_boat_wait = max(mon.max_boat_wait, mon.boat_wait_time)
        mon.boat_wait_time = 0.0
        state.boat_incoming = False

    # Boat arrival for this period (at most one boat waits at a time).
    arrival_offset = None
    if boat_mean_interarrival > 0 and not state.boat_incoming:
        if boat_process(rng, period, False, mean=boat_mean_interarrival):
            arrival_offset = _arrival_offset(rng, period, boat_mean_interarrival)

    # Integrate the level and the level-dependent stopwatches per sub-step;
    # predicates are evaluated at the sub-step start (left-closed forcing).
    h_f = state.h_f
    h_s = state.h_s
    gates = state.open_gates
    month = state.month
    if h_f < mon.min_level:
        mon.min_level = h_f
    if h_f > mon.max_level:
        mon.max_level = h_f
    remaining = period
    while remaining > 1e-12:
        dt = substep if remaining >= substep else remaining
        if h_f < SAFE_LEVEL_LOW or h_f > SAFE_LEVEL_HIGH:
            mon.out_of_range += dt
        if abs(h_s - h_f) <= MIGRATION_BAND:
            mon.migration_eligible += dt
            if gates == 0:
                mon.no_migration += dt
        h_f = substep_update(h_f, h_s, gates, month, params, dt)
        if h_f < mon.min_level:
            mon.min_level = h_f
        if h_f > mon.max_level:
            mon.max_level = h_f
        remaining -= dt
    if not math.isfinite(h_f):
        raise ArithmeticError(f"non-finite fjord level at t={state.t}")
    state.h_f = h_f

    # Boat clocks integrate exactly: a wait growing from w0 by d adds
    # w0*d + d^2/2 to the squared-wait accumulator.
    if state.boat_incoming:
        w0 = mon.boat_wait_time
        mon.accum_cost_wait += w0 * period + period * period / 2.0
        mon.boat_wait_time = w0 + period
    elif arrival_offset is not None:
        wait = period - arrival_offset
        mon.accum_cost_wait += wait * wait / 2.0
        mon.boat_wait_time = wait
        state.boat_incoming = True
    mon.max_boat_wait = max(mon.max_boat_wait, mon.boat_wait_time)

    state.t += period
    state.h_s = sea_next
    state.wind = wind_next
    return state


class FjordEnv:
    """Episodic environment over a scenario or forecast.

    ``step`` returns the period's monitor increments so a learner can form
    incremental costs; cumulative values live in ``state.monitors``.
    """

    def __init__(self, scenario, params: HydroParams | None = None,
                 horizon_steps: int | None = None,
                 boat_mean_interarrival: float = BOAT_MEAN_INTERARRIVAL):
        self.scenario = scenario
        self.params = params if params is not None else HydroParams()
        self.actions = self.params.gate_actions
        self.boat_mean_interarrival = boat_mean_interarrival

        sea = scenario.sea_level
        wind = scenario.wind_speed
        n_steps = len(sea.values) - 1
        if horizon_steps is None:
            horizon_steps = n_steps
        if horizon_steps < 1 or horizon_steps > n_steps:
            raise ValueError(
                f"horizon of {horizon_steps} steps needs {horizon_steps + 1} samples, "
                f"series has {len(sea.values)}"
            )
        self.horizon_steps = horizon_steps
        self._sea = [float(v) for v in sea.values]
        self._wind = [float(v) for v in wind.values]
        self._months = [
            (sea.start + timedelta(minutes=i * PERIOD_MINUTES)).month
            for i in range(horizon_steps + 1)
        ]
        self.state: EnvState | None = None
        self._step_index = 0
        self._rng: np.random.Generator | None = None

    def reset(self, rng: np.random.Generator) -> ControlContext:
        self._rng = rng
        self._step_index = 0
        self.state = EnvState(
            t=0.0,
            h_f=self.scenario.initial_fjord_level,
            h_s=self._sea[0],
            wind=self._wind[0],
            open_gates=0,
            boat_incoming=False,
            month=self._months[0],
        )
        mon = self.state.monitors
        mon.min_level = mon.max_level = self.state.h_f
        return self.state.context()

    @property
    def done(self) -> bool:
        return self._step_index >= self.horizon_steps

    def context(self) -> ControlContext:
        return self.state.context()

    def allowed(self) -> tuple[int, ...]:
        return allowed_actions(self.state.context(), self.params.num_gates)

    def step(self, action: int) -> tuple[MonitorDeltas, bool]:
        if self.done:
            raise RuntimeError("episode is over; call reset() first")
        mon = self.state.monitors
        before = (mon.out_of_range, mon.accum_cost_wait, mon.gate_changes, mon.no_migration)
        self.state.month = self._months[self._step_index]
        env_step(
            self.state, action,
            sea_next=self._sea[self._step_index + 1],
            wind_next=self._wind[self._step_index + 1],
            rng=self._rng, params=self.params,
            boat_mean_interarrival=self.boat_mean_interarrival,
        )
        self._step_index += 1
        deltas = MonitorDeltas(
            mon.out_of_range - before[0],
            mon.accum_cost_wait - before[1],
            mon.gate_changes - before[2],
            mon.no_migration - before[3],
        )
        return deltas, self.done


@dataclass
class EpisodeTrace:
    """Per-decision record of one rollout plus its aggregate outcome.

    Columns are aligned: entry ``i`` describes the decision at ``t_min[i]``
    (state as seen by the controller, action taken) while the monitor
    columns hold cumulative values at the end of that period.
    """

    t_min: np.ndarray
    h_f: np.ndarray
    h_s: np.ndarray
    wind: np.ndarray
    gates: np.ndarray
    boat_incoming: np.ndarray
    out_of_range: np.ndarray
    no_migration: np.ndarray
    boat_wait: np.ndarray
    accum_cost_wait: np.ndarray
    gate_changes: np.ndarray
    monitors: Monitors
    total_cost: float
    weights: tuple[float, float, float, float]
    label: str
    seed: int

    def __len__(self) -> int:
        return len(self.t_min)

    @property
    def duration(self) -> float:
        return len(self) * PERIOD_MINUTES


def run_episode(scenario, strategy: Strategy, weights, seed: int,
                params: HydroParams | None = None,
                horizon_steps: int | None = None,
                boat_mean_interarrival: float = BOAT_MEAN_INTERARRIVAL) -> EpisodeTrace:
    """Roll the strategy out over the scenario and record the full trace.

    Strategy outputs outside the allowed set are clamped to the nearest
    allowed gate count, mirroring guard semantics where illegal actions are
    unavailable rather than erroneous.  The trace is a pure function of
    (scenario, strategy, weights, seed).
    """
    env = FjordEnv(scenario, params=params, horizon_steps=horizon_steps,
                   boat_mean_interarrival=boat_mean_interarrival)
    env.reset(rng_for(seed, 2))
    n = env.horizon_steps
    rows = TraceRecorder(n)
    total_cost = 0.0
    w1, w2, w3, w4 = weights.as_tuple() if hasattr(weights, "as_tuple") else tuple(weights)
    for i in range(n):
        state = env.state
        action = clamp_to_allowed(strategy.decide(state.context()), env.allowed())
        rows.pre(i, state, action)
        deltas, _ = env.step(action)
        total_cost += (w1 * deltas.out_of_range + w2 * deltas.accum_cost_wait
                       + w3 * deltas.gate_changes + w4 * deltas.no_migration)
        rows.post(i, state.monitors)

    return rows.build(env.state.monitors, total_cost, (w1, w2, w3, w4),
                      getattr(strategy, "label", "strategy"), seed)


class TraceRecorder:
    """Columnar assembly of an :class:`EpisodeTrace`, one row per decision."""

    def __init__(self, n: int):
        self.n = n
        self.f = {name: np.empty(n) for name in
                  ("t_min", "h_f", "h_s", "wind", "out_of_range", "no_migration",
                   "boat_wait", "accum_cost_wait")}
        self.gates = np.empty(n, dtype=int)
        self.changes = np.empty(n, dtype=int)
        self.boat = np.empty(n, dtype=bool)

    def pre(self, i: int, state: EnvState, action: int):
        """Record the controller-visible side of decision ``i``."""
        self.f["t_min"][i] = state.t
        self.f["h_f"][i] = state.h_f
        self.f["h_s"][i] = state.h_s
        self.f["wind"][i] = state.wind
        self.boat[i] = state.boat_incoming
        self.gates[i] = action

    def post(self, i: int, mon: Monitors):
        """Record cumulative monitors at the end of period ``i``."""
        self.f["out_of_range"][i] = mon.out_of_range
        self.f["no_migration"][i] = mon.no_migration
        self.f["boat_wait"][i] = mon.boat_wait_time
        self.f["accum_cost_wait"][i] = mon.accum_cost_wait
        self.changes[i] = mon.gate_changes

    def build(self, monitors: Monitors, total_cost: float, weights,
              label: str, seed: int) -> EpisodeTrace:
        return EpisodeTrace(
            t_min=self.f["t_min"], h_f=self.f["h_f"], h_s=self.f["h_s"],
            wind=self.f["wind"], gates=self.gates, boat_incoming=self.boat,
            out_of_range=self.f["out_of_range"], no_migration=self.f["no_migration"],
            boat_wait=self.f["boat_wait"], accum_cost_wait=self.f["accum_cost_wait"],
            gate_changes=self.changes, monitors=monitors, total_cost=total_cost,
            weights=tuple(weights), label=label, seed=seed,
        )


@dataclass(frozen=True)
class Metrics:
    """Aggregate evaluation quantities of one episode."""

    safety_pct: float
    migration_pct: float
    max_wait: float
    gate_operations: int
    min_level: float
    max_level: float


def metrics_from_trace(trace: EpisodeTrace) -> Metrics:
    """Episode metrics: safety and migration percentages, waits, operations.

    Migration eligibility is the time the levels were within the 0.1 m band
    (which also implies the 1 m hard gate is open); with no eligible time
    the migration score is vacuously 100%.
    """
    mon = trace.monitors
    total = trace.duration
    safety = 100.0 * (1.0 - mon.out_of_range / total)
    if mon.migration_eligible > 0:
        migration = 100.0 * (mon.migration_eligible - mon.no_migration) / mon.migration_eligible
    else:
        migration = 100.0
    return Metrics(
        safety_pct=safety,
        migration_pct=migration,
        max_wait=mon.max_boat_wait,
        gate_operations=mon.gate_changes,
        min_level=mon.min_level,
        max_level=mon.max_level,
    )


def write_trace_csv(trace: EpisodeTrace, path) -> None:
    """Export the per-decision trace with the documented column set."""
    lines = [",".join(TRACE_COLUMNS)]
    for i in range(len(trace)):
        lines.append(",".join((
            f"{trace.t_min[i]:g}",
            repr(float(trace.h_f[i])),
            repr(float(trace.h_s[i])),
            repr(float(trace.wind[i])),
            str(int(trace.gates[i])),
            str(int(trace.boat_incoming[i])),
            repr(float(trace.out_of_range[i])),
            repr(float(trace.no_migration[i])),
            repr(float(trace.boat_wait[i])),
            repr(float(trace.accum_cost_wait[i])),
            str(int(trace.gate_changes[i])),
        )))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
