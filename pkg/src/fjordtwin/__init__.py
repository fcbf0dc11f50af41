"""Digital twin of a gated tidal basin with an online-learning sluice controller.

The basin exchanges water with the sea through 14 sluice gates.  This
package simulates the water-level dynamics, enforces the plant's hard
safety gating, scores rollouts with stopwatch-style cost monitors, learns
gate strategies by Q-learning over an adaptively refined state partition,
and ships an experiment harness for evaluation and weight sweeps.
"""

from .control import (
    BaselineController,
    ControlContext,
    PartitionTree,
    baseline_decide,
    load_strategy,
    save_strategy,
    tree_decide,
)
from .envsim import (
    EnvState,
    EpisodeTrace,
    FjordEnv,
    Metrics,
    Monitors,
    allowed_actions,
    boat_process,
    clamp_to_allowed,
    env_step,
    metrics_from_trace,
    run_episode,
    write_trace_csv,
)
from .hydro import (
    HydroParams,
    WaterLevels,
    cross_section_single,
    cross_section_total,
    fjord_derivative,
    gate_flow,
    integrate_step,
    stream_flow,
)
from .learn import (
    CostWeights,
    LearnerConfig,
    OnlinePlan,
    online_run,
    refine_partition,
    select_best_of_k,
    train,
    train_best,
)
from .scenario import (
    Forecast,
    Scenario,
    TimeSeries,
    load_scenario,
    make_tidal_scenario,
    perturb_forecast,
    sample_at,
    save_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineController", "ControlContext", "PartitionTree", "baseline_decide",
    "load_strategy", "save_strategy", "tree_decide",
    "EnvState", "EpisodeTrace", "FjordEnv", "Metrics", "Monitors",
    "allowed_actions", "boat_process", "clamp_to_allowed", "env_step",
    "metrics_from_trace", "run_episode", "write_trace_csv",
    "HydroParams", "WaterLevels", "cross_section_single", "cross_section_total",
    "fjord_derivative", "gate_flow", "integrate_step", "stream_flow",
    "CostWeights", "LearnerConfig", "OnlinePlan", "online_run",
    "refine_partition", "select_best_of_k", "train", "train_best",
    "Forecast", "Scenario", "TimeSeries", "load_scenario", "make_tidal_scenario",
    "perturb_forecast", "sample_at", "save_scenario",
    "__version__",
]
