"""Experiment harness: scenario generation, training, evaluation, sweeps.

Subcommands
-----------
generate   write a synthetic scenario CSV (plus sidecar config)
learn      train controllers on a perturbed forecast and keep the best
evaluate   roll a controller out on the unperturbed scenario, aggregate metrics
simulate   export a single rollout trace for inspection/plotting
sweep      train/evaluate grids of safety weights for box plotting

All commands are deterministic given their full flag set including --seed.
Configuration lives in a flat ``key = value`` file (``#`` comments); every
key can be overridden by the matching command-line flag.  The environment
variable ``FJORDTWIN_THREADS`` caps process parallelism for independent
rollouts and sweep cells.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .control import (
    BaselineController,
    StrategyDocumentError,
    load_strategy,
    save_strategy,
)
from .envsim import (
    metrics_from_trace,
    run_episode,
    write_trace_csv,
)
from .hydro import DEFAULT_MONTHLY_WEIGHTS, HydroParams
from .learn import CostWeights, LearnerConfig, OnlinePlan, train_best
from .scenario import (
    SCENARIO_KINDS,
    Scenario,
    ScenarioFormatError,
    load_scenario,
    make_tidal_scenario,
    perturb_forecast,
    save_scenario,
)
from .util import derive_seed, parallel_map

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

EVAL_CSV_HEADER = ("scenario,controller,rollouts,safety_pct,migration_pct,"
                   "max_wait_mean,max_wait_std,gate_ops_mean,gate_ops_std,"
                   "min_level,max_level,total_cost_mean")

SWEEP_CSV_HEADER = "w1,scenario,controller,gate_operations,no_migration_ratio,max_wait_min,unsafe_ratio"


class UsageError(Exception):
    """Bad flags or configuration; exits with status 1."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Flat experiment configuration; field names double as config-file keys.

    Defaults are desk scale (training in minutes, not hours); the full-size
    protocol is reached by raising ``episodes`` to 6000 and sweep breadth
    via flags.
    """

    scenario_kind: str = "normal"
    scenario_file: str = ""
    scenario_seed: int = 0
    w1: float = 1e6
    w2: float = 0.1
    w3: float = 20.0
    w4: float = 1.0
    episodes: int = 2000
    restarts: int = 3
    horizon_steps: int = 432
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.8
    alpha_power: float = 0.65
    split_visit_threshold: int = 64
    split_min_gain: float = 0.25
    max_leaves: int = 4096
    eval_rollouts: int = 100
    select_rollouts: int = 20
    replan_period: float = 360.0
    learn_latency: float = 60.0
    horizon: float = 4320.0
    boat_mean_interarrival_min: float = 480.0
    forecast_seed: int = -1          # -1: derive from seed
    seed: int = 0
    k_inflow_per_s: float = 3.8
    k_outflow_per_s: float = -3.5
    gate_width: float = 10.0
    gate_bottom: float = -4.1
    gate_raised_bottom: float = 3.0
    num_gates: int = 14
    fjord_area_m2: float = 2.9e8
    stream_base_flow_m3_per_min: float = 3558.0
    monthly_weights: str = ""        # comma-separated 12 factors; empty = defaults

    def weights(self) -> CostWeights:
        return CostWeights(self.w1, self.w2, self.w3, self.w4)

    def hydro(self) -> HydroParams:
        if self.monthly_weights.strip():
            try:
                weights = tuple(float(w) for w in self.monthly_weights.split(","))
            except ValueError:
                raise UsageError("monthly_weights must be a comma-separated list of numbers")
        else:
            weights = DEFAULT_MONTHLY_WEIGHTS
        return HydroParams(
            k_inflow=self.k_inflow_per_s * 60.0,
            k_outflow=self.k_outflow_per_s * 60.0,
            gate_width=self.gate_width,
            gate_bottom=self.gate_bottom,
            gate_raised_bottom=self.gate_raised_bottom,
            num_gates=self.num_gates,
            fjord_area=self.fjord_area_m2,
            stream_base_flow=self.stream_base_flow_m3_per_min,
            monthly_weights=weights,
        )

    def learner(self, seed: int | None = None) -> LearnerConfig:
        return LearnerConfig(
            episodes=self.episodes,
            restarts=self.restarts,
            horizon_steps=self.horizon_steps,
            epsilon_start=self.epsilon_start,
            epsilon_end=self.epsilon_end,
            epsilon_decay_fraction=self.epsilon_decay_fraction,
            alpha_power=self.alpha_power,
            split_visit_threshold=self.split_visit_threshold,
            split_min_gain=self.split_min_gain,
            max_leaves=self.max_leaves,
            seed=self.seed if seed is None else seed,
        )

    def plan(self) -> OnlinePlan:
        return OnlinePlan(replan_period=self.replan_period,
                          learn_latency=self.learn_latency,
                          horizon=self.horizon)

    def validate(self):
        try:
            self.weights()
            self.hydro()
            self.learner()
            self.plan()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if self.eval_rollouts < 1 or self.select_rollouts < 1:
            raise UsageError("eval_rollouts and select_rollouts must be >= 1")
        if self.scenario_file and not Path(self.scenario_file).exists():
            raise UsageError(f"scenario_file does not exist: {self.scenario_file}")
        if not self.scenario_file and self.scenario_kind not in SCENARIO_KINDS:
            raise UsageError(f"scenario_kind must be one of {SCENARIO_KINDS}")


def read_kv_config(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file with ``#`` comments."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file does not exist: {path}")
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        entries[key] = value
    return entries


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, overridden by the config file, overridden by CLI flags."""
    cfg = ExperimentConfig()
    by_name = {f.name: f for f in fields(ExperimentConfig)}

    def coerce(name: str, raw: str):
        kind = by_name[name].type
        try:
            if kind == "int":
                return int(raw)
            if kind == "float":
                return float(raw)
            return raw
        except ValueError:
            raise UsageError(f"config key '{name}' expects {kind}, got {raw!r}") from None

    if getattr(args, "config", None):
        for key, raw in read_kv_config(args.config).items():
            if key not in by_name:
                raise UsageError(f"unknown config key '{key}'")
            cfg = replace(cfg, **{key: coerce(key, raw)})
    for name in by_name:
        value = getattr(args, name, None)
        if value is not None:
            cfg = replace(cfg, **{name: value})
    cfg.validate()
    return cfg


def resolve_scenario(cfg: ExperimentConfig) -> Scenario:
    if cfg.scenario_file:
        return load_scenario(cfg.scenario_file)
    return make_tidal_scenario(cfg.scenario_kind, cfg.scenario_seed)


# ---------------------------------------------------------------------------
# Evaluation helpers (module level so worker processes can pickle them)
# ---------------------------------------------------------------------------

def _eval_one(payload):
    scenario, strategy, weights, params, boat_mean, seed = payload
    trace = run_episode(scenario, strategy, weights, seed, params=params,
                        boat_mean_interarrival=boat_mean)
    m = metrics_from_trace(trace)
    mon = trace.monitors
    eligible = mon.migration_eligible
    return {
        "safety_pct": m.safety_pct,
        "migration_pct": m.migration_pct,
        "max_wait": m.max_wait,
        "gate_ops": m.gate_operations,
        "min_level": m.min_level,
        "max_level": m.max_level,
        "total_cost": trace.total_cost,
        "unsafe_ratio": mon.out_of_range / trace.duration,
        "no_migration_ratio": (mon.no_migration / eligible) if eligible > 0 else 0.0,
    }


def evaluate_controller(scenario: Scenario, strategy, weights: CostWeights,
                        params: HydroParams, rollouts: int, seed: int,
                        boat_mean: float) -> dict:
    """Aggregate rollout metrics; boat arrivals stay stochastic across rollouts."""
    payloads = [
        (scenario, strategy, weights, params, boat_mean, derive_seed(seed, 40, r))
        for r in range(rollouts)
    ]
    results = parallel_map(_eval_one, payloads)

    def series(key):
        return np.array([r[key] for r in results])

    def std(x):
        return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0

    return {
        "scenario": scenario.label,
        "controller": getattr(strategy, "label", "strategy"),
        "rollouts": rollouts,
        "safety_pct": float(np.mean(series("safety_pct"))),
        "migration_pct": float(np.mean(series("migration_pct"))),
        "max_wait_mean": float(np.mean(series("max_wait"))),
        "max_wait_std": std(series("max_wait")),
        "gate_ops_mean": float(np.mean(series("gate_ops"))),
        "gate_ops_std": std(series("gate_ops")),
        "min_level": float(np.min(series("min_level"))),
        "max_level": float(np.max(series("max_level"))),
        "total_cost_mean": float(np.mean(series("total_cost"))),
        "unsafe_ratio_mean": float(np.mean(series("unsafe_ratio"))),
        "no_migration_ratio_mean": float(np.mean(series("no_migration_ratio"))),
    }


def _eval_row_csv(row: dict) -> str:
    return ",".join([
        row["scenario"], row["controller"], str(row["rollouts"]),
        repr(row["safety_pct"]), repr(row["migration_pct"]),
        repr(row["max_wait_mean"]), repr(row["max_wait_std"]),
        repr(row["gate_ops_mean"]), repr(row["gate_ops_std"]),
        repr(row["min_level"]), repr(row["max_level"]),
        repr(row["total_cost_mean"]),
    ])


def _render_eval_row(row: dict) -> str:
    return (
        f"scenario={row['scenario']} controller={row['controller']} "
        f"({row['rollouts']} rollouts)\n"
        f"  safety          {row['safety_pct']:.2f} %\n"
        f"  fish migration  {row['migration_pct']:.2f} %\n"
        f"  max wait        {row['max_wait_mean']:.2f} +/- {row['max_wait_std']:.2f} min\n"
        f"  gate operations {row['gate_ops_mean']:.2f} +/- {row['gate_ops_std']:.2f}\n"
        f"  level range     [{row['min_level']:.3f}, {row['max_level']:.3f}] m DVR90\n"
        f"  mean total cost {row['total_cost_mean']:.2f}"
    )


def load_controller(spec_str: str, num_gates: int):
    """'baseline' or a path to a strategy document."""
    if spec_str == "baseline":
        return BaselineController(num_gates=num_gates)
    path = Path(spec_str)
    if not path.exists():
        raise UsageError(f"strategy file does not exist: {path}")
    return load_strategy(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.kind not in SCENARIO_KINDS:
        raise UsageError(f"unknown scenario kind {args.kind!r}, expected one of {SCENARIO_KINDS}")
    scenario = make_tidal_scenario(args.kind, args.seed if args.seed is not None else 0)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(scenario, out)
    print(f"wrote {out} and {out.with_suffix('.cfg')}")
    return EXIT_OK


def cmd_learn(args) -> int:
    cfg = build_config(args)
    scenario = resolve_scenario(cfg)
    params = cfg.hydro()
    weights = cfg.weights()
    fc_seed = cfg.forecast_seed if cfg.forecast_seed >= 0 else derive_seed(cfg.seed, 5)
    forecast = perturb_forecast(scenario, fc_seed)

    logs: dict[int, list[tuple[int, float, int, float]]] = {}

    def on_episode(restart, episode, cost, leaves, eps):
        logs.setdefault(restart, []).append((episode, cost, leaves, eps))

    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_suffix(".train_log.csv")
    try:
        tree = train_best(forecast, weights, cfg.learner(), params=params,
                          boat_mean_interarrival=cfg.boat_mean_interarrival_min,
                          select_rollouts=cfg.select_rollouts, on_episode=on_episode)
        tree.meta.update({"label": f"learned-{scenario.label}", "scenario": scenario.label})
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(save_strategy(tree), encoding="utf-8")
        selected = tree.meta.get("restart", 0)
        lines = ["episode,total_cost,leaves,epsilon"]
        for episode, cost, leaves, eps in logs.get(selected, []):
            lines.append(f"{episode},{cost!r},{leaves},{eps!r}")
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except Exception:
        for partial in (out, log_path):
            partial.unlink(missing_ok=True)
        raise
    print(f"wrote {out} (training log: {log_path})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = build_config(args)
    scenario = resolve_scenario(cfg)
    params = cfg.hydro()
    controller = load_controller(args.strategy, params.num_gates)
    rollouts = args.rollouts if args.rollouts is not None else cfg.eval_rollouts
    row = evaluate_controller(scenario, controller, cfg.weights(), params,
                              rollouts, cfg.seed, cfg.boat_mean_interarrival_min)
    print(_render_eval_row(row))
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(EVAL_CSV_HEADER + "\n" + _eval_row_csv(row) + "\n", encoding="utf-8")
        print(f"wrote {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = build_config(args)
    scenario = resolve_scenario(cfg)
    params = cfg.hydro()
    controller = load_controller(args.strategy, params.num_gates)
    trace = run_episode(scenario, controller, cfg.weights(), cfg.seed, params=params,
                        boat_mean_interarrival=cfg.boat_mean_interarrival_min)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out)
    print(f"wrote {out} ({len(trace)} decision rows, total cost {trace.total_cost:.2f})")
    return EXIT_OK


def _sweep_cell(payload):
    (scenario, w1, weights, learner, params, boat_mean,
     eval_rollouts, controller_index, cell_seed) = payload
    forecast = perturb_forecast(scenario, derive_seed(cell_seed, 5))
    tree = train_best(forecast, weights, replace(learner, seed=cell_seed, restarts=1),
                      params=params, boat_mean_interarrival=boat_mean,
                      select_rollouts=1)
    row = evaluate_controller(scenario, tree, weights, params,
                              eval_rollouts, cell_seed, boat_mean)
    return ",".join([
        f"{w1:g}", scenario.label, str(controller_index),
        repr(row["gate_ops_mean"]), repr(row["no_migration_ratio_mean"]),
        repr(row["max_wait_mean"]), repr(row["unsafe_ratio_mean"]),
    ])


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    params = cfg.hydro()
    try:
        w1_values = [float(v) for v in args.w1_list.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--w1 expects a comma-separated list of numbers, got {args.w1_list!r}")
    if not w1_values:
        raise UsageError("--w1 must list at least one value")
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    for kind in kinds:
        if kind not in SCENARIO_KINDS:
            raise UsageError(f"unknown scenario kind {kind!r} in --kinds")
    controllers = args.controllers
    if controllers < 1:
        raise UsageError("--controllers must be >= 1")

    payloads = []
    for wi, w1 in enumerate(w1_values):
        weights = CostWeights(w1, cfg.w2, cfg.w3, cfg.w4)
        for ki, kind in enumerate(kinds):
            scenario = make_tidal_scenario(kind, cfg.scenario_seed)
            for c in range(controllers):
                cell_seed = derive_seed(cfg.seed, 60, wi, ki, c)
                payloads.append((scenario, w1, weights, cfg.learner(), params,
                                 cfg.boat_mean_interarrival_min, cfg.eval_rollouts,
                                 c, cell_seed))
    rows = parallel_map(_sweep_cell, payloads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(SWEEP_CSV_HEADER + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(rows)} rows)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing and entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise UsageError(message)


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--config", help="flat key = value experiment config file")
    sub.add_argument("--seed", type=int, default=None, help="master random seed")
    sub.add_argument("--scenario", dest="_scenario",
                     help=f"scenario kind ({'/'.join(SCENARIO_KINDS)}) or CSV path")
    sub.add_argument("--scenario-seed", dest="scenario_seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fjordtwin",
                     description="Gated tidal basin digital twin and controller harness")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("generate", parents=[], help="write a synthetic scenario")
    gen.add_argument("kind", help=f"one of {'/'.join(SCENARIO_KINDS)}")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="scenario CSV path")
    gen.set_defaults(func=cmd_generate)

    lrn = commands.add_parser("learn", help="train controllers and keep the best")
    _add_common(lrn)
    lrn.add_argument("--episodes", type=int, default=None)
    lrn.add_argument("--restarts", type=int, default=None)
    lrn.add_argument("--w1", dest="w1", type=float, default=None)
    lrn.add_argument("--out", required=True, help="strategy document path")
    lrn.add_argument("--log", help="training log CSV path (default: <out>.train_log.csv)")
    lrn.set_defaults(func=cmd_learn)

    ev = commands.add_parser("evaluate", help="evaluate a controller on a scenario")
    _add_common(ev)
    ev.add_argument("--strategy", required=True, help="'baseline' or a strategy document path")
    ev.add_argument("--rollouts", type=int, default=None)
    ev.add_argument("--out", help="results CSV path")
    ev.set_defaults(func=cmd_evaluate)

    sim = commands.add_parser("simulate", help="export one rollout trace")
    _add_common(sim)
    sim.add_argument("--strategy", required=True, help="'baseline' or a strategy document path")
    sim.add_argument("--out", required=True, help="trace CSV path")
    sim.set_defaults(func=cmd_simulate)

    sw = commands.add_parser("sweep", help="safety-weight sweep for box plots")
    _add_common(sw)
    sw.add_argument("--episodes", type=int, default=None)
    sw.add_argument("--w1", dest="w1_list", default="10,100,1000,10000,100000,1000000",
                    help="comma-separated safety weights")
    sw.add_argument("--kinds", default=",".join(SCENARIO_KINDS),
                    help="comma-separated scenario kinds")
    sw.add_argument("--controllers", type=int, default=5,
                    help="controllers trained per (w1, scenario) cell")
    sw.add_argument("--out", required=True, help="sweep CSV path")
    sw.set_defaults(func=cmd_sweep)
    return parser


def _apply_scenario_flag(args):
    raw = getattr(args, "_scenario", None)
    if raw is None:
        return
    if raw in SCENARIO_KINDS:
        args.scenario_kind = raw
        args.scenario_file = ""  # a kind on the command line beats a configured file
    else:
        args.scenario_file = raw


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_scenario_flag(args)
        return args.func(args)
    except UsageError as exc:
        print(f"fjordtwin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioFormatError, StrategyDocumentError, ValueError,
            ArithmeticError, OSError) as exc:
        print(f"fjordtwin: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
