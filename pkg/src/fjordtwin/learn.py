"""Finite-horizon Q-learning over an adaptively refined state partition.

The learner interacts with an episodic environment (normally a
:class:`~fjordtwin.envsim.FjordEnv` over a perturbed forecast), choosing
gate actions epsilon-greedily among the currently allowed ones and updating
undiscounted per-(leaf, action) cost estimates from the weighted monitor
increments.  Leaves that have gathered enough evidence and show enough
dispersion in observed cost-to-go are split along one state dimension.

Several independently seeded learners can be trained and the best one kept
(selection by mean rollout cost on the training forecast).  The online loop
re-perturbs the forecast every replanning period, retrains, and swaps the
strategy in once the configured learning latency has elapsed, operating
with the old strategy meanwhile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .control import DEFAULT_STATE_BOX, Leaf, PartitionTree
from .envsim import (
    BOAT_MEAN_INTERARRIVAL,
    EpisodeTrace,
    FjordEnv,
    MonitorDeltas,
    PERIOD_MINUTES,
    TraceRecorder,
    clamp_to_allowed,
    run_episode,
)
from .scenario import Scenario, forecast_window
from .util import derive_seed, rng_for


@dataclass(frozen=True)
class CostWeights:
    """Weights of the four cost terms; safety dominates by design."""

    w1: float = 1e6   # time outside the safe level range
    w2: float = 0.1   # accumulated squared boat waiting time
    w3: float = 20.0  # gate configuration changes
    w4: float = 1.0   # migration time lost to closed gates

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3, self.w4) < 0:
            raise ValueError("cost weights must be nonnegative")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w1, self.w2, self.w3, self.w4)

    def combine(self, d: MonitorDeltas) -> float:
        return (self.w1 * d.out_of_range + self.w2 * d.accum_cost_wait
                + self.w3 * d.gate_changes + self.w4 * d.no_migration)


@dataclass(frozen=True)
class LearnerConfig:
    """Training hyperparameters.

    ``alpha_power`` sets the per-(leaf, action) learning rate
    1 / (1 + visits)^alpha_power; a power below 1 forgets early bootstrap
    noise geometrically while still averaging late-stage stochasticity.
    ``max_leaves`` caps each discrete branch; 1 disables refinement.
    """

    episodes: int = 6000
    restarts: int = 3
    horizon_steps: int = 432
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.8
    alpha_power: float = 0.65
    split_visit_threshold: int = 64
    split_min_gain: float = 0.25
    max_leaves: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 1 or self.horizon_steps < 1 or self.restarts < 1:
            raise ValueError("episodes, horizon_steps and restarts must be >= 1")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.max_leaves < 1:
            raise ValueError("max_leaves must be >= 1")


@dataclass(frozen=True)
class OnlinePlan:
    """Receding-horizon schedule, all values in minutes."""

    replan_period: float = 360.0
    learn_latency: float = 60.0
    horizon: float = 4320.0

    def __post_init__(self):
        if not 0.0 <= self.learn_latency <= self.replan_period <= self.horizon:
            raise ValueError("need learn_latency <= replan_period <= horizon")
        if self.replan_period % PERIOD_MINUTES != 0:
            raise ValueError("replan_period must be a multiple of the control period")


def epsilon_at(episode: int, config: LearnerConfig) -> float:
    """Linear decay from start to end over the first decay fraction of training."""
    span = max(1, int(config.episodes * config.epsilon_decay_fraction))
    if episode >= span:
        return config.epsilon_end
    return config.epsilon_start + (episode / span) * (config.epsilon_end - config.epsilon_start)


def best_variance_split(lo: Sequence[float], hi: Sequence[float],
                        samples: Sequence[tuple[tuple[float, ...], float]],
                        min_gain: float) -> tuple[int, float] | None:
    """Split candidate with the largest reduction of within-child cost variance.

    Each dimension offers two thresholds: the box midpoint and the median of
    the recorded sample positions.  The median candidate matters when the
    visited range sits entirely on one side of the midpoint (the fjord level
    only ever spans a thin slice of its configured box), where a
    midpoint-only rule could never separate anything.  Returns (dimension,
    threshold), or None when no candidate reduces the variance by at least
    ``min_gain`` of the total (in particular when all costs are identical).
    """
    costs = np.array([c for _, c in samples])
    total_var = float(np.var(costs))
    if total_var <= 0.0:
        return None
    n = len(samples)
    best: tuple[int, float] | None = None
    best_gain = 0.0
    for dim in range(len(lo)):
        mid = 0.5 * (lo[dim] + hi[dim])
        median = float(np.median([x[dim] for x, _ in samples]))
        for threshold in (mid, median):
            if not lo[dim] < threshold < hi[dim]:
                continue
            left = [c for x, c in samples if x[dim] < threshold]
            if not left or len(left) == n:
                continue
            right = [c for x, c in samples if x[dim] >= threshold]
            child_var = (len(left) * np.var(left) + len(right) * np.var(right)) / n
            gain = total_var - float(child_var)
            if gain > best_gain:
                best_gain = gain
                best = (dim, threshold)
    if best is None or best_gain < min_gain * total_var:
        return None
    return best


def refine_partition(tree: PartitionTree, branch: tuple[bool, bool], leaf: Leaf,
                     config: LearnerConfig) -> bool:
    """Split the leaf if its recorded samples justify it; True when committed.

    Children inherit the leaf's cost estimates, halve its visit statistics
    and divide its samples by position.  Nothing happens below the visit
    threshold or once the branch has reached ``max_leaves``; either way a
    declined attempt clears the sample buffer so evidence stays fresh.
    """
    if len(leaf.samples) < config.split_visit_threshold:
        return False
    if tree.leaf_count(branch) >= config.max_leaves:
        leaf.samples.clear()
        return False
    split = best_variance_split(leaf.lo, leaf.hi, leaf.samples, config.split_min_gain)
    if split is None:
        leaf.samples.clear()
        return False
    tree.split_leaf(branch, leaf, split[0], split[1])
    return True


def train(env, weights: CostWeights, config: LearnerConfig,
          state_box: tuple[tuple[float, float], ...] = DEFAULT_STATE_BOX,
          on_episode: Callable[[int, float, int, float], None] | None = None) -> PartitionTree:
    """Q-learning over ``config.episodes`` rollouts of ``env``.

    ``env`` must offer ``actions``, ``reset(rng)``, ``context()``,
    ``allowed()`` and ``step(action) -> (MonitorDeltas, done)``.  Exploration
    and updates only ever touch allowed actions; bootstrapping minimizes
    over the successor state's allowed set.  Recorded cost-to-go samples
    (immediate cost plus bootstrapped continuation) drive refinement.
    """
    env_rng = rng_for(config.seed, 30)
    explore_rng = rng_for(config.seed, 31)
    tree = PartitionTree(actions=tuple(env.actions), state_box=state_box)
    tree.meta.update({
        "label": "learned",
        "weights": list(weights.as_tuple()),
        "seed": config.seed,
        "episodes": config.episodes,
    })
    refine = config.split_visit_threshold > 0 and config.max_leaves > 1

    for episode in range(config.episodes):
        eps = epsilon_at(episode, config)
        env.reset(env_rng)
        episode_cost = 0.0
        done = env.done
        while not done:
            ctx = env.context()
            allowed = env.allowed()
            branch = (ctx.sea_higher, ctx.boat_incoming)
            leaf = tree.leaf_for(ctx)
            if len(allowed) > 1 and explore_rng.random() < eps:
                action = allowed[int(explore_rng.integers(len(allowed)))]
            else:
                q = leaf.q
                action = min(allowed, key=lambda a: (q[a], a))
            x = tree.clamp(ctx)

            deltas, done = env.step(action)
            cost = weights.combine(deltas)
            episode_cost += cost
            if done:
                target = cost
            else:
                next_leaf = tree.leaf_for(env.context())
                next_q = next_leaf.q
                target = cost + min(next_q[a] for a in env.allowed())

            n = leaf.visits[action]
            alpha = (1.0 + n) ** -config.alpha_power
            leaf.q[action] += alpha * (target - leaf.q[action])
            leaf.visits[action] = n + 1
            if refine:
                leaf.samples.append((x, target))
                if len(leaf.samples) >= config.split_visit_threshold:
                    refine_partition(tree, branch, leaf, config)

        if on_episode is not None:
            on_episode(episode, episode_cost, tree.leaf_count(), eps)

    for key in tree.branches:
        for leaf in tree.leaves(key):
            leaf.samples.clear()
    return tree


def mean_episode_cost(strategy, scenario_like, weights: CostWeights, rollouts: int,
                      seed: int, params=None, horizon_steps: int | None = None,
                      boat_mean_interarrival: float = BOAT_MEAN_INTERARRIVAL) -> float:
    """Mean total cost over seeded rollouts; seeds depend only on (seed, index)."""
    costs = [
        run_episode(scenario_like, strategy, weights, derive_seed(seed, 40, r),
                    params=params, horizon_steps=horizon_steps,
                    boat_mean_interarrival=boat_mean_interarrival).total_cost
        for r in range(rollouts)
    ]
    return float(np.mean(costs))


def select_best_of_k(candidates: Sequence[PartitionTree], scenario_like,
                     weights: CostWeights, rollouts: int = 20, seed: int = 0,
                     params=None, horizon_steps: int | None = None,
                     boat_mean_interarrival: float = BOAT_MEAN_INTERARRIVAL) -> PartitionTree:
    """The candidate with the lowest mean rollout cost; ties keep the first.

    All candidates are scored on the same rollout seeds, so the comparison
    is paired and deterministic.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    best = candidates[0]
    best_cost = math.inf
    for cand in candidates:
        cost = mean_episode_cost(cand, scenario_like, weights, rollouts, seed,
                                 params=params, horizon_steps=horizon_steps,
                                 boat_mean_interarrival=boat_mean_interarrival)
        if cost < best_cost:
            best, best_cost = cand, cost
    return best


def train_best(forecast, weights: CostWeights, config: LearnerConfig,
               params=None, boat_mean_interarrival: float = BOAT_MEAN_INTERARRIVAL,
               select_rollouts: int = 20,
               on_episode: Callable[[int, int, float, int, float], None] | None = None,
               ) -> PartitionTree:
    """Train ``config.restarts`` independent learners and keep the best.

    Restart ``i`` uses the derived seed ``derive_seed(config.seed, 101, i)``;
    selection rolls candidates out on the training forecast itself.
    ``on_episode`` receives (restart, episode, total_cost, leaves, epsilon).
    """
    horizon = min(config.horizon_steps, len(forecast.sea_level.values) - 1)
    candidates = []
    for i in range(config.restarts):
        sub = replace(config, seed=derive_seed(config.seed, 101, i), horizon_steps=horizon)
        env = FjordEnv(forecast, params=params, horizon_steps=horizon,
                       boat_mean_interarrival=boat_mean_interarrival)
        cb = None
        if on_episode is not None:
            cb = (lambda restart: lambda ep, cost, leaves, eps:
                  on_episode(restart, ep, cost, leaves, eps))(i)
        tree = train(env, weights, sub, on_episode=cb)
        tree.meta.update({"restart": i, "restarts": config.restarts})
        candidates.append(tree)
    best = select_best_of_k(candidates, forecast, weights,
                            rollouts=select_rollouts,
                            seed=derive_seed(config.seed, 102),
                            params=params, horizon_steps=horizon,
                            boat_mean_interarrival=boat_mean_interarrival)
    return best


@dataclass(frozen=True)
class SwapEvent:
    """One strategy replacement during an online run."""

    trigger_t: float
    effective_t: float


def online_run(scenario: Scenario, plan: OnlinePlan, weights: CostWeights,
               config: LearnerConfig, params=None, seed: int = 0,
               boat_mean_interarrival: float = BOAT_MEAN_INTERARRIVAL,
               ) -> tuple[EpisodeTrace, list[SwapEvent]]:
    """Operate on the true scenario while periodically retraining.

    The initial strategy is trained before operation starts, from a
    perturbed forecast of the whole horizon (perturbation seed
    ``derive_seed(seed, 7, 0)``, training seed ``derive_seed(seed, 8, 0)``).
    Every ``replan_period`` a fresh forecast anchored at the observed fjord
    level triggers retraining (seeds with index i); the new strategy takes
    effect ``learn_latency`` minutes after its trigger, the old one
    operating meanwhile.  With latency 0 and the replanning period equal to
    the horizon this degenerates to a single offline strategy operated with
    rollout seed ``seed``.
    """
    span = scenario.span
    if span < plan.horizon:
        raise ValueError("scenario must cover at least one learning horizon")
    total_steps = int(span // PERIOD_MINUTES)

    def retrain(index: int, start_minutes: float, anchor_level: float | None) -> PartitionTree:
        fc = forecast_window(scenario, start_minutes, plan.horizon,
                             seed=derive_seed(seed, 7, index),
                             initial_fjord_level=anchor_level)
        sub = replace(config, seed=derive_seed(seed, 8, index))
        return train_best(fc, weights, sub, params=params,
                          boat_mean_interarrival=boat_mean_interarrival)

    current = retrain(0, 0.0, None)
    pending: tuple[float, PartitionTree] | None = None
    swaps: list[SwapEvent] = []
    env = FjordEnv(scenario, params=params, horizon_steps=total_steps,
                   boat_mean_interarrival=boat_mean_interarrival)
    env.reset(rng_for(seed, 2))

    trace_rows = TraceRecorder(total_steps)
    w = weights.as_tuple()
    total_cost = 0.0
    replan_index = 0
    for i in range(total_steps):
        t = i * PERIOD_MINUTES
        if pending is not None and t >= pending[0]:
            current = pending[1]
            pending = None
        if t > 0 and t % plan.replan_period == 0 and t + PERIOD_MINUTES <= span:
            replan_index += 1
            new_tree = retrain(replan_index, t, env.state.h_f)
            effective = t + plan.learn_latency
            if plan.learn_latency == 0:
                current = new_tree
            else:
                pending = (effective, new_tree)
            swaps.append(SwapEvent(trigger_t=t, effective_t=effective))
        ctx = env.context()
        action = clamp_to_allowed(current.decide(ctx), env.allowed())
        trace_rows.pre(i, env.state, action)
        deltas, _ = env.step(action)
        total_cost += (w[0] * deltas.out_of_range + w[1] * deltas.accum_cost_wait
                       + w[2] * deltas.gate_changes + w[3] * deltas.no_migration)
        trace_rows.post(i, env.state.monitors)

    trace = trace_rows.build(env.state.monitors, total_cost, w, "online", seed)
    return trace, swaps
