"""Training a gate controller and comparing it with the baseline.

Perturbs the high-water scenario into a forecast, trains a small best-of-2
batch of partition-tree learners on it (a few hundred episodes keeps this
demo around a minute), then evaluates both controllers on the unperturbed
scenario with stochastic boat traffic.
"""

import numpy as np

from fjordtwin import (
    BaselineController,
    CostWeights,
    LearnerConfig,
    make_tidal_scenario,
    metrics_from_trace,
    perturb_forecast,
    run_episode,
    save_strategy,
    train_best,
)
from fjordtwin.util import derive_seed

weights = CostWeights()          # safety weight 1e6 dwarfs the performance terms
scenario = make_tidal_scenario("high", seed=1)
forecast = perturb_forecast(scenario, seed=5)

config = LearnerConfig(episodes=400, restarts=2, seed=3)
print(f"training {config.restarts} learners x {config.episodes} episodes ...")
tree = train_best(forecast, weights, config)
print(f"kept restart {tree.meta['restart']} with {tree.leaf_count()} leaves\n")

for name, controller in (("baseline", BaselineController()), ("learned", tree)):
    safety, costs, ops = [], [], []
    for r in range(30):
        trace = run_episode(scenario, controller, weights, derive_seed(0, 40, r))
        m = metrics_from_trace(trace)
        safety.append(m.safety_pct)
        costs.append(trace.total_cost)
        ops.append(m.gate_operations)
    print(f"{name:>8}: safety {np.mean(safety):6.2f}%  mean cost {np.mean(costs):12.3g}  "
          f"operations {np.mean(ops):.1f}")

print("\nthe learned strategy serializes to a JSON document:")
doc = save_strategy(tree)
print(doc[:400] + " ...")
