"""Tests for the baseline rules, partition trees, and strategy documents."""

import numpy as np
import pytest

from fjordtwin.control import (
    DEFAULT_STATE_BOX,
    BaselineController,
    ControlContext,
    Leaf,
    PartitionTree,
    StrategyDocumentError,
    baseline_decide,
    load_strategy,
    save_strategy,
    tree_decide,
)
from fjordtwin.envsim import allowed_actions


def random_context(rng) -> ControlContext:
    return ControlContext(
        h_f=float(rng.uniform(-0.5, 0.75)),
        h_s=float(rng.uniform(-1.5, 1.5)),
        wind=float(rng.uniform(0.0, 25.0)),
        boat_incoming=bool(rng.integers(2)),
    )


def random_tree(rng, n_leaves: int, actions=(0, 1, 14)) -> PartitionTree:
    """Grow a tree by splitting random leaves at random interior thresholds."""
    tree = PartitionTree(actions=actions)
    keys = list(tree.branches)
    while tree.leaf_count() < n_leaves:
        key = keys[rng.integers(len(keys))]
        leaves = tree.leaves(key)
        leaf = leaves[rng.integers(len(leaves))]
        dim = int(rng.integers(3))
        lo, hi = leaf.lo[dim], leaf.hi[dim]
        threshold = float(rng.uniform(lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)))
        left, right = tree.split_leaf(key, leaf, dim, threshold)
        for child in (left, right):
            for a in actions:
                child.q[a] = float(rng.normal())
                child.visits[a] = int(rng.integers(100))
    return tree


# --------------------------------------------------------------------------- #
# Baseline controller                                                          #
# --------------------------------------------------------------------------- #

def test_boat_closes_everything():
    ctx = ControlContext(h_f=0.1, h_s=0.05, wind=12.0, boat_incoming=True)
    assert baseline_decide(ctx) == 0


def test_single_gate_for_migration_in_calm_wind():
    ctx = ControlContext(h_f=0.10, h_s=0.30, wind=5.0, boat_incoming=False)
    assert baseline_decide(ctx) == 1


def test_drains_with_all_gates_above_zero():
    ctx = ControlContext(h_f=0.10, h_s=0.05, wind=5.0, boat_incoming=False)
    assert baseline_decide(ctx) == 14


def test_closes_on_large_head_difference():
    ctx = ControlContext(h_f=0.10, h_s=1.30, wind=12.0, boat_incoming=False)
    assert baseline_decide(ctx) == 0


def test_stops_draining_at_lower_bound():
    ctx = ControlContext(h_f=-0.01, h_s=-0.5, wind=5.0, boat_incoming=False)
    assert baseline_decide(ctx) == 0


def test_stops_filling_at_upper_bound():
    ctx = ControlContext(h_f=0.25, h_s=0.4, wind=12.0, boat_incoming=False)
    assert baseline_decide(ctx) == 0


def test_fills_with_all_gates_in_mixing_wind():
    ctx = ControlContext(h_f=0.10, h_s=0.20, wind=8.0, boat_incoming=False)
    assert baseline_decide(ctx) == 14


def test_baseline_never_violates_hard_gating():
    # Exhaustive grid over the state box: every choice must be allowed.
    for h_f in np.linspace(-0.5, 0.75, 26):
        for h_s in np.linspace(-1.5, 1.5, 41):
            for wind in np.linspace(0.0, 25.0, 11):
                for boat in (False, True):
                    ctx = ControlContext(float(h_f), float(h_s), float(wind), boat)
                    assert baseline_decide(ctx) in allowed_actions(ctx)


def test_baseline_controller_wrapper():
    ctrl = BaselineController(num_gates=14)
    ctx = ControlContext(h_f=0.10, h_s=0.05, wind=5.0, boat_incoming=False)
    assert ctrl.decide(ctx) == 14
    assert ctrl.label == "baseline"


# --------------------------------------------------------------------------- #
# Trees                                                                        #
# --------------------------------------------------------------------------- #

def test_fresh_tree_has_one_leaf_per_branch():
    tree = PartitionTree(actions=(0, 1, 14))
    assert tree.leaf_count() == 4
    for key in ((False, False), (False, True), (True, False), (True, True)):
        assert key in tree.branches


def test_single_leaf_argmin():
    tree = PartitionTree(actions=(0, 1, 14))
    ctx = ControlContext(0.1, 0.3, 5.0, False)
    leaf = tree.leaf_for(ctx)
    leaf.q.update({0: 5.0, 1: 3.0, 14: 7.0})
    assert tree_decide(tree, ctx) == 1


def test_q_tie_breaks_toward_fewer_gates():
    tree = PartitionTree(actions=(0, 1, 14))
    ctx = ControlContext(0.1, 0.3, 5.0, False)
    tree.leaf_for(ctx).q.update({0: 2.0, 1: 2.0, 14: 9.0})
    assert tree_decide(tree, ctx) == 0


def test_threshold_point_routes_right():
    tree = PartitionTree(actions=(0, 1, 14))
    key = (True, False)
    leaf = tree.branches[key]
    left, right = tree.split_leaf(key, leaf, dim=0, threshold=0.1)
    left.q.update({0: 0.0, 1: 1.0, 14: 2.0})
    right.q.update({0: 2.0, 1: 0.0, 14: 2.0})
    on_threshold = ControlContext(h_f=0.1, h_s=0.3, wind=5.0, boat_incoming=False)
    assert tree.leaf_for(on_threshold) is right
    assert tree_decide(tree, on_threshold) == 1


def test_out_of_box_context_clamps():
    tree = PartitionTree(actions=(0, 1, 14))
    ctx = ControlContext(h_f=5.0, h_s=-9.0, wind=40.0, boat_incoming=False)
    assert tree.clamp(ctx) == (0.75, -1.5, 25.0)
    assert tree.leaf_for(ctx) is not None


def test_split_threshold_must_be_interior():
    tree = PartitionTree(actions=(0, 1))
    key = (False, False)
    with pytest.raises(ValueError):
        tree.split_leaf(key, tree.branches[key], dim=0, threshold=-0.5)


def test_partition_covers_each_point_exactly_once():
    rng = np.random.default_rng(17)
    tree = random_tree(rng, 60)
    for _ in range(2000):
        ctx = random_context(rng)
        key = (ctx.sea_higher, ctx.boat_incoming)
        x = tree.clamp(ctx)
        covering = tree.covering_leaves(key, x)
        assert len(covering) == 1
        assert covering[0] is tree.leaf_for(ctx)


def test_decision_invariant_under_affine_q_rescale():
    rng = np.random.default_rng(3)
    tree = random_tree(rng, 20)
    contexts = [random_context(rng) for _ in range(300)]
    before = [tree_decide(tree, c) for c in contexts]
    for key in tree.branches:
        for leaf in tree.leaves(key):
            for a in tree.actions:
                leaf.q[a] = 3.5 * leaf.q[a] + 11.0
    after = [tree_decide(tree, c) for c in contexts]
    assert before == after


# --------------------------------------------------------------------------- #
# Serialization                                                                #
# --------------------------------------------------------------------------- #

def test_round_trip_single_leaf():
    tree = PartitionTree(actions=(0, 1, 14))
    for key in tree.branches:
        tree.branches[key].q.update({0: 1.0, 1: 2.0, 14: 3.0})
    back = load_strategy(save_strategy(tree))
    rng = np.random.default_rng(0)
    for _ in range(200):
        ctx = random_context(rng)
        assert back.decide(ctx) == tree.decide(ctx)


def test_round_trip_hundred_leaf_tree():
    rng = np.random.default_rng(23)
    tree = random_tree(rng, 100)
    back = load_strategy(save_strategy(tree))
    for _ in range(10_000):
        ctx = random_context(rng)
        assert back.decide(ctx) == tree.decide(ctx)


def test_serialization_is_byte_stable():
    rng = np.random.default_rng(29)
    tree = random_tree(rng, 30)
    assert save_strategy(tree) == save_strategy(load_strategy(save_strategy(tree)))


def test_truncated_document_rejected():
    tree = PartitionTree(actions=(0, 1, 14))
    doc = save_strategy(tree)
    with pytest.raises(StrategyDocumentError):
        load_strategy(doc[: len(doc) // 2])


def test_schema_violations_name_the_path():
    import json

    tree = PartitionTree(actions=(0, 1, 14))
    doc = json.loads(save_strategy(tree))

    bad = dict(doc, format="other")
    with pytest.raises(StrategyDocumentError, match=r"\$\.format"):
        load_strategy(json.dumps(bad))

    bad = json.loads(save_strategy(tree))
    del bad["branches"]["sea_higher=true,boat=false"]["q"]["14"]
    with pytest.raises(StrategyDocumentError, match=r"\$\.branches\..*\.q"):
        load_strategy(json.dumps(bad))

    bad = json.loads(save_strategy(tree))
    bad["state_box"]["wind"] = [0.0]
    with pytest.raises(StrategyDocumentError, match=r"\$\.state_box\.wind"):
        load_strategy(json.dumps(bad))

    bad = json.loads(save_strategy(tree))
    bad["branches"]["sea_higher=false,boat=false"] = {
        "dim": "h_f", "threshold": 99.0,
        "left": {"q": {"0": 0, "1": 0, "14": 0}, "visits": {"0": 0, "1": 0, "14": 0}},
        "right": {"q": {"0": 0, "1": 0, "14": 0}, "visits": {"0": 0, "1": 0, "14": 0}},
    }
    with pytest.raises(StrategyDocumentError, match=r"threshold"):
        load_strategy(json.dumps(bad))


def test_missing_branch_rejected():
    tree = PartitionTree(actions=(0, 1))
    doc = save_strategy(tree)
    broken = doc.replace('"sea_higher=true,boat=true"', '"sea_higher=true,boat=extra"')
    with pytest.raises(StrategyDocumentError):
        load_strategy(broken)
