"""Gate-control strategies: the rule-based baseline and learned partition trees.

A strategy is a deterministic, memoryless map from the controller-visible
state (flow direction, boat flag, fjord level, sea level, wind) to a gate
count.  Learned strategies are stored as one binary partition tree per
discrete (flow-direction, boat) branch, with per-action cost estimates in
the leaves, and serialize to a self-describing JSON document.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

STRATEGY_FORMAT = "fjordtwin-strategy"
STRATEGY_VERSION = 1

#: Continuous state dimensions, in tree order.
DIM_NAMES = ("h_f", "h_s", "wind")

#: Default bounds of the continuous state box; out-of-box queries clamp.
DEFAULT_STATE_BOX = ((-0.5, 0.75), (-1.5, 1.5), (0.0, 25.0))


class ControlContext(NamedTuple):
    """Controller-visible state at a decision point."""

    h_f: float
    h_s: float
    wind: float
    boat_incoming: bool

    @property
    def sea_higher(self) -> bool:
        """Flow direction: True when water would enter the fjord."""
        return self.h_s >= self.h_f


class Strategy(Protocol):
    label: str

    def decide(self, ctx: ControlContext) -> int: ...


def baseline_decide(ctx: ControlContext, num_gates: int = 14) -> int:
    """The operators' guideline controller.

    Incoming boats close everything; so does a head difference of 1 m or
    more.  Otherwise: draining (fjord higher) opens all gates while the
    fjord is above 0.0 m; filling (sea higher) stops at 0.25 m, opens all
    gates only in mixing wind (>= 8 m/s), and keeps a single gate open for
    fish migration in calmer wind.
    """
    if ctx.boat_incoming:
        return 0
    if abs(ctx.h_s - ctx.h_f) >= 1.0:
        return 0
    if ctx.h_f > ctx.h_s:
        return num_gates if ctx.h_f > 0.0 else 0
    if ctx.h_f >= 0.25:
        return 0
    return num_gates if ctx.wind >= 8.0 else 1


@dataclass(frozen=True)
class BaselineController:
    """Strategy wrapper around :func:`baseline_decide`."""

    num_gates: int = 14
    label: str = "baseline"

    def decide(self, ctx: ControlContext) -> int:
        return baseline_decide(ctx, self.num_gates)


# ---------------------------------------------------------------------------
# Partition trees
# ---------------------------------------------------------------------------

@dataclass
class Leaf:
    """Axis-aligned box with per-action cost estimates.

    Boxes are left-closed/right-open in every dimension.  ``samples`` holds
    (point, observed cost) pairs since the last refinement attempt and is
    training-only state.
    """

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    q: dict[int, float]
    visits: dict[int, int]
    samples: list[tuple[tuple[float, float, float], float]] = field(default_factory=list)

    def contains(self, x: tuple[float, float, float],
                 root_hi: tuple[float, float, float]) -> bool:
        """Box membership; the top edge counts as inside only at the root box top."""
        return all(lo <= v < hi or (v == hi == rh)
                   for v, lo, hi, rh in zip(x, self.lo, self.hi, root_hi))


@dataclass
class Node:
    """Internal split: points with x[dim] < threshold go left, others right."""

    dim: int
    threshold: float
    left: "Node | Leaf"
    right: "Node | Leaf"


BranchKey = tuple[bool, bool]  # (sea_higher, boat_incoming)


def _branch_name(key: BranchKey) -> str:
    return f"sea_higher={str(key[0]).lower()},boat={str(key[1]).lower()}"


def _branch_key(name: str) -> BranchKey:
    try:
        sea_part, boat_part = name.split(",")
        sea = {"sea_higher=true": True, "sea_higher=false": False}[sea_part]
        boat = {"boat=true": True, "boat=false": False}[boat_part]
    except (ValueError, KeyError):
        raise StrategyDocumentError(f"branches: bad branch name {name!r}") from None
    return (sea, boat)


@dataclass
class PartitionTree:
    """One partition per discrete branch over the (h_f, h_s, wind) box."""

    actions: tuple[int, ...]
    state_box: tuple[tuple[float, float], ...] = DEFAULT_STATE_BOX
    branches: dict[BranchKey, Node | Leaf] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.actions:
            raise ValueError("a tree needs at least one action")
        if not self.branches:
            lo = tuple(b[0] for b in self.state_box)
            hi = tuple(b[1] for b in self.state_box)
            for sea in (False, True):
                for boat in (False, True):
                    self.branches[(sea, boat)] = Leaf(
                        lo=lo, hi=hi,
                        q={a: 0.0 for a in self.actions},
                        visits={a: 0 for a in self.actions},
                    )

    @property
    def label(self) -> str:
        return self.meta.get("label", "learned")

    def clamp(self, ctx: ControlContext) -> tuple[float, float, float]:
        x = (ctx.h_f, ctx.h_s, ctx.wind)
        return tuple(min(max(v, lo), hi) for v, (lo, hi) in zip(x, self.state_box))

    def leaf_for(self, ctx: ControlContext) -> Leaf:
        """The unique leaf whose box contains the (clamped) context."""
        node = self.branches[(ctx.sea_higher, ctx.boat_incoming)]
        x = self.clamp(ctx)
        while isinstance(node, Node):
            node = node.left if x[node.dim] < node.threshold else node.right
        return node

    def decide(self, ctx: ControlContext) -> int:
        return tree_decide(self, ctx)

    def leaves(self, key: BranchKey) -> list[Leaf]:
        out: list[Leaf] = []
        stack: list[Node | Leaf] = [self.branches[key]]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                out.append(node)
            else:
                stack.extend((node.left, node.right))
        return out

    def leaf_count(self, key: BranchKey | None = None) -> int:
        keys = [key] if key is not None else list(self.branches)
        return sum(len(self.leaves(k)) for k in keys)

    def covering_leaves(self, key: BranchKey, x: tuple[float, float, float]) -> list[Leaf]:
        """All leaves of a branch whose box contains ``x`` (exactly one, by invariant)."""
        root_hi = tuple(b[1] for b in self.state_box)
        return [leaf for leaf in self.leaves(key) if leaf.contains(x, root_hi)]

    def split_leaf(self, key: BranchKey, leaf: Leaf, dim: int, threshold: float) -> tuple[Leaf, Leaf]:
        """Replace ``leaf`` with two children split at ``threshold`` on ``dim``.

        Children inherit the parent's cost estimates, halve its visit
        statistics, and divide its recorded samples by position.
        """
        if not leaf.lo[dim] < threshold < leaf.hi[dim]:
            raise ValueError("split threshold must lie strictly inside the leaf box")
        left_hi = list(leaf.hi)
        left_hi[dim] = threshold
        right_lo = list(leaf.lo)
        right_lo[dim] = threshold
        left = Leaf(lo=leaf.lo, hi=tuple(left_hi), q=dict(leaf.q),
                    visits={a: n // 2 for a, n in leaf.visits.items()})
        right = Leaf(lo=tuple(right_lo), hi=leaf.hi, q=dict(leaf.q),
                     visits={a: n - n // 2 for a, n in leaf.visits.items()})
        for x, cost in leaf.samples:
            (left if x[dim] < threshold else right).samples.append((x, cost))

        parent = None
        node = self.branches[key]
        while node is not leaf:
            if not isinstance(node, Node):
                raise ValueError("leaf does not belong to this branch")
            parent = node
            node = node.left if _center(leaf)[node.dim] < node.threshold else node.right
        new = Node(dim=dim, threshold=threshold, left=left, right=right)
        if parent is None:
            self.branches[key] = new
        elif parent.left is leaf:
            parent.left = new
        else:
            parent.right = new
        return left, right


def _center(leaf: Leaf) -> tuple[float, ...]:
    return tuple((l + h) / 2.0 for l, h in zip(leaf.lo, leaf.hi))


def tree_decide(tree: PartitionTree, ctx: ControlContext) -> int:
    """Cheapest action in the leaf containing the context; ties open fewer gates."""
    leaf = tree.leaf_for(ctx)
    return min(tree.actions, key=lambda a: (leaf.q[a], a))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

class StrategyDocumentError(ValueError):
    """A strategy document failed schema validation; the message names the path."""


def _node_to_doc(node: Node | Leaf) -> dict:
    if isinstance(node, Leaf):
        return {
            "q": {str(a): v for a, v in node.q.items()},
            "visits": {str(a): n for a, n in node.visits.items()},
        }
    return {
        "dim": DIM_NAMES[node.dim],
        "threshold": node.threshold,
        "left": _node_to_doc(node.left),
        "right": _node_to_doc(node.right),
    }


def save_strategy(tree: PartitionTree) -> str:
    """Serialize a tree to a stable (byte-deterministic) JSON document."""
    doc = {
        "format": STRATEGY_FORMAT,
        "version": STRATEGY_VERSION,
        "state_box": {name: list(bounds) for name, bounds in zip(DIM_NAMES, tree.state_box)},
        "actions": list(tree.actions),
        "meta": tree.meta,
        "branches": {_branch_name(k): _node_to_doc(v) for k, v in sorted(tree.branches.items())},
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise StrategyDocumentError(f"{path}: {message}")


def _node_from_doc(doc, path: str, actions: tuple[int, ...],
                   lo: tuple[float, ...], hi: tuple[float, ...]) -> Node | Leaf:
    _require(isinstance(doc, dict), path, "expected an object")
    if "q" in doc:
        q_doc = doc.get("q")
        v_doc = doc.get("visits")
        _require(isinstance(q_doc, dict), f"{path}.q", "expected an object")
        _require(isinstance(v_doc, dict), f"{path}.visits", "expected an object")
        q: dict[int, float] = {}
        visits: dict[int, int] = {}
        for a in actions:
            key = str(a)
            _require(key in q_doc, f"{path}.q", f"missing action {a}")
            _require(isinstance(q_doc[key], (int, float)) and math.isfinite(q_doc[key]),
                     f"{path}.q.{key}", "expected a finite number")
            q[a] = float(q_doc[key])
            _require(key in v_doc and isinstance(v_doc[key], int) and v_doc[key] >= 0,
                     f"{path}.visits", f"missing or invalid count for action {a}")
            visits[a] = v_doc[key]
        return Leaf(lo=lo, hi=hi, q=q, visits=visits)

    for required in ("dim", "threshold", "left", "right"):
        _require(required in doc, path, f"missing field '{required}'")
    _require(doc["dim"] in DIM_NAMES, f"{path}.dim", f"unknown dimension {doc['dim']!r}")
    dim = DIM_NAMES.index(doc["dim"])
    threshold = doc["threshold"]
    _require(isinstance(threshold, (int, float)) and math.isfinite(threshold),
             f"{path}.threshold", "expected a finite number")
    _require(lo[dim] < threshold < hi[dim], f"{path}.threshold",
             f"must lie strictly inside [{lo[dim]}, {hi[dim]})")
    left_hi = list(hi)
    left_hi[dim] = float(threshold)
    right_lo = list(lo)
    right_lo[dim] = float(threshold)
    return Node(
        dim=dim,
        threshold=float(threshold),
        left=_node_from_doc(doc["left"], f"{path}.left", actions, lo, tuple(left_hi)),
        right=_node_from_doc(doc["right"], f"{path}.right", actions, tuple(right_lo), hi),
    )


def load_strategy(document: str) -> PartitionTree:
    """Parse and validate a strategy document; never returns a partial tree."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise StrategyDocumentError(f"document is not valid JSON: {exc}") from None
    _require(isinstance(doc, dict), "$", "expected a JSON object")
    _require(doc.get("format") == STRATEGY_FORMAT, "$.format",
             f"expected {STRATEGY_FORMAT!r}")
    _require(doc.get("version") == STRATEGY_VERSION, "$.version",
             f"expected {STRATEGY_VERSION}")

    box_doc = doc.get("state_box")
    _require(isinstance(box_doc, dict), "$.state_box", "expected an object")
    box = []
    for name in DIM_NAMES:
        bounds = box_doc.get(name)
        _require(isinstance(bounds, list) and len(bounds) == 2, f"$.state_box.{name}",
                 "expected [lo, hi]")
        _require(all(isinstance(b, (int, float)) and math.isfinite(b) for b in bounds)
                 and bounds[0] < bounds[1], f"$.state_box.{name}", "expected lo < hi")
        box.append((float(bounds[0]), float(bounds[1])))

    actions_doc = doc.get("actions")
    _require(isinstance(actions_doc, list) and actions_doc
             and all(isinstance(a, int) and a >= 0 for a in actions_doc),
             "$.actions", "expected a non-empty list of gate counts")
    actions = tuple(actions_doc)

    branches_doc = doc.get("branches")
    _require(isinstance(branches_doc, dict), "$.branches", "expected an object")
    lo = tuple(b[0] for b in box)
    hi = tuple(b[1] for b in box)
    branches: dict[BranchKey, Node | Leaf] = {}
    for name, node_doc in branches_doc.items():
        key = _branch_key(name)
        branches[key] = _node_from_doc(node_doc, f"$.branches.{name}", actions, lo, hi)
    for sea in (False, True):
        for boat in (False, True):
            _require((sea, boat) in branches, "$.branches",
                     f"missing branch {_branch_name((sea, boat))!r}")

    meta = doc.get("meta", {})
    _require(isinstance(meta, dict), "$.meta", "expected an object")
    return PartitionTree(actions=actions, state_box=tuple(box), branches=branches, meta=meta)
