"""Extracting convex combinations of valid mappings from LP solutions.

Both extractors repeatedly peel off one mapping: map the root somewhere
its host variable is positive, walk the order, route every request edge
along positive flow, take the minimum over all participating variables as
the mapping's weight, and subtract. For tree requests this works directly
on the flow relaxation. For general requests it works on the decomposable
LP, where bag variables pin the hosts of confluence targets before the
paths towards them are extracted, which is exactly what makes the loop
sound there.

All comparisons use an epsilon of ``EPS``; residual acceptance below
``LOOP_EPS`` ends extraction (the leftover is far below the completeness
tolerance of verification). Iterations that would produce a weight under
``WEIGHT_FLOOR`` only clear numerical dust and emit no entry.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .extraction import ExtractionOrder, LabeledExtractionOrder
from .formulations import McfState, NovelState
from .model import (
    Request,
    Resource,
    SubstrateGraph,
    ValidMapping,
    check_valid_mapping,
    compute_allocations,
)

EPS = 1e-9
LOOP_EPS = 1e-7
WEIGHT_FLOOR = 1e-9


class DecompositionError(Exception):
    pass


class MappingConflictError(DecompositionError):
    """A request node was forced onto two distinct substrate hosts."""


class DecompositionStuckError(DecompositionError):
    """No positive variable admits further extraction progress."""


@dataclass(frozen=True)
class DecompositionEntry:
    weight: float
    mapping: ValidMapping


@dataclass
class ConvexDecomposition:
    request_name: str
    entries: list[DecompositionEntry]

    @property
    def total_weight(self) -> float:
        return sum(entry.weight for entry in self.entries)


def find_connectivity_path(
    flows: Mapping[tuple[str, str], float],
    endpoint_value: Callable[[str], float],
    start: str,
    direction: str = "forward",
    target: str | None = None,
    eps: float = EPS,
) -> list[tuple[str, str]]:
    """Shortest path over positive flow from ``start`` to a viable endpoint.

    Forward searches travel along flow edges, reverse searches against
    them; either way the returned edges are in forward orientation and
    travel order. Without a ``target`` any node whose ``endpoint_value``
    exceeds ``eps`` succeeds (the start itself yields the empty path);
    with one, only the target does. Raises when nothing is reachable,
    which means flow conservation does not hold.
    """
    if direction not in ("forward", "reverse"):
        raise ValueError(f"unknown direction {direction!r}")
    forward = direction == "forward"

    def success(node: str) -> bool:
        if target is not None:
            return node == target
        return endpoint_value(node) > eps

    if success(start):
        return []
    adjacency: dict[str, list[tuple[str, tuple[str, str]]]] = {}
    for se in sorted(flows):
        if flows[se] <= eps:
            continue
        here, there = (se[0], se[1]) if forward else (se[1], se[0])
        adjacency.setdefault(here, []).append((there, se))
    parent: dict[str, tuple[str, tuple[str, str]]] = {}
    queue = deque([start])
    seen = {start}
    found: str | None = None
    while queue and found is None:
        at = queue.popleft()
        for nxt, se in adjacency.get(at, ()):
            if nxt in seen:
                continue
            seen.add(nxt)
            parent[nxt] = (at, se)
            if success(nxt):
                found = nxt
                break
            queue.append(nxt)
    if found is None:
        raise DecompositionError(
            f"no positive-flow path from {start!r} to "
            f"{'target ' + repr(target) if target else 'any positive endpoint'}"
        )
    hops: list[tuple[str, str]] = []
    node = found
    while node != start:
        node, se = parent[node]
        hops.append(se)
    hops.reverse()
    return hops if forward else list(reversed(hops))


def _positive_choice(values: Sequence[tuple[str, float]]) -> str | None:
    for key, val in values:
        if val > EPS:
            return key
    return None


class _Extraction:
    """Shared bookkeeping for one extraction pass: covered variables and
    their residual values."""

    def __init__(self):
        self.keys: list[tuple] = []
        self.seen: set[tuple] = set()

    def cover(self, key: tuple) -> None:
        if key not in self.seen:
            self.seen.add(key)
            self.keys.append(key)


def decompose_mcf_tree(
    substrate: SubstrateGraph,
    request: Request,
    order: ExtractionOrder,
    state: McfState,
    check_tree: bool = True,
) -> ConvexDecomposition:
    """Peel a flow solution of a tree request into weighted valid mappings.

    With ``check_tree`` disabled the loop runs on arbitrary requests; on
    cyclic ones it generally fails with a ``MappingConflictError`` because
    plain flow solutions need not be decomposable there.
    """
    if check_tree and len(request.edges) != len(request.nodes) - 1:
        raise DecompositionError(
            f"request {request.name!r} is not a tree; use the decomposable LP"
        )
    entries: list[DecompositionEntry] = []
    max_rounds = 100 + 2 * (
        1 + len(state.y) + sum(len(f) for f in state.z.values())
    )
    rounds = 0
    while state.x > LOOP_EPS:
        rounds += 1
        if rounds > max_rounds:
            raise DecompositionStuckError("extraction makes no progress")
        tracker = _Extraction()
        tracker.cover(("x",))
        root = order.root
        u0 = _positive_choice(
            [(u, state.y.get((root, u), 0.0)) for u in request.allowed_nodes[root]]
        )
        if u0 is None:
            raise DecompositionStuckError(
                f"acceptance is {state.x:.3g} but the root has no positive host"
            )
        node_map: dict[str, str] = {root: u0}
        edge_map: dict[tuple[str, str], tuple[tuple[str, str], ...]] = {}
        queue = [root]
        while queue:
            queue.sort(key=order.node_index.__getitem__)
            i = queue.pop(0)
            for k in order.out_edges[i]:
                oe = order.edges[k]
                e = oe.original
                j = oe.head
                flows = state.z[e]
                known = node_map.get(j)
                try:
                    path = find_connectivity_path(
                        flows,
                        lambda u: state.y.get((j, u), 0.0),
                        node_map[i],
                        direction="forward" if not oe.reversed else "reverse",
                        target=known,
                    )
                except DecompositionError as err:
                    if known is not None:
                        raise MappingConflictError(
                            f"node {j!r} is already on {known!r} but edge {e} "
                            f"cannot be routed there: {err}"
                        ) from err
                    raise
                if path:
                    endpoint = path[-1][1] if not oe.reversed else path[0][0]
                else:
                    endpoint = node_map[i]
                if j not in node_map:
                    node_map[j] = endpoint
                    queue.append(j)
                edge_map[e] = tuple(path)
                for se in path:
                    tracker.cover(("z", e, se))
        if len(edge_map) != len(request.edges):
            raise DecompositionError(
                "extraction order does not reach every request edge"
            )
        for i in request.nodes:
            tracker.cover(("y", i, node_map[i]))
        mapping = ValidMapping(node_map=node_map, edge_map=edge_map)
        if not _apply_extraction(
            substrate, request, state, tracker, mapping, entries, _mcf_value,
            _mcf_decrement,
        ):
            continue
    return ConvexDecomposition(request_name=request.name, entries=entries)


def _mcf_value(state: McfState, key: tuple) -> float:
    if key[0] == "x":
        return state.x
    if key[0] == "y":
        return state.y.get((key[1], key[2]), 0.0)
    return state.z[key[1]].get(key[2], 0.0)


def _mcf_decrement(state: McfState, key: tuple, amount: float) -> None:
    if key[0] == "x":
        state.x = _clamp(state.x - amount)
    elif key[0] == "y":
        k = (key[1], key[2])
        state.y[k] = _clamp(state.y[k] - amount)
    else:
        state.z[key[1]][key[2]] = _clamp(state.z[key[1]][key[2]] - amount)


def _clamp(v: float) -> float:
    return 0.0 if v < EPS else v


def _apply_extraction(
    substrate,
    request,
    state,
    tracker: _Extraction,
    mapping: ValidMapping,
    entries: list[DecompositionEntry],
    value_of,
    decrement,
    sub_loads: Sequence[tuple[tuple, float]] = (),
) -> bool:
    """Take the bottleneck weight, subtract it everywhere, record the entry.

    ``sub_loads`` lists (sub-allocation key, amount per unit weight) pairs
    to subtract from ``state.sub_a`` alongside the global loads. Returns
    False for dust rounds that only cleared a near-zero variable.
    """
    ok, why = check_valid_mapping(substrate, request, mapping)
    if not ok:
        raise DecompositionError(f"extracted mapping invalid: {why}")
    weight = min(value_of(state, key) for key in tracker.keys)
    if weight <= WEIGHT_FLOOR:
        argmin = min(tracker.keys, key=lambda key: value_of(state, key))
        decrement(state, argmin, value_of(state, argmin))
        return False
    for key in tracker.keys:
        decrement(state, key, weight)
    allocations = compute_allocations(substrate, request, mapping)
    for res, amount in allocations.items():
        state.a[res] = state.a.get(res, 0.0) - weight * amount
    for sub_key, amount in sub_loads:
        state.sub_a[sub_key] = state.sub_a.get(sub_key, 0.0) - weight * amount
    entries.append(DecompositionEntry(weight=weight, mapping=mapping))
    return True


def decompose_novel(
    substrate: SubstrateGraph,
    request: Request,
    labeled: LabeledExtractionOrder,
    state: NovelState,
) -> ConvexDecomposition:
    """Peel a decomposable-LP solution into weighted valid mappings.

    Per node the bag variables are consulted first: a positive bag mapping
    consistent with everything mapped so far fixes the hosts of the bag's
    labels, after which each bag edge is routed inside the sub-LP copy
    selected by its own label hosts. A node enters the work queue once all
    its incoming edges are routed.
    """
    order = labeled.order
    entries: list[DecompositionEntry] = []
    max_rounds = 100 + 2 * (
        1
        + len(state.y)
        + len(state.gamma)
        + len(state.sub_x)
        + len(state.sub_y)
        + sum(len(f) for f in state.sub_z.values())
    )
    rounds = 0
    while state.x > LOOP_EPS:
        rounds += 1
        if rounds > max_rounds:
            raise DecompositionStuckError("extraction makes no progress")
        tracker = _Extraction()
        tracker.cover(("x",))
        root = order.root
        u0 = _positive_choice(
            [(u, state.y.get((root, u), 0.0)) for u in request.allowed_nodes[root]]
        )
        if u0 is None:
            raise DecompositionStuckError(
                f"acceptance is {state.x:.3g} but the root has no positive host"
            )
        node_map: dict[str, str] = {root: u0}
        edge_map: dict[tuple[str, str], tuple[tuple[str, str], ...]] = {}
        mu_chosen: dict[int, tuple[str, ...]] = {}
        pending_in = {i: len(order.in_edges[i]) for i in order.nodes}
        queue = [root]
        while queue:
            queue.sort(key=order.node_index.__getitem__)
            i = queue.pop(0)
            u = node_map[i]
            for bi, bag in enumerate(labeled.bags[i]):
                assign = _choose_bag_mapping(state, i, bi, u, bag.labels, node_map)
                if assign is None:
                    raise DecompositionStuckError(
                        f"no positive bag mapping at node {i!r} (bag {bi}) "
                        f"consistent with {node_map}"
                    )
                for l, v in zip(bag.labels, assign):
                    node_map.setdefault(l, v)
                tracker.cover(("gamma", i, bi, assign, u))
                for k in bag.edges:
                    oe = order.edges[k]
                    e = oe.original
                    j = oe.head
                    labels_e = labeled.labels[k]
                    mu = tuple(node_map[l] for l in labels_e)
                    mu_chosen[k] = mu
                    flows = state.sub_z.get((k, mu), {})
                    known = node_map.get(j)
                    try:
                        path = find_connectivity_path(
                            flows,
                            lambda w: state.sub_y.get((k, mu, j, w), 0.0),
                            u,
                            direction="forward" if not oe.reversed else "reverse",
                            target=known,
                        )
                    except DecompositionError as err:
                        if known is not None:
                            raise MappingConflictError(
                                f"node {j!r} is already on {known!r} but edge {e} "
                                f"cannot be routed there: {err}"
                            ) from err
                        raise
                    if path:
                        endpoint = path[-1][1] if not oe.reversed else path[0][0]
                    else:
                        endpoint = u
                    node_map.setdefault(j, endpoint)
                    edge_map[e] = tuple(path)
                    tracker.cover(("sx", k, mu))
                    for n in e:
                        tracker.cover(("sy", k, mu, n, node_map[n]))
                    for se in path:
                        tracker.cover(("sz", k, mu, se))
                    pending_in[j] -= 1
                    if pending_in[j] == 0:
                        queue.append(j)
        if len(edge_map) != len(request.edges):
            raise DecompositionError(
                "extraction order does not reach every request edge"
            )
        for i in request.nodes:
            tracker.cover(("y", i, node_map[i]))
        mapping = ValidMapping(node_map=node_map, edge_map=edge_map)
        sub_loads = []
        for k, e in enumerate(request.edges):
            demand = request.edge_demand[e]
            for se in edge_map[e]:
                sub_loads.append(((k, mu_chosen[k], se), demand))
        if not _apply_extraction(
            substrate, request, state, tracker, mapping, entries, _novel_value,
            _novel_decrement, sub_loads,
        ):
            continue
    return ConvexDecomposition(request_name=request.name, entries=entries)


def _choose_bag_mapping(
    state: NovelState,
    node: str,
    bag_index: int,
    host: str,
    bag_labels: tuple[str, ...],
    node_map: dict[str, str],
) -> tuple[str, ...] | None:
    candidates = []
    for (n, bi, assign, u), val in state.gamma.items():
        if n != node or bi != bag_index or u != host or val <= EPS:
            continue
        if any(
            l in node_map and node_map[l] != v for l, v in zip(bag_labels, assign)
        ):
            continue
        candidates.append(assign)
    if not candidates:
        return None
    return min(candidates)


def _novel_value(state: NovelState, key: tuple) -> float:
    kind = key[0]
    if kind == "x":
        return state.x
    if kind == "y":
        return state.y.get((key[1], key[2]), 0.0)
    if kind == "gamma":
        return state.gamma.get(key[1:], 0.0)
    if kind == "sx":
        return state.sub_x.get(key[1:], 0.0)
    if kind == "sy":
        return state.sub_y.get(key[1:], 0.0)
    return state.sub_z[(key[1], key[2])].get(key[3], 0.0)


def _novel_decrement(state: NovelState, key: tuple, amount: float) -> None:
    kind = key[0]
    if kind == "x":
        state.x = _clamp(state.x - amount)
    elif kind == "y":
        k = (key[1], key[2])
        state.y[k] = _clamp(state.y[k] - amount)
    elif kind == "gamma":
        state.gamma[key[1:]] = _clamp(state.gamma[key[1:]] - amount)
    elif kind == "sx":
        state.sub_x[key[1:]] = _clamp(state.sub_x[key[1:]] - amount)
    elif kind == "sy":
        state.sub_y[key[1:]] = _clamp(state.sub_y[key[1:]] - amount)
    else:
        flows = state.sub_z[(key[1], key[2])]
        flows[key[3]] = _clamp(flows[key[3]] - amount)


@dataclass
class DecompositionCheck:
    completeness_error: float
    worst_overuse: float
    invalid: list[str]

    @property
    def ok(self) -> bool:
        return (
            self.completeness_error <= 1e-6
            and self.worst_overuse <= 1e-6
            and not self.invalid
        )


def verify_decomposition(
    substrate: SubstrateGraph,
    request: Request,
    decomposition: ConvexDecomposition,
    x_value: float,
    load_values: Mapping[Resource, float],
) -> DecompositionCheck:
    """Check completeness, per-resource domination by the LP loads, and
    validity of every extracted mapping."""
    invalid = []
    used: dict[Resource, float] = {}
    for idx, entry in enumerate(decomposition.entries):
        ok, why = check_valid_mapping(substrate, request, entry.mapping)
        if not ok:
            invalid.append(f"entry {idx}: {why}")
            continue
        for res, amount in compute_allocations(
            substrate, request, entry.mapping
        ).items():
            used[res] = used.get(res, 0.0) + entry.weight * amount
    worst = 0.0
    for res, total in used.items():
        worst = max(worst, total - load_values.get(res, 0.0))
    return DecompositionCheck(
        completeness_error=abs(decomposition.total_weight - x_value),
        worst_overuse=worst,
        invalid=invalid,
    )
