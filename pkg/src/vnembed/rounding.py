"""Randomized rounding of convex decompositions into integral embeddings.

The profit variant samples one mapping per request according to the
decomposition weights (embedding nothing with the leftover probability)
and accepts the first draw that keeps at least a third of the LP profit
while overloading node capacities by at most ``beta`` and edge capacities
by at most ``gamma``. The cost variant first discards mappings costing
more than twice the request's LP cost share, renormalizes, and then every
draw embeds all requests at total cost at most twice the LP cost; only
the load criteria remain random there.

Per-request randomness comes from independent PCG64 substreams seeded
with ``(seed, request_index)``, one uniform draw per try, so runs are
reproducible per request regardless of how many other requests exist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .decomposition import ConvexDecomposition
from .extraction import LabeledExtractionOrder
from .formulations import build_novel
from .lpmodel import solve
from .model import (
    EDGE,
    NODE,
    Request,
    Resource,
    SubstrateGraph,
    ValidMapping,
    collection_feasible,
    mapping_cost,
    resource_stats,
)

ACCEPT_TOL = 1e-9
WEIGHT_TOL = 1e-6
MAX_TRIES_DEFAULT = 128


@dataclass(frozen=True)
class RoundingBounds:
    epsilon: float
    delta_nodes: float
    delta_edges: float
    alpha: float
    beta: float
    gamma: float


def bounds_from_parameters(
    variant: str,
    epsilon: float,
    delta_nodes: float,
    delta_edges: float,
    num_substrate_nodes: int,
    num_types: int,
) -> RoundingBounds:
    """Closed-form tri-criteria targets.

    Profit: alpha = 1/3, beta = 1 + eps*sqrt(2*D_V*ln(|V_S|*|T|)),
    gamma = 1 + eps*sqrt(2*D_E*ln|V_S|). Cost replaces every leading
    constant by 2.
    """
    if variant not in ("profit", "cost"):
        raise ValueError(f"unknown variant {variant!r}")
    if epsilon > 1.0:
        raise ValueError(
            "demand exceeds capacity scaling assumption: "
            f"max demand/capacity ratio {epsilon:.6g} > 1"
        )
    if epsilon < 0 or delta_nodes < 0 or delta_edges < 0:
        raise ValueError("epsilon and congestion terms must be nonnegative")
    node_log = math.log(max(num_substrate_nodes * max(num_types, 1), 1))
    edge_log = math.log(max(num_substrate_nodes, 1))
    node_dev = epsilon * math.sqrt(2.0 * delta_nodes * node_log)
    edge_dev = epsilon * math.sqrt(2.0 * delta_edges * edge_log)
    base = 1.0 if variant == "profit" else 2.0
    alpha = 1.0 / 3.0 if variant == "profit" else 2.0
    return RoundingBounds(
        epsilon=epsilon,
        delta_nodes=delta_nodes,
        delta_edges=delta_edges,
        alpha=alpha,
        beta=base + node_dev,
        gamma=base + edge_dev,
    )


def compute_bounds(
    substrate: SubstrateGraph,
    requests: Sequence[Request],
    variant: str,
) -> RoundingBounds:
    """Derive tri-criteria targets from instance statistics."""
    stats = resource_stats(substrate, requests)
    types = set()
    for req in requests:
        types.update(req.referenced_types)
    return bounds_from_parameters(
        variant,
        stats.max_demand_ratio(substrate),
        stats.congestion_sum(substrate, NODE),
        stats.congestion_sum(substrate, EDGE),
        len(substrate.nodes),
        len(types),
    )


def preprocess_profit(
    substrate: SubstrateGraph,
    requests: Sequence[Request],
    labeled_orders: Sequence[LabeledExtractionOrder],
    backend: str | None = None,
) -> tuple[list[Request], list[LabeledExtractionOrder], list[str]]:
    """Drop requests that cannot be fully accepted on their own.

    Each request is solved solo against the decomposable LP; anything with
    maximum acceptance below 1 (up to tolerance) can never contribute a
    full embedding and would only dilute the rounding probabilities.
    """
    kept_requests: list[Request] = []
    kept_orders: list[LabeledExtractionOrder] = []
    dropped: list[str] = []
    for req, labeled in zip(requests, labeled_orders):
        model, index = build_novel(substrate, [req], [labeled], "profit")
        solution = solve(model, backend)
        acceptance = 0.0
        if solution.optimal:
            acceptance = float(solution.values[index.x[0]])
        if acceptance < 1.0 - WEIGHT_TOL:
            dropped.append(req.name)
        else:
            kept_requests.append(req)
            kept_orders.append(labeled)
    return kept_requests, kept_orders, dropped


@dataclass(frozen=True)
class TryRecord:
    index: int
    objective: float
    max_node_utilization: float
    max_edge_utilization: float
    accepted: bool


@dataclass
class RoundedSolution:
    variant: str
    selection: dict[str, ValidMapping | None]
    objective_value: float
    utilization: dict[Resource, float]
    accepted: bool
    tries_used: int
    seed: int
    records: list[TryRecord] = field(default_factory=list)


@dataclass(frozen=True)
class TriCriteriaReport:
    ok: bool
    objective_margin: float
    node_margin: float
    edge_margin: float


def check_tri_criteria(
    objective_value: float,
    utilization: Mapping[Resource, float],
    bounds: RoundingBounds,
    lp_optimum: float,
    variant: str,
) -> TriCriteriaReport:
    """Margins are nonnegative (within tolerance) when the criterion holds.

    Profit requires objective >= alpha * lp_optimum; cost requires
    objective <= alpha * lp_optimum. Loads must stay within beta (nodes)
    and gamma (edges) times capacity.
    """
    if variant == "profit":
        objective_margin = objective_value - bounds.alpha * lp_optimum
    else:
        objective_margin = bounds.alpha * lp_optimum - objective_value
    node_margin = math.inf
    edge_margin = math.inf
    for res, used in utilization.items():
        if res[0] == NODE:
            node_margin = min(node_margin, bounds.beta - used)
        else:
            edge_margin = min(edge_margin, bounds.gamma - used)
    ok = (
        objective_margin >= -ACCEPT_TOL
        and node_margin >= -ACCEPT_TOL
        and edge_margin >= -ACCEPT_TOL
    )
    return TriCriteriaReport(
        ok=ok,
        objective_margin=objective_margin,
        node_margin=node_margin,
        edge_margin=edge_margin,
    )


def request_streams(seed: int, count: int) -> list[np.random.Generator]:
    return [
        np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, r])))
        for r in range(count)
    ]


def sample_entry(decomposition: ConvexDecomposition, draw: float) -> int | None:
    """Index of the entry whose cumulative weight interval contains the
    draw, or None for the leftover mass."""
    acc = 0.0
    for idx, entry in enumerate(decomposition.entries):
        acc += entry.weight
        if draw < acc:
            return idx
    return None


def round_profit(
    substrate: SubstrateGraph,
    requests: Sequence[Request],
    decompositions: Sequence[ConvexDecomposition],
    bounds: RoundingBounds,
    lp_optimum: float,
    seed: int,
    max_tries: int = MAX_TRIES_DEFAULT,
) -> RoundedSolution:
    """Sample until a draw meets all three criteria or tries run out.

    The fallback after ``max_tries`` unaccepted draws is the best-profit
    sample seen, flagged ``accepted=False``. Deterministic given the seed.
    """
    if len(decompositions) != len(requests):
        raise ValueError("one decomposition per request required")
    streams = request_streams(seed, len(requests))
    records: list[TryRecord] = []
    best: RoundedSolution | None = None
    tries = 0
    for attempt in range(max(max_tries, 1)):
        tries = attempt + 1
        selection: dict[str, ValidMapping | None] = {}
        embedded = []
        profit = 0.0
        for r, req in enumerate(requests):
            pick = sample_entry(decompositions[r], streams[r].uniform())
            if pick is None:
                selection[req.name] = None
                continue
            mapping = decompositions[r].entries[pick].mapping
            selection[req.name] = mapping
            embedded.append((req, mapping))
            profit += req.profit
        _, utilization = collection_feasible(substrate, embedded)
        report = check_tri_criteria(
            profit, utilization, bounds, lp_optimum, "profit"
        )
        records.append(
            TryRecord(
                index=attempt,
                objective=profit,
                max_node_utilization=_worst(utilization, NODE),
                max_edge_utilization=_worst(utilization, EDGE),
                accepted=report.ok,
            )
        )
        candidate = RoundedSolution(
            variant="profit",
            selection=selection,
            objective_value=profit,
            utilization=utilization,
            accepted=report.ok,
            tries_used=tries,
            seed=seed,
        )
        if report.ok:
            candidate.records = records
            return candidate
        if best is None or profit > best.objective_value:
            best = candidate
    assert best is not None
    best.tries_used = tries
    best.records = records
    return best


def _worst(utilization: Mapping[Resource, float], kind: str) -> float:
    return max(
        (used for res, used in utilization.items() if res[0] == kind),
        default=0.0,
    )


@dataclass(frozen=True)
class PruneReport:
    request_name: str
    cost_share: float
    threshold: float
    surviving_weight: float
    removed: int


def prune_costly_mappings(
    substrate: SubstrateGraph,
    request: Request,
    decomposition: ConvexDecomposition,
) -> tuple[ConvexDecomposition, PruneReport]:
    """Drop entries costing more than twice the weighted average cost.

    Requires total weight 1 (the cost LP pins acceptance to 1). At least
    half the weight always survives; weights are renormalized to sum to 1
    so later sampling always embeds the request.
    """
    total = decomposition.total_weight
    if abs(total - 1.0) > WEIGHT_TOL:
        raise ValueError(
            f"request {request.name!r}: decomposition weight {total:.8f} != 1"
        )
    costs = [
        mapping_cost(substrate, request, entry.mapping)
        for entry in decomposition.entries
    ]
    cost_share = sum(
        entry.weight * c for entry, c in zip(decomposition.entries, costs)
    )
    threshold = 2.0 * cost_share
    kept = [
        entry
        for entry, c in zip(decomposition.entries, costs)
        if c <= threshold + ACCEPT_TOL
    ]
    surviving = sum(entry.weight for entry in kept)
    assert surviving >= 0.5 - WEIGHT_TOL, (
        f"surviving weight {surviving:.8f} below 1/2 for {request.name!r}"
    )
    scale = 1.0 / surviving
    normalized = ConvexDecomposition(
        request_name=decomposition.request_name,
        entries=[
            type(entry)(weight=entry.weight * scale, mapping=entry.mapping)
            for entry in kept
        ],
    )
    return normalized, PruneReport(
        request_name=request.name,
        cost_share=cost_share,
        threshold=threshold,
        surviving_weight=surviving,
        removed=len(decomposition.entries) - len(kept),
    )


def round_cost(
    substrate: SubstrateGraph,
    requests: Sequence[Request],
    decompositions: Sequence[ConvexDecomposition],
    bounds: RoundingBounds,
    lp_cost: float,
    seed: int,
    max_tries: int = MAX_TRIES_DEFAULT,
) -> RoundedSolution:
    """Sample full embeddings from pruned decompositions.

    Every draw embeds all requests and provably costs at most twice the
    LP cost (asserted); acceptance only tests the load criteria.
    """
    if len(decompositions) != len(requests):
        raise ValueError("one decomposition per request required")
    for req, dec in zip(requests, decompositions):
        if not dec.entries:
            raise ValueError(
                f"request {req.name!r} has an empty decomposition; "
                "the cost variant must embed every request"
            )
    streams = request_streams(seed, len(requests))
    records: list[TryRecord] = []
    best: RoundedSolution | None = None
    tries = 0
    for attempt in range(max(max_tries, 1)):
        tries = attempt + 1
        selection: dict[str, ValidMapping | None] = {}
        embedded = []
        cost = 0.0
        for r, req in enumerate(requests):
            pick = sample_entry(decompositions[r], streams[r].uniform())
            # renormalized weights sum to 1; leftover mass is numerical only
            if pick is None:
                pick = len(decompositions[r].entries) - 1
            mapping = decompositions[r].entries[pick].mapping
            selection[req.name] = mapping
            embedded.append((req, mapping))
            cost += mapping_cost(substrate, req, mapping)
        assert cost <= 2.0 * lp_cost + WEIGHT_TOL * max(1.0, abs(lp_cost)), (
            f"sampled cost {cost:.8f} exceeds twice the LP cost {lp_cost:.8f}"
        )
        _, utilization = collection_feasible(substrate, embedded)
        report = check_tri_criteria(cost, utilization, bounds, lp_cost, "cost")
        records.append(
            TryRecord(
                index=attempt,
                objective=cost,
                max_node_utilization=_worst(utilization, NODE),
                max_edge_utilization=_worst(utilization, EDGE),
                accepted=report.ok,
            )
        )
        candidate = RoundedSolution(
            variant="cost",
            selection=selection,
            objective_value=cost,
            utilization=utilization,
            accepted=report.ok,
            tries_used=tries,
            seed=seed,
        )
        if report.ok:
            candidate.records = records
            return candidate
        if best is None or cost < best.objective_value:
            best = candidate
    assert best is not None
    best.tries_used = tries
    best.records = records
    return best
