"""LP formulations for fractional virtual network embedding.

Two relaxations are built here.

``build_mcf`` is the classical multi-commodity flow relaxation: one unit
flow per request edge between the fractional host distributions of its
endpoints. It is compact but its solutions are generally not decomposable
into convex combinations of valid mappings once request graphs contain
cycles and routing restrictions.

``build_novel`` is the decomposable relaxation driven by a labeled
extraction order. For every request edge it instantiates one single-edge
flow sub-LP per mapping of the edge's confluence-target labels onto
substrate nodes, and couples the copies of a node's outgoing edge bags
through shared bag variables (``gamma``). Solutions of this LP always
decompose into valid mappings; its size grows with ``|V_S|`` to the power
of the order's width.

Variable blocks are laid out per request in a fixed, documented order
(global x, then y, then per-edge sub-blocks, then bag variables, then load
variables), so indices, solution files and exported models are stable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .extraction import LabeledExtractionOrder
from .lpmodel import EQ, LE, MAXIMIZE, MINIMIZE, LPModel
from .model import (
    Request,
    Resource,
    SubstrateGraph,
    ValidMapping,
    compute_allocations,
    edge_resource,
    node_resource,
)


class BudgetExceededError(Exception):
    """The decomposable LP would exceed the configured variable budget."""

    def __init__(self, required: int, budget: int):
        super().__init__(
            f"formulation needs {required} variables, budget allows {budget}"
        )
        self.required = required
        self.budget = budget


@dataclass
class McfState:
    """Mutable per-request slice of an MCF solution, used for extraction."""

    x: float
    y: dict[tuple[str, str], float]
    z: dict[tuple[str, str], dict[tuple[str, str], float]]
    a: dict[Resource, float]


@dataclass
class NovelState:
    """Mutable per-request slice of a decomposable-LP solution."""

    x: float
    y: dict[tuple[str, str], float]
    gamma: dict[tuple, float]
    sub_x: dict[tuple, float]
    sub_y: dict[tuple, float]
    sub_z: dict[tuple, dict[tuple[str, str], float]]
    sub_a: dict[tuple, float]
    a: dict[Resource, float]


class McfVariableIndex:
    """Keeps the variable layout of an MCF model addressable by meaning."""

    def __init__(self, substrate: SubstrateGraph, requests: Sequence[Request]):
        self.substrate = substrate
        self.requests = list(requests)
        self.x: list[int] = []
        self.y: list[dict[tuple[str, str], int]] = []
        self.z: list[dict[tuple[str, str], dict[tuple[str, str], int]]] = []
        self.a: list[dict[Resource, int]] = []

    def request_state(self, values: np.ndarray, r: int) -> McfState:
        return McfState(
            x=float(values[self.x[r]]),
            y={k: float(values[i]) for k, i in self.y[r].items()},
            z={
                e: {se: float(values[i]) for se, i in per_edge.items()}
                for e, per_edge in self.z[r].items()
            },
            a={k: float(values[i]) for k, i in self.a[r].items()},
        )


def build_mcf(
    substrate: SubstrateGraph,
    requests: Sequence[Request],
    objective: str = "profit",
) -> tuple[LPModel, McfVariableIndex]:
    """Multi-commodity flow relaxation over all requests.

    ``objective`` is ``"profit"`` (maximize accepted profit, acceptance
    fractional) or ``"cost"`` (minimize allocation cost, full acceptance
    forced).
    """
    if objective not in ("profit", "cost"):
        raise ValueError(f"unknown objective {objective!r}")
    model = LPModel(sense=MAXIMIZE if objective == "profit" else MINIMIZE)
    index = McfVariableIndex(substrate, requests)
    for r, req in enumerate(requests):
        x = model.add_variable(f"r{r}_x", 0.0, 1.0)
        index.x.append(x)
        ys: dict[tuple[str, str], int] = {}
        for i in req.nodes:
            for u in req.allowed_nodes[i]:
                ys[(i, u)] = model.add_variable(f"r{r}_y_n{req.node_index[i]}_s{substrate.node_index[u]}", 0.0, 1.0)
        index.y.append(ys)
        zs: dict[tuple[str, str], dict[tuple[str, str], int]] = {}
        for e in req.edges:
            per_edge = {}
            for se in req.allowed_edges[e]:
                per_edge[se] = model.add_variable(
                    f"r{r}_z_e{req.edge_index[e]}_se{substrate.edge_index[se]}", 0.0, 1.0
                )
            zs[e] = per_edge
        index.z.append(zs)
        loads: dict[Resource, int] = {}
        for k, res in enumerate(substrate.resources):
            loads[res] = model.add_variable(f"r{r}_a_res{k}", 0.0, None)
        index.a.append(loads)

        for i in req.nodes:
            model.add_constraint(
                f"r{r}_embed_n{req.node_index[i]}",
                [(ys[(i, u)], 1.0) for u in req.allowed_nodes[i]] + [(x, -1.0)],
                EQ,
                0.0,
            )
        for e in req.edges:
            i, j = e
            per_edge = zs[e]
            for w in substrate.nodes:
                coeffs: list[tuple[int, float]] = []
                for se in req.allowed_edges[e]:
                    if se[0] == w:
                        coeffs.append((per_edge[se], 1.0))
                    if se[1] == w:
                        coeffs.append((per_edge[se], -1.0))
                if (i, w) in ys:
                    coeffs.append((ys[(i, w)], -1.0))
                if (j, w) in ys:
                    coeffs.append((ys[(j, w)], 1.0))
                if coeffs:
                    model.add_constraint(
                        f"r{r}_flow_e{req.edge_index[e]}_s{substrate.node_index[w]}",
                        coeffs,
                        EQ,
                        0.0,
                    )
        for se in substrate.edges:
            coeffs = [(loads[edge_resource(*se)], -1.0)]
            for e in req.edges:
                if se in zs[e]:
                    coeffs.append((zs[e][se], req.edge_demand[e]))
            model.add_constraint(
                f"r{r}_load_se{substrate.edge_index[se]}", coeffs, EQ, 0.0
            )
        for t in substrate.types:
            for u in substrate.typed_nodes[t]:
                res = node_resource(t, u)
                coeffs = [(loads[res], -1.0)]
                for i in req.nodes:
                    if req.node_type[i] == t and (i, u) in ys:
                        coeffs.append((ys[(i, u)], req.node_demand[i]))
                model.add_constraint(
                    f"r{r}_load_n{t}_{substrate.node_index[u]}", coeffs, EQ, 0.0
                )
        if objective == "profit":
            model.set_objective_coefficient(x, req.profit)
        else:
            model.add_constraint(f"r{r}_accept", [(x, 1.0)], EQ, 1.0)
    _add_capacity_rows(model, substrate, index.a)
    if objective == "cost":
        for loads in index.a:
            for res, var in loads.items():
                model.set_objective_coefficient(var, substrate.cost(res))
    return model, index


def _add_capacity_rows(
    model: LPModel,
    substrate: SubstrateGraph,
    per_request_loads: Sequence[Mapping[Resource, int]],
) -> None:
    for k, res in enumerate(substrate.resources):
        coeffs = [(loads[res], 1.0) for loads in per_request_loads]
        model.add_constraint(f"cap_res{k}", coeffs, LE, substrate.capacity(res))


def _mappings_of(labels: Sequence[str], req: Request) -> list[tuple[str, ...]]:
    """All placements of a label tuple onto allowed substrate nodes."""
    return [
        tuple(combo)
        for combo in itertools.product(*(req.allowed_nodes[l] for l in labels))
    ]


class NovelVariableIndex:
    """Variable layout and order metadata of the decomposable LP."""

    def __init__(
        self,
        substrate: SubstrateGraph,
        requests: Sequence[Request],
        orders: Sequence[LabeledExtractionOrder],
    ):
        self.substrate = substrate
        self.requests = list(requests)
        self.orders = list(orders)
        self.x: list[int] = []
        self.y: list[dict[tuple[str, str], int]] = []
        self.a: list[dict[Resource, int]] = []
        # Per request: labels per edge index, label mappings per edge index,
        # and bag mappings keyed by (node, bag position).
        self.edge_labels: list[list[tuple[str, ...]]] = []
        self.edge_mus: list[list[list[tuple[str, ...]]]] = []
        self.bag_mus: list[dict[tuple[str, int], list[tuple[str, ...]]]] = []
        self.sub_x: list[dict[tuple, int]] = []
        self.sub_y: list[dict[tuple, int]] = []
        self.sub_z: list[dict[tuple, dict[tuple[str, str], int]]] = []
        self.sub_a: list[dict[tuple, int]] = []
        self.gamma: list[dict[tuple, int]] = []
        self.num_variables: int = 0

    def request_state(self, values: np.ndarray, r: int) -> NovelState:
        return NovelState(
            x=float(values[self.x[r]]),
            y={k: float(values[i]) for k, i in self.y[r].items()},
            gamma={k: float(values[i]) for k, i in self.gamma[r].items()},
            sub_x={k: float(values[i]) for k, i in self.sub_x[r].items()},
            sub_y={k: float(values[i]) for k, i in self.sub_y[r].items()},
            sub_z={
                key: {se: float(values[i]) for se, i in flows.items()}
                for key, flows in self.sub_z[r].items()
            },
            sub_a={k: float(values[i]) for k, i in self.sub_a[r].items()},
            a={k: float(values[i]) for k, i in self.a[r].items()},
        )


def count_novel_variables(
    substrate: SubstrateGraph,
    requests: Sequence[Request],
    orders: Sequence[LabeledExtractionOrder],
) -> int:
    """Exact variable count of ``build_novel`` without building it."""
    total = 0
    n_resources = len(substrate.resources)
    for req, labeled in zip(requests, orders):
        total += 1  # x
        total += sum(len(req.allowed_nodes[i]) for i in req.nodes)
        total += n_resources
        for k, e in enumerate(req.edges):
            labels = labeled.labels[k]
            n_mu = 1
            for l in labels:
                n_mu *= len(req.allowed_nodes[l])
            per_mu = 1 + 2 * len(req.allowed_edges[e])
            for endpoint in e:
                per_mu += 1 if endpoint in labels else len(req.allowed_nodes[endpoint])
            total += n_mu * per_mu
        for node in labeled.order.nodes:
            for bag in labeled.bags[node]:
                n_bag = 1
                for l in bag.labels:
                    n_bag *= len(req.allowed_nodes[l])
                total += n_bag * len(req.allowed_nodes[node])
    return total


def build_novel(
    substrate: SubstrateGraph,
    requests: Sequence[Request],
    orders: Sequence[LabeledExtractionOrder],
    objective: str = "profit",
    var_budget: int | None = None,
) -> tuple[LPModel, NovelVariableIndex]:
    """Decomposable LP relaxation driven by labeled extraction orders.

    ``orders`` must align with ``requests`` (same node/edge sets; edge
    ``k`` of the order reorients edge ``k`` of the request).
    """
    if objective not in ("profit", "cost"):
        raise ValueError(f"unknown objective {objective!r}")
    if len(orders) != len(requests):
        raise ValueError("one labeled order per request required")
    for req, labeled in zip(requests, orders):
        if labeled.order.nodes != req.nodes or any(
            oe.original != e for oe, e in zip(labeled.order.edges, req.edges)
        ):
            raise ValueError(f"order does not match request {req.name!r}")
    if var_budget is not None:
        required = count_novel_variables(substrate, requests, orders)
        if required > var_budget:
            raise BudgetExceededError(required=required, budget=var_budget)

    model = LPModel(sense=MAXIMIZE if objective == "profit" else MINIMIZE)
    index = NovelVariableIndex(substrate, requests, orders)
    sidx = substrate.node_index
    seidx = substrate.edge_index

    for r, (req, labeled) in enumerate(zip(requests, orders)):
        order = labeled.order
        x = model.add_variable(f"r{r}_x", 0.0, 1.0)
        index.x.append(x)
        ys: dict[tuple[str, str], int] = {}
        for i in req.nodes:
            for u in req.allowed_nodes[i]:
                ys[(i, u)] = model.add_variable(
                    f"r{r}_y_n{req.node_index[i]}_s{sidx[u]}", 0.0, 1.0
                )
        index.y.append(ys)

        edge_labels = [labeled.labels[k] for k in range(len(req.edges))]
        edge_mus = [_mappings_of(labels, req) for labels in edge_labels]
        index.edge_labels.append(edge_labels)
        index.edge_mus.append(edge_mus)

        sxs: dict[tuple, int] = {}
        sys_: dict[tuple, int] = {}
        szs: dict[tuple, dict[tuple[str, str], int]] = {}
        sas: dict[tuple, int] = {}
        for k, e in enumerate(req.edges):
            labels = edge_labels[k]
            allowed = req.allowed_edges[e]
            for mu in edge_mus[k]:
                tag = f"r{r}_e{k}m" + "_".join(str(sidx[u]) for u in mu)
                key = (k, mu)
                sxs[key] = model.add_variable(f"{tag}_x", 0.0, 1.0)
                for n in e:
                    if n in labels:
                        hosts: tuple[str, ...] = (mu[labels.index(n)],)
                    else:
                        hosts = req.allowed_nodes[n]
                    for u in hosts:
                        sys_[(k, mu, n, u)] = model.add_variable(
                            f"{tag}_y_n{req.node_index[n]}_s{sidx[u]}", 0.0, 1.0
                        )
                flows: dict[tuple[str, str], int] = {}
                for se in allowed:
                    flows[se] = model.add_variable(
                        f"{tag}_z_se{seidx[se]}", 0.0, 1.0
                    )
                szs[key] = flows
                for se in allowed:
                    sas[(k, mu, se)] = model.add_variable(
                        f"{tag}_a_se{seidx[se]}", 0.0, None
                    )
        index.sub_x.append(sxs)
        index.sub_y.append(sys_)
        index.sub_z.append(szs)
        index.sub_a.append(sas)

        bag_mus: dict[tuple[str, int], list[tuple[str, ...]]] = {}
        gammas: dict[tuple, int] = {}
        for node in order.nodes:
            for bi, bag in enumerate(labeled.bags[node]):
                mus = _mappings_of(bag.labels, req)
                bag_mus[(node, bi)] = mus
                for mi, assign in enumerate(mus):
                    for u in req.allowed_nodes[node]:
                        gammas[(node, bi, assign, u)] = model.add_variable(
                            f"r{r}_g_n{req.node_index[node]}_b{bi}_m{mi}_s{sidx[u]}",
                            0.0,
                            1.0,
                        )
        index.bag_mus.append(bag_mus)
        index.gamma.append(gammas)

        loads: dict[Resource, int] = {}
        for kr, res in enumerate(substrate.resources):
            loads[res] = model.add_variable(f"r{r}_a_res{kr}", 0.0, None)
        index.a.append(loads)

        _novel_request_rows(
            model, substrate, req, labeled, r, x, ys, sxs, sys_, szs, sas,
            bag_mus, gammas, loads, edge_labels, edge_mus,
        )
        if objective == "profit":
            model.set_objective_coefficient(x, req.profit)
        else:
            model.add_constraint(f"r{r}_accept", [(x, 1.0)], EQ, 1.0)

    _add_capacity_rows(model, substrate, index.a)
    if objective == "cost":
        for loads in index.a:
            for res, var in loads.items():
                model.set_objective_coefficient(var, substrate.cost(res))
    index.num_variables = model.num_variables
    return model, index


def _novel_request_rows(
    model: LPModel,
    substrate: SubstrateGraph,
    req: Request,
    labeled: LabeledExtractionOrder,
    r: int,
    x: int,
    ys: dict,
    sxs: dict,
    sys_: dict,
    szs: dict,
    sas: dict,
    bag_mus: dict,
    gammas: dict,
    loads: dict,
    edge_labels: list,
    edge_mus: list,
) -> None:
    order = labeled.order
    sidx = substrate.node_index

    # Each sub-LP is the flow formulation of its single request edge.
    for k, e in enumerate(req.edges):
        i, j = e
        allowed = req.allowed_edges[e]
        by_tail: dict[str, list] = {}
        by_head: dict[str, list] = {}
        for se in allowed:
            by_tail.setdefault(se[0], []).append(se)
            by_head.setdefault(se[1], []).append(se)
        for mu in edge_mus[k]:
            key = (k, mu)
            tag = f"r{r}_e{k}m" + "_".join(str(sidx[u]) for u in mu)
            for n in e:
                coeffs = [
                    (sys_[(k, mu, n, u)], 1.0)
                    for u in req.allowed_nodes[n]
                    if (k, mu, n, u) in sys_
                ]
                coeffs.append((sxs[key], -1.0))
                model.add_constraint(f"{tag}_embed_n{req.node_index[n]}", coeffs, EQ, 0.0)
            flows = szs[key]
            for w in substrate.nodes:
                coeffs = []
                for se in by_tail.get(w, ()):
                    coeffs.append((flows[se], 1.0))
                for se in by_head.get(w, ()):
                    coeffs.append((flows[se], -1.0))
                if (k, mu, i, w) in sys_:
                    coeffs.append((sys_[(k, mu, i, w)], -1.0))
                if (k, mu, j, w) in sys_:
                    coeffs.append((sys_[(k, mu, j, w)], 1.0))
                if coeffs:
                    model.add_constraint(f"{tag}_flow_s{sidx[w]}", coeffs, EQ, 0.0)
            for se in allowed:
                model.add_constraint(
                    f"{tag}_load_se{substrate.edge_index[se]}",
                    [(flows[se], req.edge_demand[e]), (sas[(k, mu, se)], -1.0)],
                    EQ,
                    0.0,
                )

    # Acceptance is carried by the root's host distribution.
    root = order.root
    model.add_constraint(
        f"r{r}_root",
        [(ys[(root, u)], 1.0) for u in req.allowed_nodes[root]] + [(x, -1.0)],
        EQ,
        0.0,
    )

    # The global host distribution of a node agrees with every incident
    # edge's family of sub-LPs.
    for i in req.nodes:
        for k, e in enumerate(req.edges):
            if i not in e:
                continue
            for u in req.allowed_nodes[i]:
                coeffs = [(ys[(i, u)], 1.0)]
                for mu in edge_mus[k]:
                    if (k, mu, i, u) in sys_:
                        coeffs.append((sys_[(k, mu, i, u)], -1.0))
                model.add_constraint(
                    f"r{r}_link_n{req.node_index[i]}_e{k}_s{sidx[u]}", coeffs, EQ, 0.0
                )

    # Outgoing edges of a bag draw their placements from the bag variables:
    # a sub-LP copy equals the total of all bag mappings extending its own
    # label mapping.
    for node in order.nodes:
        for bi, bag in enumerate(labeled.bags[node]):
            big = bag_mus[(node, bi)]
            for ke in bag.edges:
                e = order.edges[ke].original
                labels = edge_labels[ke]
                positions = [bag.labels.index(l) for l in labels]
                groups: dict[tuple, list[tuple[str, ...]]] = {}
                for assign in big:
                    groups.setdefault(
                        tuple(assign[p] for p in positions), []
                    ).append(assign)
                for mu in edge_mus[ke]:
                    for u in req.allowed_nodes[node]:
                        coeffs = [(sys_[(ke, mu, node, u)], 1.0)]
                        for assign in groups.get(mu, ()):
                            coeffs.append((gammas[(node, bi, assign, u)], -1.0))
                        model.add_constraint(
                            f"r{r}_bagout_n{req.node_index[node]}_b{bi}_e{ke}"
                            f"_m{edge_mus[ke].index(mu)}_s{sidx[u]}",
                            coeffs,
                            EQ,
                            0.0,
                        )

    # Incoming edges agree with each bag on their shared labels, which chains
    # the label choices along the order.
    for node in order.nodes:
        bags = labeled.bags[node]
        if not bags:
            continue
        for ke in order.in_edges[node]:
            e = order.edges[ke].original
            labels = edge_labels[ke]
            for bi, bag in enumerate(bags):
                shared = tuple(l for l in labels if l in bag.labels)
                in_pos = [labels.index(l) for l in shared]
                bag_pos = [bag.labels.index(l) for l in shared]
                sy_groups: dict[tuple, list] = {}
                for mu in edge_mus[ke]:
                    sy_groups.setdefault(
                        tuple(mu[p] for p in in_pos), []
                    ).append(mu)
                gamma_groups: dict[tuple, list] = {}
                for assign in bag_mus[(node, bi)]:
                    gamma_groups.setdefault(
                        tuple(assign[p] for p in bag_pos), []
                    ).append(assign)
                for mi, m_shared in enumerate(sorted(sy_groups)):
                    for u in req.allowed_nodes[node]:
                        coeffs = []
                        for mu in sy_groups[m_shared]:
                            if (ke, mu, node, u) in sys_:
                                coeffs.append((sys_[(ke, mu, node, u)], 1.0))
                        for assign in gamma_groups.get(m_shared, ()):
                            coeffs.append((gammas[(node, bi, assign, u)], -1.0))
                        if coeffs:
                            model.add_constraint(
                                f"r{r}_bagin_n{req.node_index[node]}_e{ke}_b{bi}"
                                f"_m{mi}_s{sidx[u]}",
                                coeffs,
                                EQ,
                                0.0,
                            )

    # Node loads come from the global host distribution, edge loads from the
    # sub-LP allocations.
    for t in substrate.types:
        for u in substrate.typed_nodes[t]:
            res = node_resource(t, u)
            coeffs = [(loads[res], -1.0)]
            for i in req.nodes:
                if req.node_type[i] == t and (i, u) in ys:
                    coeffs.append((ys[(i, u)], req.node_demand[i]))
            model.add_constraint(
                f"r{r}_load_n{t}_{sidx[u]}", coeffs, EQ, 0.0
            )
    for se in substrate.edges:
        coeffs = [(loads[edge_resource(*se)], -1.0)]
        for k in range(len(req.edges)):
            for mu in edge_mus[k]:
                if (k, mu, se) in sas:
                    coeffs.append((sas[(k, mu, se)], 1.0))
        model.add_constraint(
            f"r{r}_load_se{substrate.edge_index[se]}", coeffs, EQ, 0.0
        )


def embed_mapping(
    index: NovelVariableIndex, r: int, mapping: ValidMapping
) -> np.ndarray:
    """The 0/1 point of the decomposable LP that realizes one valid mapping.

    Entries outside request ``r`` stay zero. Substituting the result into
    the model built alongside ``index`` must satisfy every request-local
    constraint; capacity rows hold whenever the mapping alone fits.
    """
    req = index.requests[r]
    labeled = index.orders[r]
    substrate = index.substrate
    vec = np.zeros(index.num_variables)
    vec[index.x[r]] = 1.0
    for i in req.nodes:
        vec[index.y[r][(i, mapping.node_map[i])]] = 1.0
    for k, e in enumerate(req.edges):
        labels = index.edge_labels[r][k]
        mu = tuple(mapping.node_map[l] for l in labels)
        vec[index.sub_x[r][(k, mu)]] = 1.0
        for n in e:
            vec[index.sub_y[r][(k, mu, n, mapping.node_map[n])]] = 1.0
        for se in mapping.edge_map[e]:
            vec[index.sub_z[r][(k, mu)][se]] = 1.0
            vec[index.sub_a[r][(k, mu, se)]] = req.edge_demand[e]
    for node in labeled.order.nodes:
        for bi, bag in enumerate(labeled.bags[node]):
            assign = tuple(mapping.node_map[l] for l in bag.labels)
            vec[index.gamma[r][(node, bi, assign, mapping.node_map[node])]] = 1.0
    for res, amount in compute_allocations(substrate, req, mapping).items():
        vec[index.a[r][res]] = amount
    return vec


def max_violation(model: LPModel, values: np.ndarray) -> float:
    """Largest constraint or bound violation of a candidate point."""
    worst = 0.0
    for var_idx, var in enumerate(model.variables):
        v = values[var_idx]
        worst = max(worst, var.lower - v)
        if var.upper is not None:
            worst = max(worst, v - var.upper)
    for con in model.constraints:
        lhs = sum(values[i] * c for i, c in con.coefficients)
        if con.sense == EQ:
            worst = max(worst, abs(lhs - con.rhs))
        elif con.sense == LE:
            worst = max(worst, lhs - con.rhs)
        else:
            worst = max(worst, con.rhs - lhs)
    return worst
