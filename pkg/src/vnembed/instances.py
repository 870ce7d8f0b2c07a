"""Instance JSON: parsing, default restriction expansion, serialization.

Top-level document shape:

    {
      "name": "...",                       optional
      "substrate": {
        "nodes": [{"id", "types": [{"type", "capacity", "cost"}]}],
        "edges": [{"tail", "head", "capacity", "cost"}]
      },
      "requests": [{
        "id", "profit",
        "nodes": [{"id", "type", "demand", "allowed_nodes": [...]}],
        "edges": [{"tail", "head", "demand", "allowed_edges": [[u, v], ...]}]
      }]
    }

Omitted ``allowed_nodes`` expands to every substrate node offering the
type with enough capacity for the demand; omitted ``allowed_edges`` to
every substrate edge with enough capacity. Serialization always writes
the expanded lists, so parse -> dump -> parse is the identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .model import Request, SubstrateGraph


class InstanceFormatError(Exception):
    pass


@dataclass(frozen=True)
class Instance:
    name: str
    substrate: SubstrateGraph
    requests: tuple[Request, ...]


def default_allowed_nodes(
    substrate: SubstrateGraph, node_type: str, demand: float
) -> tuple[str, ...]:
    return tuple(
        u
        for u in substrate.typed_nodes.get(node_type, ())
        if substrate.node_capacity[(node_type, u)] >= demand
    )


def default_allowed_edges(
    substrate: SubstrateGraph, demand: float
) -> tuple[tuple[str, str], ...]:
    return tuple(e for e in substrate.edges if substrate.edge_capacity[e] >= demand)


def _require(table: Any, key: str, where: str) -> Any:
    if not isinstance(table, dict) or key not in table:
        raise InstanceFormatError(f"missing {key!r} in {where}")
    return table[key]


def instance_from_dict(data: Any) -> Instance:
    sub = _require(data, "substrate", "instance")
    node_types: dict[str, dict[str, tuple[float, float]]] = {}
    for entry in _require(sub, "nodes", "substrate"):
        nid = str(_require(entry, "id", "substrate node"))
        if nid in node_types:
            raise InstanceFormatError(f"duplicate substrate node {nid!r}")
        table: dict[str, tuple[float, float]] = {}
        for spec in _require(entry, "types", f"substrate node {nid!r}"):
            t = str(_require(spec, "type", f"substrate node {nid!r}"))
            if t in table:
                raise InstanceFormatError(f"node {nid!r} repeats type {t!r}")
            table[t] = (
                float(_require(spec, "capacity", f"type {t!r} at {nid!r}")),
                float(spec.get("cost", 0.0)),
            )
        node_types[nid] = table
    edges: dict[tuple[str, str], tuple[float, float]] = {}
    for entry in _require(sub, "edges", "substrate"):
        e = (str(_require(entry, "tail", "substrate edge")),
             str(_require(entry, "head", "substrate edge")))
        if e in edges:
            raise InstanceFormatError(f"duplicate substrate edge {e}")
        edges[e] = (
            float(_require(entry, "capacity", f"substrate edge {e}")),
            float(entry.get("cost", 0.0)),
        )
    substrate = SubstrateGraph.build(node_types, edges)

    requests = []
    seen = set()
    for rentry in _require(data, "requests", "instance"):
        rid = str(_require(rentry, "id", "request"))
        if rid in seen:
            raise InstanceFormatError(f"duplicate request id {rid!r}")
        seen.add(rid)
        node_specs: dict[str, tuple[str, float, tuple[str, ...]]] = {}
        for nentry in _require(rentry, "nodes", f"request {rid!r}"):
            i = str(_require(nentry, "id", f"request {rid!r} node"))
            if i in node_specs:
                raise InstanceFormatError(f"request {rid!r} repeats node {i!r}")
            t = str(_require(nentry, "type", f"request {rid!r} node {i!r}"))
            demand = float(_require(nentry, "demand", f"request {rid!r} node {i!r}"))
            allowed = nentry.get("allowed_nodes")
            if allowed is None:
                allowed = default_allowed_nodes(substrate, t, demand)
            node_specs[i] = (t, demand, tuple(str(u) for u in allowed))
        edge_specs: dict[tuple[str, str], tuple[float, tuple]] = {}
        for eentry in _require(rentry, "edges", f"request {rid!r}"):
            e = (str(_require(eentry, "tail", f"request {rid!r} edge")),
                 str(_require(eentry, "head", f"request {rid!r} edge")))
            if e in edge_specs:
                raise InstanceFormatError(f"request {rid!r} repeats edge {e}")
            demand = float(_require(eentry, "demand", f"request {rid!r} edge {e}"))
            allowed = eentry.get("allowed_edges")
            if allowed is None:
                allowed_t = default_allowed_edges(substrate, demand)
            else:
                allowed_t = tuple((str(a), str(b)) for a, b in allowed)
            edge_specs[e] = (demand, allowed_t)
        requests.append(
            Request.build(
                rid, node_specs, edge_specs,
                profit=float(rentry.get("profit", 1.0)),
            )
        )
    return Instance(
        name=str(data.get("name", "")),
        substrate=substrate,
        requests=tuple(requests),
    )


def instance_to_dict(instance: Instance) -> dict:
    sub = instance.substrate
    data: dict[str, Any] = {}
    if instance.name:
        data["name"] = instance.name
    data["substrate"] = {
        "nodes": [
            {
                "id": u,
                "types": [
                    {
                        "type": t,
                        "capacity": sub.node_capacity[(t, u)],
                        "cost": sub.node_cost[(t, u)],
                    }
                    for t in sub.types
                    if (t, u) in sub.node_capacity
                ],
            }
            for u in sub.nodes
        ],
        "edges": [
            {
                "tail": e[0],
                "head": e[1],
                "capacity": sub.edge_capacity[e],
                "cost": sub.edge_cost[e],
            }
            for e in sub.edges
        ],
    }
    data["requests"] = [
        {
            "id": req.name,
            "profit": req.profit,
            "nodes": [
                {
                    "id": i,
                    "type": req.node_type[i],
                    "demand": req.node_demand[i],
                    "allowed_nodes": list(req.allowed_nodes[i]),
                }
                for i in req.nodes
            ],
            "edges": [
                {
                    "tail": e[0],
                    "head": e[1],
                    "demand": req.edge_demand[e],
                    "allowed_edges": [list(se) for se in req.allowed_edges[e]],
                }
                for e in req.edges
            ],
        }
        for req in instance.requests
    ]
    return data


def loads_instance(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise InstanceFormatError(f"not valid JSON: {err}") from err
    return instance_from_dict(data)


def dumps_instance(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def load_instance(path: str | Path) -> Instance:
    return loads_instance(Path(path).read_text())


def dump_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(instance))
