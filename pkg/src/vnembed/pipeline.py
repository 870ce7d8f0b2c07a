"""End-to-end embedding pipeline and its report.

Stages: validate, width analysis, LP construction and solve, convex
decomposition, variant-specific preparation (profit preprocessing or
cost pruning), randomized rounding, verification. Failures surface as
``PipelineError`` carrying the stage name.

Reports serialize deterministically: keys are emitted in a fixed order
and wall-clock timings are left out unless explicitly requested, so two
runs with the same instance, seed and backend produce byte-identical
JSON.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

from ._version import __version__
from .decomposition import ConvexDecomposition, decompose_novel, verify_decomposition
from .extraction import Digraph, LabeledExtractionOrder, min_width_order_search
from .formulations import BudgetExceededError, build_novel
from .instances import Instance
from .lpmodel import LPSolution, solve
from .model import (
    EDGE,
    NODE,
    ValidMapping,
    collection_feasible,
    mapping_cost,
    validate_instance,
)
from .rounding import (
    MAX_TRIES_DEFAULT,
    RoundedSolution,
    RoundingBounds,
    compute_bounds,
    preprocess_profit,
    prune_costly_mappings,
    round_cost,
    round_profit,
)

CONSISTENCY_TOL = 1e-6


class PipelineError(Exception):
    def __init__(self, stage: str, message: str, *, infeasible: bool = False):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.infeasible = infeasible


@dataclass(frozen=True)
class PipelineConfig:
    variant: str = "profit"
    seed: int = 0
    max_tries: int = MAX_TRIES_DEFAULT
    backend: str | None = None
    order_strategy: str = "per-root-bfs"
    var_budget: int | None = None
    alpha: float | None = None
    beta: float | None = None
    gamma: float | None = None
    include_timings: bool = False


@dataclass
class RunReport:
    version: str
    instance_name: str
    variant: str
    seed: int
    backend: str
    requests: list[dict[str, Any]]
    lp: dict[str, Any]
    bounds: dict[str, float]
    decomposition: list[dict[str, Any]]
    rounding: dict[str, Any]
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict[str, Any]:
        data = {
            "version": self.version,
            "instance": self.instance_name,
            "variant": self.variant,
            "seed": self.seed,
            "backend": self.backend,
            "requests": self.requests,
            "lp": self.lp,
            "bounds": self.bounds,
            "decomposition": self.decomposition,
            "rounding": self.rounding,
        }
        if include_timings:
            data["timings"] = self.timings
        return data

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(
            self.to_dict(include_timings), indent=2, sort_keys=True
        ) + "\n"


def mapping_to_dict(mapping: ValidMapping | None) -> dict[str, Any] | None:
    if mapping is None:
        return None
    return {
        "node_map": {i: u for i, u in sorted(mapping.node_map.items())},
        "edge_map": {
            f"{e[0]}->{e[1]}": [list(se) for se in path]
            for e, path in sorted(mapping.edge_map.items())
        },
    }


def try_records_csv(solution: RoundedSolution) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["try", "objective", "max_node_utilization", "max_edge_utilization",
         "accepted"]
    )
    for rec in solution.records:
        writer.writerow(
            [
                rec.index,
                f"{rec.objective:.9g}",
                f"{rec.max_node_utilization:.9g}",
                f"{rec.max_edge_utilization:.9g}",
                int(rec.accepted),
            ]
        )
    return buf.getvalue()


def run_pipeline(
    instance: Instance, config: PipelineConfig
) -> tuple[RunReport, RoundedSolution]:
    """Run every stage on one instance; returns the report plus the raw
    rounded solution (whose try records feed the diagnostics CSV)."""
    if config.variant not in ("profit", "cost"):
        raise PipelineError("config", f"unknown variant {config.variant!r}")
    timings: dict[str, float] = {}

    report = validate_instance(instance.substrate, instance.requests)
    if not report.ok:
        raise PipelineError(
            "validate",
            "; ".join(f"{issue.code}: {issue.message}" for issue in report.issues),
        )

    t0 = time.perf_counter()
    labeled_orders: list[LabeledExtractionOrder] = []
    for req in instance.requests:
        graph = Digraph.build(req.nodes, req.edges)
        try:
            labeled_orders.append(
                min_width_order_search(graph, strategy=config.order_strategy)
            )
        except Exception as err:
            raise PipelineError("width", f"request {req.name!r}: {err}") from err
    timings["width"] = time.perf_counter() - t0

    request_rows = [
        {
            "name": req.name,
            "nodes": len(req.nodes),
            "edges": len(req.edges),
            "root": labeled.order.root,
            "width": labeled.width,
            "dropped": False,
        }
        for req, labeled in zip(instance.requests, labeled_orders)
    ]

    requests = list(instance.requests)
    orders = list(labeled_orders)
    if config.variant == "profit":
        t0 = time.perf_counter()
        try:
            requests, orders, dropped = preprocess_profit(
                instance.substrate, requests, orders, config.backend
            )
        except Exception as err:
            raise PipelineError("preprocess", str(err)) from err
        timings["preprocess"] = time.perf_counter() - t0
        for row in request_rows:
            if row["name"] in dropped:
                row["dropped"] = True

    t0 = time.perf_counter()
    try:
        model, index = build_novel(
            instance.substrate,
            requests,
            orders,
            config.variant,
            var_budget=config.var_budget,
        )
    except BudgetExceededError as err:
        raise PipelineError("build-lp", str(err)) from err
    timings["build-lp"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    solution: LPSolution = solve(model, config.backend)
    timings["solve-lp"] = time.perf_counter() - t0
    if solution.status == "infeasible":
        raise PipelineError(
            "solve-lp", "LP infeasible (cost variant cannot embed all requests)",
            infeasible=True,
        )
    if not solution.optimal:
        raise PipelineError("solve-lp", f"solver returned {solution.status}")
    lp_objective = float(solution.objective_value)

    lp_row: dict[str, Any] = {
        "objective": round(lp_objective, 9),
        "status": solution.status,
        "variables": model.num_variables,
        "constraints": len(model.constraints),
    }

    t0 = time.perf_counter()
    decompositions: list[ConvexDecomposition] = []
    decomposition_rows = []
    for r, (req, labeled) in enumerate(zip(requests, orders)):
        state = index.request_state(solution.values, r)
        x_value = state.x
        load_values = dict(state.a)
        try:
            dec = decompose_novel(instance.substrate, req, labeled, state)
        except Exception as err:
            raise PipelineError(
                "decompose", f"request {req.name!r}: {err}"
            ) from err
        check = verify_decomposition(
            instance.substrate, req, dec, x_value, load_values
        )
        if not check.ok:
            raise PipelineError(
                "decompose",
                f"request {req.name!r}: completeness error "
                f"{check.completeness_error:.3g}, overuse {check.worst_overuse:.3g}, "
                f"invalid {check.invalid}",
            )
        decompositions.append(dec)
        decomposition_rows.append(
            {
                "name": req.name,
                "entries": len(dec.entries),
                "total_weight": round(dec.total_weight, 9),
                "completeness_error": round(check.completeness_error, 12),
                "worst_overuse": round(check.worst_overuse, 12),
            }
        )
    timings["decompose"] = time.perf_counter() - t0

    try:
        bounds = compute_bounds(instance.substrate, requests, config.variant)
        bounds = _apply_overrides(bounds, config)
    except ValueError as err:
        raise PipelineError("bounds", str(err)) from err

    t0 = time.perf_counter()
    if config.variant == "profit":
        rounded = round_profit(
            instance.substrate, requests, decompositions, bounds, lp_objective,
            config.seed, config.max_tries,
        )
    else:
        pruned = []
        prune_rows = []
        try:
            for req, dec in zip(requests, decompositions):
                norm, prep = prune_costly_mappings(instance.substrate, req, dec)
                pruned.append(norm)
                prune_rows.append(
                    {
                        "name": req.name,
                        "cost_share": round(prep.cost_share, 9),
                        "surviving_weight": round(prep.surviving_weight, 9),
                        "removed": prep.removed,
                    }
                )
        except ValueError as err:
            raise PipelineError("prune", str(err)) from err
        for row, extra in zip(decomposition_rows, prune_rows):
            row["pruning"] = extra
        rounded = round_cost(
            instance.substrate, requests, pruned, bounds, lp_objective,
            config.seed, config.max_tries,
        )
    timings["round"] = time.perf_counter() - t0

    _verify_rounding(instance, requests, rounded, config.variant)

    rounding_row = {
        "accepted": rounded.accepted,
        "tries_used": rounded.tries_used,
        "objective": round(rounded.objective_value, 9),
        "max_node_utilization": round(
            max(
                (v for res, v in rounded.utilization.items() if res[0] == NODE),
                default=0.0,
            ),
            9,
        ),
        "max_edge_utilization": round(
            max(
                (v for res, v in rounded.utilization.items() if res[0] == EDGE),
                default=0.0,
            ),
            9,
        ),
        "selection": {
            name: mapping_to_dict(mapping)
            for name, mapping in sorted(rounded.selection.items())
        },
    }

    return RunReport(
        version=__version__,
        instance_name=instance.name,
        variant=config.variant,
        seed=config.seed,
        backend=solution.backend,
        requests=request_rows,
        lp=lp_row,
        bounds={
            "epsilon": round(bounds.epsilon, 12),
            "delta_nodes": round(bounds.delta_nodes, 12),
            "delta_edges": round(bounds.delta_edges, 12),
            "alpha": round(bounds.alpha, 12),
            "beta": round(bounds.beta, 12),
            "gamma": round(bounds.gamma, 12),
        },
        decomposition=decomposition_rows,
        rounding=rounding_row,
        timings=timings,
    ), rounded


def _apply_overrides(
    bounds: RoundingBounds, config: PipelineConfig
) -> RoundingBounds:
    updates = {}
    if config.alpha is not None:
        updates["alpha"] = config.alpha
    if config.beta is not None:
        updates["beta"] = config.beta
    if config.gamma is not None:
        updates["gamma"] = config.gamma
    return dataclasses.replace(bounds, **updates) if updates else bounds


def _verify_rounding(
    instance: Instance,
    requests: Sequence,
    rounded: RoundedSolution,
    variant: str,
) -> None:
    by_name = {req.name: req for req in requests}
    embedded = []
    objective = 0.0
    for name, mapping in rounded.selection.items():
        if mapping is None:
            continue
        req = by_name[name]
        embedded.append((req, mapping))
        if variant == "profit":
            objective += req.profit
        else:
            objective += mapping_cost(instance.substrate, req, mapping)
    if abs(objective - rounded.objective_value) > CONSISTENCY_TOL:
        raise PipelineError(
            "verify",
            f"reported objective {rounded.objective_value:.8f} != recomputed "
            f"{objective:.8f}",
        )
    _, utilization = collection_feasible(instance.substrate, embedded)
    for res, v in utilization.items():
        if abs(v - rounded.utilization.get(res, 0.0)) > CONSISTENCY_TOL:
            raise PipelineError(
                "verify", f"utilization mismatch on {res}"
            )
