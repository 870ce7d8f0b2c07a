"""Command line driver.

Subcommands: validate, width, solve-lp, decompose, round, exact,
generate, run. All outputs are JSON (or CSV for per-try diagnostics) to
stdout or ``--out``. Exit codes: 0 success, 2 validation or input
failure, 3 LP infeasible, 4 rounding unaccepted, 5 internal assertion.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .decomposition import (
    DecompositionError,
    decompose_mcf_tree,
    decompose_novel,
)
from .extraction import Digraph, ExtractionError, build_extraction_order, min_width_order_search
from .formulations import build_mcf, build_novel
from .instances import (
    Instance,
    InstanceFormatError,
    dumps_instance,
    load_instance,
)
from .lpmodel import default_backend, solve, write_lp
from .model import validate_instance
from .oracle import DEFAULT_MAPPING_CAP, solve_enumerative
from .pipeline import (
    PipelineConfig,
    PipelineError,
    mapping_to_dict,
    run_pipeline,
    try_records_csv,
)
from .rounding import MAX_TRIES_DEFAULT
from .scenarios import SCENARIO_NAMES, scenario_instance

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_UNACCEPTED = 4
EXIT_INTERNAL = 5


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(data, out: str | None) -> None:
    _emit(json.dumps(data, indent=2, sort_keys=True) + "\n", out)


def _load(path: str) -> Instance:
    instance = load_instance(path)
    report = validate_instance(instance.substrate, instance.requests)
    if not report.ok:
        raise _Invalid(report)
    return instance


class _Invalid(Exception):
    def __init__(self, report):
        super().__init__("instance failed validation")
        self.report = report


def cmd_validate(args) -> int:
    instance = load_instance(args.instance)
    report = validate_instance(instance.substrate, instance.requests)
    _emit_json(
        {
            "ok": report.ok,
            "issues": [
                {"code": issue.code, "message": issue.message}
                for issue in report.issues
            ],
        },
        args.out,
    )
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_width(args) -> int:
    instance = _load(args.instance)
    rows = []
    for req in instance.requests:
        graph = Digraph.build(req.nodes, req.edges)
        labeled = min_width_order_search(graph, strategy=args.strategy)
        order = labeled.order
        rows.append(
            {
                "request": req.name,
                "root": order.root,
                "width": labeled.width,
                "labels": {
                    f"{oe.original[0]}->{oe.original[1]}": list(labeled.labels[k])
                    for k, oe in enumerate(order.edges)
                },
                "bags": {
                    node: [
                        {
                            "edges": [
                                "{}->{}".format(*order.edges[k].original)
                                for k in bag.edges
                            ],
                            "labels": list(bag.labels),
                        }
                        for bag in bags
                    ]
                    for node, bags in labeled.bags.items()
                    if bags
                },
            }
        )
    _emit_json(rows, args.out)
    return EXIT_OK


def _build_formulation(instance: Instance, formulation: str, variant: str,
                       strategy: str, var_budget: int | None):
    if formulation == "mcf":
        model, index = build_mcf(instance.substrate, instance.requests, variant)
        return model, index, None
    orders = []
    for req in instance.requests:
        graph = Digraph.build(req.nodes, req.edges)
        orders.append(min_width_order_search(graph, strategy=strategy))
    model, index = build_novel(
        instance.substrate, instance.requests, orders, variant,
        var_budget=var_budget,
    )
    return model, index, orders


def cmd_solve_lp(args) -> int:
    instance = _load(args.instance)
    model, _, _ = _build_formulation(
        instance, args.formulation, args.variant, args.strategy, args.var_budget
    )
    if args.export_lp:
        Path(args.export_lp).write_text(write_lp(model))
    solution = solve(model, args.solver)
    _emit_json(
        {
            "formulation": args.formulation,
            "variant": args.variant,
            "status": solution.status,
            "objective": solution.objective_value,
            "variables": model.num_variables,
            "constraints": len(model.constraints),
        },
        args.out,
    )
    if args.solution_out:
        payload = {
            "formulation": args.formulation,
            "variant": args.variant,
            "strategy": args.strategy,
            "status": solution.status,
            "objective": solution.objective_value,
            "values": [float(v) for v in solution.values],
        }
        Path(args.solution_out).write_text(
            json.dumps(payload, indent=2) + "\n"
        )
    if solution.status == "infeasible":
        return EXIT_INFEASIBLE
    if not solution.optimal:
        return EXIT_INTERNAL
    return EXIT_OK


def cmd_decompose(args) -> int:
    instance = _load(args.instance)
    payload = json.loads(Path(args.solution).read_text())
    for key in ("formulation", "variant", "values"):
        if key not in payload:
            raise InstanceFormatError(f"solution file lacks {key!r}")
    formulation = payload["formulation"]
    model, index, orders = _build_formulation(
        instance, formulation, payload["variant"],
        payload.get("strategy", "per-root-bfs"), None,
    )
    values = np.asarray(payload["values"], dtype=float)
    if values.shape != (model.num_variables,):
        raise InstanceFormatError(
            f"solution has {values.shape[0]} values, model has "
            f"{model.num_variables} variables"
        )
    out_rows = []
    for r, req in enumerate(instance.requests):
        state = index.request_state(values, r)
        if formulation == "mcf":
            graph = Digraph.build(req.nodes, req.edges)
            order = build_extraction_order(graph, req.nodes[0])
            dec = decompose_mcf_tree(instance.substrate, req, order, state)
        else:
            dec = decompose_novel(instance.substrate, req, orders[r], state)
        out_rows.append(
            {
                "request": req.name,
                "entries": [
                    {"weight": entry.weight, **mapping_to_dict(entry.mapping)}
                    for entry in dec.entries
                ],
                "total_weight": dec.total_weight,
            }
        )
    _emit_json(out_rows, args.out)
    return EXIT_OK


def cmd_round(args) -> int:
    instance = _load(args.instance)
    config = PipelineConfig(
        variant=args.variant,
        seed=args.seed,
        max_tries=args.max_tries,
        backend=args.solver,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
    )
    report, rounded = run_pipeline(instance, config)
    _emit_json(
        {
            "variant": rounded.variant,
            "seed": rounded.seed,
            "accepted": rounded.accepted,
            "tries_used": rounded.tries_used,
            "objective": rounded.objective_value,
            "bounds": report.bounds,
            "max_node_utilization": report.rounding["max_node_utilization"],
            "max_edge_utilization": report.rounding["max_edge_utilization"],
            "selection": report.rounding["selection"],
        },
        args.out,
    )
    if args.csv:
        Path(args.csv).write_text(try_records_csv(rounded))
    return EXIT_OK if rounded.accepted else EXIT_UNACCEPTED


def cmd_exact(args) -> int:
    instance = _load(args.instance)
    solution = solve_enumerative(
        instance.substrate, instance.requests, args.variant,
        relaxation=args.relaxation, cap=args.cap, backend=args.solver,
    )
    truncated = [
        enum.request.name for enum in solution.enumerations if enum.truncated
    ]
    if truncated:
        sys.stderr.write(
            f"enumeration truncated at cap={args.cap} for: "
            f"{', '.join(truncated)}; raise --cap\n"
        )
        return EXIT_INVALID
    assignment = []
    for r, picks in enumerate(solution.assignment):
        enum = solution.enumerations[r]
        assignment.append(
            {
                "request": instance.requests[r].name,
                "entries": [
                    {
                        "weight": weight,
                        **mapping_to_dict(enum.mappings[k]),
                    }
                    for weight, k in picks
                ],
            }
        )
    _emit_json(
        {
            "variant": args.variant,
            "relaxation": args.relaxation,
            "status": solution.status,
            "objective": solution.objective_value,
            "num_mappings": [len(e.mappings) for e in solution.enumerations],
            "assignment": assignment,
        },
        args.out,
    )
    return EXIT_OK if solution.status == "optimal" else EXIT_INFEASIBLE


def cmd_generate(args) -> int:
    if args.list:
        _emit_json(list(SCENARIO_NAMES), args.out)
        return EXIT_OK
    if not args.name:
        raise InstanceFormatError("scenario name required (or use --list)")
    instance = scenario_instance(args.name)
    _emit(dumps_instance(instance), args.out)
    return EXIT_OK


def _config_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        variant=args.variant,
        seed=args.seed,
        max_tries=args.max_tries,
        backend=args.solver,
        var_budget=args.var_budget,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        include_timings=args.include_timings,
    )


def _run_one(path: str, config: PipelineConfig,
             out: str | None, csv_out: str | None) -> tuple[str, int, str]:
    try:
        instance = _load(path)
        report, rounded = run_pipeline(instance, config)
        text = report.to_json(include_timings=config.include_timings)
        if out:
            Path(out).write_text(text)
        else:
            sys.stdout.write(text)
        if csv_out:
            Path(csv_out).write_text(try_records_csv(rounded))
        code = EXIT_OK if rounded.accepted else EXIT_UNACCEPTED
        return path, code, "accepted" if rounded.accepted else "unaccepted"
    except Exception as err:  # per-instance isolation for --jobs
        return path, _code_for(err), str(err)


def _plot_rows(report_dict) -> list[tuple[str, str, str, str]]:
    rows = []
    name = report_dict["instance"]
    for req in report_dict["requests"]:
        rows.append((name, req["name"], "width", str(req["width"])))
    rows.append((name, "-", "lp_objective", str(report_dict["lp"]["objective"])))
    for dec in report_dict["decomposition"]:
        rows.append((name, dec["name"], "entries", str(dec["entries"])))
        rows.append((name, dec["name"], "total_weight", str(dec["total_weight"])))
    rnd = report_dict["rounding"]
    rows.append((name, "-", "accepted", str(int(rnd["accepted"]))))
    rows.append((name, "-", "tries_used", str(rnd["tries_used"])))
    rows.append((name, "-", "objective", str(rnd["objective"])))
    rows.append(
        (name, "-", "max_node_utilization", str(rnd["max_node_utilization"]))
    )
    rows.append(
        (name, "-", "max_edge_utilization", str(rnd["max_edge_utilization"]))
    )
    return rows


def cmd_run(args) -> int:
    config = _config_from_args(args)
    paths = args.instances
    if len(paths) > 1 and not args.out_dir:
        raise InstanceFormatError("multiple instances need --out-dir")
    plan = []
    for path in paths:
        if args.out_dir:
            stem = Path(path).stem
            out = str(Path(args.out_dir) / f"{stem}.report.json")
            csv_out = str(Path(args.out_dir) / f"{stem}.tries.csv")
        else:
            out = args.out
            csv_out = args.csv
        plan.append((path, out, csv_out))
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)

    results = []
    if args.jobs > 1 and len(plan) > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
            futures = [
                pool.submit(_run_one, path, config, out, csv_out)
                for path, out, csv_out in plan
            ]
            results = [f.result() for f in futures]
    else:
        for path, out, csv_out in plan:
            results.append(_run_one(path, config, out, csv_out))

    if args.plot_data:
        rows: list[tuple[str, str, str, str]] = []
        for path, out, _ in plan:
            if out and Path(out).exists():
                rows.extend(_plot_rows(json.loads(Path(out).read_text())))
        with open(args.plot_data, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["instance", "request", "metric", "value"])
            writer.writerows(rows)

    worst = EXIT_OK
    for path, code, message in results:
        if len(results) > 1:
            sys.stderr.write(f"{path}: exit {code} ({message})\n")
        if code != EXIT_OK and worst == EXIT_OK:
            worst = code
    return worst


def _code_for(err: Exception) -> int:
    if isinstance(err, _Invalid):
        return EXIT_INVALID
    if isinstance(err, PipelineError):
        if err.stage == "validate":
            return EXIT_INVALID
        if err.infeasible:
            return EXIT_INFEASIBLE
        return EXIT_INTERNAL
    if isinstance(
        err, (InstanceFormatError, ExtractionError, ValueError, FileNotFoundError)
    ):
        return EXIT_INVALID
    if isinstance(err, (DecompositionError, AssertionError)):
        return EXIT_INTERNAL
    return EXIT_INTERNAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vnembed",
        description="Virtual network embedding: width analysis, LPs, "
        "decomposition, randomized rounding.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solver=True):
        p.add_argument("--out", help="write output here instead of stdout")
        if solver:
            p.add_argument(
                "--solver", default=None,
                help=f"LP backend (default: {default_backend()})",
            )

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("instance")
    common(p, solver=False)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("width", help="extraction order analysis per request")
    p.add_argument("instance")
    p.add_argument(
        "--strategy", choices=("per-root-bfs", "exhaustive"),
        default="per-root-bfs",
    )
    common(p, solver=False)
    p.set_defaults(fn=cmd_width)

    p = sub.add_parser("solve-lp", help="build and solve a relaxation")
    p.add_argument("instance")
    p.add_argument("--formulation", choices=("mcf", "novel"), default="novel")
    p.add_argument("--variant", choices=("profit", "cost"), default="profit")
    p.add_argument(
        "--strategy", choices=("per-root-bfs", "exhaustive"),
        default="per-root-bfs",
    )
    p.add_argument("--var-budget", type=int, default=None)
    p.add_argument("--export-lp", help="also write the model in LP text format")
    p.add_argument("--solution-out", help="write variable values for decompose")
    common(p)
    p.set_defaults(fn=cmd_solve_lp)

    p = sub.add_parser("decompose", help="turn an LP solution into mappings")
    p.add_argument("instance")
    p.add_argument("solution", help="file written by solve-lp --solution-out")
    common(p, solver=False)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("round", help="full pipeline, report the rounded solution")
    p.add_argument("instance")
    p.add_argument("--variant", choices=("profit", "cost"), default="profit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tries", type=int, default=MAX_TRIES_DEFAULT)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--csv", help="write per-try diagnostics CSV here")
    common(p)
    p.set_defaults(fn=cmd_round)

    p = sub.add_parser("exact", help="enumerative reference solver")
    p.add_argument("instance")
    p.add_argument("--variant", choices=("profit", "cost"), default="profit")
    p.add_argument("--relaxation", choices=("lp", "ip"), default="ip")
    p.add_argument("--cap", type=int, default=DEFAULT_MAPPING_CAP)
    common(p)
    p.set_defaults(fn=cmd_exact)

    p = sub.add_parser("generate", help="emit a named scenario instance")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true", help="list scenario names")
    common(p, solver=False)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("run", help="pipeline with full report, multi-instance")
    p.add_argument("instances", nargs="+")
    p.add_argument("--variant", choices=("profit", "cost"), default="profit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tries", type=int, default=MAX_TRIES_DEFAULT)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--var-budget", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", help="per-instance reports land here")
    p.add_argument("--csv", help="per-try CSV (single instance only)")
    p.add_argument("--plot-data", help="tidy long-format CSV across instances")
    p.add_argument(
        "--include-timings", action="store_true",
        help="add wall-clock timings (breaks byte determinism)",
    )
    common(p)
    p.set_defaults(fn=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _Invalid as err:
        _emit_json(
            {
                "ok": False,
                "issues": [
                    {"code": issue.code, "message": issue.message}
                    for issue in err.report.issues
                ],
            },
            getattr(args, "out", None),
        )
        return EXIT_INVALID
    except Exception as err:
        sys.stderr.write(f"error: {err}\n")
        return _code_for(err)


if __name__ == "__main__":
    sys.exit(main())
