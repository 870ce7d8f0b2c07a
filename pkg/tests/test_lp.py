"""Relaxation builders: flow formulation, decomposable formulation, backends."""

from __future__ import annotations

import numpy as np
import pytest

from vnembed import (
    Digraph,
    build_mcf,
    build_novel,
    count_novel_variables,
    embed_mapping,
    enumerate_valid_mappings,
    max_violation,
    min_width_order_search,
    solve,
    write_lp,
)
from vnembed.formulations import BudgetExceededError
from vnembed.lpmodel import SOLVER_ENV_VAR, default_backend
from vnembed.scenarios import scenario_instance, tiny_corpus


def _orders(instance):
    return [
        min_width_order_search(Digraph.build(r.nodes, r.edges))
        for r in instance.requests
    ]


def test_flow_formulation_overestimates_gadget(fig3):
    model, index = build_mcf(fig3.substrate, fig3.requests, "profit")
    sol = solve(model)
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(1.0, abs=1e-6)
    state = index.request_state(sol.values, 0)
    assert state.x == pytest.approx(1.0, abs=1e-6)
    # acceptance spreads over both allowed hosts of each request node
    for i in fig3.requests[0].nodes:
        hosts = [u for (n, u) in state.y if n == i]
        assert len(hosts) == 2


def test_decomposable_formulation_sees_through_gadget(fig3):
    model, _ = build_novel(fig3.substrate, fig3.requests, _orders(fig3), "profit")
    sol = solve(model)
    assert sol.status == "optimal"
    assert abs(sol.objective_value) <= 1e-6


def test_cost_variant_forces_full_embed(fig3, fig3_gadget):
    # without the shortcut edge there is no valid mapping at all
    model, _ = build_novel(fig3.substrate, fig3.requests, _orders(fig3), "cost")
    assert solve(model).status == "infeasible"
    # with it, the unique mapping prices the whole run
    model, _ = build_novel(
        fig3_gadget.substrate, fig3_gadget.requests, _orders(fig3_gadget), "cost"
    )
    sol = solve(model)
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(105.0, abs=1e-6)


def test_embedded_mappings_satisfy_constraints():
    for instance in tiny_corpus(6):
        if len(instance.requests) != 1:
            continue
        req = instance.requests[0]
        orders = _orders(instance)
        model, index = build_novel(
            instance.substrate, instance.requests, orders, "profit"
        )
        # a truncated enumeration still provides plenty of witnesses
        enum = enumerate_valid_mappings(instance.substrate, req, cap=200)
        for mapping in enum.mappings[:25]:
            values = embed_mapping(index, 0, mapping)
            assert max_violation(model, values) <= 1e-9
            achieved = sum(c * values[k] for k, c in model.objective.items())
            assert achieved == pytest.approx(req.profit)


def test_variable_count_closed_form():
    for instance in tiny_corpus(5):
        orders = _orders(instance)
        model, index = build_novel(
            instance.substrate, instance.requests, orders, "profit"
        )
        count = count_novel_variables(instance.substrate, instance.requests, orders)
        assert count == len(model.variables) == index.num_variables


def test_variable_budget_enforced(fig3):
    orders = _orders(fig3)
    count = count_novel_variables(fig3.substrate, fig3.requests, orders)
    model, _ = build_novel(
        fig3.substrate, fig3.requests, orders, "profit", var_budget=count
    )
    assert len(model.variables) == count
    with pytest.raises(BudgetExceededError):
        build_novel(
            fig3.substrate, fig3.requests, orders, "profit", var_budget=count - 1
        )


def test_lp_text_export(fig3):
    model, _ = build_mcf(fig3.substrate, fig3.requests, "profit")
    text = write_lp(model)
    assert text.startswith("Maximize")
    assert "Subject To" in text
    assert text.rstrip().endswith("End")
    cost_model, _ = build_mcf(fig3.substrate, fig3.requests, "cost")
    assert write_lp(cost_model).startswith("Minimize")


def test_backend_selection(fig3, monkeypatch):
    model, _ = build_mcf(fig3.substrate, fig3.requests, "profit")
    assert solve(model, backend="highs").status == "optimal"
    with pytest.raises(ValueError, match="unknown solver backend"):
        solve(model, backend="simplexulator")
    monkeypatch.setenv(SOLVER_ENV_VAR, "typo")
    assert default_backend() == "typo"
    with pytest.raises(ValueError, match="unknown solver backend"):
        solve(model)
    monkeypatch.delenv(SOLVER_ENV_VAR)
    assert default_backend() == "highs"


def test_unknown_objective_rejected(fig3):
    with pytest.raises(ValueError):
        build_mcf(fig3.substrate, fig3.requests, "fairness")
    with pytest.raises(ValueError):
        build_novel(fig3.substrate, fig3.requests, _orders(fig3), "fairness")


def test_acceptance_fraction_bounded():
    for instance in tiny_corpus(4):
        orders = _orders(instance)
        model, index = build_novel(
            instance.substrate, instance.requests, orders, "profit"
        )
        sol = solve(model)
        assert sol.status == "optimal"
        for ri in range(len(instance.requests)):
            state = index.request_state(sol.values, ri)
            assert -1e-9 <= state.x <= 1.0 + 1e-9
