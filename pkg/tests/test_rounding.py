"""Tri-criteria bounds, pruning, and the randomized rounding loops."""

from __future__ import annotations

import math

import pytest

from vnembed import (
    ConvexDecomposition,
    DecompositionEntry,
    Digraph,
    Request,
    SubstrateGraph,
    ValidMapping,
    bounds_from_parameters,
    check_tri_criteria,
    compute_bounds,
    mapping_cost,
    min_width_order_search,
    preprocess_profit,
    prune_costly_mappings,
    round_cost,
    round_profit,
)
from vnembed.rounding import request_streams, sample_entry


class TestBoundFormulas:
    def test_profit_deviation_terms(self):
        b = bounds_from_parameters("profit", 0.5, 1.0, 1.0, 10, 1)
        assert b.alpha == pytest.approx(1.0 / 3.0)
        expected = 1.0 + 0.5 * math.sqrt(2.0 * math.log(10))
        assert b.beta == pytest.approx(expected, abs=1e-12)
        assert b.gamma == pytest.approx(expected, abs=1e-12)

    def test_cost_uses_leading_constant_two(self):
        b = bounds_from_parameters("cost", 0.5, 1.0, 1.0, 10, 1)
        assert b.alpha == 2.0
        assert b.beta == pytest.approx(3.0729830131446736, abs=1e-12)
        assert b.gamma == pytest.approx(3.0729830131446736, abs=1e-12)

    def test_zero_epsilon_collapses_to_capacity(self):
        b = bounds_from_parameters("profit", 0.0, 3.0, 7.0, 50, 4)
        assert (b.beta, b.gamma) == (1.0, 1.0)

    def test_type_count_widens_the_node_log(self):
        one = bounds_from_parameters("profit", 0.5, 1.0, 1.0, 10, 1)
        four = bounds_from_parameters("profit", 0.5, 1.0, 1.0, 10, 4)
        assert four.beta > one.beta
        assert four.gamma == pytest.approx(one.gamma)

    def test_demand_above_capacity_is_rejected(self):
        with pytest.raises(ValueError, match="demand exceeds capacity"):
            bounds_from_parameters("profit", 1.5, 1.0, 1.0, 10, 1)

    def test_bad_inputs(self):
        with pytest.raises(ValueError, match="unknown variant"):
            bounds_from_parameters("latency", 0.5, 1.0, 1.0, 10, 1)
        with pytest.raises(ValueError, match="nonnegative"):
            bounds_from_parameters("profit", -0.1, 1.0, 1.0, 10, 1)


def _ten_node_substrate(capacity=2.0):
    return SubstrateGraph.build(
        {f"u{k}": {"vm": (capacity, 1.0)} for k in range(10)},
        {(f"u{k}", f"u{(k + 1) % 10}"): (capacity, 1.0) for k in range(10)},
    )


def test_bounds_from_instance_statistics():
    substrate = _ten_node_substrate()
    hosts = tuple(sorted(substrate.nodes))
    req = Request.build("solo", {"i": ("vm", 1.0, hosts)}, {}, profit=1.0)
    b = compute_bounds(substrate, [req], "profit")
    assert b.epsilon == pytest.approx(0.5)
    assert b.delta_nodes == pytest.approx(1.0)
    assert b.delta_edges == 0.0
    assert b.beta == pytest.approx(2.0729830131446736, abs=1e-12)
    assert b.gamma == 1.0
    c = compute_bounds(substrate, [req], "cost")
    assert c.beta == pytest.approx(3.0729830131446736, abs=1e-12)
    assert c.gamma == 2.0


def test_bounds_reject_oversized_demand():
    substrate = _ten_node_substrate()
    hosts = tuple(sorted(substrate.nodes))
    req = Request.build("fat", {"i": ("vm", 3.0, hosts)}, {}, profit=1.0)
    with pytest.raises(ValueError, match="demand exceeds capacity"):
        compute_bounds(substrate, [req], "profit")


def _cost_ladder():
    """Four hosts whose node costs make single-node mapping costs 1/3/10/100."""
    substrate = SubstrateGraph.build(
        {
            "h1": {"vm": (10.0, 1.0)},
            "h3": {"vm": (10.0, 3.0)},
            "h10": {"vm": (10.0, 10.0)},
            "h100": {"vm": (10.0, 100.0)},
        },
        {("h1", "h3"): (10.0, 1.0), ("h3", "h10"): (10.0, 1.0), ("h10", "h100"): (10.0, 1.0)},
    )
    req = Request.build(
        "p", {"i": ("vm", 1.0, ("h1", "h3", "h10", "h100"))}, {}, profit=1.0
    )
    return substrate, req


def _dec(pairs):
    return ConvexDecomposition(
        request_name="p",
        entries=[
            DecompositionEntry(
                weight=w, mapping=ValidMapping(node_map={"i": host}, edge_map={})
            )
            for w, host in pairs
        ],
    )


class TestPruning:
    def test_expensive_tail_beyond_twice_average_is_cut(self):
        substrate, req = _cost_ladder()
        pruned, report = prune_costly_mappings(
            substrate, req, _dec([(0.9, "h1"), (0.1, "h100")])
        )
        assert report.cost_share == pytest.approx(10.9)
        assert report.threshold == pytest.approx(21.8)
        # 100 > 21.8, so the heavy mapping goes; 0.9 >= 1/2 survives
        assert report.removed == 1
        assert report.surviving_weight == pytest.approx(0.9)
        assert pruned.total_weight == pytest.approx(1.0)
        assert pruned.entries[0].mapping.node_map == {"i": "h1"}

    def test_balanced_pair_untouched(self):
        substrate, req = _cost_ladder()
        pruned, report = prune_costly_mappings(
            substrate, req, _dec([(0.5, "h1"), (0.5, "h3")])
        )
        assert report.cost_share == pytest.approx(2.0)
        assert report.removed == 0
        assert len(pruned.entries) == 2

    def test_outlier_removed_and_weights_renormalized(self):
        substrate, req = _cost_ladder()
        pruned, report = prune_costly_mappings(
            substrate, req, _dec([(0.6, "h1"), (0.4, "h10")])
        )
        assert report.cost_share == pytest.approx(4.6)
        assert report.threshold == pytest.approx(9.2)
        assert report.removed == 1
        assert report.surviving_weight == pytest.approx(0.6)
        assert len(pruned.entries) == 1
        assert pruned.entries[0].mapping.node_map == {"i": "h1"}
        assert pruned.total_weight == pytest.approx(1.0)

    def test_partial_acceptance_is_an_error(self):
        substrate, req = _cost_ladder()
        with pytest.raises(ValueError, match="!= 1"):
            prune_costly_mappings(substrate, req, _dec([(0.5, "h1"), (0.3, "h3")]))


class TestSampling:
    def test_draws_fall_into_cumulative_intervals(self):
        dec = _dec([(0.3, "h1"), (0.2, "h3")])
        assert sample_entry(dec, 0.0) == 0
        assert sample_entry(dec, 0.25) == 0
        assert sample_entry(dec, 0.3) == 1
        assert sample_entry(dec, 0.45) == 1
        assert sample_entry(dec, 0.6) is None

    def test_streams_are_reproducible_and_independent(self):
        a = [s.random(4).tolist() for s in request_streams(2024, 3)]
        b = [s.random(4).tolist() for s in request_streams(2024, 3)]
        assert a == b
        assert a[0] != a[1]
        # a request's stream does not depend on how many requests follow it
        wider = [s.random(4).tolist() for s in request_streams(2024, 5)]
        assert wider[:3] == a


def test_preprocess_drops_unservable_requests(fig3):
    orders = [
        min_width_order_search(Digraph.build(r.nodes, r.edges))
        for r in fig3.requests
    ]
    kept, kept_orders, dropped = preprocess_profit(
        fig3.substrate, fig3.requests, orders
    )
    assert kept == []
    assert kept_orders == []
    assert dropped == [r.name for r in fig3.requests]


def test_preprocess_keeps_fully_servable_requests():
    substrate = _ten_node_substrate()
    hosts = tuple(sorted(substrate.nodes))
    req = Request.build(
        "pair",
        {"i": ("vm", 1.0, hosts), "j": ("vm", 1.0, hosts)},
        {("i", "j"): (1.0, tuple(substrate.edges))},
        profit=2.0,
    )
    order = min_width_order_search(Digraph.build(req.nodes, req.edges))
    kept, kept_orders, dropped = preprocess_profit(substrate, [req], [order])
    assert [r.name for r in kept] == ["pair"]
    assert kept_orders == [order]
    assert dropped == []


def _single_mapping_setup():
    substrate = _ten_node_substrate()
    hosts = tuple(sorted(substrate.nodes))
    req = Request.build(
        "pair",
        {"i": ("vm", 1.0, hosts), "j": ("vm", 1.0, hosts)},
        {("i", "j"): (1.0, tuple(substrate.edges))},
        profit=5.0,
    )
    mapping = ValidMapping(
        node_map={"i": "u0", "j": "u1"}, edge_map={("i", "j"): (("u0", "u1"),)}
    )
    dec = ConvexDecomposition(
        request_name="pair", entries=[DecompositionEntry(weight=1.0, mapping=mapping)]
    )
    return substrate, req, mapping, dec


class TestProfitRounding:
    def test_certain_entry_is_always_selected(self):
        substrate, req, mapping, dec = _single_mapping_setup()
        bounds = compute_bounds(substrate, [req], "profit")
        out = round_profit(substrate, [req], [dec], bounds, req.profit, seed=3)
        assert out.accepted
        assert out.tries_used == 1
        assert out.objective_value == pytest.approx(req.profit)
        assert out.selection["pair"] == mapping
        assert out.records[-1].accepted

    def test_empty_decomposition_embeds_nothing(self):
        substrate, req, _, _ = _single_mapping_setup()
        bounds = compute_bounds(substrate, [req], "profit")
        empty = ConvexDecomposition(request_name="pair", entries=[])
        out = round_profit(substrate, [req], [empty], bounds, 0.0, seed=3)
        assert out.accepted
        assert out.objective_value == 0.0
        assert out.selection["pair"] is None

    def test_unreachable_profit_target_reports_best_effort(self):
        substrate, req, _, dec = _single_mapping_setup()
        bounds = compute_bounds(substrate, [req], "profit")
        out = round_profit(
            substrate, [req], [dec], bounds, 100.0 * req.profit, seed=3, max_tries=4
        )
        assert not out.accepted
        assert out.tries_used == 4
        assert len(out.records) == 4
        assert out.objective_value == pytest.approx(req.profit)

    def test_same_seed_same_run(self):
        substrate, req, _, dec = _single_mapping_setup()
        half = ConvexDecomposition(
            request_name="pair",
            entries=[DecompositionEntry(weight=0.5, mapping=dec.entries[0].mapping)],
        )
        bounds = compute_bounds(substrate, [req], "profit")
        runs = [
            round_profit(
                substrate, [req], [half], bounds, req.profit, seed=9, max_tries=6
            )
            for _ in range(2)
        ]
        assert runs[0].selection == runs[1].selection
        assert [r.objective for r in runs[0].records] == [
            r.objective for r in runs[1].records
        ]

    def test_length_mismatch_rejected(self):
        substrate, req, _, _ = _single_mapping_setup()
        bounds = compute_bounds(substrate, [req], "profit")
        with pytest.raises(ValueError, match="one decomposition per request"):
            round_profit(substrate, [req], [], bounds, 1.0, seed=0)


class TestCostRounding:
    def test_single_mapping_costs_its_allocation(self):
        substrate, req, mapping, dec = _single_mapping_setup()
        bounds = compute_bounds(substrate, [req], "cost")
        expected = mapping_cost(substrate, req, mapping)
        out = round_cost(substrate, [req], [dec], bounds, expected, seed=5)
        assert out.accepted
        assert out.objective_value == pytest.approx(expected)
        assert out.selection["pair"] == mapping

    def test_empty_decomposition_rejected(self):
        substrate, req, _, _ = _single_mapping_setup()
        bounds = compute_bounds(substrate, [req], "cost")
        empty = ConvexDecomposition(request_name="pair", entries=[])
        with pytest.raises(ValueError, match="empty decomposition"):
            round_cost(substrate, [req], [empty], bounds, 1.0, seed=5)


class TestTriCriteria:
    def test_profit_requires_a_third_of_the_optimum(self):
        b = bounds_from_parameters("profit", 0.0, 0.0, 0.0, 10, 1)
        low = check_tri_criteria(0.9, {}, b, 3.0, "profit")
        assert not low.ok
        assert low.objective_margin == pytest.approx(-0.1)
        exact = check_tri_criteria(1.0, {}, b, 3.0, "profit")
        assert exact.ok

    def test_cost_requires_at_most_twice_the_relaxation(self):
        b = bounds_from_parameters("cost", 0.0, 0.0, 0.0, 10, 1)
        over = check_tri_criteria(6.1, {}, b, 3.0, "cost")
        assert not over.ok
        under = check_tri_criteria(6.0, {}, b, 3.0, "cost")
        assert under.ok

    def test_load_margins_track_the_worst_resource(self):
        b = bounds_from_parameters("profit", 0.0, 0.0, 0.0, 10, 1)
        utilization = {
            ("node", "u0", "vm"): 0.4,
            ("node", "u1", "vm"): 1.2,
            ("edge", ("u0", "u1")): 0.7,
        }
        report = check_tri_criteria(5.0, utilization, b, 5.0, "profit")
        assert report.node_margin == pytest.approx(1.0 - 1.2)
        assert report.edge_margin == pytest.approx(1.0 - 0.7)
        assert not report.ok
