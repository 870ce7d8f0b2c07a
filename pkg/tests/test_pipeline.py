"""The staged pipeline wrapper: reports, overrides, failure surfaces."""

from __future__ import annotations

import json

import pytest

from vnembed import (
    PipelineConfig,
    PipelineError,
    Request,
    SubstrateGraph,
    run_pipeline,
)
from vnembed.instances import Instance


def test_unknown_variant_fails_in_config(fig3):
    with pytest.raises(PipelineError, match=r"\[config\]"):
        run_pipeline(fig3, PipelineConfig(variant="latency"))


def test_validation_failures_name_their_stage():
    substrate = SubstrateGraph.build({"a": {"vm": (1.0, 1.0)}}, {})
    bad = Request.build("r", {"x": ("gpu", 1.0, ("a",))}, {}, profit=1.0)
    instance = Instance(name="bad", substrate=substrate, requests=(bad,))
    with pytest.raises(PipelineError) as err:
        run_pipeline(instance, PipelineConfig())
    assert err.value.stage == "validate"
    assert "unknown-type" in str(err.value)


def test_profit_pipeline_on_unservable_instance(fig3):
    report, rounded = run_pipeline(fig3, PipelineConfig(variant="profit", seed=1))
    assert report.requests[0]["dropped"] is True
    assert report.lp["objective"] == pytest.approx(0.0)
    assert rounded.accepted
    assert rounded.objective_value == 0.0
    assert report.rounding["selection"] == {}


def test_profit_pipeline_embeds_the_gadget(fig3_gadget):
    report, rounded = run_pipeline(
        fig3_gadget, PipelineConfig(variant="profit", seed=1)
    )
    assert report.requests[0]["width"] == 2
    assert not report.requests[0]["dropped"]
    assert rounded.accepted
    assert rounded.objective_value == pytest.approx(1.0)
    assert report.rounding["selection"]["triangle"]["node_map"] == {
        "i": "u1",
        "j": "u2",
        "k": "u3",
    }


def test_cost_pipeline_reports_pruning(fig3_gadget):
    report, rounded = run_pipeline(fig3_gadget, PipelineConfig(variant="cost", seed=1))
    assert report.lp["objective"] == pytest.approx(105.0)
    assert rounded.accepted
    assert rounded.objective_value == pytest.approx(105.0)
    pruning = report.decomposition[0]["pruning"]
    assert pruning["cost_share"] == pytest.approx(105.0)
    assert pruning["removed"] == 0


def test_cost_pipeline_flags_infeasibility(fig3):
    with pytest.raises(PipelineError) as err:
        run_pipeline(fig3, PipelineConfig(variant="cost"))
    assert err.value.stage == "solve-lp"
    assert err.value.infeasible


def test_bound_overrides_land_in_the_report(fig3_gadget):
    report, _ = run_pipeline(
        fig3_gadget,
        PipelineConfig(variant="profit", seed=1, alpha=0.5, beta=9.0, gamma=8.0),
    )
    assert report.bounds["alpha"] == 0.5
    assert report.bounds["beta"] == 9.0
    assert report.bounds["gamma"] == 8.0


def test_variable_budget_aborts_model_build(fig3_gadget):
    with pytest.raises(PipelineError) as err:
        run_pipeline(fig3_gadget, PipelineConfig(variant="profit", var_budget=3))
    assert err.value.stage == "build-lp"


def test_timings_are_opt_in(fig3_gadget):
    config = PipelineConfig(variant="profit", seed=1, include_timings=True)
    report, _ = run_pipeline(fig3_gadget, config)
    without = json.loads(report.to_json())
    assert "timings" not in without
    with_timings = json.loads(report.to_json(include_timings=True))
    assert {"width", "build-lp", "solve-lp", "decompose", "round"} <= set(
        with_timings["timings"]
    )
