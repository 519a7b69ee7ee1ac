"""Consistency checks on the live-mode reference fixtures.

No live endpoint is contacted: these verify the recorded targets are
internally coherent with the exact-rational formatting convention and with
the defaults the runtime ships.
"""

import json
from fractions import Fraction
from pathlib import Path

from toolteam.backends.types import DEFAULT_KIND_CAPS, ORCHESTRATOR_WINDOW, AgentSpec
from toolteam.harness.scoring import as_percent

FIXTURES = json.loads(
    (Path(__file__).parent / "data" / "live_reference.json").read_text())


def test_math_percentages_are_exact_thirtieths():
    sections = [
        FIXTURES["single_model"]["math"].values(),
        FIXTURES["selection_policies"]["math"].values(),
        [FIXTURES["orchestrated_team"]["math"]],
    ]
    for section in sections:
        for entry in section:
            value = Fraction(entry["correct"], entry["n"])
            assert as_percent(value) == entry["percent"], entry


def test_profile_ranking_property():
    # the strongest single math model must outrank the weakest in a profile
    math = FIXTURES["single_model"]["math"]
    strong = Fraction(math["deepseek-v3.2"]["correct"], 30)
    weak = Fraction(math["phi-4"]["correct"], 30)
    assert strong > weak


def test_policy_ordering_recorded():
    math = FIXTURES["selection_policies"]["math"]
    self_score = Fraction(math["self_assessment"]["correct"], 30)
    for other in ("single", "orchestrator_assessment", "random_allocation"):
        assert self_score >= Fraction(math[other]["correct"], 30)


def test_constants_match_runtime_defaults():
    constants = FIXTURES["constants"]
    assert DEFAULT_KIND_CAPS["math"] == constants["agent_window_math"]
    assert DEFAULT_KIND_CAPS["code"] == constants["agent_window_code"]
    assert ORCHESTRATOR_WINDOW == constants["orchestrator_window"]
    endpoint_kwargs = dict(endpoint_id="e", base_url="https://x",
                           model_name="m", output_price="1")
    from toolteam.backends.types import ModelEndpoint

    spec = AgentSpec(agent_id="a", endpoint=ModelEndpoint(**endpoint_kwargs))
    assert spec.reasoning_budget_fraction == constants["reasoning_budget_fraction"]


def test_calibration_selection_recorded():
    assert FIXTURES["calibration"]["math"]["selected"] == "deepseek-v3.2"
    assert FIXTURES["calibration"]["code"]["selected"] == "gpt-5-mini"
    assert FIXTURES["calibration"]["math"]["budgets"] == ["0.03", "0.02"]
