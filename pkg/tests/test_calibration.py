import math
import random
from decimal import Decimal
from fractions import Fraction

import pytest

from conftest import make_tasks, mock_spec, run
from toolteam.calibration import (
    CalibrationScore,
    pick_orchestrator,
    run_calibration,
    score,
)
from toolteam.errors import ConfigurationError, SplitOverlapError


def tools():
    return [mock_spec("tool-a", 11, 1.0), mock_spec("tool-b", 22, 0.8)]


class TestScoreOp:
    def test_all_correct(self):
        assert score([("a", "a"), ("b", "b")]) == Fraction(1)

    def test_direct_count(self):
        assert score([("a", "b"), ("b", "b"), ("c", "c")]) == Fraction(2, 3)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            score([])

    def test_formatting_convention(self):
        from toolteam.harness.scoring import as_percent

        pairs = [("x", "x")] * 28 + [("x", "y")] * 2
        value = score(pairs)
        assert value == Fraction(28, 30)
        assert as_percent(value) == "93.33%"

    def test_permutation_invariant(self):
        rng = random.Random(3)
        pairs = [("a", "a") if rng.random() < 0.6 else ("a", "b")
                 for _ in range(200)]
        shuffled = list(pairs)
        rng.shuffle(shuffled)
        assert score(pairs) == score(shuffled)


class TestRunCalibration:
    def test_always_gold_candidate_scores_one(self):
        candidate = mock_spec("perfect", 5, 1.0)
        tasks = make_tasks(20, prefix="cal", gold_seed=4)
        report = run(run_calibration([candidate], tools(), "math", tasks,
                                     [Decimal("0.03")]))
        assert report.averages["perfect"] == Fraction(1)
        assert report.selected == "perfect"

    def test_scripted_candidates_ranked_within_binomial_bounds(self):
        strong = mock_spec("strong", 5, 0.9)
        weak = mock_spec("weak", 6, 0.6)
        tasks = make_tasks(200, prefix="rank", gold_seed=8)
        report = run(run_calibration([strong, weak], tools(), "math", tasks,
                                     [Decimal("0.03"), Decimal("0.02")]))
        assert report.selected == "strong"
        for candidate, rate in (("strong", 0.9), ("weak", 0.6)):
            bound = 3 * math.sqrt(rate * (1 - rate) / 200)
            assert abs(float(report.averages[candidate]) - rate) <= bound

    def test_calib_test_overlap_is_fatal(self):
        candidate = mock_spec("perfect", 5, 1.0)
        tasks = make_tasks(10, prefix="ovl", gold_seed=4)
        with pytest.raises(SplitOverlapError):
            run(run_calibration([candidate], tools(), "math", tasks,
                                [Decimal("0.03")],
                                test_ids=[tasks[0].task_id, "other"]))

    def test_candidate_without_tool_calls_marked_ineligible(self):
        eligible = mock_spec("ok", 5, 1.0)
        crippled = mock_spec("no-tools", 6, 1.0, supports_tool_calls=False)
        tasks = make_tasks(6, prefix="inel", gold_seed=4)
        report = run(run_calibration([eligible, crippled], tools(), "math",
                                     tasks, [Decimal("0.03")]))
        assert "no-tools" in report.ineligible
        assert "no-tools" not in report.averages
        assert report.selected == "ok"

    def test_empty_set_rejected(self):
        with pytest.raises(ConfigurationError):
            run(run_calibration([mock_spec("c", 1, 1.0)], tools(), "math", [],
                                [Decimal("0.03")]))

    def test_report_shape_mirrors_budget_columns(self):
        candidate = mock_spec("perfect", 5, 1.0)
        tasks = make_tasks(5, prefix="shape", gold_seed=4)
        report = run(run_calibration([candidate], tools(), "math", tasks,
                                     [Decimal("0.03"), Decimal("0.02")]))
        obj = report.to_json()
        assert obj["budgets"] == ["0.03", "0.02"]
        (row,) = obj["rows"]
        assert set(row["budgets"]) == {"0.03", "0.02"}
        assert row["selected"] is True
        assert row["average_percent"] == "100.00%"

    def test_permutation_of_calib_set_changes_nothing(self):
        candidate = mock_spec("cand", 5, 0.7)
        tasks = make_tasks(50, prefix="perm", gold_seed=4)
        report_a = run(run_calibration([candidate], tools(), "math", tasks,
                                       [Decimal("0.03")]))
        shuffled = list(tasks)
        random.Random(0).shuffle(shuffled)
        report_b = run(run_calibration([candidate], tools(), "math", shuffled,
                                       [Decimal("0.03")]))
        assert report_a.averages == report_b.averages
        assert report_a.to_json() == report_b.to_json()


class TestArgmax:
    def test_argmax_invariant_under_monotone_rescaling(self):
        averages = {"a": Fraction(9, 10), "b": Fraction(6, 10),
                    "c": Fraction(3, 10)}
        costs = {k: Decimal(1) for k in averages}
        baseline = pick_orchestrator(averages, costs)
        rescaled = {k: v / 3 + Fraction(1, 50) for k, v in averages.items()}
        assert pick_orchestrator(rescaled, costs) == baseline

    def test_tie_breaks_cost_then_id(self):
        averages = {"x": Fraction(1, 2), "y": Fraction(1, 2)}
        assert pick_orchestrator(
            averages, {"x": Decimal(2), "y": Decimal(1)}) == "y"
        assert pick_orchestrator(
            averages, {"x": Decimal(1), "y": Decimal(1)}) == "x"

    def test_score_invariant_counts(self):
        with pytest.raises(ConfigurationError):
            CalibrationScore("c", "math", Decimal("0.03"), correct=5, n_items=4)
