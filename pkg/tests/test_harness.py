import json
import random
import sys
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import pytest

from conftest import make_tasks, mock_spec, run
from toolteam.backends.roster import Roster
from toolteam.errors import SplitOverlapError, TaskFileError
from toolteam.harness.bench import BenchConfig, fold_report, run_benchmark
from toolteam.harness.scoring import (
    ABSTAIN,
    as_percent,
    canonical_answer,
    indicator_mean,
    majority_vote,
    normalize_math_answer,
)
from toolteam.harness.tasks import (
    SplitManifest,
    TaskInstance,
    dump_tasks,
    load_tasks,
    split_tasks,
)
from toolteam.harness.verifier_client import VerifierClient, extract_code, score_code
from toolteam.profiling import ProficiencyProfile

DATA = Path(__file__).parent / "data"


class TestNormalize:
    def test_hand_verified_corpus(self):
        corpus = json.loads((DATA / "normalize_corpus.json").read_text())
        failures = []
        for case in corpus["cases"]:
            got = normalize_math_answer(case["text"])
            if got != case["expected"]:
                failures.append((case["text"], case["expected"], got))
        assert not failures, f"{len(failures)} corpus mismatches: {failures[:5]}"
        assert len(corpus["cases"]) == 50

    def test_idempotent_on_canonical_values(self):
        for value in ("42", "7/2", "-3/2", "0"):
            assert normalize_math_answer(value) == value
        for value in ("42", "7/2", "-3/2", "0", "indeterminate"):
            assert canonical_answer(value) == value

    def test_gold_canonicalization(self):
        assert canonical_answer("042") == "42"
        assert canonical_answer("  7/2 ") == "7/2"
        assert canonical_answer("heptagon") == "heptagon"
        assert canonical_answer(None) == ABSTAIN
        assert canonical_answer("") == ABSTAIN


def brute_force_mode(answers):
    voting = [a for a in answers if a != ABSTAIN]
    if not voting:
        return ABSTAIN
    best, best_count = None, -1
    for candidate in set(voting):
        count = voting.count(candidate)
        if count > best_count or (count == best_count and candidate < best):
            best, best_count = candidate, count
    return best


class TestMajorityVote:
    def test_simple_mode(self):
        assert majority_vote(["7", "7", "3"]) == "7"

    def test_tie_lexicographic(self):
        assert majority_vote(["b", "a"]) == "a"

    def test_abstentions_excluded_unless_total(self):
        assert majority_vote([ABSTAIN, "5", ABSTAIN]) == "5"
        assert majority_vote([ABSTAIN, ABSTAIN]) == ABSTAIN

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            majority_vote([])

    def test_matches_counting_oracle_on_random_multisets(self):
        rng = random.Random(99)
        alphabet = ["1", "2", "3", "10", "9", "x", ABSTAIN]
        for _ in range(1000):
            answers = [rng.choice(alphabet)
                       for _ in range(rng.randrange(1, 12))]
            assert majority_vote(answers) == brute_force_mode(answers)


class TestPercentFormatting:
    def test_table_convention(self):
        assert as_percent(Fraction(28, 30)) == "93.33%"

    def test_half_up(self):
        assert as_percent(Fraction(63335, 100000)) == "63.34%"
        assert as_percent(Fraction(2, 3)) == "66.67%"
        assert as_percent(Fraction(1, 1)) == "100.00%"
        assert as_percent(Fraction(0, 1)) == "0.00%"

    def test_indicator_mean(self):
        assert indicator_mean([("a", "a"), ("b", "b")]) == Fraction(1)
        assert indicator_mean([("a", "b"), ("b", "b"), ("c", "c")]) == Fraction(2, 3)
        with pytest.raises(ValueError):
            indicator_mean([])


class TestTaskLoading:
    def _write(self, tmp_path, lines, name="aime_style.jsonl"):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_loads_thirty_tasks(self, tmp_path):
        lines = [
            json.dumps({"task_id": f"q{i}", "question": f"Q{i}", "gold": str(i)})
            for i in range(30)
        ]
        tasks = load_tasks(self._write(tmp_path, lines), kind="math")
        assert len(tasks) == 30
        assert all(t.kind == "math" for t in tasks)
        assert tasks[0].category == "aime_style"  # defaulted from file stem

    def test_missing_gold_names_the_line(self, tmp_path):
        lines = [
            json.dumps({"task_id": "q0", "question": "Q0", "gold": "1"}),
            json.dumps({"task_id": "q1", "question": "Q1"}),
        ]
        with pytest.raises(TaskFileError, match="line 2"):
            load_tasks(self._write(tmp_path, lines), kind="math")

    def test_duplicate_id_rejected(self, tmp_path):
        lines = [
            json.dumps({"task_id": "q0", "question": "Q0", "gold": "1"}),
            json.dumps({"task_id": "q0", "question": "Q1", "gold": "2"}),
        ]
        with pytest.raises(TaskFileError, match="duplicate"):
            load_tasks(self._write(tmp_path, lines), kind="math")

    def test_bad_json_names_the_line(self, tmp_path):
        with pytest.raises(TaskFileError, match="line 1"):
            load_tasks(self._write(tmp_path, ["{not json"]), kind="math")

    def test_round_trip(self, tmp_path):
        tasks = make_tasks(10, prefix="rt", gold_seed=4)
        path = tmp_path / "out.jsonl"
        dump_tasks(tasks, path)
        assert load_tasks(path, kind="math") == tasks


class TestSplit:
    def test_partition_and_stability(self):
        tasks = make_tasks(500, prefix="s", gold_seed=1)
        manifest = split_tasks(tasks, ratio=0.2, salt="v1")
        assert manifest.calibration_ids | manifest.test_ids == \
            {t.task_id for t in tasks}
        assert not manifest.calibration_ids & manifest.test_ids
        shuffled = list(tasks)
        random.Random(0).shuffle(shuffled)
        again = split_tasks(shuffled, ratio=0.2, salt="v1")
        assert again.calibration_ids == manifest.calibration_ids
        assert 0.1 < len(manifest.calibration_ids) / 500 < 0.3

    def test_salt_changes_assignment(self):
        tasks = make_tasks(500, prefix="s", gold_seed=1)
        a = split_tasks(tasks, ratio=0.2, salt="a")
        b = split_tasks(tasks, ratio=0.2, salt="b")
        assert a.calibration_ids != b.calibration_ids

    def test_manifest_rejects_overlap(self):
        with pytest.raises(SplitOverlapError):
            SplitManifest(frozenset({"x"}), frozenset({"x"}))


def perfect_bench_config(tasks, methods=("single", "majority", "tot:self")):
    agents = (mock_spec("alpha", 11, 1.0), mock_spec("beta", 22, 1.0))
    orchestrator = mock_spec("conductor", 99, 1.0, behavior="echo")
    roster = Roster(agents=agents, orchestrators=(orchestrator,))
    profiles = [
        ProficiencyProfile(agent_id=a.agent_id,
                           fixed_scores={"math": Fraction(9, 10)},
                           produced_by="self_assessment")
        for a in agents
    ]
    return BenchConfig(roster=roster, orchestrator=orchestrator,
                       profiles=profiles, tasks=tasks, methods=list(methods),
                       k=2, benchmark_name="unit")


class TestBench:
    def test_all_perfect_agents_scores_everything_100(self):
        tasks = make_tasks(12, prefix="b", gold_seed=9)
        report, records = run(run_benchmark(perfect_bench_config(tasks)))
        assert {r.method for r in report.rows} == \
            {"single:alpha", "single:beta", "majority_voting",
             "tot:self_assessment"}
        for row in report.rows:
            assert row.accuracy == Fraction(1), row.method
            assert row.accounting_complete

    def test_report_is_a_pure_fold_over_records(self):
        tasks = make_tasks(10, prefix="b2", gold_seed=3)
        config = perfect_bench_config(tasks)
        report, records = run(run_benchmark(config))
        round_tripped = json.loads(json.dumps(records))
        refolded = fold_report(round_tripped, config)
        assert refolded.to_json() == report.to_json()

    def test_calibration_split_leak_is_fatal(self):
        tasks = make_tasks(6, prefix="leak", gold_seed=2)
        manifest = SplitManifest(
            calibration_ids=frozenset({tasks[0].task_id}),
            test_ids=frozenset(t.task_id for t in tasks[1:]),
        )
        config = perfect_bench_config(tasks)
        config.manifest = manifest
        with pytest.raises(SplitOverlapError, match="calibration-split"):
            run(run_benchmark(config))

    def test_majority_is_math_only(self):
        code_task = TaskInstance(task_id="c1", question="write add",
                                 gold=None, category="code", kind="code",
                                 tests=("assert add(1, 2) == 3",))
        config = perfect_bench_config([code_task], methods=("majority",))
        report, records = run(run_benchmark(config))
        (row,) = report.rows
        assert row.accuracy is None
        assert row.to_json()["accuracy_percent"] is None

    def test_ledger_totals_accumulate(self):
        tasks = make_tasks(5, prefix="b3", gold_seed=8)
        report, _ = run(run_benchmark(
            perfect_bench_config(tasks, methods=("tot:self",))))
        (row,) = report.rows
        # 2 agents * 64 tokens * 5 tasks plus 5 orchestrator replies
        assert row.agent_tokens == 2 * 64 * 5
        assert row.orchestrator_tokens == 64 * 5
        assert row.total_tokens == row.agent_tokens + row.orchestrator_tokens
        assert row.dollar_cost > Decimal(0)

    def test_rendered_table_mentions_methods(self):
        tasks = make_tasks(4, prefix="b4", gold_seed=1)
        report, _ = run(run_benchmark(perfect_bench_config(tasks)))
        text = report.render_text()
        assert "tot:self_assessment" in text
        assert "100.00%" in text


STUB = [sys.executable, str(Path(__file__).parent / "stub_verifier.py")]


class TestVerifierClient:
    def test_pass_and_fail(self):
        with VerifierClient(STUB) as client:
            ok = client.verify("def add(a, b): return a + b",
                               ["assert add(1, 2) == 3"])
            assert ok.passed and not ok.failures
            bad = client.verify("BROKEN", ["assert False"])
            assert not bad.passed and len(bad.failures) >= 1

    def test_verifier_death_is_infrastructure_not_exception(self):
        with VerifierClient(STUB) as client:
            dead = client.verify("CRASH_VERIFIER", [])
            assert not dead.passed
            assert dead.infrastructure_error
            # the client restarts the process for the next request
            again = client.verify("fine", ["assert True"])
            assert again.passed

    def test_score_code_round_trip(self):
        task = TaskInstance(task_id="mbpp1", question="write add", gold=None,
                            category="code", kind="code",
                            tests=("assert add(1, 2) == 3",))
        with VerifierClient(STUB) as client:
            passed, transcript = score_code(
                "```python\ndef add(a, b):\n    return a + b\n```",
                task, client)
            assert passed
            assert transcript["task_id"] == "mbpp1"

    def test_extract_code_prefers_last_fence(self):
        text = "first\n```python\nx = 1\n```\nthen\n```py\ny = 2\n```\n"
        assert extract_code(text) == "y = 2"
        assert extract_code("plain body") == "plain body"
