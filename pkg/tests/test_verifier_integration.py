"""End-to-end check against the real verifier build, when present.

The primary's acceptance gates run without the verifier; this module only
activates once `npm run build` has produced verifier/dist/main.js.
"""

import time
from pathlib import Path

import pytest

from toolteam.harness.tasks import TaskInstance
from toolteam.harness.verifier_client import VerifierClient, score_code

VERIFIER_MAIN = Path(__file__).resolve().parents[1] / "verifier" / "dist" / "main.js"

pytestmark = pytest.mark.skipif(
    not VERIFIER_MAIN.exists(),
    reason="verifier not built (cd verifier && npm run build)",
)


@pytest.fixture
def verifier(tmp_path):
    command = ["node", str(VERIFIER_MAIN), "--max-timeout", "30",
               "--workdir", str(tmp_path / "sandbox")]
    with VerifierClient(command) as client:
        yield client


def code_task(tests):
    return TaskInstance(
        task_id="mbpp-style-1",
        question="Write first_repeated_char(s) returning the first repeated "
                 "character in s, or None.",
        gold=None, category="code", kind="code", tests=tuple(tests),
    )


REFERENCE = """
def first_repeated_char(s):
    seen = set()
    for ch in s:
        if ch in seen:
            return ch
        seen.add(ch)
    return None
"""

TESTS = [
    "assert first_repeated_char('abcabc') == 'a'",
    "assert first_repeated_char('abc') is None",
    "assert first_repeated_char('123123') == '1'",
]


def test_reference_solution_passes(verifier):
    passed, transcript = score_code(REFERENCE, code_task(TESTS), verifier)
    assert passed
    assert transcript["failures"] == []


def test_wrong_solution_fails_with_message(verifier):
    wrong = REFERENCE.replace("return ch", "return None")
    passed, transcript = score_code(wrong, code_task(TESTS), verifier)
    assert not passed
    assert len(transcript["failures"]) >= 1


def test_nonterminating_solution_killed_within_budget(verifier):
    started = time.monotonic()
    outcome = verifier.verify("while True:\n    pass", TESTS, timeout_s=2)
    elapsed = time.monotonic() - started
    assert outcome.resource_exceeded == "time"
    assert elapsed <= 3.0
    assert outcome.duration_s <= 3.0


def test_crash_does_not_break_the_session(verifier):
    dead = verifier.verify("import os\nos._exit(3)", ["assert True"])
    assert not dead.passed
    alive = verifier.verify("x = 41 + 1", ["assert x == 42"])
    assert alive.passed


def test_fenced_markdown_solution_extracted(verifier):
    fenced = f"Here is my solution:\n```python\n{REFERENCE}\n```\nDone."
    passed, _ = score_code(fenced, code_task(TESTS), verifier)
    assert passed
