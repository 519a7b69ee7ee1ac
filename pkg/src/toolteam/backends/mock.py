"""Deterministic scripted agents for desk-scale runs and tests.

A scripted agent answers correctly with its per-category probability; the
coin comes from a per-call RNG derived from (rng_seed, task_id), so replies
are reproducible and concurrent calls never share mutable state.
"""

from __future__ import annotations

import asyncio
import hashlib
import random
import re
from fractions import Fraction

from toolteam.backends.types import (
    GenerationRequest,
    GenerationResponse,
    MockAgentScript,
    ToolCall,
)
from toolteam.errors import ConfigurationError
from toolteam.harness.scoring import majority_vote
from toolteam.harness.tasks import TaskInstance

# Marker the assessment prompt carries; scripted graders key on it.
ASSESSMENT_MARKER = "Per-Problem Analysis"

_REPORTED_RE = re.compile(r"^Reported answer:\s*(.+)$", re.MULTILINE)
_PROBLEM_RE = re.compile(r"^Problem\s+(\S+):", re.MULTILINE)
_FRACTION_GOLD_RE = re.compile(r"([-+]?\d+)\s*/\s*(\d+)")

_SILENT_TEXT = (
    "After review I am unable to commit to a definitive response for this "
    "request. Further deliberation would be required."
)


def _call_rng(seed: int, task_id: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{task_id}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _wrong_answer(gold: str, rng: random.Random) -> str:
    """A deterministic answer guaranteed to normalize differently from gold."""
    try:
        return str(int(gold) + 1 + rng.randrange(9))
    except ValueError:
        pass
    m = _FRACTION_GOLD_RE.fullmatch(gold.strip())
    if m:
        frac = Fraction(int(m.group(1)) + 1 + rng.randrange(9), int(m.group(2)))
        return str(frac)
    if any(ch.isdigit() for ch in gold):
        return "".join(str((int(c) + 1) % 10) if c.isdigit() else c for c in gold)
    return gold + "x"


def _prompt_text(request: GenerationRequest) -> str:
    return "\n".join(m.content for m in request.messages if m.content)


def _prompt_tokens(request: GenerationRequest) -> int:
    return max(1, len(_prompt_text(request)) // 4)


def _finish(text: str, script: MockAgentScript, request: GenerationRequest,
            tool_calls: tuple[ToolCall, ...] = ()) -> GenerationResponse:
    cap = request.max_completion_tokens
    truncated = script.tokens_per_reply > cap
    if truncated:
        words = text.split()
        text = " ".join(words[:cap])
    return GenerationResponse(
        text=text,
        tool_calls=tool_calls,
        prompt_tokens=_prompt_tokens(request),
        completion_tokens=min(script.tokens_per_reply, cap),
        finish_reason="length" if truncated else ("tool_call" if tool_calls else "stop"),
    )


def _canned_assessment(prompt: str) -> str:
    problem_ids = _PROBLEM_RE.findall(prompt)
    lines = ["## Part 1: Per-Problem Analysis", ""]
    for pid in problem_ids:
        lines += [
            f"Problem {pid}:",
            "- Taxonomy: General reasoning (scripted reviewer)",
            "- Verdict: [PASS]",
            "- Gap analysis: scripted reviewer records no gap.",
            "",
        ]
    lines += [
        "## Part 2: Executive Summary",
        "",
        "- Core competencies: coverage as scripted for this category.",
        "- Blind spots: none recorded by the scripted reviewer.",
        "- Final verdict: Scripted reviewer output; verdicts are reconciled "
        "against ground truth downstream. Reliability mirrors the script.",
    ]
    return "\n".join(lines)


def mock_generate(script: MockAgentScript, task: TaskInstance | None,
                  request: GenerationRequest) -> GenerationResponse:
    """Pure function of (script, task, request); see module docstring."""
    prompt = _prompt_text(request)

    if ASSESSMENT_MARKER in prompt:
        return _finish(_canned_assessment(prompt), script, request)

    if script.behavior == "silent":
        return _finish(_SILENT_TEXT, script, request)

    if script.behavior == "never_answer":
        if request.tool_schemas:
            name = request.tool_schemas[0]["function"]["name"]
            call = ToolCall(name=name, arguments={"question": "(repeat)"},
                            call_id="mock-call-0")
            return _finish("Consulting a tool before answering.", script,
                           request, tool_calls=(call,))
        return _finish(_SILENT_TEXT, script, request)

    if script.behavior == "echo":
        reported = [m.strip() for m in _REPORTED_RE.findall(prompt)]
        if reported:
            answer = majority_vote(reported)
            return _finish(f"Adopting the team consensus.\nFINAL ANSWER: {answer}",
                           script, request)
        return _finish(_SILENT_TEXT, script, request)

    # behavior == "answer": the per-category coin decides correctness
    if task is None:
        raise ConfigurationError(
            f"scripted agent {script.agent_id!r} needs a task to answer"
        )
    if task.category not in script.per_category_accuracy:
        raise ConfigurationError(
            f"scripted agent {script.agent_id!r} has no accuracy for "
            f"category {task.category!r}"
        )
    if task.gold is None:
        raise ConfigurationError(
            f"task {task.task_id!r} has no gold answer for the scripted agent"
        )
    rng = _call_rng(script.rng_seed, task.task_id)
    accuracy = script.per_category_accuracy[task.category]
    if rng.random() < accuracy:
        answer = task.gold
    else:
        answer = _wrong_answer(task.gold, rng)
    text = (
        f"Working the {task.category} problem {task.task_id} step by step. "
        f"The reasoning settles on a single value.\nFINAL ANSWER: {answer}"
    )
    return _finish(text, script, request)


class MockClient:
    """Async facade over mock_generate; optionally simulates latency."""

    def __init__(self, script: MockAgentScript, *, latency_mode: bool = False):
        self.script = script
        self.latency_mode = latency_mode

    async def generate(self, request: GenerationRequest, *,
                       task: TaskInstance | None = None) -> GenerationResponse:
        if self.latency_mode and self.script.latency_ms:
            await asyncio.sleep(self.script.latency_ms / 1000.0)
        return mock_generate(self.script, task, request)
