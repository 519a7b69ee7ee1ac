"""Per-agent specialization profiles.

A profile is the exact per-category accuracy vector measured on a validation
set, optionally paired with a narrative audit produced by a grading model
(the agent itself, or the orchestrator).  Narrative verdicts never override
the harness's own correctness checks: mismatches are overwritten and logged.
"""

from __future__ import annotations

import asyncio
import json
import logging
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from toolteam.backends.roster import Backend
from toolteam.backends.types import AgentSpec, GenerationRequest, Message
from toolteam.errors import AssessmentParseError, ConfigurationError
from toolteam.harness.scoring import ABSTAIN, canonical_answer, normalize_math_answer
from toolteam.harness.tasks import TaskInstance

logger = logging.getLogger(__name__)

POLICIES = ("random_allocation", "orchestrator_assessment", "self_assessment")

ASSESSMENT_BATCH_SIZE = 10
DESCRIPTION_CHAR_CAP = 1000

PART1_HEADER = "## Part 1: Per-Problem Analysis"
PART2_HEADER = "## Part 2: Executive Summary"

ASSESSMENT_INSTRUCTIONS = f"""You are auditing a solver called the Subject \
Agent. For each problem below you get the question, the Subject Agent's \
reply, and the ground truth. Some replies are correct, some are not.

First, for every problem, write a short structured audit:
1. Taxonomy: the problem type and the specific skill it needs.
2. Verdict: state [PASS] or [FAIL].
3. Gap analysis: if correct, say briefly why it worked; if incorrect, \
pinpoint where and why the reply went wrong (calculation slip, logic jump, \
hallucination, misread constraint) by comparing it with the ground truth.

Then write an overall profile of the Subject Agent:
1. Core competencies: categories where it consistently succeeds.
2. Blind spots and failure modes: the patterns behind its errors.
3. Final verdict: two sentences on its reliability.

Formatting rules: start each problem audit with 'Problem <id>:' on its own \
line, and use exactly the headers '{PART1_HEADER}' and '{PART2_HEADER}'."""

ASSESSMENT_REMINDER = (
    f"Your previous reply could not be parsed. Reply again using exactly the "
    f"headers '{PART1_HEADER}' and '{PART2_HEADER}', one 'Problem <id>:' "
    f"block per problem, and a [PASS] or [FAIL] verdict in every block."
)

_VERDICT_RE = re.compile(r"\[(PASS|FAIL)\]")
_TAXONOMY_RE = re.compile(r"Taxonomy:\s*(.+)")
_TRACE_EXCERPT_WORDS = 200


@dataclass(frozen=True)
class Transcript:
    """One validation item as seen by an agent, persisted for later audits."""

    task_id: str
    category: str
    question: str
    gold: str
    raw_text: str
    prediction: str
    correct: bool
    flagged: bool = False  # generation failed; scored incorrect, never dropped
    prompt_tokens: int = 0
    completion_tokens: int = 0
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id, "category": self.category,
            "question": self.question, "gold": self.gold,
            "raw_text": self.raw_text, "prediction": self.prediction,
            "correct": self.correct, "flagged": self.flagged,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens, "error": self.error,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Transcript":
        return cls(**obj)


@dataclass(frozen=True)
class ProblemAudit:
    task_id: str
    taxonomy: str
    verdict: str  # PASS | FAIL, always reconciled with harness truth
    gap_analysis: str
    reconciled: bool = False


@dataclass(frozen=True)
class AssessmentReport:
    per_problem: tuple[ProblemAudit, ...]
    executive_summary: str
    grader_id: str
    produced_by: str

    def to_json(self) -> dict:
        return {
            "per_problem": [
                {"task_id": a.task_id, "taxonomy": a.taxonomy,
                 "verdict": a.verdict, "gap_analysis": a.gap_analysis,
                 "reconciled": a.reconciled}
                for a in self.per_problem
            ],
            "executive_summary": self.executive_summary,
            "grader_id": self.grader_id,
            "produced_by": self.produced_by,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AssessmentReport":
        return cls(
            per_problem=tuple(ProblemAudit(**a) for a in obj["per_problem"]),
            executive_summary=obj["executive_summary"],
            grader_id=obj["grader_id"],
            produced_by=obj["produced_by"],
        )


@dataclass(frozen=True)
class ProficiencyProfile:
    """Exact per-category accuracy vector for one agent."""

    agent_id: str
    correct: Mapping[str, int] = field(default_factory=dict)
    n_samples: Mapping[str, int] = field(default_factory=dict)
    fixed_scores: Mapping[str, Fraction] = field(default_factory=dict)
    assessment: AssessmentReport | None = None
    produced_by: str = "self_assessment"
    version: int = 1

    def __post_init__(self):
        if self.produced_by not in POLICIES:
            raise ConfigurationError(f"unknown policy {self.produced_by!r}")
        for category, n in self.n_samples.items():
            got = self.correct.get(category)
            if got is None or not 0 <= got <= n or n <= 0:
                raise ConfigurationError(
                    f"profile {self.agent_id!r}: bad counts for {category!r}"
                )

    def has_category(self, category: str) -> bool:
        return category in self.n_samples or category in self.fixed_scores

    def score_for(self, category: str) -> Fraction:
        if category in self.n_samples:
            return Fraction(self.correct[category], self.n_samples[category])
        if category in self.fixed_scores:
            return self.fixed_scores[category]
        raise ConfigurationError(
            f"profile {self.agent_id!r} has no score for category {category!r}"
        )

    @property
    def categories(self) -> list[str]:
        return sorted(set(self.n_samples) | set(self.fixed_scores))

    def to_json(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "correct": dict(self.correct),
            "n_samples": dict(self.n_samples),
            "fixed_scores": {c: str(s) for c, s in self.fixed_scores.items()},
            "scores": {c: float(self.score_for(c)) for c in self.categories},
            "assessment": self.assessment.to_json() if self.assessment else None,
            "produced_by": self.produced_by,
            "version": self.version,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProficiencyProfile":
        return cls(
            agent_id=obj["agent_id"],
            correct={c: int(v) for c, v in obj.get("correct", {}).items()},
            n_samples={c: int(v) for c, v in obj.get("n_samples", {}).items()},
            fixed_scores={c: Fraction(s)
                          for c, s in obj.get("fixed_scores", {}).items()},
            assessment=(AssessmentReport.from_json(obj["assessment"])
                        if obj.get("assessment") else None),
            produced_by=obj.get("produced_by", "self_assessment"),
            version=int(obj.get("version", 1)),
        )


def agent_request(spec: AgentSpec, task: TaskInstance,
                  max_tokens: int | None = None) -> GenerationRequest:
    cap = max_tokens if max_tokens is not None else spec.kind_cap(task.kind)
    reasoning = None
    if spec.endpoint.reasoning_capable:
        reasoning = int(cap * spec.reasoning_budget_fraction)
    return GenerationRequest(
        messages=(Message("system", spec.system_prompt),
                  Message("user", task.question)),
        max_completion_tokens=cap,
        reasoning_max_tokens=reasoning,
    )


async def run_validation_item(spec: AgentSpec, client: Backend,
                              task: TaskInstance) -> Transcript:
    gold = canonical_answer(task.gold)
    try:
        response = await client.generate(agent_request(spec, task), task=task)
    except Exception as exc:  # scored incorrect, kept for stable denominators
        logger.warning("generation failed for %s on %s: %s",
                       spec.agent_id, task.task_id, exc)
        return Transcript(task_id=task.task_id, category=task.category,
                          question=task.question, gold=gold, raw_text="",
                          prediction=ABSTAIN, correct=False, flagged=True,
                          error=str(exc))
    prediction = normalize_math_answer(response.text)
    return Transcript(
        task_id=task.task_id, category=task.category, question=task.question,
        gold=gold, raw_text=response.text, prediction=prediction,
        correct=(prediction == gold and prediction != ABSTAIN),
        prompt_tokens=response.prompt_tokens,
        completion_tokens=response.completion_tokens,
    )


async def compute_proficiency(spec: AgentSpec, category: str,
                              val_set: Sequence[TaskInstance], *,
                              client: Backend, parallelism: int = 16,
                              ) -> tuple[Fraction, list[Transcript]]:
    """Exact indicator mean over the validation set, with transcripts."""
    if not val_set:
        raise ValueError("validation set must be non-empty")
    off_category = [t.task_id for t in val_set if t.category != category]
    if off_category:
        raise ConfigurationError(
            f"validation items outside category {category!r}: {off_category[:5]}"
        )
    gate = asyncio.Semaphore(parallelism)

    async def one(task: TaskInstance) -> Transcript:
        async with gate:
            return await run_validation_item(spec, client, task)

    transcripts = list(await asyncio.gather(*(one(t) for t in val_set)))
    transcripts.sort(key=lambda t: t.task_id)
    score = Fraction(sum(t.correct for t in transcripts), len(transcripts))
    return score, transcripts


def save_transcripts(transcripts: Sequence[Transcript], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for t in transcripts:
            fh.write(json.dumps(t.to_json(), ensure_ascii=False) + "\n")


def load_transcripts(path: str | Path) -> list[Transcript]:
    with Path(path).open(encoding="utf-8") as fh:
        return [Transcript.from_json(json.loads(line)) for line in fh if line.strip()]


def recompute_from_transcripts(path: str | Path) -> Fraction:
    """Re-derive the proficiency score from persisted raw generations."""
    transcripts = load_transcripts(path)
    if not transcripts:
        raise ValueError(f"no transcripts in {path}")
    correct = 0
    for t in transcripts:
        if t.flagged:
            continue
        prediction = normalize_math_answer(t.raw_text)
        if prediction != ABSTAIN and prediction == t.gold:
            correct += 1
    return Fraction(correct, len(transcripts))


def _trace_excerpt(text: str, words: int = _TRACE_EXCERPT_WORDS) -> str:
    parts = text.split()
    return " ".join(parts[-words:])


def build_assessment_prompt(transcripts: Sequence[Transcript]) -> str:
    blocks = []
    for t in transcripts:
        blocks.append(
            f"Problem {t.task_id}:\n"
            f"Question: {t.question}\n"
            f"Subject agent reply: {_trace_excerpt(t.raw_text) or '(no reply)'}\n"
            f"Subject agent final answer: {t.prediction}\n"
            f"Ground truth: {t.gold}"
        )
    return ASSESSMENT_INSTRUCTIONS + "\n\n" + "\n\n".join(blocks) + \
        "\n\nWrite the report now."


def parse_assessment(text: str, expected_ids: Sequence[str]) -> tuple[list[ProblemAudit], str]:
    """Split the report on its two required headers; keep free text verbatim."""
    if PART1_HEADER not in text or PART2_HEADER not in text:
        raise AssessmentParseError("missing required section headers")
    part1 = text.split(PART1_HEADER, 1)[1].split(PART2_HEADER, 1)[0]
    summary = text.split(PART2_HEADER, 1)[1].strip()

    audits: list[ProblemAudit] = []
    chunks = re.split(r"^Problem\s+", part1, flags=re.MULTILINE)[1:]
    for chunk in chunks:
        header, _, body = chunk.partition("\n")
        task_id = header.strip().rstrip(":").strip()
        verdict_match = _VERDICT_RE.search(body)
        taxonomy_match = _TAXONOMY_RE.search(body)
        audits.append(ProblemAudit(
            task_id=task_id,
            taxonomy=taxonomy_match.group(1).strip() if taxonomy_match else "",
            verdict=verdict_match.group(1) if verdict_match else "FAIL",
            gap_analysis=body.strip(),
        ))
    if not audits:
        raise AssessmentParseError("no per-problem entries found")
    found = {a.task_id for a in audits}
    missing = [i for i in expected_ids if i not in found]
    if missing:
        raise AssessmentParseError(f"report omitted problems: {missing[:5]}")
    return audits, summary


def _reconcile(audits: Sequence[ProblemAudit],
               truth: Mapping[str, bool]) -> list[ProblemAudit]:
    """Ground truth always wins; grader text may not overturn correctness."""
    out = []
    for audit in audits:
        if audit.task_id not in truth:
            continue  # grader hallucinated an extra problem; drop it
        expected = "PASS" if truth[audit.task_id] else "FAIL"
        if audit.verdict != expected:
            logger.info("reconciling verdict for %s: grader said %s, truth %s",
                        audit.task_id, audit.verdict, expected)
            audit = replace(audit, verdict=expected, reconciled=True)
        out.append(audit)
    return out


async def _assess(grader: AgentSpec, grader_client: Backend,
                  transcripts: Sequence[Transcript], produced_by: str,
                  *, batch_size: int = ASSESSMENT_BATCH_SIZE,
                  max_tokens: int = 4096) -> AssessmentReport:
    truth = {t.task_id: t.correct for t in transcripts}
    audits: list[ProblemAudit] = []
    summaries: list[str] = []
    for start in range(0, len(transcripts), batch_size):
        batch = transcripts[start:start + batch_size]
        prompt = build_assessment_prompt(batch)
        expected = [t.task_id for t in batch]
        messages = [Message("system", "You are a rigorous model auditor."),
                    Message("user", prompt)]
        request = GenerationRequest(messages=tuple(messages),
                                    max_completion_tokens=max_tokens)
        response = await grader_client.generate(request)
        try:
            batch_audits, summary = parse_assessment(response.text, expected)
        except AssessmentParseError:
            retry_messages = messages + [
                Message("assistant", response.text),
                Message("user", ASSESSMENT_REMINDER),
            ]
            response = await grader_client.generate(
                GenerationRequest(messages=tuple(retry_messages),
                                  max_completion_tokens=max_tokens))
            batch_audits, summary = parse_assessment(response.text, expected)
        audits.extend(_reconcile(batch_audits, truth))
        summaries.append(summary)
    return AssessmentReport(
        per_problem=tuple(audits),
        executive_summary="\n\n".join(s for s in summaries if s),
        grader_id=grader.agent_id,
        produced_by=produced_by,
    )


async def self_assess(agent: AgentSpec, transcripts: Sequence[Transcript], *,
                      client: Backend,
                      batch_size: int = ASSESSMENT_BATCH_SIZE) -> AssessmentReport:
    """The agent audits its own transcripts against ground truth."""
    return await _assess(agent, client, transcripts, "self_assessment",
                         batch_size=batch_size)


async def orchestrator_assess(orchestrator: AgentSpec, agent_id: str,
                              transcripts: Sequence[Transcript], *,
                              client: Backend,
                              batch_size: int = ASSESSMENT_BATCH_SIZE,
                              ) -> AssessmentReport:
    """The orchestrator audits a tool agent's transcripts."""
    del agent_id  # identity travels with the transcripts
    return await _assess(orchestrator, client, transcripts,
                         "orchestrator_assessment", batch_size=batch_size)


async def build_profiles(agents: Sequence[AgentSpec], category: str,
                         val_set: Sequence[TaskInstance], policy: str, *,
                         clients: Mapping[str, Backend],
                         grader: AgentSpec | None = None,
                         with_assessment: bool = True,
                         parallelism: int = 16,
                         ) -> tuple[list[ProficiencyProfile],
                                    dict[str, list[Transcript]]]:
    """Profile every agent under one selection policy.

    random_allocation skips measurement entirely (uniform 0.5 scores);
    the other two measure proficiency and attach the policy's audit.
    """
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown policy {policy!r}")
    if policy == "random_allocation":
        return random_profile(agents, category), {}
    if policy == "orchestrator_assessment" and grader is None:
        raise ConfigurationError("orchestrator_assessment needs a grader agent")

    profiles: list[ProficiencyProfile] = []
    transcripts: dict[str, list[Transcript]] = {}
    for spec in agents:
        _, agent_transcripts = await compute_proficiency(
            spec, category, val_set, client=clients[spec.agent_id],
            parallelism=parallelism)
        transcripts[spec.agent_id] = agent_transcripts
        assessment = None
        if with_assessment:
            if policy == "self_assessment":
                assessment = await self_assess(spec, agent_transcripts,
                                               client=clients[spec.agent_id])
            else:
                assert grader is not None
                assessment = await orchestrator_assess(
                    grader, spec.agent_id, agent_transcripts,
                    client=clients[grader.agent_id])
        profiles.append(ProficiencyProfile(
            agent_id=spec.agent_id,
            correct={category: sum(t.correct for t in agent_transcripts)},
            n_samples={category: len(agent_transcripts)},
            assessment=assessment,
            produced_by=policy,
        ))
    return profiles, transcripts


def random_profile(agents: Sequence[AgentSpec],
                   category: str | Sequence[str]) -> list[ProficiencyProfile]:
    """No-profiling baseline: every agent gets the same conventional 0.5."""
    categories = [category] if isinstance(category, str) else list(category)
    return [
        ProficiencyProfile(
            agent_id=spec.agent_id,
            fixed_scores={c: Fraction(1, 2) for c in categories},
            produced_by="random_allocation",
        )
        for spec in agents
    ]


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    description: str
    parameters: dict

    def as_openai_tool(self) -> dict:
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            },
        }


def _truncate_at_sentence(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    window = text[:limit]
    best = -1
    for m in re.finditer(r"[.!?](?=\s|$)", window):
        best = m.end()
    if best > 0:
        return window[:best]
    cut = window.rfind(" ")
    return window[:cut] if cut > 0 else window


def render_tool_descriptor(profile: ProficiencyProfile, category: str, *,
                           max_chars: int = DESCRIPTION_CHAR_CAP) -> ToolDescriptor:
    """Deterministic callable-tool description for the orchestrator."""
    numeric = f"Proficiency on {category}: {float(profile.score_for(category)):.2f}."
    summary = ""
    if profile.assessment and profile.assessment.executive_summary:
        budget = max_chars - len(numeric) - 1
        if budget > 0:
            summary = _truncate_at_sentence(
                " ".join(profile.assessment.executive_summary.split()), budget)
    description = f"{summary} {numeric}".strip() if summary else numeric
    return ToolDescriptor(
        name=profile.agent_id,
        description=description,
        parameters={
            "type": "object",
            "properties": {
                "question": {"type": "string",
                             "description": "problem to hand to this agent"},
                "max_tokens": {"type": "integer",
                               "description": "completion token cap"},
            },
            "required": ["question"],
        },
    )


def profile_key(agent_id: str, benchmark: str, category: str,
                roster_fingerprint: str) -> str:
    return f"{agent_id}__{benchmark}__{category}__{roster_fingerprint[:12]}"


def save_profile(profile: ProficiencyProfile, directory: str | Path, *,
                 benchmark: str, category: str, roster_fingerprint: str) -> Path:
    """Write versioned profile JSON; version bumps on every overwrite."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / (profile_key(profile.agent_id, benchmark, category,
                                    roster_fingerprint) + ".json")
    version = 1
    if path.exists():
        try:
            version = int(json.loads(path.read_text())["version"]) + 1
        except (KeyError, ValueError, json.JSONDecodeError):
            version = 1
    payload = replace(profile, version=version).to_json()
    payload["benchmark"] = benchmark
    payload["category"] = category
    payload["roster_hash"] = roster_fingerprint
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
                    encoding="utf-8")
    return path


def load_profiles(directory: str | Path) -> list[ProficiencyProfile]:
    directory = Path(directory)
    profiles = []
    for path in sorted(directory.glob("*.json")):
        profiles.append(ProficiencyProfile.from_json(json.loads(path.read_text())))
    return profiles
