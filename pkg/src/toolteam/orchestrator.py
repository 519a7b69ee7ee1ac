"""Inference-time engine: select agents, invoke them in parallel, aggregate.

One run fans out to the selected agents under an allocation plan, then the
orchestrator model reads their answers (plus trace excerpts) and produces
the final prediction, optionally calling agents again as tools.  If the
orchestrator cannot produce an answer, the run degrades to a majority vote
over the agent answers and says so.
"""

from __future__ import annotations

import asyncio
import logging
import random
import time
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Mapping, Sequence

from toolteam.backends.cost import token_cost
from toolteam.backends.roster import Backend, Roster, build_clients
from toolteam.backends.types import (
    ORCHESTRATOR_WINDOW,
    AgentSpec,
    GenerationRequest,
    Message,
)
from toolteam.budgeting import (
    AllocationPlan,
    BudgetSpec,
    DEFAULT_SKIP_THRESHOLD,
    TokenLedger,
    make_plan,
)
from toolteam.errors import (
    ConfigurationError,
    EmptyTeamError,
    NoPredictionsError,
    StageError,
    ToolteamError,
)
from toolteam.harness.scoring import ABSTAIN, canonical_answer, majority_vote, normalize_math_answer
from toolteam.harness.tasks import TaskInstance
from toolteam.profiling import ProficiencyProfile, ToolDescriptor, render_tool_descriptor

logger = logging.getLogger(__name__)

DEFAULT_ROUND_LIMIT = 3
TRACE_EXCERPT_TOKENS = 512

AGGREGATION_PROMPT = (
    "You coordinate a team of specialist tool agents. Each agent below has "
    "already answered the question; their proficiency and answers are listed. "
    "Weigh their reliability, reason about disagreements, and give one final "
    "answer. You may call an agent tool again if you need another opinion. "
    "End your reply with a line 'FINAL ANSWER: <answer>'."
)

CLASSIFY_PROMPT = (
    "Classify the following task into exactly one category from this list: "
    "{categories}. Reply with the category name only."
)


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[str, ...]
    k: int
    policy: str
    scores: Mapping[str, Fraction]
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "selected": list(self.selected),
            "k": self.k,
            "policy": self.policy,
            "scores": {a: float(s) for a, s in sorted(self.scores.items())},
            "seed": self.seed,
        }


@dataclass(frozen=True)
class AgentPrediction:
    agent_id: str
    prediction: str
    raw_text: str = ""
    reasoning_trace: str = ""
    tokens: int = 0  # completion tokens generated by this agent
    prompt_tokens: int = 0
    latency_s: float = 0.0
    error: str | None = None
    accounted: bool = True

    def to_json(self) -> dict:
        return {
            "agent_id": self.agent_id, "prediction": self.prediction,
            "tokens": self.tokens, "prompt_tokens": self.prompt_tokens,
            "latency_s": round(self.latency_s, 6), "error": self.error,
            "accounted": self.accounted,
        }


@dataclass
class RunResult:
    task_id: str
    category: str
    final_answer: str
    predictions: tuple[AgentPrediction, ...]
    ledger: TokenLedger
    dollar_cost: Decimal
    correct: bool | None = None
    degraded: bool = False
    abstained: bool = False
    selection: SelectionResult | None = None
    transcript: tuple[dict, ...] = ()

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "category": self.category,
            "final_answer": self.final_answer,
            "correct": self.correct,
            "degraded": self.degraded,
            "abstained": self.abstained,
            "selection": self.selection.to_json() if self.selection else None,
            "predictions": [p.to_json() for p in self.predictions],
            "ledger": self.ledger.to_json(self.dollar_cost),
            "transcript": list(self.transcript),
        }


def select_agents(profiles: Sequence[ProficiencyProfile], category: str,
                  policy: str, k_max: int, *,
                  tau: float = DEFAULT_SKIP_THRESHOLD,
                  costs: Mapping[str, Decimal] | None = None,
                  seed: int | None = None) -> SelectionResult:
    """Pick the activated subset S; a pure function of its arguments.

    Profiled policies take the top-k by category score (at or above tau),
    breaking ties by lower output cost and then agent id.  The random policy
    draws a seeded uniform sample without profiling.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    with_category = [p for p in profiles if p.has_category(category)]
    if not with_category:
        raise ConfigurationError(f"no profile covers category {category!r}")
    scores = {p.agent_id: p.score_for(category) for p in with_category}
    costs = costs or {}

    if policy == "random_allocation":
        rng = random.Random(seed)
        ids = sorted(scores)
        picked = rng.sample(ids, min(k_max, len(ids)))
        return SelectionResult(tuple(picked), len(picked), policy, scores, seed)

    if policy not in ("self_assessment", "orchestrator_assessment"):
        raise ConfigurationError(f"unknown selection policy {policy!r}")
    threshold = Fraction(tau).limit_denominator(10**9)
    eligible = [a for a, s in scores.items() if s >= threshold]
    if not eligible:
        raise EmptyTeamError(
            f"empty team: no agent at or above tau={tau} for {category!r}"
        )
    ranked = sorted(eligible,
                    key=lambda a: (-scores[a], costs.get(a, Decimal(0)), a))
    picked = ranked[:k_max]
    return SelectionResult(tuple(picked), len(picked), policy, scores, seed)


def _agent_request(spec: AgentSpec, task: TaskInstance,
                   cap: int) -> GenerationRequest:
    reasoning = None
    if spec.endpoint.reasoning_capable:
        reasoning = int(cap * spec.reasoning_budget_fraction)
    return GenerationRequest(
        messages=(Message("system", spec.system_prompt),
                  Message("user", task.question)),
        max_completion_tokens=cap,
        reasoning_max_tokens=reasoning,
    )


async def _invoke_one(spec: AgentSpec, client: Backend, task: TaskInstance,
                      cap: int) -> AgentPrediction:
    if cap <= 0:
        return AgentPrediction(agent_id=spec.agent_id, prediction=ABSTAIN,
                               error="skipped: zero token cap")
    started = time.monotonic()
    try:
        response = await client.generate(_agent_request(spec, task, cap),
                                         task=task)
    except Exception as exc:
        logger.warning("agent %s failed on %s: %s", spec.agent_id,
                       task.task_id, exc)
        return AgentPrediction(agent_id=spec.agent_id, prediction=ABSTAIN,
                               latency_s=time.monotonic() - started,
                               error=str(exc))
    return AgentPrediction(
        agent_id=spec.agent_id,
        prediction=normalize_math_answer(response.text),
        raw_text=response.text,
        reasoning_trace=response.text,
        tokens=response.completion_tokens,
        prompt_tokens=response.prompt_tokens,
        latency_s=time.monotonic() - started,
        accounted=response.accounted,
    )


async def invoke_parallel(agents: Sequence[AgentSpec], task: TaskInstance,
                          plan: AllocationPlan, *,
                          clients: Mapping[str, Backend]) -> list[AgentPrediction]:
    """Invoke every agent concurrently; failures never abort siblings.

    Results come back in the order of the given agent sequence regardless of
    completion order.  Raises only when every agent failed.
    """
    for spec in agents:
        plan.cap_for(spec.agent_id)  # plan must cover S before any call
    predictions = list(await asyncio.gather(*(
        _invoke_one(spec, clients[spec.agent_id], task,
                    plan.cap_for(spec.agent_id))
        for spec in agents
    )))
    if predictions and all(p.error for p in predictions):
        raise NoPredictionsError(
            f"no predictions: all {len(predictions)} agents failed on "
            f"{task.task_id!r}"
        )
    return predictions


def _trace_excerpt(text: str, limit: int = TRACE_EXCERPT_TOKENS) -> str:
    words = text.split()
    return " ".join(words[-limit:])


def _aggregation_messages(task: TaskInstance,
                          predictions: Sequence[AgentPrediction],
                          descriptors: Mapping[str, ToolDescriptor]) -> list[Message]:
    blocks = [f"Question:\n{task.question}", "Team reports:"]
    for p in predictions:
        if p.error:
            continue
        desc = descriptors.get(p.agent_id)
        lines = [f"Tool agent: {p.agent_id}"]
        if desc is not None:
            lines.append(f"About this agent: {desc.description}")
        lines.append(f"Reported answer: {p.prediction}")
        excerpt = _trace_excerpt(p.reasoning_trace)
        if excerpt:
            lines.append(f"Trace excerpt: {excerpt}")
        blocks.append("\n".join(lines))
    return [Message("system", AGGREGATION_PROMPT),
            Message("user", "\n\n".join(blocks))]


def _majority_fallback(predictions: Sequence[AgentPrediction]) -> str:
    answers = [p.prediction for p in predictions if not p.error]
    return majority_vote(answers) if answers else ABSTAIN


async def aggregate(orchestrator: AgentSpec, task: TaskInstance,
                    predictions: Sequence[AgentPrediction],
                    descriptors: Mapping[str, ToolDescriptor], *,
                    client: Backend,
                    agent_specs: Mapping[str, AgentSpec] | None = None,
                    clients: Mapping[str, Backend] | None = None,
                    plan: AllocationPlan | None = None,
                    ledger: TokenLedger,
                    round_limit: int = DEFAULT_ROUND_LIMIT,
                    orchestrator_cap: int = ORCHESTRATOR_WINDOW,
                    ) -> tuple[str, bool, bool, list[dict], Decimal]:
    """Run the orchestrator over the team's answers.

    Returns (final_answer, degraded, abstained, transcript, dollar_cost).
    Round-limit exhaustion and orchestrator failure fall back to a majority
    vote with the degraded flag; an unparseable final text is an abstention.
    """
    if not any(not p.error for p in predictions):
        raise NoPredictionsError("aggregate needs at least one non-error prediction")

    tool_schemas = ()
    if orchestrator.endpoint.supports_tool_calls and descriptors:
        tool_schemas = tuple(d.as_openai_tool() for d in descriptors.values())

    messages = _aggregation_messages(task, predictions, descriptors)
    transcript: list[dict] = []
    cost = Decimal(0)

    for round_no in range(round_limit):
        request = GenerationRequest(
            messages=tuple(messages),
            max_completion_tokens=orchestrator_cap,
            tool_schemas=tool_schemas,
        )
        try:
            response = await client.generate(request, task=task)
        except Exception as exc:
            logger.warning("orchestrator %s failed on %s: %s",
                           orchestrator.agent_id, task.task_id, exc)
            transcript.append({"round": round_no, "error": str(exc)})
            return (_majority_fallback(predictions), True, False, transcript,
                    cost)
        ledger.add_orchestrator(response.completion_tokens)
        if not response.accounted:
            ledger.mark_unaccounted()
        cost += token_cost(response.prompt_tokens, response.completion_tokens,
                           orchestrator.endpoint)
        transcript.append({
            "round": round_no,
            "text": response.text,
            "tool_calls": [{"name": tc.name, "arguments": tc.arguments}
                           for tc in response.tool_calls],
            "completion_tokens": response.completion_tokens,
        })

        if response.tool_calls:
            messages.append(Message("assistant", response.text,
                                    tool_calls=response.tool_calls))
            for tc in response.tool_calls:
                result_text = await _execute_tool_call(
                    tc.name, task, agent_specs or {}, clients or {},
                    plan, ledger)
                messages.append(Message("tool", result_text,
                                        tool_call_id=tc.call_id))
            continue

        answer = normalize_math_answer(response.text)
        if answer == ABSTAIN:
            return ABSTAIN, False, True, transcript, cost
        return answer, False, False, transcript, cost

    # round limit exceeded without a final text
    return _majority_fallback(predictions), True, False, transcript, cost


async def _execute_tool_call(agent_id: str, task: TaskInstance,
                             agent_specs: Mapping[str, AgentSpec],
                             clients: Mapping[str, Backend],
                             plan: AllocationPlan | None,
                             ledger: TokenLedger) -> str:
    spec = agent_specs.get(agent_id)
    client = clients.get(agent_id)
    if spec is None or client is None:
        return f"error: unknown tool agent {agent_id!r}"
    cap = plan.cap_for(agent_id) if plan is not None else spec.kind_cap(task.kind)
    if cap <= 0:
        return f"error: agent {agent_id!r} has a zero token cap"
    try:
        response = await client.generate(_agent_request(spec, task, cap),
                                         task=task)
    except Exception as exc:
        return f"error: {exc}"
    ledger.add_agent(agent_id, response.completion_tokens)
    if not response.accounted:
        ledger.mark_unaccounted()
    return response.text


async def classify_category(orchestrator: AgentSpec, client: Backend,
                            task: TaskInstance,
                            categories: Sequence[str]) -> str:
    """One orchestrator call mapping an unlabeled task onto a category."""
    prompt = CLASSIFY_PROMPT.format(categories=", ".join(categories))
    request = GenerationRequest(
        messages=(Message("system", prompt), Message("user", task.question)),
        max_completion_tokens=64,
    )
    response = await client.generate(request, task=task)
    lowered = response.text.lower()
    hits = [(lowered.find(c.lower()), c) for c in categories
            if c.lower() in lowered]
    if not hits:
        raise ConfigurationError(
            f"could not classify task {task.task_id!r} into {list(categories)}"
        )
    return min(hits)[1]


@dataclass
class RunConfig:
    """Everything one inference run needs; clients are built once and shared."""

    roster: Roster
    orchestrator: AgentSpec
    profiles: Sequence[ProficiencyProfile]
    policy: str = "self_assessment"
    k: int = 2
    tau: float = DEFAULT_SKIP_THRESHOLD
    budget: BudgetSpec | None = None
    plan_strategy: str = "uniform"
    selection_seed: int | None = None
    latency_mode: bool = False
    round_limit: int = DEFAULT_ROUND_LIMIT
    orchestrator_cap: int = ORCHESTRATOR_WINDOW
    categories: Sequence[str] = ("math", "code")
    clients: dict[str, Backend] = field(default_factory=dict)

    def __post_init__(self):
        if not self.clients:
            specs = list(self.roster.agents) + list(self.roster.orchestrators)
            if self.orchestrator.agent_id not in {s.agent_id for s in specs}:
                specs.append(self.orchestrator)
            self.clients = build_clients(specs, latency_mode=self.latency_mode)

    def agent_costs(self) -> dict[str, Decimal]:
        return {a.agent_id: a.endpoint.output_price for a in self.roster.agents}


def _default_plan(agents: Sequence[AgentSpec], kind: str,
                  orchestrator_cap: int) -> AllocationPlan:
    return AllocationPlan(
        per_agent_caps={a.agent_id: a.kind_cap(kind) for a in agents},
        per_agent_dollars={a.agent_id: Decimal(0) for a in agents},
        orchestrator_cap=orchestrator_cap,
        strategy="uniform",
        budget_dollars=None,
    )


async def run_query(task: TaskInstance, config: RunConfig,
                    selection_seed: int | None = None) -> RunResult:
    """Full pipeline: classify/accept category, select, plan, invoke, aggregate."""
    seed = selection_seed if selection_seed is not None else config.selection_seed

    category = task.category
    if not category:
        category = await _stage("classify", classify_category(
            config.orchestrator, config.clients[config.orchestrator.agent_id],
            task, config.categories))

    try:
        selection = select_agents(
            config.profiles, category, config.policy, config.k,
            tau=config.tau, costs=config.agent_costs(), seed=seed)
    except ToolteamError:
        raise
    except Exception as exc:
        raise StageError("select", exc) from exc

    roster_order = {a: i for i, a in enumerate(config.roster.agent_order)}
    team = sorted((config.roster.agent(a) for a in selection.selected),
                  key=lambda s: roster_order.get(s.agent_id, len(roster_order)))

    try:
        if config.budget is not None:
            by_id = {p.agent_id: p for p in config.profiles}
            plan = make_plan(
                [by_id[a] for a in selection.selected], category,
                config.budget, config.plan_strategy,
                endpoints={a: config.roster.agent(a).endpoint
                           for a in selection.selected},
                tau=config.tau, orchestrator_cap=config.orchestrator_cap)
        else:
            plan = _default_plan(team, task.kind, config.orchestrator_cap)
    except ToolteamError:
        raise
    except Exception as exc:
        raise StageError("plan", exc) from exc

    predictions = await _stage("invoke", invoke_parallel(
        team, task, plan, clients=config.clients))

    ledger = TokenLedger()
    cost = Decimal(0)
    for p in predictions:
        ledger.add_agent(p.agent_id, p.tokens)
        if not p.accounted:
            ledger.mark_unaccounted()
        cost += token_cost(p.prompt_tokens, p.tokens,
                           config.roster.agent(p.agent_id).endpoint)

    descriptors = {
        p.agent_id: render_tool_descriptor(p, category)
        for p in config.profiles
        if p.agent_id in selection.selected and p.has_category(category)
    }
    final, degraded, abstained, transcript, orch_cost = await _stage(
        "aggregate",
        aggregate(config.orchestrator, task, predictions, descriptors,
                  client=config.clients[config.orchestrator.agent_id],
                  agent_specs={a.agent_id: a for a in team},
                  clients=config.clients, plan=plan, ledger=ledger,
                  round_limit=config.round_limit,
                  orchestrator_cap=config.orchestrator_cap))
    cost += orch_cost

    ledger.verify()
    correct = None
    if task.gold is not None:
        gold = canonical_answer(task.gold)
        correct = final != ABSTAIN and final == gold
    return RunResult(
        task_id=task.task_id, category=category, final_answer=final,
        predictions=tuple(predictions), ledger=ledger, dollar_cost=cost,
        correct=correct, degraded=degraded, abstained=abstained,
        selection=selection, transcript=tuple(transcript),
    )


async def _stage(name: str, coro):
    try:
        return await coro
    except ToolteamError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
