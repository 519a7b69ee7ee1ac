"""Orchestration calibration: which candidate aggregates best per category.

Every candidate runs the full pipeline as orchestrator over the calibration
set with all tool agents activated, once per budget.  Scores are exact
indicator means; the per-category winner is the argmax of the budget-mean,
with ties broken by lower measured cost per item, then candidate id.
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Sequence

from toolteam.backends.cost import format_dollars, token_cost
from toolteam.backends.roster import Backend, build_clients
from toolteam.backends.types import ORCHESTRATOR_WINDOW, AgentSpec, as_decimal
from toolteam.budgeting import BudgetSpec, TokenLedger, make_plan
from toolteam.errors import ConfigurationError
from toolteam.harness.scoring import ABSTAIN, as_percent, canonical_answer, indicator_mean
from toolteam.harness.tasks import TaskInstance, assert_disjoint
from toolteam.orchestrator import aggregate, invoke_parallel
from toolteam.profiling import ProficiencyProfile


def score(predictions: Sequence[tuple[str, str]]) -> Fraction:
    """Exact correct/total over (prediction, gold) pairs."""
    return indicator_mean(predictions)


@dataclass(frozen=True)
class CalibrationScore:
    candidate_id: str
    category: str
    budget: Decimal
    correct: int
    n_items: int
    dollar_cost: Decimal = Decimal(0)

    def __post_init__(self):
        if self.n_items <= 0 or not 0 <= self.correct <= self.n_items:
            raise ConfigurationError("calibration score counts out of range")

    @property
    def score(self) -> Fraction:
        return Fraction(self.correct, self.n_items)


@dataclass
class CalibrationReport:
    category: str
    budgets: tuple[Decimal, ...]
    scores: tuple[CalibrationScore, ...]
    averages: dict[str, Fraction]
    per_item_cost: dict[str, Decimal]
    selected: str | None
    n_items: int
    ineligible: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        rows = []
        for candidate in sorted(self.averages):
            by_budget = {
                str(s.budget): {"score": f"{s.score.numerator}/{s.score.denominator}",
                                "percent": as_percent(s.score),
                                "dollar_cost": format_dollars(s.dollar_cost)}
                for s in self.scores if s.candidate_id == candidate
            }
            avg = self.averages[candidate]
            rows.append({
                "candidate": candidate,
                "budgets": by_budget,
                "average": f"{avg.numerator}/{avg.denominator}",
                "average_percent": as_percent(avg),
                "cost_per_item": format_dollars(self.per_item_cost.get(candidate, Decimal(0))),
                "selected": candidate == self.selected,
            })
        return {
            "category": self.category,
            "budgets": [str(b) for b in self.budgets],
            "n_items": self.n_items,
            "rows": rows,
            "ineligible": dict(self.ineligible),
            "selected": self.selected,
        }


def pick_orchestrator(averages: dict[str, Fraction],
                      per_item_cost: dict[str, Decimal]) -> str:
    """argmax of the averages; ties go to cheaper, then lexicographic id."""
    if not averages:
        raise ConfigurationError("no eligible candidates to select from")
    return min(averages,
               key=lambda c: (-averages[c],
                              per_item_cost.get(c, Decimal(0)), c))


async def _score_pipeline(candidate: AgentSpec, tools: Sequence[AgentSpec],
                          task: TaskInstance, budget: BudgetSpec,
                          profiles: Sequence[ProficiencyProfile],
                          clients: dict[str, Backend],
                          round_limit: int) -> tuple[bool, Decimal]:
    plan = make_plan(profiles, task.category, budget, "uniform",
                     endpoints={t.agent_id: t.endpoint for t in tools},
                     orchestrator_cap=ORCHESTRATOR_WINDOW)
    predictions = await invoke_parallel(tools, task, plan, clients=clients)
    ledger = TokenLedger()
    cost = Decimal(0)
    for p in predictions:
        ledger.add_agent(p.agent_id, p.tokens)
        cost += token_cost(p.prompt_tokens, p.tokens,
                           next(t.endpoint for t in tools
                                if t.agent_id == p.agent_id))
    final, _, _, _, orch_cost = await aggregate(
        candidate, task, predictions, {},
        client=clients[candidate.agent_id],
        agent_specs={t.agent_id: t for t in tools},
        clients=clients, plan=plan, ledger=ledger, round_limit=round_limit)
    cost += orch_cost
    gold = canonical_answer(task.gold)
    return (final != ABSTAIN and final == gold), cost


async def run_calibration(candidates: Sequence[AgentSpec],
                          tools: Sequence[AgentSpec], category: str,
                          calib_set: Sequence[TaskInstance],
                          budgets: Sequence[Decimal], *,
                          test_ids: Iterable[str] | None = None,
                          latency_mode: bool = False,
                          parallelism: int = 16,
                          round_limit: int = 3) -> CalibrationReport:
    """Score every candidate x budget with all tool agents activated."""
    if not calib_set:
        raise ConfigurationError("calibration set must be non-empty")
    if not budgets:
        raise ConfigurationError("at least one budget is required")
    if test_ids is not None:
        assert_disjoint((t.task_id for t in calib_set), test_ids)
    off = [t.task_id for t in calib_set if t.category != category]
    if off:
        raise ConfigurationError(
            f"calibration items outside category {category!r}: {off[:5]}"
        )

    budgets = tuple(as_decimal(b) for b in budgets)
    eligible = [c for c in candidates if c.endpoint.supports_tool_calls]
    ineligible = {c.agent_id: "endpoint does not support tool calls"
                  for c in candidates if not c.endpoint.supports_tool_calls}

    # calibration precedes profiling: a flat uniform profile feeds the planner
    flat = [ProficiencyProfile(agent_id=t.agent_id,
                               fixed_scores={category: Fraction(1, 1)},
                               produced_by="random_allocation")
            for t in tools]
    clients = build_clients(list(eligible) + list(tools),
                            latency_mode=latency_mode)
    gate = asyncio.Semaphore(parallelism)

    async def one(candidate: AgentSpec, budget: Decimal,
                  task: TaskInstance) -> tuple[str, Decimal, str, bool, Decimal]:
        async with gate:
            ok, cost = await _score_pipeline(
                candidate, tools, task, BudgetSpec(budget), flat, clients,
                round_limit)
        return candidate.agent_id, budget, task.task_id, ok, cost

    jobs = [one(c, b, t) for c in eligible for b in budgets for t in calib_set]
    outcomes = await asyncio.gather(*jobs)
    outcomes.sort(key=lambda row: (row[0], str(row[1]), row[2]))

    scores: list[CalibrationScore] = []
    costs: dict[str, Decimal] = {c.agent_id: Decimal(0) for c in eligible}
    for candidate in sorted(c.agent_id for c in eligible):
        for budget in budgets:
            rows = [r for r in outcomes if r[0] == candidate and r[1] == budget]
            correct = sum(1 for r in rows if r[3])
            spent = sum((r[4] for r in rows), Decimal(0))
            costs[candidate] += spent
            scores.append(CalibrationScore(
                candidate_id=candidate, category=category, budget=budget,
                correct=correct, n_items=len(rows), dollar_cost=spent))

    averages = {}
    per_item_cost = {}
    for candidate in costs:
        cand_scores = [s.score for s in scores if s.candidate_id == candidate]
        averages[candidate] = sum(cand_scores, Fraction(0)) / len(cand_scores)
        per_item_cost[candidate] = (
            costs[candidate] / (len(calib_set) * len(budgets))
        )

    selected = pick_orchestrator(averages, per_item_cost) if averages else None
    return CalibrationReport(
        category=category, budgets=budgets, scores=tuple(scores),
        averages=averages, per_item_cost=per_item_cost, selected=selected,
        n_items=len(calib_set), ineligible=ineligible,
    )
