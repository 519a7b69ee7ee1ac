"""Dollar budgets, token caps, and the per-run token ledger.

A dollar budget becomes per-model completion-token caps through the output
price (flooring, so a maxed-out answer can never overshoot the budget).  The
ledger maintains total = orchestrator + sum(agents) exactly, re-checked on
every mutation.  Prompt tokens are charged in cost reports but excluded from
the cap conversion: caps constrain generation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import TYPE_CHECKING, Mapping, Sequence

from toolteam.backends.cost import format_dollars, from_microdollars, to_microdollars
from toolteam.backends.types import ORCHESTRATOR_WINDOW, ModelEndpoint, as_decimal
from toolteam.errors import ConfigurationError, EmptyTeamError, LedgerIntegrityError

if TYPE_CHECKING:
    from toolteam.profiling import ProficiencyProfile

ORCHESTRATOR = "__orchestrator__"

PLAN_STRATEGIES = ("uniform", "proficiency_weighted", "skip_below_threshold")
DEFAULT_SKIP_THRESHOLD = 0.25


@dataclass(frozen=True)
class BudgetSpec:
    total_dollars: Decimal
    scope: str = "per_question"  # per_question | per_run

    def __post_init__(self):
        object.__setattr__(self, "total_dollars", as_decimal(self.total_dollars))
        if self.total_dollars <= 0:
            raise ConfigurationError("budget must be > 0 dollars")
        if self.scope not in ("per_question", "per_run"):
            raise ConfigurationError(f"unknown budget scope {self.scope!r}")


def tokens_for_budget(budget: Decimal, endpoint: ModelEndpoint) -> int:
    """floor(budget / (output_price / 1e6)); flooring keeps cost <= budget."""
    budget = as_decimal(budget)
    if budget <= 0:
        raise ConfigurationError("budget must be > 0")
    if endpoint.output_price <= 0:
        raise ConfigurationError(
            f"endpoint {endpoint.endpoint_id!r} has non-positive output price"
        )
    tokens = Fraction(budget) * 1_000_000 / Fraction(endpoint.output_price)
    return int(tokens)  # truncation == floor for positive values


def split_microdollars(total_micro: int, weights: Sequence[Fraction],
                       ) -> list[int]:
    """Largest-remainder split; shares are >= 0 and sum to total exactly."""
    if not weights:
        raise ValueError("cannot split a budget over zero recipients")
    total_weight = sum(weights)
    if total_weight <= 0:
        weights = [Fraction(1)] * len(weights)
        total_weight = Fraction(len(weights))
    quotas = [Fraction(total_micro) * w / total_weight for w in weights]
    shares = [int(q) for q in quotas]
    leftover = total_micro - sum(shares)
    by_remainder = sorted(range(len(quotas)),
                          key=lambda i: (-(quotas[i] - shares[i]), i))
    for i in by_remainder[:leftover]:
        shares[i] += 1
    return shares


@dataclass(frozen=True)
class AllocationPlan:
    per_agent_caps: Mapping[str, int]
    per_agent_dollars: Mapping[str, Decimal]
    orchestrator_cap: int = ORCHESTRATOR_WINDOW
    strategy: str = "uniform"
    budget_dollars: Decimal | None = None

    def __post_init__(self):
        if any(cap < 0 for cap in self.per_agent_caps.values()):
            raise ConfigurationError("token caps must be >= 0")
        if self.orchestrator_cap < 0:
            raise ConfigurationError("orchestrator cap must be >= 0")

    def cap_for(self, agent_id: str) -> int:
        try:
            return self.per_agent_caps[agent_id]
        except KeyError:
            raise ConfigurationError(
                f"allocation plan does not cover agent {agent_id!r}"
            ) from None

    def worst_case_cost(self, endpoints: Mapping[str, ModelEndpoint]) -> Decimal:
        total = Decimal(0)
        for agent_id, cap in self.per_agent_caps.items():
            total += (cap * endpoints[agent_id].output_price).scaleb(-6)
        return total


def make_plan(profiles: Sequence["ProficiencyProfile"], category: str,
              budget: BudgetSpec, strategy: str, *,
              endpoints: Mapping[str, ModelEndpoint],
              tau: float = DEFAULT_SKIP_THRESHOLD,
              orchestrator_cap: int = ORCHESTRATOR_WINDOW) -> AllocationPlan:
    """Turn a dollar budget into per-agent completion caps.

    uniform: equal dollar share per agent.  proficiency_weighted: share
    proportional to the agent's category score.  skip_below_threshold:
    agents under tau get cap 0; the rest share uniformly.
    """
    if strategy not in PLAN_STRATEGIES:
        raise ConfigurationError(f"unknown plan strategy {strategy!r}")
    scored = [(p.agent_id, p.score_for(category)) for p in profiles
              if p.has_category(category)]
    if not scored:
        raise ConfigurationError(
            f"no agent has a proficiency score for category {category!r}"
        )
    for agent_id, _ in scored:
        if agent_id not in endpoints:
            raise ConfigurationError(f"no endpoint known for agent {agent_id!r}")

    skipped: list[str] = []
    if strategy == "skip_below_threshold":
        skipped = [a for a, s in scored if s < Fraction(tau).limit_denominator(10**9)]
        scored = [(a, s) for a, s in scored if (a not in skipped)]
        if not scored:
            raise EmptyTeamError(
                f"empty team: every agent is below tau={tau} for {category!r}"
            )

    total_micro = to_microdollars(budget.total_dollars)
    if strategy == "proficiency_weighted":
        weights = [s for _, s in scored]
    else:
        weights = [Fraction(1)] * len(scored)
    shares = split_microdollars(total_micro, weights)

    caps: dict[str, int] = {}
    dollars: dict[str, Decimal] = {}
    for (agent_id, _), share in zip(scored, shares):
        dollars[agent_id] = from_microdollars(share)
        caps[agent_id] = (tokens_for_budget(dollars[agent_id], endpoints[agent_id])
                          if share > 0 else 0)
    for agent_id in skipped:
        caps[agent_id] = 0
        dollars[agent_id] = Decimal(0)

    plan = AllocationPlan(per_agent_caps=caps, per_agent_dollars=dollars,
                          orchestrator_cap=orchestrator_cap, strategy=strategy,
                          budget_dollars=budget.total_dollars)
    if plan.worst_case_cost(endpoints) > budget.total_dollars:
        raise LedgerIntegrityError("allocation plan exceeds its budget")
    return plan


@dataclass
class TokenLedger:
    """Exact run accounting: total == orchestrator + sum(per-agent), always."""

    orchestrator_tokens: int = 0
    per_agent_tokens: dict[str, int] = field(default_factory=dict)
    total_tokens: int = 0
    accounting_complete: bool = True

    def verify(self) -> None:
        expected = self.orchestrator_tokens + sum(self.per_agent_tokens.values())
        if expected != self.total_tokens:
            raise LedgerIntegrityError(
                f"ledger total {self.total_tokens} != recomputed {expected}"
            )

    def add_orchestrator(self, tokens: int) -> None:
        self._add_checked(tokens)
        self.orchestrator_tokens += tokens
        self.total_tokens += tokens
        self.verify()

    def add_agent(self, agent_id: str, tokens: int) -> None:
        self._add_checked(tokens)
        self.per_agent_tokens[agent_id] = (
            self.per_agent_tokens.get(agent_id, 0) + tokens
        )
        self.total_tokens += tokens
        self.verify()

    def mark_unaccounted(self) -> None:
        self.accounting_complete = False

    @staticmethod
    def _add_checked(tokens: int) -> None:
        if tokens < 0:
            raise ValueError(f"cannot add negative tokens ({tokens})")

    def to_json(self, dollar_cost: Decimal | None = None) -> dict:
        obj = {
            "orchestrator_tokens": self.orchestrator_tokens,
            "per_agent_tokens": dict(sorted(self.per_agent_tokens.items())),
            "total_tokens": self.total_tokens,
            "accounting_complete": self.accounting_complete,
        }
        if dollar_cost is not None:
            obj["dollar_cost"] = format_dollars(dollar_cost)
        return obj


def ledger_add(ledger: TokenLedger, source: str, tokens: int) -> TokenLedger:
    """Append tokens from the orchestrator (ORCHESTRATOR) or a tool agent."""
    if source == ORCHESTRATOR:
        ledger.add_orchestrator(tokens)
    else:
        ledger.add_agent(source, tokens)
    return ledger
