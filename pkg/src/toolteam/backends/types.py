"""Domain types shared by every generation backend."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Mapping

from toolteam.errors import ConfigurationError

FINISH_REASONS = ("stop", "length", "tool_call", "error")

# Standardized generation windows per task kind; the orchestrator gets its own.
DEFAULT_KIND_CAPS: Mapping[str, int] = {"math": 20_000, "code": 4_096}
ORCHESTRATOR_WINDOW = 16_384

DEFAULT_AGENT_PROMPT = (
    "You are a careful problem solver. Work through the problem, then end "
    "your reply with a line of the form 'FINAL ANSWER: <answer>'."
)


def as_decimal(value) -> Decimal:
    """Exact decimal from config values; floats go through str to stay exact."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(str(value))
    return Decimal(value)


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict
    call_id: str


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant | tool
    content: str
    tool_calls: tuple[ToolCall, ...] = ()
    tool_call_id: str | None = None


@dataclass(frozen=True)
class ModelEndpoint:
    """Wire identity and pricing of one chat-completions endpoint.

    Prices are dollars per million tokens; output price must be strictly
    positive because budget-to-token conversion divides by it.
    """

    endpoint_id: str
    base_url: str
    model_name: str
    auth_ref: str | None = None
    input_price: Decimal = Decimal("0")
    output_price: Decimal = Decimal("1")
    supports_tool_calls: bool = True
    reasoning_capable: bool = False

    def __post_init__(self):
        object.__setattr__(self, "input_price", as_decimal(self.input_price))
        object.__setattr__(self, "output_price", as_decimal(self.output_price))
        if self.input_price < 0:
            raise ConfigurationError(
                f"endpoint {self.endpoint_id!r}: input_price must be >= 0"
            )
        if self.output_price <= 0:
            raise ConfigurationError(
                f"endpoint {self.endpoint_id!r}: output_price must be > 0"
            )

    @property
    def is_mock(self) -> bool:
        return self.base_url.startswith("mock://")


@dataclass(frozen=True)
class MockAgentScript:
    """Deterministic stand-in for a remote model.

    Replies are a pure function of (rng_seed, task_id): the same pair always
    yields byte-identical output, so concurrent calls share no state.
    """

    agent_id: str
    per_category_accuracy: Mapping[str, float]
    rng_seed: int
    latency_ms: int = 0
    tokens_per_reply: int = 64
    behavior: str = "answer"  # answer | echo | never_answer | silent

    def __post_init__(self):
        for category, p in self.per_category_accuracy.items():
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(
                    f"script {self.agent_id!r}: accuracy for {category!r} "
                    f"must be in [0, 1], got {p}"
                )
        if self.latency_ms < 0:
            raise ConfigurationError("latency_ms must be >= 0")
        if self.tokens_per_reply <= 0:
            raise ConfigurationError("tokens_per_reply must be > 0")
        if self.behavior not in ("answer", "echo", "never_answer", "silent"):
            raise ConfigurationError(f"unknown mock behavior {self.behavior!r}")


@dataclass(frozen=True)
class AgentSpec:
    """One tool agent (or orchestrator candidate) as listed in a roster."""

    agent_id: str
    endpoint: ModelEndpoint
    system_prompt: str = DEFAULT_AGENT_PROMPT
    default_max_tokens: Mapping[str, int] = field(
        default_factory=lambda: dict(DEFAULT_KIND_CAPS)
    )
    reasoning_budget_fraction: float = 0.5
    script: MockAgentScript | None = None

    def __post_init__(self):
        for kind, cap in self.default_max_tokens.items():
            if cap <= 0:
                raise ConfigurationError(
                    f"agent {self.agent_id!r}: max tokens for {kind!r} must be > 0"
                )
        if not 0.0 <= self.reasoning_budget_fraction <= 1.0:
            raise ConfigurationError(
                f"agent {self.agent_id!r}: reasoning_budget_fraction must be in [0, 1]"
            )
        if self.endpoint.is_mock and self.script is None:
            raise ConfigurationError(
                f"agent {self.agent_id!r}: mock endpoint needs a script"
            )

    def kind_cap(self, kind: str) -> int:
        try:
            return self.default_max_tokens[kind]
        except KeyError:
            raise ConfigurationError(
                f"agent {self.agent_id!r}: no default max tokens for kind {kind!r}"
            ) from None


@dataclass(frozen=True)
class GenerationRequest:
    messages: tuple[Message, ...]
    max_completion_tokens: int
    tool_schemas: tuple[dict, ...] = ()
    temperature: float = 0.0
    seed: int | None = None
    # set for reasoning-capable endpoints; <= half the generation cap by default
    reasoning_max_tokens: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.max_completion_tokens < 1:
            raise ValueError("max_completion_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    tool_calls: tuple[ToolCall, ...] = ()
    prompt_tokens: int = 0
    completion_tokens: int = 0
    finish_reason: str = "stop"
    accounted: bool = True  # False when the wire reply lacked usage fields

    def __post_init__(self):
        if self.finish_reason not in FINISH_REASONS:
            raise ValueError(f"unknown finish_reason {self.finish_reason!r}")
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be >= 0")
