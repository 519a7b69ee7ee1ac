"""Pydantic request/response models for the HTTP service.

Prices and budgets travel as strings (or numbers coerced through str) so the
exact-decimal contract survives the wire.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field, field_validator


def _to_price(value: Any) -> Any:
    if value is None or isinstance(value, str):
        return value
    return str(value)


class EndpointModel(BaseModel):
    endpoint_id: str
    base_url: str
    model_name: str
    auth_ref: str | None = None
    input_price: str = "0"
    output_price: str = "1"
    supports_tool_calls: bool = True
    reasoning_capable: bool = False

    @field_validator("input_price", "output_price", mode="before")
    @classmethod
    def _coerce_price(cls, v):
        return _to_price(v)


class ScriptModel(BaseModel):
    agent_id: str | None = None
    per_category_accuracy: dict[str, float]
    rng_seed: int
    latency_ms: int = 0
    tokens_per_reply: int = 64
    behavior: str = "answer"


class AgentModel(BaseModel):
    agent_id: str
    endpoint: EndpointModel
    system_prompt: str | None = None
    default_max_tokens: dict[str, int] | None = None
    reasoning_budget_fraction: float | None = None
    script: ScriptModel | None = None

    def to_obj(self) -> dict:
        obj = self.model_dump(exclude_none=True)
        script = obj.get("script")
        if script is not None and script.get("agent_id") is None:
            script.pop("agent_id", None)
        return obj


class RosterModel(BaseModel):
    version: int = 1
    agents: list[AgentModel]
    orchestrators: list[AgentModel] = Field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "version": self.version,
            "agents": [a.to_obj() for a in self.agents],
            "orchestrators": [a.to_obj() for a in self.orchestrators],
        }


class TaskModel(BaseModel):
    task_id: str
    question: str
    gold: str | None = None
    category: str = ""
    kind: Literal["math", "code"]
    tests: list[str] = Field(default_factory=list)


class ProfileModel(BaseModel):
    agent_id: str
    correct: dict[str, int] = Field(default_factory=dict)
    n_samples: dict[str, int] = Field(default_factory=dict)
    fixed_scores: dict[str, str] = Field(default_factory=dict)
    assessment: dict | None = None
    produced_by: str = "self_assessment"
    version: int = 1


class HealthResponse(BaseModel):
    status: str
    version: str


class CostRequest(BaseModel):
    prompt_tokens: int = 0
    completion_tokens: int = 0
    input_price: str = "0"
    output_price: str

    @field_validator("input_price", "output_price", mode="before")
    @classmethod
    def _coerce_price(cls, v):
        return _to_price(v)


class CostResponse(BaseModel):
    dollars: str


class TokensForBudgetRequest(BaseModel):
    budget: str
    output_price: str

    @field_validator("budget", "output_price", mode="before")
    @classmethod
    def _coerce_price(cls, v):
        return _to_price(v)


class TokensForBudgetResponse(BaseModel):
    tokens: int


class PlanRequest(BaseModel):
    profiles: list[ProfileModel]
    category: str
    budget: str
    strategy: Literal["uniform", "proficiency_weighted", "skip_below_threshold"]
    tau: float = 0.25
    orchestrator_cap: int = 16384
    endpoints: list[EndpointModel]

    @field_validator("budget", mode="before")
    @classmethod
    def _coerce_price(cls, v):
        return _to_price(v)


class PlanResponse(BaseModel):
    per_agent_caps: dict[str, int]
    per_agent_dollars: dict[str, str]
    orchestrator_cap: int
    strategy: str
    budget_dollars: str


class NormalizeRequest(BaseModel):
    text: str


class NormalizeResponse(BaseModel):
    answer: str


class MajorityRequest(BaseModel):
    answers: list[str]


class MajorityResponse(BaseModel):
    answer: str


class ScoreRequest(BaseModel):
    pairs: list[tuple[str, str]]


class ScoreResponse(BaseModel):
    score: str
    percent: str


class ValidateTasksRequest(BaseModel):
    lines: str
    kind: Literal["math", "code"] | None = None
    category_default: str = ""
    scored: bool = True


class ValidateTasksResponse(BaseModel):
    count: int
    tasks: list[TaskModel]


class SplitRequest(BaseModel):
    tasks: list[TaskModel]
    ratio: float = 0.2
    salt: str = ""


class SplitResponse(BaseModel):
    calibration: list[str]
    test: list[str]
    ratio: float
    salt: str


class ProfileBuildRequest(BaseModel):
    roster: RosterModel
    policy: str
    category: str
    tasks: list[TaskModel]
    grader_id: str | None = None
    with_assessment: bool = True
    latency_mode: bool = False
    benchmark: str = "benchmark"


class ProfileBuildResponse(BaseModel):
    roster_hash: str
    profiles: list[dict]
    transcripts: dict[str, list[dict]]
    keys: dict[str, str]  # agent_id -> profile store key


class CalibrationRequest(BaseModel):
    roster: RosterModel  # orchestrators = candidates, agents = tools
    category: str
    budgets: list[str]
    tasks: list[TaskModel]
    test_ids: list[str] = Field(default_factory=list)
    latency_mode: bool = False

    @field_validator("budgets", mode="before")
    @classmethod
    def _coerce_budgets(cls, v):
        return [_to_price(b) for b in v]


class RunRequest(BaseModel):
    roster: RosterModel
    orchestrator_id: str
    profiles: list[ProfileModel]
    tasks: list[TaskModel]
    policy: str = "self"
    k: int = 2
    tau: float = 0.25
    budget: str | None = None
    plan_strategy: str = "uniform"
    seed: int = 0
    latency_mode: bool = False
    round_limit: int = 3

    @field_validator("budget", mode="before")
    @classmethod
    def _coerce_price(cls, v):
        return _to_price(v)


class RunResponse(BaseModel):
    results: list[dict]


class BenchmarkRequest(BaseModel):
    roster: RosterModel
    orchestrator_id: str
    profiles: list[ProfileModel]
    tasks: list[TaskModel]
    methods: list[str] = Field(
        default_factory=lambda: ["single", "majority", "tot:self"])
    k: int = 2
    ks: list[int] = Field(default_factory=list)
    tau: float = 0.25
    budget: str | None = None
    plan_strategy: str = "uniform"
    seed: int = 0
    latency_mode: bool = False
    manifest: dict | None = None
    benchmark_name: str = "benchmark"

    @field_validator("budget", mode="before")
    @classmethod
    def _coerce_price(cls, v):
        return _to_price(v)


class BenchmarkResponse(BaseModel):
    report: dict
    records: list[dict]


class RenderReportRequest(BaseModel):
    report: dict


class RenderReportResponse(BaseModel):
    text: str
