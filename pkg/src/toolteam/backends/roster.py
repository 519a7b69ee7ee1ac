"""Roster files: the human-editable config naming every agent and candidate.

YAML or JSON; credentials are never stored, only the names of environment
variables (auth_ref) that hold them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import yaml

from toolteam.backends.mock import MockClient
from toolteam.backends.openai_client import OpenAIChatClient
from toolteam.backends.types import (
    AgentSpec,
    GenerationRequest,
    GenerationResponse,
    MockAgentScript,
    ModelEndpoint,
)
from toolteam.errors import ConfigurationError
from toolteam.harness.tasks import TaskInstance


class Backend(Protocol):
    async def generate(self, request: GenerationRequest, *,
                       task: TaskInstance | None = None) -> GenerationResponse:
        ...


@dataclass(frozen=True)
class Roster:
    agents: tuple[AgentSpec, ...]
    orchestrators: tuple[AgentSpec, ...] = ()
    version: int = 1

    def __post_init__(self):
        ids = [a.agent_id for a in self.agents + self.orchestrators]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ConfigurationError(f"duplicate agent ids in roster: {sorted(dupes)}")
        endpoint_ids = [a.endpoint.endpoint_id for a in self.agents + self.orchestrators]
        edupes = {e for e in endpoint_ids if endpoint_ids.count(e) > 1}
        if edupes:
            raise ConfigurationError(
                f"duplicate endpoint ids in roster: {sorted(edupes)}"
            )

    def agent(self, agent_id: str) -> AgentSpec:
        for spec in self.agents + self.orchestrators:
            if spec.agent_id == agent_id:
                return spec
        raise ConfigurationError(f"no agent {agent_id!r} in roster")

    @property
    def agent_order(self) -> list[str]:
        return [a.agent_id for a in self.agents]


def _endpoint_from_obj(obj: Mapping) -> ModelEndpoint:
    try:
        return ModelEndpoint(
            endpoint_id=obj["endpoint_id"],
            base_url=obj["base_url"],
            model_name=obj["model_name"],
            auth_ref=obj.get("auth_ref"),
            input_price=str(obj.get("input_price", "0")),
            output_price=str(obj.get("output_price", "1")),
            supports_tool_calls=bool(obj.get("supports_tool_calls", True)),
            reasoning_capable=bool(obj.get("reasoning_capable", False)),
        )
    except KeyError as exc:
        raise ConfigurationError(f"endpoint entry missing field {exc}") from None


def _script_from_obj(agent_id: str, obj: Mapping) -> MockAgentScript:
    try:
        return MockAgentScript(
            agent_id=obj.get("agent_id", agent_id),
            per_category_accuracy=dict(obj["per_category_accuracy"]),
            rng_seed=int(obj["rng_seed"]),
            latency_ms=int(obj.get("latency_ms", 0)),
            tokens_per_reply=int(obj.get("tokens_per_reply", 64)),
            behavior=obj.get("behavior", "answer"),
        )
    except KeyError as exc:
        raise ConfigurationError(
            f"script for agent {agent_id!r} missing field {exc}"
        ) from None


def agent_spec_from_obj(obj: Mapping) -> AgentSpec:
    try:
        agent_id = obj["agent_id"]
        endpoint = _endpoint_from_obj(obj["endpoint"])
    except KeyError as exc:
        raise ConfigurationError(f"agent entry missing field {exc}") from None
    kwargs: dict = {}
    if "system_prompt" in obj:
        kwargs["system_prompt"] = obj["system_prompt"]
    if "default_max_tokens" in obj:
        kwargs["default_max_tokens"] = {
            k: int(v) for k, v in obj["default_max_tokens"].items()
        }
    if "reasoning_budget_fraction" in obj:
        kwargs["reasoning_budget_fraction"] = float(obj["reasoning_budget_fraction"])
    script = obj.get("script")
    if script is not None:
        kwargs["script"] = _script_from_obj(agent_id, script)
    return AgentSpec(agent_id=agent_id, endpoint=endpoint, **kwargs)


def roster_from_obj(obj: Mapping) -> Roster:
    agents = tuple(agent_spec_from_obj(a) for a in obj.get("agents", []))
    orchestrators = tuple(agent_spec_from_obj(a) for a in obj.get("orchestrators", []))
    if not agents:
        raise ConfigurationError("roster has no agents")
    return Roster(agents=agents, orchestrators=orchestrators,
                  version=int(obj.get("version", 1)))


def load_roster(path: str | Path) -> Roster:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"roster file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        obj = yaml.safe_load(text)
    else:
        obj = json.loads(text)
    if not isinstance(obj, Mapping):
        raise ConfigurationError(f"roster file {path} is not a mapping")
    return roster_from_obj(obj)


def spec_to_obj(spec: AgentSpec) -> dict:
    obj: dict = {
        "agent_id": spec.agent_id,
        "endpoint": {
            "endpoint_id": spec.endpoint.endpoint_id,
            "base_url": spec.endpoint.base_url,
            "model_name": spec.endpoint.model_name,
            "auth_ref": spec.endpoint.auth_ref,
            "input_price": str(spec.endpoint.input_price),
            "output_price": str(spec.endpoint.output_price),
            "supports_tool_calls": spec.endpoint.supports_tool_calls,
            "reasoning_capable": spec.endpoint.reasoning_capable,
        },
        "system_prompt": spec.system_prompt,
        "default_max_tokens": dict(spec.default_max_tokens),
        "reasoning_budget_fraction": spec.reasoning_budget_fraction,
    }
    if spec.script is not None:
        obj["script"] = {
            "agent_id": spec.script.agent_id,
            "per_category_accuracy": dict(spec.script.per_category_accuracy),
            "rng_seed": spec.script.rng_seed,
            "latency_ms": spec.script.latency_ms,
            "tokens_per_reply": spec.script.tokens_per_reply,
            "behavior": spec.script.behavior,
        }
    return obj


def roster_to_obj(roster: Roster) -> dict:
    return {
        "version": roster.version,
        "agents": [spec_to_obj(a) for a in roster.agents],
        "orchestrators": [spec_to_obj(a) for a in roster.orchestrators],
    }


def roster_hash(roster: Roster) -> str:
    """Stable fingerprint; profiles are keyed on it so roster edits invalidate."""
    blob = json.dumps(roster_to_obj(roster), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def build_client(spec: AgentSpec, *, latency_mode: bool = False,
                 transport=None) -> Backend:
    if spec.endpoint.is_mock:
        assert spec.script is not None  # enforced by AgentSpec
        return MockClient(spec.script, latency_mode=latency_mode)
    return OpenAIChatClient(spec.endpoint, transport=transport)


def build_clients(specs: Sequence[AgentSpec], *, latency_mode: bool = False,
                  transport=None) -> dict[str, Backend]:
    return {
        spec.agent_id: build_client(spec, latency_mode=latency_mode,
                                    transport=transport)
        for spec in specs
    }
