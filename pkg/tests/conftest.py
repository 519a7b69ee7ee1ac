import asyncio
import random

import pytest

from toolteam.backends.roster import Roster
from toolteam.backends.types import AgentSpec, MockAgentScript, ModelEndpoint
from toolteam.harness.tasks import TaskInstance


def run(coro):
    return asyncio.run(coro)


def mock_spec(agent_id, seed, accuracies, *, behavior="answer", latency_ms=0,
              tokens_per_reply=64, input_price="0.30", output_price="0.60",
              supports_tool_calls=True, max_tokens=None):
    if isinstance(accuracies, float):
        accuracies = {"math": accuracies}
    endpoint = ModelEndpoint(
        endpoint_id=f"{agent_id}-ep",
        base_url="mock://local",
        model_name=f"scripted-{agent_id}",
        input_price=input_price,
        output_price=output_price,
        supports_tool_calls=supports_tool_calls,
    )
    script = MockAgentScript(
        agent_id=agent_id,
        per_category_accuracy=accuracies,
        rng_seed=seed,
        latency_ms=latency_ms,
        tokens_per_reply=tokens_per_reply,
        behavior=behavior,
    )
    kwargs = {}
    if max_tokens is not None:
        kwargs["default_max_tokens"] = max_tokens
    return AgentSpec(agent_id=agent_id, endpoint=endpoint, script=script,
                     **kwargs)


def make_tasks(n, prefix="t", gold_seed=0, category="math", kind="math"):
    rng = random.Random(gold_seed)
    return [
        TaskInstance(
            task_id=f"{prefix}{i:04d}",
            question=f"Compute the value for case {prefix}{i:04d}.",
            gold=str(rng.randrange(100, 1000)),
            category=category,
            kind=kind,
        )
        for i in range(n)
    ]


@pytest.fixture
def scripted_roster():
    """Three tool agents at 0.9/0.5/0.2 plus an echo (majority) orchestrator."""
    agents = (
        mock_spec("alpha", 101, 0.9),
        mock_spec("beta", 202, 0.5),
        mock_spec("gamma", 303, 0.2),
    )
    orchestrator = mock_spec("conductor", 999, 1.0, behavior="echo")
    return Roster(agents=agents, orchestrators=(orchestrator,))
