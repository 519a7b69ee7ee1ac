from toolteam.backends.cost import call_cost, from_microdollars, to_microdollars
from toolteam.backends.mock import MockClient, mock_generate
from toolteam.backends.openai_client import OpenAIChatClient
from toolteam.backends.roster import (
    Backend,
    Roster,
    build_client,
    build_clients,
    load_roster,
    roster_from_obj,
    roster_hash,
    roster_to_obj,
)
from toolteam.backends.types import (
    DEFAULT_KIND_CAPS,
    ORCHESTRATOR_WINDOW,
    AgentSpec,
    GenerationRequest,
    GenerationResponse,
    Message,
    MockAgentScript,
    ModelEndpoint,
    ToolCall,
)

__all__ = [
    "AgentSpec",
    "Backend",
    "DEFAULT_KIND_CAPS",
    "GenerationRequest",
    "GenerationResponse",
    "Message",
    "MockAgentScript",
    "MockClient",
    "ModelEndpoint",
    "OpenAIChatClient",
    "ORCHESTRATOR_WINDOW",
    "Roster",
    "ToolCall",
    "build_client",
    "build_clients",
    "call_cost",
    "from_microdollars",
    "load_roster",
    "mock_generate",
    "roster_from_obj",
    "roster_hash",
    "roster_to_obj",
    "to_microdollars",
]
