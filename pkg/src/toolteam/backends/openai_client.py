"""Async client for OpenAI-compatible chat-completions endpoints.

Transport failures retry with exponential backoff up to a fixed count; HTTP
4xx is treated as configuration and never retried.  A reply without usage
fields is kept but marked unaccounted so ledgers can flag the run.
"""

from __future__ import annotations

import asyncio
import json
import os

import httpx

from toolteam.backends.types import (
    GenerationRequest,
    GenerationResponse,
    Message,
    ModelEndpoint,
    ToolCall,
)
from toolteam.errors import ConfigurationError, ProtocolError, TransportFailure
from toolteam.harness.tasks import TaskInstance

_FINISH_MAP = {"stop": "stop", "length": "length", "tool_calls": "tool_call"}


def _wire_messages(messages: tuple[Message, ...]) -> list[dict]:
    out = []
    for m in messages:
        obj: dict = {"role": m.role, "content": m.content}
        if m.tool_calls:
            obj["tool_calls"] = [
                {
                    "id": tc.call_id,
                    "type": "function",
                    "function": {"name": tc.name,
                                 "arguments": json.dumps(tc.arguments)},
                }
                for tc in m.tool_calls
            ]
        if m.tool_call_id is not None:
            obj["tool_call_id"] = m.tool_call_id
        out.append(obj)
    return out


def _parse_tool_calls(raw: list | None) -> tuple[ToolCall, ...]:
    calls = []
    for item in raw or []:
        fn = item.get("function") or {}
        args_text = fn.get("arguments") or "{}"
        try:
            args = json.loads(args_text)
            if not isinstance(args, dict):
                args = {"_raw": args_text}
        except json.JSONDecodeError:
            args = {"_raw": args_text}
        calls.append(ToolCall(name=fn.get("name", ""), arguments=args,
                              call_id=item.get("id", "")))
    return tuple(calls)


class OpenAIChatClient:
    """Immutable after construction; safe to call from many concurrent tasks."""

    def __init__(self, endpoint: ModelEndpoint, *, timeout: float = 180.0,
                 max_retries: int = 2, backoff_s: float = 0.5,
                 transport: httpx.AsyncBaseTransport | None = None):
        self.endpoint = endpoint
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self._client = httpx.AsyncClient(timeout=timeout, transport=transport)

    async def aclose(self) -> None:
        await self._client.aclose()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.endpoint.auth_ref:
            key = os.environ.get(self.endpoint.auth_ref)
            if not key:
                raise ConfigurationError(
                    f"credential env var {self.endpoint.auth_ref!r} is not set "
                    f"for endpoint {self.endpoint.endpoint_id!r}"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(self, request: GenerationRequest) -> dict:
        payload: dict = {
            "model": self.endpoint.model_name,
            "messages": _wire_messages(request.messages),
            "max_tokens": request.max_completion_tokens,
            "temperature": request.temperature,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        if request.tool_schemas:
            payload["tools"] = list(request.tool_schemas)
        if self.endpoint.reasoning_capable and request.reasoning_max_tokens:
            payload["reasoning"] = {"effort": "medium",
                                    "max_tokens": request.reasoning_max_tokens}
        return payload

    async def generate(self, request: GenerationRequest, *,
                       task: TaskInstance | None = None) -> GenerationResponse:
        url = self.endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = self._headers()
        payload = self._payload(request)

        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = await self._client.post(url, headers=headers, json=payload)
            except httpx.HTTPError as exc:
                last_exc = exc
                if attempt < self.max_retries:
                    await asyncio.sleep(self.backoff_s * 2**attempt)
                continue
            if 400 <= resp.status_code < 500:
                raise ConfigurationError(
                    f"endpoint {self.endpoint.endpoint_id!r} rejected the call "
                    f"(HTTP {resp.status_code}): {resp.text[:300]}"
                )
            if resp.status_code >= 500:
                last_exc = TransportFailure(
                    f"HTTP {resp.status_code} from {self.endpoint.endpoint_id!r}"
                )
                if attempt < self.max_retries:
                    await asyncio.sleep(self.backoff_s * 2**attempt)
                continue
            return self._parse(resp)
        raise TransportFailure(
            f"endpoint {self.endpoint.endpoint_id!r} unreachable after "
            f"{self.max_retries + 1} attempts: {last_exc}"
        )

    def _parse(self, resp: httpx.Response) -> GenerationResponse:
        try:
            data = resp.json()
        except json.JSONDecodeError as exc:
            raise ProtocolError(
                f"non-JSON reply from {self.endpoint.endpoint_id!r}"
            ) from exc
        choices = data.get("choices") or []
        if not choices:
            raise ProtocolError(
                f"no choices in reply from {self.endpoint.endpoint_id!r}"
            )
        message = choices[0].get("message") or {}
        tool_calls = _parse_tool_calls(message.get("tool_calls"))
        finish = _FINISH_MAP.get(choices[0].get("finish_reason"), "error")
        if tool_calls and finish == "stop":
            finish = "tool_call"

        usage = data.get("usage") or {}
        accounted = "prompt_tokens" in usage and "completion_tokens" in usage
        return GenerationResponse(
            text=message.get("content") or "",
            tool_calls=tool_calls,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            finish_reason=finish,
            accounted=accounted,
        )
