"""Exact dollar accounting for generation calls.

All arithmetic is decimal fixed-point (micro-dollar resolution and below);
binary floats never touch a ledger, so per-run sums are exactly reproducible.
"""

from __future__ import annotations

from decimal import Decimal

from toolteam.backends.types import GenerationResponse, ModelEndpoint

MICRO = Decimal("1000000")  # micro-dollars per dollar


def token_cost(prompt_tokens: int, completion_tokens: int,
               endpoint: ModelEndpoint) -> Decimal:
    """Dollar cost of a token pair: tokens times price-per-million, exactly."""
    prompt = (prompt_tokens * endpoint.input_price).scaleb(-6)
    completion = (completion_tokens * endpoint.output_price).scaleb(-6)
    return prompt + completion


def call_cost(response: GenerationResponse, endpoint: ModelEndpoint) -> Decimal:
    """Dollar cost of one completed call."""
    return token_cost(response.prompt_tokens, response.completion_tokens, endpoint)


def format_dollars(dollars: Decimal) -> str:
    """Canonical dollar string: no trailing zeros, never scientific notation."""
    normalized = dollars.normalize()
    if normalized == normalized.to_integral_value():
        return str(normalized.quantize(Decimal(1)))
    return format(normalized, "f")


def to_microdollars(dollars: Decimal) -> int:
    """Whole micro-dollars; raises if the amount has sub-micro precision."""
    micro = dollars * MICRO
    if micro != micro.to_integral_value():
        raise ValueError(f"{dollars} is not an exact micro-dollar amount")
    return int(micro)


def from_microdollars(micro: int) -> Decimal:
    return Decimal(micro).scaleb(-6)
