"""Answer normalization, majority voting, and exact percentage formatting.

Math answers are reduced to a canonical integer/rational string so that the
indicator check X̂ == X is a plain string comparison.  Accuracy ratios stay
exact rationals until the final two-decimal rendering.
"""

from __future__ import annotations

import re
from collections import Counter
from fractions import Fraction
from typing import Sequence

# Marker for "no answer could be extracted"; always scored incorrect.
ABSTAIN = "<abstain>"

_SENTINEL_RE = re.compile(r"final\s+answer\s*(?:is)?\s*:?\s*", re.IGNORECASE)
_NUMBER_RE = re.compile(r"[-+]?\d[\d,]*(?:\.\d+)?(?:\s*/\s*[-+]?\d[\d,]*)?")
_INT_RE = re.compile(r"[-+]?\d[\d,]*")
_DECIMAL_RE = re.compile(r"[-+]?\d[\d,]*\.\d+")
_FRACTION_RE = re.compile(r"([-+]?\d[\d,]*)\s*/\s*([-+]?\d[\d,]*)")


def _last_boxed(text: str) -> str | None:
    """Return the contents of the last \\boxed{...}, braces balanced."""
    start = text.rfind("\\boxed{")
    if start == -1:
        return None
    i = start + len("\\boxed{")
    depth = 1
    out = []
    while i < len(text) and depth:
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                break
        out.append(ch)
        i += 1
    return "".join(out) if depth == 0 else None


def _canonical_numeric(payload: str) -> str | None:
    """Canonicalize integers, fractions, and decimals; None if not numeric."""
    raw = payload.strip()
    s = raw.replace(",", "")
    if _INT_RE.fullmatch(raw):
        return str(int(s))
    m = _FRACTION_RE.fullmatch(raw)
    if m:
        den = int(m.group(2).replace(",", ""))
        if den == 0:
            return None
        frac = Fraction(int(m.group(1).replace(",", "")), den)
        return _fraction_str(frac)
    if _DECIMAL_RE.fullmatch(raw):
        return _fraction_str(Fraction(s))
    return None


def _fraction_str(frac: Fraction) -> str:
    if frac.denominator == 1:
        return str(frac.numerator)
    return f"{frac.numerator}/{frac.denominator}"


def _clean_payload(payload: str) -> str:
    s = payload.strip().strip("*_`'\"").strip()
    s = re.sub(r"\$+", "", s).strip()
    s = s.rstrip(".").strip()
    if s.startswith("\\boxed{"):
        inner = _last_boxed(s)
        if inner is not None:
            s = inner.strip()
    s = re.sub(r"\\[dt]?frac\{([^{}]+)\}\{([^{}]+)\}", r"\1/\2", s)
    s = re.sub(r"\\text\{([^{}]*)\}", r"\1", s)
    return s.strip()


def _canonicalize(cleaned: str) -> str:
    numeric = _canonical_numeric(cleaned)
    if numeric is not None:
        return numeric
    # declared answer with surrounding words: keep its last number if any
    numbers = _NUMBER_RE.findall(cleaned)
    for cand in reversed(numbers):
        numeric = _canonical_numeric(cand)
        if numeric is not None:
            return numeric
    return re.sub(r"\s+", " ", cleaned)


def canonical_answer(value: str | None) -> str:
    """Canonical form of a declared answer (a gold, or an extracted payload).

    Unlike normalize_math_answer this never searches: the whole value is the
    answer.  Empty values canonicalize to ABSTAIN.
    """
    if value is None:
        return ABSTAIN
    cleaned = _clean_payload(value)
    return _canonicalize(cleaned) if cleaned else ABSTAIN


def normalize_math_answer(text: str) -> str:
    """Extract and canonicalize a final math answer from generated text.

    Extraction order: last "FINAL ANSWER:" line, then last boxed expression,
    then last standalone number.  Returns ABSTAIN when nothing is extractable.
    """
    if not text or not text.strip():
        return ABSTAIN

    matches = list(_SENTINEL_RE.finditer(text))
    if matches:
        rest = text[matches[-1].end():]
        line = rest.splitlines()[0] if rest else ""
        cleaned = _clean_payload(line)
        if cleaned:
            return _canonicalize(cleaned)

    boxed = _last_boxed(text)
    if boxed is not None:
        cleaned = _clean_payload(boxed)
        if cleaned:
            return _canonicalize(cleaned)

    for cand in reversed(_NUMBER_RE.findall(text)):
        numeric = _canonical_numeric(cand)
        if numeric is not None:
            return numeric
    return ABSTAIN


def majority_vote(predictions: Sequence[str]) -> str:
    """Mode of the answers; ties break to the lexicographically smallest.

    Abstentions are excluded unless every prediction abstained.
    """
    if not predictions:
        raise ValueError("majority_vote needs at least one prediction")
    voting = [p for p in predictions if p != ABSTAIN]
    if not voting:
        return ABSTAIN
    counts = Counter(voting)
    best = max(counts.values())
    return min(answer for answer, n in counts.items() if n == best)


def as_percent(value: Fraction) -> str:
    """Render an exact ratio as a two-decimal percentage (half-up).

    28/30 renders as "93.33%"; no float ever enters the rounding.
    """
    scaled = value * 10000  # hundredths of a percent
    whole, rem = divmod(scaled.numerator, scaled.denominator)
    if 2 * rem >= scaled.denominator:
        whole += 1
    return f"{whole // 100}.{whole % 100:02d}%"


def indicator_mean(pairs: Sequence[tuple[str, str]]) -> Fraction:
    """Exact fraction of pairs whose two entries are equal."""
    if not pairs:
        raise ValueError("cannot score an empty prediction list")
    correct = sum(1 for predicted, gold in pairs if predicted == gold)
    return Fraction(correct, len(pairs))
