"""Standalone Monte-Carlo oracle for the scripted-roster experiments.

Simulates the mock agents' coin scheme and the majority aggregation rule
directly, without touching the package under test.  The numbers frozen in
test_acceptance.py were produced by running this module.
"""

from __future__ import annotations

import hashlib
import math
import random
from collections import Counter
from fractions import Fraction

# Scheme shared with the mock backend (re-implemented here on purpose):
# per-call rng is derived from sha256("{seed}:{task_id}"); one uniform draw
# decides correctness; a wrong answer adds 1 + randrange(9) to the gold int.


def call_rng(seed: int, task_id: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{task_id}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def scripted_answer(seed: int, accuracy: float, task_id: str, gold: str) -> str:
    rng = call_rng(seed, task_id)
    if rng.random() < accuracy:
        return gold
    return str(int(gold) + 1 + rng.randrange(9))


def majority(answers: list[str]) -> str:
    counts = Counter(answers)
    best = max(counts.values())
    return min(a for a, n in counts.items() if n == best)


def make_tasks(n: int, prefix: str, gold_seed: int) -> list[tuple[str, str]]:
    rng = random.Random(gold_seed)
    return [(f"{prefix}{i:04d}", str(rng.randrange(100, 1000))) for i in range(n)]


def policy_accuracy(
    agents: list[tuple[str, int, float]],
    tasks: list[tuple[str, str]],
    k: int,
    select: str,
) -> Fraction:
    """Accuracy of top-k ('self') vs seeded uniform ('random') selection."""
    by_score = sorted(agents, key=lambda a: (-a[2], a[0]))
    ids_sorted = sorted(a[0] for a in agents)
    by_id = {a[0]: a for a in agents}
    correct = 0
    for index, (task_id, gold) in enumerate(tasks):
        if select == "self":
            team = by_score[:k]
        else:
            picked = random.Random(index).sample(ids_sorted, k)
            team = [by_id[i] for i in picked]
        answers = [scripted_answer(seed, acc, task_id, gold) for _, seed, acc in team]
        if majority(answers) == gold:
            correct += 1
    return Fraction(correct, len(tasks))


DOMINANCE_AGENTS = [("alpha", 101, 0.9), ("beta", 202, 0.5), ("gamma", 303, 0.2)]
DOMINANCE_TASKS = make_tasks(1000, "dom", 20260810)

SWEEP_AGENTS = [
    ("alpha", 101, 0.9),
    ("beta", 202, 0.7),
    ("gamma", 303, 0.5),
    ("delta", 404, 0.2),
]
SWEEP_TASKS = make_tasks(2500, "swp", 777)


def dominance_margin() -> tuple[Fraction, Fraction, Fraction]:
    acc_self = policy_accuracy(DOMINANCE_AGENTS, DOMINANCE_TASKS, 2, "self")
    acc_random = policy_accuracy(DOMINANCE_AGENTS, DOMINANCE_TASKS, 2, "random")
    return acc_self, acc_random, acc_self - acc_random


def sweep_gaps() -> dict[int, Fraction]:
    gaps = {}
    for k in range(1, 5):
        acc_self = policy_accuracy(SWEEP_AGENTS, SWEEP_TASKS, k, "self")
        acc_random = policy_accuracy(SWEEP_AGENTS, SWEEP_TASKS, k, "random")
        gaps[k] = abs(acc_self - acc_random)
    return gaps


if __name__ == "__main__":
    acc_self, acc_random, margin = dominance_margin()
    n = len(DOMINANCE_TASKS)
    sigma = math.sqrt(
        float(acc_self) * (1 - float(acc_self)) / n
        + float(acc_random) * (1 - float(acc_random)) / n
    )
    print(f"dominance: self={float(acc_self):.4f} ({acc_self}) "
          f"random={float(acc_random):.4f} ({acc_random}) "
          f"margin={float(margin):.4f} ({margin}) sigma={sigma:.4f}")
    for k, gap in sweep_gaps().items():
        print(f"sweep k={k}: |self-random| = {float(gap):.4f} ({gap})")
