"""Benchmark runner: baselines, orchestrated runs, sweeps, and reports.

Per-task outcome records are the ground truth; the report is a pure fold
over them, so any published number can be recomputed from the raw files.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from toolteam.backends.cost import format_dollars, token_cost
from toolteam.backends.roster import Backend, Roster, build_clients
from toolteam.backends.types import AgentSpec
from toolteam.budgeting import BudgetSpec, DEFAULT_SKIP_THRESHOLD
from toolteam.errors import ConfigurationError, SplitOverlapError
from toolteam.harness.scoring import (
    ABSTAIN,
    as_percent,
    canonical_answer,
    majority_vote,
    normalize_math_answer,
)
from toolteam.harness.tasks import SplitManifest, TaskInstance
from toolteam.harness.verifier_client import VerifierClient, extract_code, score_code
from toolteam.orchestrator import RunConfig, run_query
from toolteam.profiling import ProficiencyProfile, agent_request

POLICY_ALIASES = {
    "self": "self_assessment",
    "orch": "orchestrator_assessment",
    "random": "random_allocation",
}


def canonical_policy(name: str) -> str:
    return POLICY_ALIASES.get(name, name)


@dataclass
class BenchConfig:
    roster: Roster
    orchestrator: AgentSpec
    profiles: Sequence[ProficiencyProfile]
    tasks: Sequence[TaskInstance]
    methods: Sequence[str] = ("single", "majority", "tot:self")
    k: int = 2
    ks: Sequence[int] = ()  # extra sweep values; adds tot:<policy>:k=<k> rows
    tau: float = DEFAULT_SKIP_THRESHOLD
    budget: BudgetSpec | None = None
    plan_strategy: str = "uniform"
    seed: int = 0
    latency_mode: bool = False
    parallelism: int = 16
    manifest: SplitManifest | None = None
    verifier: VerifierClient | None = None
    benchmark_name: str = "benchmark"

    def fingerprint(self) -> str:
        from toolteam.backends.roster import roster_hash
        blob = json.dumps({
            "roster": roster_hash(self.roster),
            "orchestrator": self.orchestrator.agent_id,
            "methods": list(self.methods),
            "k": self.k, "ks": list(self.ks), "tau": self.tau,
            "budget": str(self.budget.total_dollars) if self.budget else None,
            "plan_strategy": self.plan_strategy,
            "seed": self.seed,
            "tasks": sorted(t.task_id for t in self.tasks),
        }, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class MethodRow:
    method: str
    n: int
    correct: int
    scorable: bool  # False renders as "--" (e.g. majority voting on code)
    orchestrator_tokens: int
    agent_tokens: int
    dollar_cost: Decimal
    accounting_complete: bool
    degraded: int = 0

    @property
    def accuracy(self) -> Fraction | None:
        if not self.scorable or self.n == 0:
            return None
        return Fraction(self.correct, self.n)

    @property
    def total_tokens(self) -> int:
        return self.orchestrator_tokens + self.agent_tokens

    def to_json(self) -> dict:
        acc = self.accuracy
        return {
            "method": self.method, "n": self.n, "correct": self.correct,
            "accuracy": None if acc is None else f"{acc.numerator}/{acc.denominator}",
            "accuracy_percent": None if acc is None else as_percent(acc),
            "orchestrator_tokens": self.orchestrator_tokens,
            "agent_tokens": self.agent_tokens,
            "total_tokens": self.total_tokens,
            "dollar_cost": format_dollars(self.dollar_cost),
            "accounting_complete": self.accounting_complete,
            "degraded": self.degraded,
        }


@dataclass
class BenchmarkReport:
    benchmark: str
    rows: list[MethodRow]
    fingerprint: str
    manifest: SplitManifest | None = None

    def to_json(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "fingerprint": self.fingerprint,
            "rows": [r.to_json() for r in self.rows],
            "split": self.manifest.to_json() if self.manifest else None,
        }

    def render_text(self) -> str:
        return render_report_json(self.to_json())


def render_report_json(report: dict) -> str:
    """Plain-text table from a serialized report."""
    header = f"{'method':<34} {'acc':>8} {'n':>5} {'tokens':>10} {'cost ($)':>14}"
    lines = [f"benchmark: {report.get('benchmark', '?')}", header,
             "-" * len(header)]
    for row in report.get("rows", []):
        acc = row.get("accuracy_percent") or "--"
        flag = "" if row.get("accounting_complete", True) else \
            "  [accounting incomplete]"
        lines.append(
            f"{row['method']:<34} {acc:>8} {row['n']:>5} "
            f"{row['total_tokens']:>10} {row['dollar_cost']:>14}{flag}"
        )
    return "\n".join(lines)


def _judge(final_text: str, final_answer: str, task: TaskInstance,
           verifier: VerifierClient | None) -> bool:
    if task.kind == "code":
        if verifier is None:
            raise ConfigurationError(
                "code tasks need a verifier; configure one or exclude them"
            )
        passed, _ = score_code(extract_code(final_text), task, verifier)
        return passed
    gold = canonical_answer(task.gold)
    return final_answer != ABSTAIN and final_answer == gold


def _record(method: str, task: TaskInstance, *, correct: bool | None,
            orch_tokens: int = 0, agent_tokens: Mapping[str, int] | None = None,
            dollars: Decimal = Decimal(0), accounted: bool = True,
            degraded: bool = False, detail: dict | None = None) -> dict:
    return {
        "method": method,
        "task_id": task.task_id,
        "correct": correct,
        "orchestrator_tokens": orch_tokens,
        "per_agent_tokens": dict(agent_tokens or {}),
        "dollar_cost": format_dollars(dollars),
        "accounting_complete": accounted,
        "degraded": degraded,
        "detail": detail or {},
    }


async def _single_records(config: BenchConfig, spec: AgentSpec,
                          clients: Mapping[str, Backend],
                          gate: asyncio.Semaphore) -> list[dict]:
    method = f"single:{spec.agent_id}"

    async def one(task: TaskInstance) -> dict:
        async with gate:
            try:
                response = await clients[spec.agent_id].generate(
                    agent_request(spec, task), task=task)
            except Exception as exc:
                return _record(method, task, correct=False,
                               detail={"error": str(exc)})
        answer = normalize_math_answer(response.text)
        correct = _judge(response.text, answer, task, config.verifier)
        return _record(
            method, task, correct=correct,
            agent_tokens={spec.agent_id: response.completion_tokens},
            dollars=token_cost(response.prompt_tokens,
                               response.completion_tokens, spec.endpoint),
            accounted=response.accounted,
            detail={"answer": answer})

    return list(await asyncio.gather(*(one(t) for t in config.tasks)))


async def _majority_records(config: BenchConfig,
                            clients: Mapping[str, Backend],
                            gate: asyncio.Semaphore) -> list[dict]:
    """All roster agents at full caps; math tasks only (code has no vote)."""
    method = "majority_voting"

    async def one(task: TaskInstance) -> dict:
        if task.kind != "math":
            return _record(method, task, correct=None,
                           detail={"skipped": "majority voting is math-only"})
        answers: dict[str, str] = {}
        tokens: dict[str, int] = {}
        dollars = Decimal(0)
        accounted = True
        for spec in config.roster.agents:
            async with gate:
                try:
                    response = await clients[spec.agent_id].generate(
                        agent_request(spec, task), task=task)
                except Exception:
                    continue
            answers[spec.agent_id] = normalize_math_answer(response.text)
            tokens[spec.agent_id] = response.completion_tokens
            dollars += token_cost(response.prompt_tokens,
                                  response.completion_tokens, spec.endpoint)
            accounted = accounted and response.accounted
        if not answers:
            return _record(method, task, correct=False,
                           detail={"error": "no agent answered"})
        vote = majority_vote(list(answers.values()))
        gold = canonical_answer(task.gold)
        return _record(method, task, correct=(vote != ABSTAIN and vote == gold),
                       agent_tokens=tokens, dollars=dollars,
                       accounted=accounted, detail={"answer": vote})

    return list(await asyncio.gather(*(one(t) for t in config.tasks)))


async def _tot_records(config: BenchConfig, policy: str, k: int,
                       clients: Mapping[str, Backend],
                       gate: asyncio.Semaphore, method: str) -> list[dict]:
    run_config = RunConfig(
        roster=config.roster, orchestrator=config.orchestrator,
        profiles=config.profiles, policy=canonical_policy(policy), k=k,
        tau=config.tau, budget=config.budget,
        plan_strategy=config.plan_strategy, latency_mode=config.latency_mode,
        clients=dict(clients),
    )

    async def one(index: int, task: TaskInstance) -> dict:
        async with gate:
            result = await run_query(task, run_config,
                                     selection_seed=config.seed + index)
        correct = result.correct
        if task.kind == "code":
            final_text = result.transcript[-1].get("text", "") if result.transcript else ""
            correct = _judge(final_text, result.final_answer, task,
                             config.verifier)
        return _record(
            method, task, correct=correct,
            orch_tokens=result.ledger.orchestrator_tokens,
            agent_tokens=result.ledger.per_agent_tokens,
            dollars=result.dollar_cost,
            accounted=result.ledger.accounting_complete,
            degraded=result.degraded,
            detail={"run": result.to_json()})

    return list(await asyncio.gather(
        *(one(i, t) for i, t in enumerate(config.tasks))))


def fold_report(records: Sequence[dict], config: BenchConfig) -> BenchmarkReport:
    """Deterministic fold from raw per-task records to the report table."""
    by_method: dict[str, list[dict]] = {}
    for rec in sorted(records, key=lambda r: (r["method"], r["task_id"])):
        by_method.setdefault(rec["method"], []).append(rec)
    rows = []
    for method, recs in sorted(by_method.items()):
        scored = [r for r in recs if r["correct"] is not None]
        rows.append(MethodRow(
            method=method,
            n=len(scored),
            correct=sum(1 for r in scored if r["correct"]),
            scorable=bool(scored),
            orchestrator_tokens=sum(r["orchestrator_tokens"] for r in recs),
            agent_tokens=sum(sum(r["per_agent_tokens"].values()) for r in recs),
            dollar_cost=sum((Decimal(r["dollar_cost"]) for r in recs), Decimal(0)),
            accounting_complete=all(r["accounting_complete"] for r in recs),
            degraded=sum(1 for r in recs if r.get("degraded")),
        ))
    return BenchmarkReport(
        benchmark=config.benchmark_name, rows=rows,
        fingerprint=config.fingerprint(), manifest=config.manifest,
    )


async def run_benchmark(config: BenchConfig,
                        out_dir: str | Path | None = None,
                        ) -> tuple[BenchmarkReport, list[dict]]:
    """Run the requested methods over the test split and fold the report."""
    if config.manifest is not None:
        leaked = [t.task_id for t in config.tasks
                  if t.task_id in config.manifest.calibration_ids]
        if leaked:
            raise SplitOverlapError(
                f"test run includes calibration-split tasks: {leaked[:5]}"
            )
        config.manifest.check_covers(config.tasks)
    if not config.tasks:
        raise ConfigurationError("no tasks to run")

    specs = list(config.roster.agents) + list(config.roster.orchestrators)
    if config.orchestrator.agent_id not in {s.agent_id for s in specs}:
        specs.append(config.orchestrator)
    clients = build_clients(specs, latency_mode=config.latency_mode)
    gate = asyncio.Semaphore(config.parallelism)

    records: list[dict] = []
    for method in config.methods:
        if method == "single":
            for spec in config.roster.agents:
                records.extend(await _single_records(config, spec, clients, gate))
        elif method == "majority":
            records.extend(await _majority_records(config, clients, gate))
        elif method.startswith("tot:"):
            policy = method.split(":", 1)[1]
            records.extend(await _tot_records(
                config, policy, config.k, clients, gate,
                f"tot:{canonical_policy(policy)}"))
            for k in config.ks:
                if k == config.k:
                    continue
                records.extend(await _tot_records(
                    config, policy, k, clients, gate,
                    f"tot:{canonical_policy(policy)}:k={k}"))
        else:
            raise ConfigurationError(f"unknown benchmark method {method!r}")

    report = fold_report(records, config)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "records.jsonl").open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        (out_dir / "report.json").write_text(
            json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    return report, records
