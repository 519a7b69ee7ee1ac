"""HTTP service exposing the runtime's operations.

Stateless: every request carries the roster, profiles, and tasks it needs;
responses carry complete artifacts the client can persist.
"""

from __future__ import annotations

from decimal import Decimal
from fractions import Fraction

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

import toolteam
from toolteam.backends.cost import format_dollars, token_cost
from toolteam.backends.roster import (
    Roster,
    agent_spec_from_obj,
    build_clients,
    roster_from_obj,
    roster_hash,
)
from toolteam.backends.types import AgentSpec, ModelEndpoint
from toolteam.budgeting import BudgetSpec, make_plan, tokens_for_budget
from toolteam.calibration import run_calibration
from toolteam.errors import ConfigurationError, ToolteamError
from toolteam.harness.bench import (
    BenchConfig,
    canonical_policy,
    render_report_json,
    run_benchmark,
)
from toolteam.harness.scoring import (
    as_percent,
    indicator_mean,
    majority_vote,
    normalize_math_answer,
)
from toolteam.harness.tasks import SplitManifest, TaskInstance, parse_tasks, split_tasks
from toolteam.orchestrator import RunConfig, run_query
from toolteam.profiling import ProficiencyProfile, build_profiles, profile_key
from toolteam.service import schemas as s


def _task(model: s.TaskModel) -> TaskInstance:
    return TaskInstance(
        task_id=model.task_id, question=model.question, gold=model.gold,
        category=model.category, kind=model.kind, tests=tuple(model.tests),
    )


def _profile(model: s.ProfileModel) -> ProficiencyProfile:
    return ProficiencyProfile.from_json(model.model_dump())


def _roster(model: s.RosterModel) -> Roster:
    return roster_from_obj(model.to_obj())


def _find_orchestrator(roster: Roster, orchestrator_id: str) -> AgentSpec:
    return roster.agent(orchestrator_id)


def create_app() -> FastAPI:
    app = FastAPI(title="toolteam", version=toolteam.__version__,
                  description="Orchestrated team-of-tool-agents runtime")

    @app.exception_handler(ToolteamError)
    async def _domain_error(_: Request, exc: ToolteamError) -> JSONResponse:
        return JSONResponse(
            status_code=422,
            content={"detail": str(exc), "error": type(exc).__name__},
        )

    @app.get("/healthz", response_model=s.HealthResponse)
    async def healthz() -> s.HealthResponse:
        return s.HealthResponse(status="ok", version=toolteam.__version__)

    @app.post("/v1/cost", response_model=s.CostResponse)
    async def cost(req: s.CostRequest) -> s.CostResponse:
        endpoint = ModelEndpoint(
            endpoint_id="inline", base_url="mock://inline", model_name="inline",
            input_price=req.input_price, output_price=req.output_price,
        )
        dollars = token_cost(req.prompt_tokens, req.completion_tokens, endpoint)
        return s.CostResponse(dollars=format_dollars(dollars))

    @app.post("/v1/budget/tokens", response_model=s.TokensForBudgetResponse)
    async def budget_tokens(req: s.TokensForBudgetRequest,
                            ) -> s.TokensForBudgetResponse:
        endpoint = ModelEndpoint(
            endpoint_id="inline", base_url="mock://inline", model_name="inline",
            output_price=req.output_price,
        )
        return s.TokensForBudgetResponse(
            tokens=tokens_for_budget(Decimal(req.budget), endpoint))

    @app.post("/v1/budget/plan", response_model=s.PlanResponse)
    async def budget_plan(req: s.PlanRequest) -> s.PlanResponse:
        profiles = [_profile(p) for p in req.profiles]
        endpoints = {}
        for em in req.endpoints:
            spec_obj = em.model_dump()
            endpoints[em.endpoint_id] = ModelEndpoint(**spec_obj)
        # endpoints are keyed by agent id in plans; accept either key name
        by_agent = {p.agent_id: endpoints.get(p.agent_id) for p in profiles}
        if any(v is None for v in by_agent.values()):
            raise ConfigurationError(
                "plan endpoints must carry one entry per profile, with "
                "endpoint_id equal to the agent_id"
            )
        plan = make_plan(profiles, req.category, BudgetSpec(Decimal(req.budget)),
                         req.strategy, endpoints=by_agent, tau=req.tau,
                         orchestrator_cap=req.orchestrator_cap)
        return s.PlanResponse(
            per_agent_caps=dict(plan.per_agent_caps),
            per_agent_dollars={a: format_dollars(d)
                               for a, d in plan.per_agent_dollars.items()},
            orchestrator_cap=plan.orchestrator_cap,
            strategy=plan.strategy,
            budget_dollars=format_dollars(plan.budget_dollars),
        )

    @app.post("/v1/answers/normalize", response_model=s.NormalizeResponse)
    async def normalize(req: s.NormalizeRequest) -> s.NormalizeResponse:
        return s.NormalizeResponse(answer=normalize_math_answer(req.text))

    @app.post("/v1/answers/majority", response_model=s.MajorityResponse)
    async def majority(req: s.MajorityRequest) -> s.MajorityResponse:
        return s.MajorityResponse(answer=majority_vote(req.answers))

    @app.post("/v1/answers/score", response_model=s.ScoreResponse)
    async def score_pairs(req: s.ScoreRequest) -> s.ScoreResponse:
        value = indicator_mean(req.pairs)
        return s.ScoreResponse(
            score=f"{value.numerator}/{value.denominator}",
            percent=as_percent(value),
        )

    @app.post("/v1/tasks/validate", response_model=s.ValidateTasksResponse)
    async def validate_tasks(req: s.ValidateTasksRequest,
                             ) -> s.ValidateTasksResponse:
        tasks = parse_tasks(req.lines.splitlines(), kind=req.kind,
                            category_default=req.category_default,
                            scored=req.scored)
        return s.ValidateTasksResponse(
            count=len(tasks),
            tasks=[s.TaskModel(task_id=t.task_id, question=t.question,
                               gold=t.gold, category=t.category, kind=t.kind,
                               tests=list(t.tests))
                   for t in tasks],
        )

    @app.post("/v1/tasks/split", response_model=s.SplitResponse)
    async def split(req: s.SplitRequest) -> s.SplitResponse:
        manifest = split_tasks([_task(t) for t in req.tasks],
                               ratio=req.ratio, salt=req.salt)
        obj = manifest.to_json()
        return s.SplitResponse(**obj)

    @app.post("/v1/profiles", response_model=s.ProfileBuildResponse)
    async def profiles_build(req: s.ProfileBuildRequest,
                             ) -> s.ProfileBuildResponse:
        roster = _roster(req.roster)
        policy = canonical_policy(req.policy)
        tasks = [_task(t) for t in req.tasks]
        specs = list(roster.agents) + list(roster.orchestrators)
        clients = build_clients(specs, latency_mode=req.latency_mode)
        grader = roster.agent(req.grader_id) if req.grader_id else None
        profiles, transcripts = await build_profiles(
            roster.agents, req.category, tasks, policy, clients=clients,
            grader=grader, with_assessment=req.with_assessment)
        fingerprint = roster_hash(roster)
        return s.ProfileBuildResponse(
            roster_hash=fingerprint,
            profiles=[p.to_json() for p in profiles],
            transcripts={a: [t.to_json() for t in ts]
                         for a, ts in transcripts.items()},
            keys={p.agent_id: profile_key(p.agent_id, req.benchmark,
                                          req.category, fingerprint)
                  for p in profiles},
        )

    @app.post("/v1/calibration")
    async def calibration(req: s.CalibrationRequest) -> dict:
        roster = _roster(req.roster)
        if not roster.orchestrators:
            raise ConfigurationError(
                "calibration needs candidates under roster.orchestrators"
            )
        report = await run_calibration(
            roster.orchestrators, roster.agents, req.category,
            [_task(t) for t in req.tasks],
            [Decimal(b) for b in req.budgets],
            test_ids=req.test_ids or None,
            latency_mode=req.latency_mode,
        )
        return report.to_json()

    @app.post("/v1/runs", response_model=s.RunResponse)
    async def runs(req: s.RunRequest) -> s.RunResponse:
        roster = _roster(req.roster)
        config = RunConfig(
            roster=roster,
            orchestrator=_find_orchestrator(roster, req.orchestrator_id),
            profiles=[_profile(p) for p in req.profiles],
            policy=canonical_policy(req.policy),
            k=req.k, tau=req.tau,
            budget=BudgetSpec(Decimal(req.budget)) if req.budget else None,
            plan_strategy=req.plan_strategy,
            latency_mode=req.latency_mode,
            round_limit=req.round_limit,
        )
        results = []
        for index, tm in enumerate(req.tasks):
            result = await run_query(_task(tm), config,
                                     selection_seed=req.seed + index)
            results.append(result.to_json())
        return s.RunResponse(results=results)

    @app.post("/v1/benchmark", response_model=s.BenchmarkResponse)
    async def benchmark(req: s.BenchmarkRequest) -> s.BenchmarkResponse:
        roster = _roster(req.roster)
        config = BenchConfig(
            roster=roster,
            orchestrator=_find_orchestrator(roster, req.orchestrator_id),
            profiles=[_profile(p) for p in req.profiles],
            tasks=[_task(t) for t in req.tasks],
            methods=req.methods,
            k=req.k, ks=req.ks, tau=req.tau,
            budget=BudgetSpec(Decimal(req.budget)) if req.budget else None,
            plan_strategy=req.plan_strategy,
            seed=req.seed,
            latency_mode=req.latency_mode,
            manifest=SplitManifest.from_json(req.manifest) if req.manifest else None,
            benchmark_name=req.benchmark_name,
        )
        report, records = await run_benchmark(config)
        return s.BenchmarkResponse(report=report.to_json(), records=records)

    @app.post("/v1/report/render", response_model=s.RenderReportResponse)
    async def report_render(req: s.RenderReportRequest,
                            ) -> s.RenderReportResponse:
        return s.RenderReportResponse(text=render_report_json(req.report))

    return app


app = create_app()
