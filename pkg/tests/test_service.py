import json

import pytest
from fastapi.testclient import TestClient

from conftest import make_tasks
from toolteam.service.app import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as test_client:
        yield test_client


def mock_agent_obj(agent_id, seed, accuracy, behavior="answer",
                   output_price="0.60"):
    return {
        "agent_id": agent_id,
        "endpoint": {
            "endpoint_id": f"{agent_id}-ep",
            "base_url": "mock://local",
            "model_name": f"scripted-{agent_id}",
            "input_price": "0.30",
            "output_price": output_price,
        },
        "script": {
            "per_category_accuracy": {"math": accuracy},
            "rng_seed": seed,
            "behavior": behavior,
        },
    }


def roster_obj():
    return {
        "version": 1,
        "agents": [
            mock_agent_obj("alpha", 101, 0.9),
            mock_agent_obj("beta", 202, 0.5),
        ],
        "orchestrators": [mock_agent_obj("conductor", 999, 1.0, "echo")],
    }


def task_objs(n=6, prefix="svc"):
    return [
        {"task_id": t.task_id, "question": t.question, "gold": t.gold,
         "category": t.category, "kind": t.kind}
        for t in make_tasks(n, prefix=prefix, gold_seed=12)
    ]


def profile_objs():
    return [
        {"agent_id": "alpha", "fixed_scores": {"math": "9/10"},
         "produced_by": "self_assessment"},
        {"agent_id": "beta", "fixed_scores": {"math": "1/2"},
         "produced_by": "self_assessment"},
    ]


def test_healthz(client):
    body = client.get("/healthz").json()
    assert body["status"] == "ok"


def test_cost_exact(client):
    body = client.post("/v1/cost", json={
        "prompt_tokens": 678, "completion_tokens": 12345,
        "input_price": "0.30", "output_price": "0.60",
    }).json()
    assert body["dollars"] == "0.0076104"


def test_budget_tokens(client):
    body = client.post("/v1/budget/tokens", json={
        "budget": "0.03", "output_price": "0.60",
    }).json()
    assert body["tokens"] == 50_000


def test_budget_plan_weighted(client):
    body = client.post("/v1/budget/plan", json={
        "profiles": [
            {"agent_id": "a", "fixed_scores": {"math": "9/10"}},
            {"agent_id": "b", "fixed_scores": {"math": "3/10"}},
        ],
        "category": "math",
        "budget": "0.04",
        "strategy": "proficiency_weighted",
        "endpoints": [
            {"endpoint_id": "a", "base_url": "https://x", "model_name": "m",
             "output_price": "0.60"},
            {"endpoint_id": "b", "base_url": "https://x", "model_name": "m",
             "output_price": "0.60"},
        ],
    }).json()
    assert body["per_agent_dollars"] == {"a": "0.03", "b": "0.01"}
    assert body["per_agent_caps"]["a"] == 50_000


def test_answer_endpoints(client):
    assert client.post("/v1/answers/normalize",
                       json={"text": "FINAL ANSWER: 042"}).json() == \
        {"answer": "42"}
    assert client.post("/v1/answers/majority",
                       json={"answers": ["7", "7", "3"]}).json() == \
        {"answer": "7"}
    body = client.post("/v1/answers/score", json={
        "pairs": [["x", "x"]] * 28 + [["x", "y"]] * 2,
    }).json()
    assert body == {"score": "14/15", "percent": "93.33%"}


def test_validate_tasks_reports_line_errors(client):
    good = "\n".join(json.dumps(t) for t in task_objs(3))
    body = client.post("/v1/tasks/validate",
                       json={"lines": good, "kind": "math"}).json()
    assert body["count"] == 3

    bad = good + "\n" + json.dumps({"task_id": "q", "question": "?"})
    response = client.post("/v1/tasks/validate",
                           json={"lines": bad, "kind": "math"})
    assert response.status_code == 422
    assert "line 4" in response.json()["detail"]


def test_split_partitions(client):
    tasks = task_objs(40, prefix="spl")
    body = client.post("/v1/tasks/split",
                       json={"tasks": tasks, "ratio": 0.2, "salt": "v"}).json()
    ids = {t["task_id"] for t in tasks}
    assert set(body["calibration"]) | set(body["test"]) == ids
    assert not set(body["calibration"]) & set(body["test"])


def test_profiles_endpoint(client):
    body = client.post("/v1/profiles", json={
        "roster": roster_obj(),
        "policy": "self",
        "category": "math",
        "tasks": task_objs(10, prefix="prof"),
    }).json()
    assert {p["agent_id"] for p in body["profiles"]} == {"alpha", "beta"}
    for profile in body["profiles"]:
        assert profile["n_samples"] == {"math": 10}
        assert profile["assessment"] is not None
    assert set(body["transcripts"]) == {"alpha", "beta"}
    assert body["keys"]["alpha"].startswith("alpha__benchmark__math__")


def test_calibration_endpoint(client):
    roster = roster_obj()
    roster["orchestrators"] = [
        mock_agent_obj("strong", 61, 0.9),
        mock_agent_obj("weak", 62, 0.5),
    ]
    body = client.post("/v1/calibration", json={
        "roster": roster,
        "category": "math",
        "budgets": ["0.03", "0.02"],
        "tasks": task_objs(30, prefix="calib"),
    }).json()
    assert body["selected"] == "strong"
    assert body["budgets"] == ["0.03", "0.02"]
    assert len(body["rows"]) == 2


def test_runs_endpoint(client):
    body = client.post("/v1/runs", json={
        "roster": roster_obj(),
        "orchestrator_id": "conductor",
        "profiles": profile_objs(),
        "tasks": task_objs(5, prefix="run"),
        "policy": "self",
        "k": 2,
        "seed": 3,
    }).json()
    assert len(body["results"]) == 5
    for result in body["results"]:
        ledger = result["ledger"]
        assert ledger["total_tokens"] == ledger["orchestrator_tokens"] + \
            sum(ledger["per_agent_tokens"].values())
        assert result["selection"]["selected"] == ["alpha", "beta"]


def test_benchmark_and_render(client):
    body = client.post("/v1/benchmark", json={
        "roster": roster_obj(),
        "orchestrator_id": "conductor",
        "profiles": profile_objs(),
        "tasks": task_objs(6, prefix="bm"),
        "methods": ["single", "tot:self"],
        "k": 2,
        "benchmark_name": "svc-test",
    }).json()
    methods = {row["method"] for row in body["report"]["rows"]}
    assert methods == {"single:alpha", "single:beta", "tot:self_assessment"}
    rendered = client.post("/v1/report/render",
                           json={"report": body["report"]}).json()
    assert "svc-test" in rendered["text"]
    assert "tot:self_assessment" in rendered["text"]


def test_domain_errors_are_422(client):
    roster = roster_obj()
    roster["agents"].append(roster["agents"][0])  # duplicate agent id
    response = client.post("/v1/runs", json={
        "roster": roster,
        "orchestrator_id": "conductor",
        "profiles": profile_objs(),
        "tasks": task_objs(1),
    })
    assert response.status_code == 422
    assert "duplicate" in response.json()["detail"]
