"""Command-line client for the toolteam service.

Every verb reads local files, calls the HTTP API (an in-process app unless
--server points at a running instance), and writes the returned artifacts.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path

import click
import httpx
import yaml


def _load_structured(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        return yaml.safe_load(text)
    return json.loads(text)


def _load_roster_payload(path: str) -> dict:
    obj = _load_structured(Path(path))
    obj.setdefault("orchestrators", [])
    return obj


def _load_task_payload(path: str, kind: str | None) -> list[dict]:
    tasks = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if kind and "kind" not in obj:
                obj["kind"] = kind
            obj.setdefault("category", Path(path).stem)
            tasks.append(obj)
    return tasks


def _load_profiles_payload(directory: str) -> list[dict]:
    profiles = []
    for path in sorted(Path(directory).glob("*.json")):
        profiles.append(json.loads(path.read_text(encoding="utf-8")))
    if not profiles:
        raise click.ClickException(f"no profile JSON files in {directory}")
    return profiles


def _orchestrator_id(orchestrator: str | None, report_path: str | None) -> str:
    if orchestrator:
        return orchestrator
    if report_path:
        report = json.loads(Path(report_path).read_text(encoding="utf-8"))
        selected = report.get("selected")
        if not selected:
            raise click.ClickException(
                f"calibration report {report_path} has no selected orchestrator"
            )
        return selected
    raise click.ClickException(
        "pass --orchestrator or --orchestrator-report to pick the aggregator"
    )


async def _post_async(server: str | None, path: str, payload: dict) -> dict:
    if server:
        async with httpx.AsyncClient(timeout=None) as client:
            response = await client.post(server.rstrip("/") + path, json=payload)
    else:
        from toolteam.service.app import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://toolteam",
                                     timeout=None) as client:
            response = await client.post(path, json=payload)
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except json.JSONDecodeError:
            detail = response.text
        raise click.ClickException(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


def _post(server: str | None, path: str, payload: dict) -> dict:
    return asyncio.run(_post_async(server, path, payload))


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n",
                    encoding="utf-8")


@click.group()
@click.option("--server", envvar="TOOLTEAM_SERVER", default=None,
              help="Base URL of a running service; defaults to in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Client for the team-of-tool-agents runtime."""
    ctx.obj = {"server": server}


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("toolteam.service.app:app", host=host, port=port)


@main.command()
@click.argument("task_file", type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["math", "code"]), default=None)
@click.option("--scored/--unscored", default=True, show_default=True)
@click.pass_context
def validate(ctx: click.Context, task_file: str, kind: str | None,
             scored: bool) -> None:
    """Validate a JSONL task file."""
    lines = Path(task_file).read_text(encoding="utf-8")
    result = _post(ctx.obj["server"], "/v1/tasks/validate", {
        "lines": lines, "kind": kind, "scored": scored,
        "category_default": Path(task_file).stem,
    })
    click.echo(f"{task_file}: {result['count']} tasks valid")


@main.command()
@click.argument("task_file", type=click.Path(exists=True))
@click.option("--ratio", default=0.2, show_default=True,
              help="Fraction of tasks assigned to calibration.")
@click.option("--salt", default="", help="Hash salt for the split.")
@click.option("--kind", type=click.Choice(["math", "code"]), default=None)
@click.option("--out", required=True, type=click.Path(),
              help="Where to write the split manifest JSON.")
@click.pass_context
def split(ctx: click.Context, task_file: str, ratio: float, salt: str,
          kind: str | None, out: str) -> None:
    """Partition tasks into calibration/test by stable id hash."""
    tasks = _load_task_payload(task_file, kind)
    result = _post(ctx.obj["server"], "/v1/tasks/split",
                   {"tasks": tasks, "ratio": ratio, "salt": salt})
    _write_json(Path(out), result)
    click.echo(f"calibration={len(result['calibration'])} "
               f"test={len(result['test'])} -> {out}")


@main.command()
@click.option("--roster", required=True, type=click.Path(exists=True))
@click.option("--category", required=True)
@click.option("--budgets", required=True,
              help="Comma-separated dollar budgets, e.g. 0.03,0.02")
@click.option("--calib-set", "calib_set", required=True,
              type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["math", "code"]), default="math")
@click.option("--test-manifest", type=click.Path(exists=True), default=None,
              help="Split manifest; its test ids must not appear in the set.")
@click.option("--latency/--no-latency", default=False,
              help="Honor scripted latency in mock agents.")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def calibrate(ctx: click.Context, roster: str, category: str, budgets: str,
              calib_set: str, kind: str, test_manifest: str | None,
              latency: bool, out: str) -> None:
    """Score candidate orchestrators per budget and pick the best."""
    test_ids: list[str] = []
    if test_manifest:
        test_ids = json.loads(Path(test_manifest).read_text())["test"]
    report = _post(ctx.obj["server"], "/v1/calibration", {
        "roster": _load_roster_payload(roster),
        "category": category,
        "budgets": [b.strip() for b in budgets.split(",") if b.strip()],
        "tasks": _load_task_payload(calib_set, kind),
        "test_ids": test_ids,
        "latency_mode": latency,
    })
    _write_json(Path(out), report)
    click.echo(f"selected orchestrator: {report['selected']} -> {out}")


@main.command()
@click.option("--roster", required=True, type=click.Path(exists=True))
@click.option("--policy", required=True,
              type=click.Choice(["self", "orch", "random"]))
@click.option("--category", required=True)
@click.option("--val-set", "val_set", required=True,
              type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["math", "code"]), default="math")
@click.option("--grader", default=None,
              help="Grading agent id (required for --policy orch).")
@click.option("--benchmark", default="benchmark", show_default=True)
@click.option("--assessment/--no-assessment", default=True)
@click.option("--latency/--no-latency", default=False)
@click.option("--out", required=True, type=click.Path(),
              help="Directory for profile JSON and transcripts.")
@click.pass_context
def profile(ctx: click.Context, roster: str, policy: str, category: str,
            val_set: str, kind: str, grader: str | None, benchmark: str,
            assessment: bool, latency: bool, out: str) -> None:
    """Build per-agent proficiency profiles under one policy."""
    result = _post(ctx.obj["server"], "/v1/profiles", {
        "roster": _load_roster_payload(roster),
        "policy": policy,
        "category": category,
        "tasks": _load_task_payload(val_set, kind),
        "grader_id": grader,
        "with_assessment": assessment,
        "latency_mode": latency,
        "benchmark": benchmark,
    })
    out_dir = Path(out)
    for profile_obj in result["profiles"]:
        agent_id = profile_obj["agent_id"]
        key = result["keys"][agent_id]
        path = out_dir / f"{key}.json"
        version = 1
        if path.exists():
            try:
                version = int(json.loads(path.read_text())["version"]) + 1
            except (KeyError, ValueError, json.JSONDecodeError):
                version = 1
        profile_obj["version"] = version
        profile_obj["benchmark"] = benchmark
        profile_obj["category"] = category
        profile_obj["roster_hash"] = result["roster_hash"]
        _write_json(path, profile_obj)
    for agent_id, transcripts in result["transcripts"].items():
        lines = "\n".join(json.dumps(t, ensure_ascii=False) for t in transcripts)
        path = out_dir / "transcripts" / f"{agent_id}__{category}.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(lines + "\n" if lines else "", encoding="utf-8")
    click.echo(f"wrote {len(result['profiles'])} profiles -> {out}")


@main.command()
@click.option("--roster", required=True, type=click.Path(exists=True))
@click.option("--profiles", "profiles_dir", required=True,
              type=click.Path(exists=True))
@click.option("--orchestrator", default=None, help="Aggregator agent id.")
@click.option("--orchestrator-report", "orchestrator_report", default=None,
              type=click.Path(exists=True),
              help="Calibration report; its selected candidate aggregates.")
@click.option("--policy", default="self", show_default=True,
              type=click.Choice(["self", "orch", "random"]))
@click.option("--k", default=2, show_default=True)
@click.option("--tau", default=0.25, show_default=True)
@click.option("--task-file", "task_file", required=True,
              type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["math", "code"]), default=None)
@click.option("--budget", default=None, help="Dollar budget per question.")
@click.option("--strategy", default="uniform", show_default=True,
              type=click.Choice(["uniform", "proficiency_weighted",
                                 "skip_below_threshold"]))
@click.option("--seed", default=0, show_default=True)
@click.option("--latency/--no-latency", default=False)
@click.option("--out", required=True, type=click.Path(),
              help="Directory for results.jsonl.")
@click.pass_context
def run(ctx: click.Context, roster: str, profiles_dir: str,
        orchestrator: str | None, orchestrator_report: str | None,
        policy: str, k: int, tau: float, task_file: str, kind: str | None,
        budget: str | None, strategy: str, seed: int, latency: bool,
        out: str) -> None:
    """Answer a task file with the orchestrated team."""
    result = _post(ctx.obj["server"], "/v1/runs", {
        "roster": _load_roster_payload(roster),
        "orchestrator_id": _orchestrator_id(orchestrator, orchestrator_report),
        "profiles": _load_profiles_payload(profiles_dir),
        "tasks": _load_task_payload(task_file, kind),
        "policy": policy, "k": k, "tau": tau,
        "budget": budget, "plan_strategy": strategy,
        "seed": seed, "latency_mode": latency,
    })
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = result["results"]
    with (out_dir / "results.jsonl").open("w", encoding="utf-8") as fh:
        for record in results:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    scored = [r for r in results if r["correct"] is not None]
    if scored:
        correct = sum(1 for r in scored if r["correct"])
        click.echo(f"{correct}/{len(scored)} correct -> {out_dir/'results.jsonl'}")
    else:
        click.echo(f"{len(results)} results -> {out_dir/'results.jsonl'}")


@main.command()
@click.option("--roster", required=True, type=click.Path(exists=True))
@click.option("--profiles", "profiles_dir", required=True,
              type=click.Path(exists=True))
@click.option("--orchestrator", default=None)
@click.option("--orchestrator-report", "orchestrator_report", default=None,
              type=click.Path(exists=True))
@click.option("--task-file", "task_file", required=True,
              type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["math", "code"]), default=None)
@click.option("--methods", default="single,majority,tot:self", show_default=True)
@click.option("--k", default=2, show_default=True)
@click.option("--ks", default="", help="Extra sweep sizes, e.g. 1,2,3,4")
@click.option("--tau", default=0.25, show_default=True)
@click.option("--budget", default=None)
@click.option("--strategy", default="uniform", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--manifest", default=None, type=click.Path(exists=True),
              help="Split manifest; runs refuse calibration-split tasks.")
@click.option("--name", default="benchmark", show_default=True)
@click.option("--latency/--no-latency", default=False)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def bench(ctx: click.Context, roster: str, profiles_dir: str,
          orchestrator: str | None, orchestrator_report: str | None,
          task_file: str, kind: str | None, methods: str, k: int, ks: str,
          tau: float, budget: str | None, strategy: str, seed: int,
          manifest: str | None, name: str, latency: bool, out: str) -> None:
    """Run benchmark methods over the test split and report."""
    manifest_obj = None
    if manifest:
        manifest_obj = json.loads(Path(manifest).read_text(encoding="utf-8"))
    result = _post(ctx.obj["server"], "/v1/benchmark", {
        "roster": _load_roster_payload(roster),
        "orchestrator_id": _orchestrator_id(orchestrator, orchestrator_report),
        "profiles": _load_profiles_payload(profiles_dir),
        "tasks": _load_task_payload(task_file, kind),
        "methods": [m.strip() for m in methods.split(",") if m.strip()],
        "k": k,
        "ks": [int(x) for x in ks.split(",") if x.strip()],
        "tau": tau, "budget": budget, "plan_strategy": strategy,
        "seed": seed, "latency_mode": latency,
        "manifest": manifest_obj, "benchmark_name": name,
    })
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "report.json", result["report"])
    with (out_dir / "records.jsonl").open("w", encoding="utf-8") as fh:
        for record in result["records"]:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    rendered = _post(ctx.obj["server"], "/v1/report/render",
                     {"report": result["report"]})
    click.echo(rendered["text"])


@main.command()
@click.argument("report_file", type=click.Path(exists=True))
@click.pass_context
def report(ctx: click.Context, report_file: str) -> None:
    """Render a benchmark report JSON as a text table."""
    obj = json.loads(Path(report_file).read_text(encoding="utf-8"))
    rendered = _post(ctx.obj["server"], "/v1/report/render", {"report": obj})
    click.echo(rendered["text"])


if __name__ == "__main__":
    main()
