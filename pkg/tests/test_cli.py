import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from conftest import make_tasks
from toolteam.cli import main


def write_roster(path: Path):
    def agent(agent_id, seed, accuracy, behavior="answer"):
        return {
            "agent_id": agent_id,
            "endpoint": {
                "endpoint_id": f"{agent_id}-ep",
                "base_url": "mock://local",
                "model_name": f"scripted-{agent_id}",
                "input_price": "0.30",
                "output_price": "0.60",
            },
            "script": {
                "per_category_accuracy": {"math": accuracy},
                "rng_seed": seed,
                "behavior": behavior,
            },
        }

    roster = {
        "version": 1,
        "agents": [agent("alpha", 101, 0.9), agent("beta", 202, 0.6)],
        "orchestrators": [
            agent("strong", 61, 0.95, behavior="answer"),
            agent("weak", 62, 0.4, behavior="answer"),
        ],
    }
    path.write_text(yaml.safe_dump(roster), encoding="utf-8")


def write_tasks(path: Path, n=20, prefix="cli"):
    tasks = make_tasks(n, prefix=prefix, gold_seed=21)
    with path.open("w", encoding="utf-8") as fh:
        for t in tasks:
            fh.write(json.dumps({
                "task_id": t.task_id, "question": t.question, "gold": t.gold,
                "category": t.category, "kind": t.kind,
            }) + "\n")


@pytest.fixture
def workspace(tmp_path):
    write_roster(tmp_path / "roster.yaml")
    write_tasks(tmp_path / "tasks.jsonl", n=20)
    write_tasks(tmp_path / "calib.jsonl", n=10, prefix="cal")
    return tmp_path


def invoke(*args):
    runner = CliRunner()
    result = runner.invoke(main, [str(a) for a in args],
                           catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


class TestCliFlow:
    def test_validate(self, workspace):
        result = invoke("validate", workspace / "tasks.jsonl", "--kind", "math")
        assert "20 tasks valid" in result.output

    def test_validate_reports_bad_line(self, workspace):
        bad = workspace / "bad.jsonl"
        bad.write_text('{"task_id": "x", "question": "q"}\n')
        runner = CliRunner()
        result = runner.invoke(
            main, ["validate", str(bad), "--kind", "math"])
        assert result.exit_code != 0
        assert "line 1" in result.output

    def test_split_writes_manifest(self, workspace):
        invoke("split", workspace / "tasks.jsonl", "--kind", "math",
               "--ratio", "0.3", "--salt", "v1",
               "--out", workspace / "manifest.json")
        manifest = json.loads((workspace / "manifest.json").read_text())
        assert set(manifest) >= {"calibration", "test", "ratio", "salt"}
        assert len(manifest["calibration"]) + len(manifest["test"]) == 20

    def test_full_chain(self, workspace):
        invoke("calibrate", "--roster", workspace / "roster.yaml",
               "--category", "math", "--budgets", "0.03,0.02",
               "--calib-set", workspace / "calib.jsonl",
               "--out", workspace / "calibration.json")
        report = json.loads((workspace / "calibration.json").read_text())
        assert report["selected"] == "strong"

        invoke("profile", "--roster", workspace / "roster.yaml",
               "--policy", "self", "--category", "math",
               "--val-set", workspace / "calib.jsonl",
               "--benchmark", "cli-bench",
               "--out", workspace / "profiles")
        profile_files = list((workspace / "profiles").glob("*.json"))
        assert len(profile_files) == 2
        some_profile = json.loads(profile_files[0].read_text())
        assert some_profile["version"] == 1
        assert (workspace / "profiles" / "transcripts").is_dir()

        invoke("run", "--roster", workspace / "roster.yaml",
               "--profiles", workspace / "profiles",
               "--orchestrator-report", workspace / "calibration.json",
               "--policy", "self", "--k", "2",
               "--task-file", workspace / "tasks.jsonl",
               "--out", workspace / "runs")
        lines = (workspace / "runs" / "results.jsonl").read_text().splitlines()
        assert len(lines) == 20
        record = json.loads(lines[0])
        ledger = record["ledger"]
        assert ledger["total_tokens"] == ledger["orchestrator_tokens"] + \
            sum(ledger["per_agent_tokens"].values())

        result = invoke(
            "bench", "--roster", workspace / "roster.yaml",
            "--profiles", workspace / "profiles",
            "--orchestrator", "strong",
            "--task-file", workspace / "tasks.jsonl",
            "--methods", "single,majority,tot:self,tot:random",
            "--k", "2", "--name", "cli-bench",
            "--out", workspace / "bench")
        assert "cli-bench" in result.output
        assert "tot:self_assessment" in result.output
        report = json.loads((workspace / "bench" / "report.json").read_text())
        methods = {r["method"] for r in report["rows"]}
        assert {"single:alpha", "single:beta", "majority_voting",
                "tot:self_assessment", "tot:random_allocation"} == methods

        rendered = invoke("report", workspace / "bench" / "report.json")
        assert "majority_voting" in rendered.output

    def test_profile_version_bumps_on_rerun(self, workspace):
        for _ in range(2):
            invoke("profile", "--roster", workspace / "roster.yaml",
                   "--policy", "random", "--category", "math",
                   "--val-set", workspace / "calib.jsonl",
                   "--out", workspace / "profiles2")
        profile_files = sorted((workspace / "profiles2").glob("*.json"))
        assert json.loads(profile_files[0].read_text())["version"] == 2
