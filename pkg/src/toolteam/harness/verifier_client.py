"""Client for the external code verifier process.

The verifier is a separate executable speaking newline-delimited JSON on
stdio: one request object per line in, exactly one response per line out,
order-preserving.  This client owns the child process and serializes writes.
"""

from __future__ import annotations

import json
import re
import subprocess
import threading
import uuid
from dataclasses import dataclass
from typing import Sequence

from toolteam.errors import ConfigurationError, ProtocolError
from toolteam.harness.tasks import TaskInstance

DEFAULT_TIMEOUT_S = 10.0
DEFAULT_MEMORY_MB = 512

_CODE_FENCE_RE = re.compile(r"```(?:python|py)?\s*\n(.*?)```", re.DOTALL)


def extract_code(text: str) -> str:
    """Last fenced code block if any, else the raw text."""
    blocks = _CODE_FENCE_RE.findall(text)
    return blocks[-1].strip() if blocks else text.strip()


@dataclass
class VerifyOutcome:
    passed: bool
    failures: list[dict]
    duration_s: float
    resource_exceeded: str | None = None
    infrastructure_error: str | None = None

    def to_json(self) -> dict:
        return {
            "passed": self.passed, "failures": self.failures,
            "duration_s": self.duration_s,
            "resource_exceeded": self.resource_exceeded,
            "infrastructure_error": self.infrastructure_error,
        }


class VerifierClient:
    """Wraps one verifier subprocess; safe to call from multiple threads."""

    def __init__(self, command: Sequence[str], *, startup_timeout_s: float = 30.0):
        self.command = list(command)
        self.startup_timeout_s = startup_timeout_s
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def start(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1,
            )
        except OSError as exc:
            raise ConfigurationError(
                f"cannot launch verifier {self.command!r}: {exc}"
            ) from exc

    def stop(self) -> None:
        if self._proc is None:
            return
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.terminate()
            self._proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            self._proc.kill()
        self._proc = None

    def __enter__(self) -> "VerifierClient":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()

    def verify(self, solution: str, tests: Sequence[str], *,
               timeout_s: float = DEFAULT_TIMEOUT_S,
               memory_mb: int = DEFAULT_MEMORY_MB,
               mode: str = "snippets") -> VerifyOutcome:
        request = {
            "request_id": uuid.uuid4().hex,
            "solution": solution,
            "tests": list(tests),
            "timeout_s": timeout_s,
            "memory_mb": memory_mb,
            "mode": mode,
        }
        with self._lock:
            self.start()
            assert self._proc is not None
            proc = self._proc
            try:
                proc.stdin.write(json.dumps(request) + "\n")  # type: ignore[union-attr]
                proc.stdin.flush()  # type: ignore[union-attr]
                line = proc.stdout.readline()  # type: ignore[union-attr]
            except (BrokenPipeError, OSError) as exc:
                self.stop()
                return VerifyOutcome(False, [], 0.0,
                                     infrastructure_error=f"verifier died: {exc}")
        if not line:
            self.stop()
            return VerifyOutcome(False, [], 0.0,
                                 infrastructure_error="verifier closed its output")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad verifier reply: {line[:200]!r}") from exc
        if obj.get("request_id") != request["request_id"]:
            raise ProtocolError("verifier reply has a mismatched request_id")
        return VerifyOutcome(
            passed=bool(obj.get("passed")),
            failures=list(obj.get("failures") or []),
            duration_s=float(obj.get("duration_s", 0.0)),
            resource_exceeded=obj.get("resource_exceeded"),
            infrastructure_error=obj.get("infrastructure_error"),
        )


def score_code(solution: str, task: TaskInstance,
               verifier: VerifierClient, *,
               timeout_s: float = DEFAULT_TIMEOUT_S) -> tuple[bool, dict]:
    """True iff the task's tests all pass; verifier transcript is returned."""
    if task.kind != "code":
        raise ConfigurationError(f"task {task.task_id!r} is not a code task")
    if not task.tests:
        raise ConfigurationError(f"task {task.task_id!r} carries no tests")
    outcome = verifier.verify(extract_code(solution), task.tests,
                              timeout_s=timeout_s)
    transcript = {"task_id": task.task_id, **outcome.to_json()}
    if outcome.infrastructure_error:
        return False, transcript
    return outcome.passed, transcript
