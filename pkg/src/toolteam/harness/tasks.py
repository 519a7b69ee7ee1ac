"""Benchmark task ingestion: JSONL loading, validation, and split manifests.

One task per line: {task_id, question, gold, category, kind, tests?}.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from toolteam.errors import SplitOverlapError, TaskFileError

TASK_KINDS = ("math", "code")


@dataclass(frozen=True)
class TaskInstance:
    """One benchmark problem: a question, its gold answer, and its category."""

    task_id: str
    question: str
    gold: str | None
    category: str
    kind: str  # "math" | "code"
    tests: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise TaskFileError(f"task {self.task_id!r}: unknown kind {self.kind!r}")
        if not self.task_id:
            raise TaskFileError("task_id must be non-empty")


def _task_from_obj(obj: dict, lineno: int, kind: str | None, category_default: str,
                   scored: bool) -> TaskInstance:
    for req in ("task_id", "question"):
        if req not in obj:
            raise TaskFileError(f"line {lineno}: missing field {req!r}")
    gold = obj.get("gold")
    if scored and gold is None:
        raise TaskFileError(f"line {lineno}: missing gold answer in a scored set")
    task_kind = obj.get("kind") or kind
    if task_kind is None:
        raise TaskFileError(f"line {lineno}: no kind field and no default kind given")
    return TaskInstance(
        task_id=str(obj["task_id"]),
        question=str(obj["question"]),
        gold=None if gold is None else str(gold),
        category=str(obj.get("category") or category_default),
        kind=task_kind,
        tests=tuple(obj.get("tests") or ()),
    )


def parse_tasks(lines: Iterable[str], *, kind: str | None = None,
                category_default: str = "", scored: bool = True) -> list[TaskInstance]:
    """Parse JSONL lines into validated, id-deduplicated tasks."""
    tasks: list[TaskInstance] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TaskFileError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        task = _task_from_obj(obj, lineno, kind, category_default, scored)
        if task.task_id in seen:
            raise TaskFileError(f"line {lineno}: duplicate task_id {task.task_id!r}")
        seen.add(task.task_id)
        tasks.append(task)
    return tasks


def load_tasks(path: str | Path, kind: str | None = None, *,
               scored: bool = True) -> list[TaskInstance]:
    """Load a JSONL benchmark file; category defaults to the file stem."""
    path = Path(path)
    if not path.exists():
        raise TaskFileError(f"task file not found: {path}")
    category_default = path.stem
    with path.open(encoding="utf-8") as fh:
        return parse_tasks(fh, kind=kind, category_default=category_default,
                           scored=scored)


def dump_tasks(tasks: Sequence[TaskInstance], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for t in tasks:
            obj = {"task_id": t.task_id, "question": t.question, "gold": t.gold,
                   "category": t.category, "kind": t.kind}
            if t.tests:
                obj["tests"] = list(t.tests)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class SplitManifest:
    """Disjoint calibration/test partition of a benchmark's task ids."""

    calibration_ids: frozenset[str]
    test_ids: frozenset[str]
    ratio: float = 0.2
    salt: str = ""

    def __post_init__(self):
        overlap = self.calibration_ids & self.test_ids
        if overlap:
            raise SplitOverlapError(f"ids in both splits: {sorted(overlap)[:5]}")

    def check_covers(self, tasks: Iterable[TaskInstance]) -> None:
        missing = [t.task_id for t in tasks
                   if t.task_id not in self.calibration_ids
                   and t.task_id not in self.test_ids]
        if missing:
            raise SplitOverlapError(f"ids outside the split manifest: {missing[:5]}")

    def to_json(self) -> dict:
        return {
            "calibration": sorted(self.calibration_ids),
            "test": sorted(self.test_ids),
            "ratio": self.ratio,
            "salt": self.salt,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SplitManifest":
        return cls(
            calibration_ids=frozenset(obj["calibration"]),
            test_ids=frozenset(obj["test"]),
            ratio=float(obj.get("ratio", 0.2)),
            salt=str(obj.get("salt", "")),
        )


def split_tasks(tasks: Sequence[TaskInstance], ratio: float = 0.2,
                salt: str = "") -> SplitManifest:
    """Partition by stable hash of task id, so the split survives reordering."""
    if not 0.0 < ratio < 1.0:
        raise TaskFileError(f"split ratio must be in (0, 1), got {ratio}")
    calib: set[str] = set()
    test: set[str] = set()
    for t in tasks:
        digest = hashlib.sha256(f"{salt}:{t.task_id}".encode()).digest()
        bucket = int.from_bytes(digest[:8], "big") / 2**64
        (calib if bucket < ratio else test).add(t.task_id)
    return SplitManifest(frozenset(calib), frozenset(test), ratio=ratio, salt=salt)


def assert_disjoint(calib_ids: Iterable[str], test_ids: Iterable[str]) -> None:
    overlap = set(calib_ids) & set(test_ids)
    if overlap:
        raise SplitOverlapError(
            f"calibration and test sets overlap on {len(overlap)} ids, "
            f"e.g. {sorted(overlap)[:5]}"
        )
