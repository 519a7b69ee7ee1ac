from toolteam.harness.scoring import (
    ABSTAIN,
    as_percent,
    indicator_mean,
    majority_vote,
    normalize_math_answer,
)
from toolteam.harness.tasks import (
    SplitManifest,
    TaskInstance,
    assert_disjoint,
    dump_tasks,
    load_tasks,
    parse_tasks,
    split_tasks,
)

__all__ = [
    "ABSTAIN",
    "SplitManifest",
    "TaskInstance",
    "as_percent",
    "assert_disjoint",
    "dump_tasks",
    "indicator_mean",
    "load_tasks",
    "majority_vote",
    "normalize_math_answer",
    "parse_tasks",
    "split_tasks",
]
