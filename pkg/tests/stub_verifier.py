"""Minimal line-JSON verifier stand-in for client protocol tests."""

import json
import sys

for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    request = json.loads(line)
    solution = request.get("solution", "")
    if "CRASH_VERIFIER" in solution:
        sys.exit(1)
    passed = "BROKEN" not in solution
    failures = [] if passed else [{"test_id": "t0", "message": "assertion failed"}]
    print(json.dumps({
        "request_id": request["request_id"],
        "passed": passed,
        "failures": failures,
        "duration_s": 0.01,
    }), flush=True)
