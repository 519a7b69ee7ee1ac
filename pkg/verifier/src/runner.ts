/**
 * Executes one verify request in an isolated python child process.
 *
 * Isolation is process-level: fresh working directory per request, memory
 * rlimit and a socket guard inside the child, SIGKILL on wall-clock timeout.
 * A crashing or non-terminating solution only ever takes its child down.
 */

import { spawn } from "node:child_process";
import { mkdirSync, writeFileSync } from "node:fs";
import { join, resolve } from "node:path";

import { TestFailure, VerifyRequest, VerifyResponse } from "./protocol";

const RESULT_SENTINEL = "##RESULT##";
const PYTHON = process.env.VERIFIER_PYTHON ?? "python3";

// Reads solution.py and tests.json from its cwd; prints one sentinel line.
// The rlimit and socket guard run before any solution code is compiled.
const DRIVER_SOURCE = `
import json, sys

MEM_MB = int(sys.argv[1])
try:
    import resource
    limit = MEM_MB * 1024 * 1024
    resource.setrlimit(resource.RLIMIT_AS, (limit, limit))
    try:
        resource.setrlimit(resource.RLIMIT_NPROC, (256, 256))
    except (ValueError, OSError):
        pass
except ImportError:
    pass

import socket

def _no_network(*args, **kwargs):
    raise OSError("network access is disabled inside the verifier sandbox")

socket.socket = _no_network
socket.create_connection = _no_network

RESULT_SENTINEL = ${JSON.stringify(RESULT_SENTINEL)}

def emit(obj):
    print(RESULT_SENTINEL + " " + json.dumps(obj), flush=True)

with open("solution.py", "r", encoding="utf-8") as fh:
    solution_source = fh.read()
with open("tests.json", "r", encoding="utf-8") as fh:
    test_snippets = json.load(fh)

namespace = {"__name__": "__main__"}
try:
    exec(compile(solution_source, "solution.py", "exec"), namespace)
except MemoryError:
    emit({"passed": False, "memory": True,
          "failures": [{"test_id": "<load>", "message": "MemoryError"}]})
    sys.exit(0)
except BaseException as exc:
    emit({"passed": False,
          "failures": [{"test_id": "<load>",
                        "message": f"{type(exc).__name__}: {exc}"[:500]}]})
    sys.exit(0)

failures = []
memory = False
for index, snippet in enumerate(test_snippets):
    test_id = f"test_{index}"
    try:
        exec(compile(snippet, test_id, "exec"), dict(namespace))
    except MemoryError:
        memory = True
        failures.append({"test_id": test_id, "message": "MemoryError"})
    except BaseException as exc:
        failures.append({"test_id": test_id,
                         "message": f"{type(exc).__name__}: {exc}"[:500]})

emit({"passed": not failures, "failures": failures, "memory": memory})
`;

interface ChildOutcome {
  stdout: string;
  stderr: string;
  code: number | null;
  signal: NodeJS.Signals | null;
  timedOut: boolean;
}

function runChild(
  command: string,
  args: string[],
  cwd: string,
  timeoutMs: number,
  stdin?: string,
): Promise<ChildOutcome> {
  return new Promise((resolvePromise) => {
    const child = spawn(command, args, {
      cwd,
      stdio: ["pipe", "pipe", "pipe"],
      env: { ...process.env, PYTHONHASHSEED: "0" },
    });
    let stdout = "";
    let stderr = "";
    let timedOut = false;
    const timer = setTimeout(() => {
      timedOut = true;
      child.kill("SIGKILL");
    }, timeoutMs);
    child.stdout.on("data", (chunk) => {
      stdout += chunk;
    });
    child.stderr.on("data", (chunk) => {
      stderr += chunk;
    });
    child.on("error", () => {
      clearTimeout(timer);
      resolvePromise({ stdout, stderr, code: null, signal: null, timedOut });
    });
    child.on("close", (code, signal) => {
      clearTimeout(timer);
      resolvePromise({ stdout, stderr, code, signal, timedOut });
    });
    if (stdin !== undefined) {
      child.stdin.write(stdin);
    }
    child.stdin.end();
  });
}

function parseSentinel(stdout: string): Record<string, unknown> | null {
  for (const line of stdout.split("\n").reverse()) {
    if (line.startsWith(RESULT_SENTINEL)) {
      try {
        return JSON.parse(line.slice(RESULT_SENTINEL.length));
      } catch {
        return null;
      }
    }
  }
  return null;
}

async function runSnippets(
  request: VerifyRequest,
  requestDir: string,
): Promise<VerifyResponse> {
  writeFileSync(join(requestDir, "solution.py"), request.solution, "utf8");
  writeFileSync(join(requestDir, "tests.json"), JSON.stringify(request.tests), "utf8");
  writeFileSync(join(requestDir, "driver.py"), DRIVER_SOURCE, "utf8");

  const started = Date.now();
  const outcome = await runChild(
    PYTHON,
    ["driver.py", String(request.memory_mb)],
    requestDir,
    request.timeout_s * 1000,
  );
  const duration = (Date.now() - started) / 1000;

  if (outcome.timedOut) {
    return {
      request_id: request.request_id,
      passed: false,
      failures: [{ test_id: "<wall-clock>", message: `killed after ${request.timeout_s}s` }],
      duration_s: duration,
      resource_exceeded: "time",
    };
  }
  const result = parseSentinel(outcome.stdout);
  if (result === null) {
    const memoryDeath =
      outcome.stderr.includes("MemoryError") || outcome.signal === "SIGSEGV";
    return {
      request_id: request.request_id,
      passed: false,
      failures: [
        {
          test_id: "<process>",
          message: `solution process died (code=${outcome.code}, signal=${outcome.signal})`,
        },
      ],
      duration_s: duration,
      ...(memoryDeath ? { resource_exceeded: "memory" as const } : {}),
    };
  }
  const failures = (result.failures ?? []) as TestFailure[];
  return {
    request_id: request.request_id,
    passed: Boolean(result.passed),
    failures,
    duration_s: duration,
    ...(result.memory ? { resource_exceeded: "memory" as const } : {}),
  };
}

interface StdioCase {
  stdin: string;
  expected_stdout: string;
}

function parseStdioCase(raw: string): StdioCase | null {
  try {
    const obj = JSON.parse(raw);
    if (typeof obj.stdin === "string" && typeof obj.expected_stdout === "string") {
      return obj as StdioCase;
    }
  } catch {
    // fall through
  }
  return null;
}

async function runStdio(
  request: VerifyRequest,
  requestDir: string,
): Promise<VerifyResponse> {
  writeFileSync(join(requestDir, "solution.py"), request.solution, "utf8");
  const failures: TestFailure[] = [];
  const started = Date.now();
  let timedOut = false;

  for (let index = 0; index < request.tests.length; index += 1) {
    const testId = `case_${index}`;
    const parsed = parseStdioCase(request.tests[index]);
    if (parsed === null) {
      failures.push({ test_id: testId, message: "unparseable stdio case" });
      continue;
    }
    const outcome = await runChild(
      PYTHON,
      ["solution.py"],
      requestDir,
      request.timeout_s * 1000,
      parsed.stdin,
    );
    if (outcome.timedOut) {
      timedOut = true;
      failures.push({ test_id: testId, message: `killed after ${request.timeout_s}s` });
      break;
    }
    const got = outcome.stdout.trimEnd();
    const expected = parsed.expected_stdout.trimEnd();
    if (outcome.code !== 0) {
      failures.push({
        test_id: testId,
        message: `exit code ${outcome.code}: ${outcome.stderr.slice(0, 300)}`,
      });
    } else if (got !== expected) {
      failures.push({
        test_id: testId,
        message: `stdout mismatch: expected ${JSON.stringify(expected.slice(0, 120))}, got ${JSON.stringify(got.slice(0, 120))}`,
      });
    }
  }

  return {
    request_id: request.request_id,
    passed: failures.length === 0,
    failures,
    duration_s: (Date.now() - started) / 1000,
    ...(timedOut ? { resource_exceeded: "time" as const } : {}),
  };
}

export async function runRequest(
  request: VerifyRequest,
  workdir: string,
): Promise<VerifyResponse> {
  const requestDir = resolve(workdir, request.request_id.replace(/[^A-Za-z0-9_.-]/g, "_"));
  try {
    mkdirSync(requestDir, { recursive: true });
  } catch (error) {
    return {
      request_id: request.request_id,
      passed: false,
      failures: [],
      duration_s: 0,
      infrastructure_error: `sandbox setup failed: ${String(error)}`,
    };
  }
  try {
    if (request.mode === "stdio") {
      return await runStdio(request, requestDir);
    }
    return await runSnippets(request, requestDir);
  } catch (error) {
    return {
      request_id: request.request_id,
      passed: false,
      failures: [],
      duration_s: 0,
      infrastructure_error: `runner error: ${String(error)}`,
    };
  }
}
