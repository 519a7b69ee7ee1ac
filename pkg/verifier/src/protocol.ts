/**
 * Wire protocol: newline-delimited JSON, UTF-8, one object per line.
 * Every request line receives exactly one response line, in order.
 */

import { createHash } from "node:crypto";

export type VerifyMode = "snippets" | "stdio";

export interface VerifyRequest {
  request_id: string;
  solution: string;
  tests: string[];
  timeout_s: number;
  memory_mb: number;
  mode: VerifyMode;
}

export interface TestFailure {
  test_id: string;
  message: string;
}

export interface VerifyResponse {
  request_id: string;
  passed: boolean;
  failures: TestFailure[];
  duration_s: number;
  resource_exceeded?: "time" | "memory";
  infrastructure_error?: string;
  raw_line_sha256?: string;
}

export function sha256(line: string): string {
  return createHash("sha256").update(line, "utf8").digest("hex");
}

export function malformedResponse(rawLine: string, reason: string): VerifyResponse {
  return {
    request_id: "",
    passed: false,
    failures: [],
    duration_s: 0,
    infrastructure_error: `malformed request: ${reason}`,
    raw_line_sha256: sha256(rawLine),
  };
}

/** Parse and validate one request line; throws Error with a reason string. */
export function parseRequest(line: string, maxTimeoutS: number): VerifyRequest {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    throw new Error("invalid JSON");
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new Error("not an object");
  }
  const record = obj as Record<string, unknown>;
  if (typeof record.request_id !== "string" || record.request_id === "") {
    throw new Error("request_id must be a non-empty string");
  }
  if (typeof record.solution !== "string") {
    throw new Error("solution must be a string");
  }
  if (!Array.isArray(record.tests) || !record.tests.every((t) => typeof t === "string")) {
    throw new Error("tests must be a list of strings");
  }
  const timeout = Number(record.timeout_s ?? 10);
  if (!Number.isFinite(timeout) || timeout <= 0) {
    throw new Error("timeout_s must be a positive number");
  }
  const memory = Number(record.memory_mb ?? 512);
  if (!Number.isInteger(memory) || memory <= 0) {
    throw new Error("memory_mb must be a positive integer");
  }
  const mode = (record.mode ?? "snippets") as string;
  if (mode !== "snippets" && mode !== "stdio") {
    throw new Error(`unknown mode '${mode}'`);
  }
  return {
    request_id: record.request_id,
    solution: record.solution,
    tests: record.tests as string[],
    timeout_s: Math.min(timeout, maxTimeoutS),
    memory_mb: memory,
    mode: mode as VerifyMode,
  };
}
