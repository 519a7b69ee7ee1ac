#!/usr/bin/env node
/**
 * Verifier entry point: reads one JSON request per stdin line, answers one
 * JSON response per stdout line, in order.  A failing request never stops
 * the loop; the process exits when stdin closes.
 *
 * Usage: verifier --max-timeout 30 --workdir sandbox/
 */

import { mkdirSync } from "node:fs";
import { createInterface } from "node:readline";
import { parseArgs } from "node:util";

import { malformedResponse, parseRequest, VerifyResponse } from "./protocol";
import { runRequest } from "./runner";

function writeResponse(response: VerifyResponse): void {
  process.stdout.write(JSON.stringify(response) + "\n");
}

async function main(): Promise<void> {
  const { values } = parseArgs({
    options: {
      "max-timeout": { type: "string", default: "30" },
      workdir: { type: "string", default: "sandbox" },
    },
  });
  const maxTimeoutS = Number(values["max-timeout"]);
  if (!Number.isFinite(maxTimeoutS) || maxTimeoutS <= 0) {
    process.stderr.write("--max-timeout must be a positive number\n");
    process.exit(2);
  }
  const workdir = values.workdir as string;
  mkdirSync(workdir, { recursive: true });

  const seenIds = new Set<string>();
  const lines = createInterface({ input: process.stdin, crlfDelay: Infinity });

  // strictly sequential: one request at a time, responses in request order
  for await (const rawLine of lines) {
    const line = rawLine.trim();
    if (line === "") {
      continue;
    }
    let response: VerifyResponse;
    try {
      const request = parseRequest(line, maxTimeoutS);
      if (seenIds.has(request.request_id)) {
        response = {
          request_id: request.request_id,
          passed: false,
          failures: [],
          duration_s: 0,
          infrastructure_error: "duplicate request_id in this session",
        };
      } else {
        seenIds.add(request.request_id);
        response = await runRequest(request, workdir);
      }
    } catch (error) {
      response = malformedResponse(line, (error as Error).message);
    }
    writeResponse(response);
  }
}

main().catch((error) => {
  process.stderr.write(`verifier fatal: ${String(error)}\n`);
  process.exit(1);
});
