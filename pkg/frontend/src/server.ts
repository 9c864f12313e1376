#!/usr/bin/env node
/**
 * Long-running stdio server for the external-objective line protocol.
 *
 * Usage: node dist/server.js [sphere|quadratic-at-point|adapter-stub]
 *
 * Reads one request per line from stdin, writes one response line to
 * stdout, and loops until stdin closes, then exits 0. A malformed request
 * produces {"id": -1, "error": "..."} and the loop continues; it never
 * crashes the process. Exactly one request is in flight at a time by
 * construction (responses are written synchronously per line).
 */

import { createInterface } from "node:readline";
import { resolveObjective } from "./objectives.js";
import { makeResponse, parseRequest } from "./protocol.js";

export function serve(objectiveName: string): void {
  const objective = resolveObjective(objectiveName);
  const rl = createInterface({ input: process.stdin, terminal: false });

  rl.on("line", (line) => {
    if (line.trim() === "") return;
    try {
      const req = parseRequest(line);
      const fitness = req.candidates.map((c) => objective(c, req.noise_key));
      process.stdout.write(JSON.stringify(makeResponse(req, fitness)) + "\n");
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      process.stdout.write(JSON.stringify({ id: -1, error: message }) + "\n");
    }
  });

  rl.on("close", () => {
    process.exit(0);
  });
}

const name = process.argv[2] ?? "sphere";
serve(name);
