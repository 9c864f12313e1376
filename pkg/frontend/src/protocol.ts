/**
 * Wire types for the external-objective line protocol.
 *
 * One JSON object per line in each direction. The parent sends a request,
 * the server answers with exactly one response line carrying the same id,
 * and only one request is ever in flight per process.
 */

export interface NoiseKey {
  t_seed: number;
  eps_seed: number;
}

export interface ProtocolRequest {
  id: number;
  dim: number;
  noise_key: NoiseKey;
  candidates: number[][];
}

export interface ProtocolResponse {
  id: number;
  fitness: number[];
}

export interface ProtocolErrorResponse {
  id: number;
  error: string;
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

/**
 * Validate a parsed request object; returns an error message or null.
 * Field names are part of the wire contract and checked literally.
 */
export function requestError(obj: unknown): string | null {
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    return "request must be a JSON object";
  }
  const req = obj as Record<string, unknown>;
  if (!Number.isInteger(req.id)) return "missing or non-integer id";
  if (!Number.isInteger(req.dim) || (req.dim as number) < 1) {
    return "missing or invalid dim";
  }
  const key = req.noise_key as Record<string, unknown> | undefined;
  if (
    typeof key !== "object" ||
    key === null ||
    !Number.isInteger(key.t_seed) ||
    !Number.isInteger(key.eps_seed)
  ) {
    return "missing or invalid noise_key";
  }
  const cands = req.candidates;
  if (!Array.isArray(cands) || cands.length === 0) {
    return "missing or empty candidates";
  }
  for (const c of cands) {
    if (!Array.isArray(c) || c.length !== req.dim) {
      return `candidate length does not match dim=${req.dim}`;
    }
    if (!c.every(isFiniteNumber)) return "non-finite candidate entry";
  }
  return null;
}

export function parseRequest(line: string): ProtocolRequest {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    throw new Error("malformed JSON");
  }
  const err = requestError(obj);
  if (err !== null) throw new Error(err);
  return obj as ProtocolRequest;
}

export function makeResponse(req: ProtocolRequest, fitness: number[]): ProtocolResponse {
  if (fitness.length !== req.candidates.length) {
    throw new Error("fitness length must equal candidates length");
  }
  if (!fitness.every(isFiniteNumber)) {
    throw new Error("non-finite fitness");
  }
  return { id: req.id, fitness };
}
