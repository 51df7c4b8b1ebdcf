/**
 * Wire protocol: line-delimited JSON over stdin/stdout.
 *
 * The first line written is the ready handshake declaring the output
 * sample rate.  After that, every request line receives exactly one reply
 * line carrying the same id, in request order: either a path to a 16-bit
 * mono WAV, or an error classified as `token_overflow` (the input exceeds
 * the engine's context window) or `engine_error` (anything else).
 */

export interface Handshake {
  ready: true;
  sample_rate: number;
}

export interface SynthRequest {
  id: number;
  text: string;
  language: string;
  voice: string;
}

export type Reply =
  | { id: number; wav: string }
  | { id: number; error: "token_overflow" | "engine_error"; detail: string };

/** A malformed line or field; the session cannot safely continue. */
export class ProtocolViolation extends Error {}

export function parseRequest(line: string): SynthRequest {
  let value: unknown;
  try {
    value = JSON.parse(line);
  } catch {
    throw new ProtocolViolation(`request line is not JSON: ${line.slice(0, 80)}`);
  }
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new ProtocolViolation(`request is not an object: ${line.slice(0, 80)}`);
  }
  const record = value as Record<string, unknown>;
  if (typeof record.id !== "number" || !Number.isInteger(record.id)) {
    throw new ProtocolViolation(`request lacks an integer id: ${line.slice(0, 80)}`);
  }
  if (typeof record.text !== "string") {
    throw new ProtocolViolation(`request ${record.id} lacks a text string`);
  }
  return {
    id: record.id,
    text: record.text,
    language: typeof record.language === "string" ? record.language : "en",
    voice: typeof record.voice === "string" ? record.voice : "",
  };
}

export function formatLine(record: Handshake | Reply): string {
  return JSON.stringify(record) + "\n";
}
