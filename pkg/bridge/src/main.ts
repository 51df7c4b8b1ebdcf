#!/usr/bin/env node
/**
 * Entry point: pick an engine, then serve the stdio protocol until EOF.
 *
 * GPU use is controlled by the TTS_USE_GPU environment variable set by the
 * spawning process; it is forwarded to HTTP back ends and irrelevant to
 * the stub.
 */

import { parseArgs } from "node:util";

import { ChatterboxSynthesizer, XttsSynthesizer } from "./backends.js";
import { serve } from "./serve.js";
import { StubSynthesizer, Synthesizer } from "./synthesizer.js";

const USAGE = `usage: tts-bridge [options]
  --engine xtts|chatterbox|stub   synthesis back end (default: xtts)
  --server-url URL                HTTP back end address
  --sample-rate N                 stub output rate (default: 24000)
  --overflow-chars N              stub context window; 0 disables (default: 400)
`;

const SERVER_DEFAULTS: Record<string, string> = {
  xtts: "http://127.0.0.1:8020",
  chatterbox: "http://127.0.0.1:5100",
};

function positiveInt(name: string, raw: string | undefined, fallback: number): number {
  if (raw === undefined) {
    return fallback;
  }
  const value = Number(raw);
  if (!Number.isInteger(value) || value < 0) {
    throw new RangeError(`${name} must be a non-negative integer, got ${raw}`);
  }
  return value;
}

function buildSynthesizer(argv: string[]): Synthesizer {
  const { values } = parseArgs({
    args: argv,
    options: {
      engine: { type: "string", default: "xtts" },
      "server-url": { type: "string" },
      "sample-rate": { type: "string" },
      "overflow-chars": { type: "string" },
      help: { type: "boolean", default: false },
    },
  });
  if (values.help) {
    process.stdout.write(USAGE);
    process.exit(0);
  }
  const engine = values.engine as string;
  const useGpu = process.env.TTS_USE_GPU === "1";
  if (engine === "stub") {
    return new StubSynthesizer({
      sampleRate: positiveInt("--sample-rate", values["sample-rate"], 24000),
      overflowChars: positiveInt("--overflow-chars", values["overflow-chars"], 400),
    });
  }
  const serverUrl = values["server-url"] ?? SERVER_DEFAULTS[engine];
  if (serverUrl === undefined) {
    throw new RangeError(`unknown engine: ${engine}`);
  }
  const options = { serverUrl, useGpu };
  return engine === "xtts"
    ? new XttsSynthesizer(options)
    : new ChatterboxSynthesizer(options);
}

async function main(): Promise<number> {
  let synth: Synthesizer;
  try {
    synth = buildSynthesizer(process.argv.slice(2));
  } catch (err) {
    console.error(`tts-bridge: ${err instanceof Error ? err.message : err}`);
    console.error(USAGE);
    return 2;
  }
  console.error(
    `tts-bridge: engine=${synth.name} rate=${synth.sampleRate} ` +
    `gpu=${process.env.TTS_USE_GPU === "1" ? "on" : "off"}`);
  return serve(synth, process.stdin, process.stdout);
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`tts-bridge: fatal: ${err instanceof Error ? err.stack : err}`);
    process.exit(1);
  },
);
