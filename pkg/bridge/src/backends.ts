/**
 * Adapters for neural synthesis servers reached over HTTP.
 *
 * Both adapters hold the voice reference (a path to a short clean speech
 * sample) as their conditioning state and translate server failures that
 * look like context-window exhaustion into TokenOverflow; everything else
 * surfaces as a plain error for the serve loop to report as engine_error.
 */

import { readFile } from "node:fs/promises";

import { Synthesizer, TokenOverflow } from "./synthesizer.js";
import { decodeWavPcm16 } from "./wav.js";

const OVERFLOW_HINT = /token|context window|too long|max(imum)? (text )?length/i;

function classify(status: number, body: string): Error {
  const detail = `server replied ${status}: ${body.slice(0, 200)}`;
  return OVERFLOW_HINT.test(body) ? new TokenOverflow(detail) : new Error(detail);
}

async function postJson(url: string, payload: unknown): Promise<Buffer> {
  const response = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
  if (!response.ok) {
    throw classify(response.status, await response.text());
  }
  return Buffer.from(await response.arrayBuffer());
}

function toDeclaredRate(data: Buffer, expected: number): Float32Array {
  const decoded = decodeWavPcm16(data);
  if (decoded.sampleRate !== expected) {
    throw new Error(
      `server returned ${decoded.sampleRate} Hz audio, handshake declared ${expected}`);
  }
  return decoded.samples;
}

export interface HttpBackendOptions {
  serverUrl: string;
  useGpu: boolean;
}

/** Coqui XTTS-v2 server: POST /tts_to_audio with a reference speaker WAV. */
export class XttsSynthesizer implements Synthesizer {
  readonly name = "xtts";
  readonly sampleRate = 24000;
  private readonly options: HttpBackendOptions;

  constructor(options: HttpBackendOptions) {
    this.options = options;
  }

  async prepareVoice(voicePath: string): Promise<string> {
    if (voicePath) {
      await readFile(voicePath); // fail fast on a bad reference sample
    }
    return voicePath;
  }

  async synthesize(text: string, language: string, conditioning: unknown): Promise<Float32Array> {
    const body = await postJson(`${this.options.serverUrl}/tts_to_audio/`, {
      text,
      language,
      speaker_wav: conditioning,
      use_gpu: this.options.useGpu,
    });
    return toDeclaredRate(body, this.sampleRate);
  }
}

/** Chatterbox server: the OpenAI-style /v1/audio/speech endpoint. */
export class ChatterboxSynthesizer implements Synthesizer {
  readonly name = "chatterbox";
  readonly sampleRate = 24000;
  private readonly options: HttpBackendOptions;

  constructor(options: HttpBackendOptions) {
    this.options = options;
  }

  async prepareVoice(voicePath: string): Promise<string> {
    if (voicePath) {
      await readFile(voicePath);
    }
    return voicePath;
  }

  async synthesize(text: string, _language: string, conditioning: unknown): Promise<Float32Array> {
    const body = await postJson(`${this.options.serverUrl}/v1/audio/speech`, {
      input: text,
      voice: conditioning || "default",
      response_format: "wav",
    });
    return toDeclaredRate(body, this.sampleRate);
  }
}
