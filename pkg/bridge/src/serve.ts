/**
 * The serve loop: handshake, then one reply per request line until EOF.
 *
 * Requests are handled strictly serially, so replies are in request order
 * by construction.  Rendered audio lands in a per-session temporary
 * directory that is removed when the loop ends; the consumer is expected
 * to read each WAV as soon as its reply arrives.
 */

import { mkdtemp, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { createInterface } from "node:readline";
import type { Readable, Writable } from "node:stream";

import { formatLine, parseRequest, ProtocolViolation, Reply } from "./protocol.js";
import { Synthesizer, TokenOverflow } from "./synthesizer.js";
import { encodeWavPcm16 } from "./wav.js";

export async function serve(
  synth: Synthesizer,
  input: Readable,
  output: Writable,
): Promise<number> {
  const sessionDir = await mkdtemp(join(tmpdir(), "tts-bridge-"));
  const voiceCache = new Map<string, unknown>();
  let serial = 0;

  const write = (record: Parameters<typeof formatLine>[0]) =>
    new Promise<void>((resolve, reject) => {
      output.write(formatLine(record), (err) => (err ? reject(err) : resolve()));
    });

  try {
    await write({ ready: true, sample_rate: synth.sampleRate });

    for await (const line of createInterface({ input, crlfDelay: Infinity })) {
      if (!line.trim()) {
        continue;
      }
      const request = parseRequest(line);
      let reply: Reply;
      try {
        let conditioning = voiceCache.get(request.voice);
        if (conditioning === undefined) {
          conditioning = await synth.prepareVoice(request.voice);
          voiceCache.set(request.voice, conditioning);
        }
        const samples = await synth.synthesize(
          request.text, request.language, conditioning);
        serial += 1;
        const wavPath = join(sessionDir, `u${String(serial).padStart(4, "0")}.wav`);
        await writeFile(wavPath, encodeWavPcm16(samples, synth.sampleRate));
        reply = { id: request.id, wav: wavPath };
      } catch (err) {
        reply = {
          id: request.id,
          error: err instanceof TokenOverflow ? "token_overflow" : "engine_error",
          detail: err instanceof Error ? err.message : String(err),
        };
      }
      await write(reply);
    }
    return 0;
  } catch (err) {
    if (err instanceof ProtocolViolation) {
      console.error(`tts-bridge: protocol violation: ${err.message}`);
      return 1;
    }
    throw err;
  } finally {
    await synth.close?.();
    await rm(sessionDir, { recursive: true, force: true });
  }
}
