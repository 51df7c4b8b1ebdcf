/**
 * Engine abstraction behind the wire protocol.
 *
 * A synthesizer declares one fixed output sample rate, prepares per-voice
 * conditioning once (the serve loop caches it by voice path), and renders
 * one request's text at a time.  Context-window failures are signalled
 * with TokenOverflow so the serve loop can classify them on the wire.
 */

export class TokenOverflow extends Error {}

export interface Synthesizer {
  readonly name: string;
  readonly sampleRate: number;
  /** Compute whatever per-voice state the engine needs; called once per voice path. */
  prepareVoice(voicePath: string): Promise<unknown>;
  synthesize(text: string, language: string, conditioning: unknown): Promise<Float32Array>;
  close?(): void | Promise<void>;
}

export interface StubOptions {
  sampleRate?: number;
  /** Texts longer than this many characters overflow; 0 disables the limit. */
  overflowChars?: number;
}

/**
 * Deterministic offline engine for protocol tests: a sine tone whose pitch
 * depends on the voice path and whose duration scales with text length.
 * No model, no network; an overflow threshold stands in for a context
 * window.
 */
export class StubSynthesizer implements Synthesizer {
  readonly name = "stub";
  readonly sampleRate: number;
  private readonly overflowChars: number;

  constructor(options: StubOptions = {}) {
    this.sampleRate = options.sampleRate ?? 24000;
    this.overflowChars = options.overflowChars ?? 400;
  }

  async prepareVoice(voicePath: string): Promise<number> {
    let hash = 0;
    for (let i = 0; i < voicePath.length; i++) {
      hash = (hash * 31 + voicePath.charCodeAt(i)) >>> 0;
    }
    return 220 + (hash % 440); // base pitch in Hz
  }

  async synthesize(text: string, _language: string, conditioning: unknown): Promise<Float32Array> {
    if (!text.trim()) {
      throw new Error("cannot synthesize empty text");
    }
    if (this.overflowChars > 0 && text.length > this.overflowChars) {
      throw new TokenOverflow(
        `${text.length} characters exceed the ${this.overflowChars}-character window`);
    }
    const pitch = typeof conditioning === "number" ? conditioning : 330;
    const seconds = Math.max(0.2, 0.05 * text.length);
    const samples = new Float32Array(Math.round(seconds * this.sampleRate));
    for (let i = 0; i < samples.length; i++) {
      samples[i] = 0.25 * Math.sin((2 * Math.PI * pitch * i) / this.sampleRate);
    }
    return samples;
  }
}
