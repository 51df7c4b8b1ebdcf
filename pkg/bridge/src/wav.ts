/**
 * Minimal RIFF/WAVE codec: 16-bit PCM, single channel.
 *
 * The encoder is what the bridge writes for every reply; the decoder lets
 * the HTTP adapters unwrap audio returned by a synthesis server.
 */

const HEADER_BYTES = 44;

export function encodeWavPcm16(samples: Float32Array, sampleRate: number): Buffer {
  if (!Number.isInteger(sampleRate) || sampleRate <= 0) {
    throw new Error(`bad sample rate: ${sampleRate}`);
  }
  const dataBytes = samples.length * 2;
  const buf = Buffer.alloc(HEADER_BYTES + dataBytes);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + dataBytes, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16); // PCM fmt chunk size
  buf.writeUInt16LE(1, 20); // audio format: linear PCM
  buf.writeUInt16LE(1, 22); // channels: mono
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * 2, 28); // byte rate
  buf.writeUInt16LE(2, 32); // block align
  buf.writeUInt16LE(16, 34); // bits per sample
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(dataBytes, 40);
  for (let i = 0; i < samples.length; i++) {
    const clamped = Math.max(-1, Math.min(1, samples[i] ?? 0));
    buf.writeInt16LE(Math.round(clamped * 32767), HEADER_BYTES + 2 * i);
  }
  return buf;
}

export interface DecodedWav {
  samples: Float32Array;
  sampleRate: number;
}

export function decodeWavPcm16(data: Buffer): DecodedWav {
  if (data.length < HEADER_BYTES || data.toString("ascii", 0, 4) !== "RIFF"
      || data.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error("not a RIFF/WAVE stream");
  }
  // Walk the chunk list; fmt must precede data.
  let offset = 12;
  let format: { channels: number; rate: number; bits: number } | null = null;
  while (offset + 8 <= data.length) {
    const chunkId = data.toString("ascii", offset, offset + 4);
    const chunkSize = data.readUInt32LE(offset + 4);
    const body = offset + 8;
    if (chunkId === "fmt ") {
      format = {
        channels: data.readUInt16LE(body + 2),
        rate: data.readUInt32LE(body + 4),
        bits: data.readUInt16LE(body + 14),
      };
      if (data.readUInt16LE(body) !== 1) {
        throw new Error("compressed WAV is not supported");
      }
    } else if (chunkId === "data") {
      if (format === null) {
        throw new Error("WAV data chunk precedes fmt");
      }
      if (format.bits !== 16 || format.channels !== 1) {
        throw new Error(
          `expected 16-bit mono PCM, got ${format.bits}-bit ${format.channels}-channel`);
      }
      const frames = Math.floor(Math.min(chunkSize, data.length - body) / 2);
      const samples = new Float32Array(frames);
      for (let i = 0; i < frames; i++) {
        samples[i] = data.readInt16LE(body + 2 * i) / 32767;
      }
      return { samples, sampleRate: format.rate };
    }
    offset = body + chunkSize + (chunkSize % 2);
  }
  throw new Error("WAV stream has no data chunk");
}
