"""Waveform processing: fades, silence padding, stitching, and WAV I/O.

Chapter audio is the concatenation of per-sentence waveforms, each given a
short linear fade-out and followed by a fixed silence gap.  Every duration
used for timestamping is derived from sample counts — never from encoded
file metadata — so the synchronization map matches the audio exactly.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EncoderFailure, IoFailure, RateMismatch


@dataclass(eq=False)
class Waveform:
    """Mono PCM audio held as float32 samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 1:
            raise ValueError("waveform must be mono (1-D)")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.samples.size and not np.isfinite(self.samples).all():
            raise ValueError("waveform contains non-finite samples")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def resample(w: Waveform, new_rate: int) -> Waveform:
    """Linear-interpolation resampling preserving duration within one sample."""
    if new_rate == w.sample_rate:
        return w
    n_out = round(len(w.samples) * new_rate / w.sample_rate)
    if n_out == 0 or len(w.samples) == 0:
        return Waveform(np.zeros(n_out, dtype=np.float32), new_rate)
    t_out = np.arange(n_out) / new_rate
    t_in = np.arange(len(w.samples)) / w.sample_rate
    return Waveform(np.interp(t_out, t_in, w.samples).astype(np.float32), new_rate)


def concat(waves: list[Waveform], sample_rate: int) -> Waveform:
    """Concatenate waveforms, resampling any stragglers to ``sample_rate``."""
    parts = [resample(w, sample_rate).samples for w in waves]
    if not parts:
        return Waveform(np.zeros(0, dtype=np.float32), sample_rate)
    return Waveform(np.concatenate(parts), sample_rate)


@dataclass
class StitchParams:
    fade_ms: float = 50.0
    delta_s: float = 0.15
    sample_rate: int = 24000

    def __post_init__(self) -> None:
        if self.fade_ms < 0 or self.delta_s < 0:
            raise ValueError("fade and padding must be non-negative")


@dataclass
class StitchedChapter:
    audio: Waveform
    unit_durations: list[float]
    delta_s: float


def fade_out(w: Waveform, fade_ms: float) -> Waveform:
    """Apply a linear ramp down to zero over the trailing fade window."""
    n = min(round(fade_ms * w.sample_rate / 1000.0), len(w.samples))
    if n <= 0:
        return w
    out = w.samples.copy()
    ramp = np.arange(n - 1, -1, -1, dtype=np.float32) / np.float32(n)
    out[-n:] *= ramp
    return Waveform(out, w.sample_rate)


def stitch(units: list[Waveform], params: StitchParams) -> StitchedChapter:
    """Fade, pad, and concatenate unit waveforms into one chapter stream.

    The silence gap is quantized to a whole number of samples and that
    quantized value is reported back, so downstream timestamp arithmetic
    reproduces the audio construction exactly.  A gap follows every unit,
    including the last.
    """
    pad_samples = round(params.delta_s * params.sample_rate)
    delta_actual = pad_samples / params.sample_rate
    silence = np.zeros(pad_samples, dtype=np.float32)

    parts: list[np.ndarray] = []
    durations: list[float] = []
    for w in units:
        if w.sample_rate != params.sample_rate:
            raise RateMismatch(
                f"unit rate {w.sample_rate} != chapter rate {params.sample_rate}"
            )
        faded = fade_out(w, params.fade_ms)
        durations.append(len(faded.samples) / params.sample_rate)
        parts.append(faded.samples)
        parts.append(silence)

    samples = np.concatenate(parts) if parts else np.zeros(0, dtype=np.float32)
    return StitchedChapter(
        audio=Waveform(samples, params.sample_rate),
        unit_durations=durations,
        delta_s=delta_actual,
    )


def encode_wav(w: Waveform, path) -> None:
    """Write 16-bit signed little-endian mono PCM."""
    clipped = np.clip(w.samples, -1.0, 1.0)
    pcm = (clipped * 32767.0).round().astype("<i2")
    try:
        with wave.open(str(path), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(w.sample_rate)
            wf.writeframes(pcm.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def decode_wav(path) -> Waveform:
    """Read a 16-bit mono PCM WAV back into a Waveform."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (OSError, wave.Error, EOFError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if width != 2:
        raise IoFailure(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32767.0
    if channels > 1:
        pcm = pcm.reshape(-1, channels).mean(axis=1)
    return Waveform(np.clip(pcm, -1.0, 1.0), rate)


def encode_chapter_audio(w: Waveform, path, encoder_cmd: str | None = None) -> str:
    """Write chapter audio, returning the media type actually produced.

    Without an external encoder the output is WAV.  With one, the command
    template's ``{in}`` and ``{out}`` placeholders are filled with a
    temporary WAV and the target path; a nonzero exit or missing output
    fails the chapter.
    """
    path = Path(path)
    if not encoder_cmd:
        encode_wav(w, path)
        return "audio/wav"

    with tempfile.TemporaryDirectory(prefix="aloud-enc-") as tmp:
        wav_path = Path(tmp) / "chapter.wav"
        encode_wav(w, wav_path)
        argv = [
            arg.replace("{in}", str(wav_path)).replace("{out}", str(path))
            for arg in shlex.split(encoder_cmd)
        ]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True)
        except OSError as exc:
            raise EncoderFailure(f"cannot run encoder {argv[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            raise EncoderFailure(
                f"encoder exited {proc.returncode} for {path.name}: "
                f"{proc.stderr.strip()[:500]}"
            )
        if not path.exists():
            raise EncoderFailure(f"encoder produced no output for {path.name}")
    return "audio/mpeg"
