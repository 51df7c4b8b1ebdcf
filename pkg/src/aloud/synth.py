"""Per-sentence synthesis orchestration.

Sentences are planned into synthesis units before any audio is made: short
neighbors within a block are merged up to a minimum length, and anything
longer than the engine's safe ceiling is pre-split at whitespace medians.
At synthesis time an engine overflow triggers the same median split
reactively, so numerals and other token-dense text that blow past the
character heuristic still synthesize without truncation.

Engines are pluggable: a deterministic offline mock, or any external
process speaking the line-delimited JSON bridge protocol.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
from dataclasses import dataclass, replace

import numpy as np

from .audio import Waveform, concat, decode_wav
from .errors import AloudError, EngineFailure, IoFailure, Overflow, UnsplittableOverflow
from .segmenter import SentenceSeg

_REACTIVE_DEPTH_CAP = 8
_NON_OVERFLOW_RETRIES = 2


@dataclass
class SynthRequest:
    text: str
    language: str = "en"
    voice_ref: str = ""

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("synthesis text is empty")


@dataclass
class EngineLimits:
    lambda_plus: int = 200
    lambda_minus: int = 60
    hard_token_probe: int | None = None

    def __post_init__(self) -> None:
        if not 0 < self.lambda_minus < self.lambda_plus:
            raise ValueError("need 0 < min length < max length")


@dataclass
class SynthUnit:
    """One audio clip's worth of text: a sentence, or several merged ones."""

    seg: SentenceSeg
    anchor_ids: list[str]
    tts_text: str
    pieces: list[str]
    waveform: Waveform | None = None


def plan_units(segs: list[SentenceSeg], limits: EngineLimits) -> list[SynthUnit]:
    """Group sentences into synthesis units and pre-split long ones.

    Merging is greedy left to right: while a unit's text is shorter than
    the minimum and the next sentence lies in the same block, the next
    sentence joins the unit.  Each unit's text is then split so no piece
    exceeds the engine ceiling.
    """
    units: list[SynthUnit] = []
    i = 0
    while i < len(segs):
        covered = [segs[i]]
        text = segs[i].tts_text
        while (len(text) < limits.lambda_minus
               and i + len(covered) < len(segs)
               and segs[i + len(covered)].block == segs[i].block):
            nxt = segs[i + len(covered)]
            covered.append(nxt)
            text = f"{text} {nxt.tts_text}"
        units.append(SynthUnit(
            seg=covered[0],
            anchor_ids=[s.anchor_id for s in covered],
            tts_text=text,
            pieces=split_text(text, limits.lambda_plus),
        ))
        i += len(covered)
    return units


def split_text(text: str, lambda_plus: int) -> list[str]:
    """Recursively split at the whitespace nearest the midpoint.

    Ties go to the earlier whitespace.  Text with no whitespace at all is
    hard-split into ceiling-length chunks.  Joining the results with single
    spaces (or nothing, for hard splits) reconstructs the input.
    """
    if len(text) <= lambda_plus:
        return [text]
    ws = [i for i, ch in enumerate(text) if ch.isspace()]
    if not ws:
        return [text[:lambda_plus]] + split_text(text[lambda_plus:], lambda_plus)
    mid = len(text) / 2
    cut = min(ws, key=lambda i: (abs(i - mid), i))
    left, right = text[:cut], text[cut + 1:]
    return split_text(left, lambda_plus) + split_text(right, lambda_plus)


def _median_halves(text: str) -> tuple[str, str] | None:
    ws = [i for i, ch in enumerate(text) if ch.isspace()]
    if not ws:
        return None
    mid = len(text) / 2
    cut = min(ws, key=lambda i: (abs(i - mid), i))
    return text[:cut], text[cut + 1:]


class Engine:
    """Minimal engine interface: a declared output rate and one call."""

    sample_rate: int

    def synthesize(self, req: SynthRequest) -> Waveform:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class MockEngine(Engine):
    """Deterministic offline engine: a 440 Hz tone sized by text length.

    Duration is 0.06 s per character with a 0.4 s floor, so timing math is
    exercised realistically without any model.  An optional probe threshold
    simulates token overflow for texts longer than the probe.
    """

    sample_rate = 24000

    def __init__(self, hard_token_probe: int | None = None):
        self.hard_token_probe = hard_token_probe

    def synthesize(self, req: SynthRequest) -> Waveform:
        if self.hard_token_probe is not None and len(req.text) > self.hard_token_probe:
            raise Overflow(f"mock probe: {len(req.text)} chars > {self.hard_token_probe}")
        duration = max(0.4, 0.06 * len(req.text))
        n = round(duration * self.sample_rate)
        t = np.arange(n) / self.sample_rate
        samples = 0.2 * np.sin(2 * np.pi * 440.0 * t)
        return Waveform(samples.astype(np.float32), self.sample_rate)


class SubprocessEngine(Engine):
    """Engine adapter over an external bridge process.

    The bridge speaks line-delimited JSON on stdin/stdout: a ready
    handshake declaring its sample rate, then one reply per request with a
    matching id, in order.  Replies carry either a WAV path or an error
    code; ``token_overflow`` maps to the reactive split path, anything
    else fails the piece.
    """

    def __init__(self, bridge_cmd: str, use_gpu: bool = False):
        env = dict(os.environ, TTS_USE_GPU="1" if use_gpu else "0")
        try:
            self._proc = subprocess.Popen(
                shlex.split(bridge_cmd),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                env=env,
                text=True,
            )
        except OSError as exc:
            raise EngineFailure(f"cannot start bridge {bridge_cmd!r}: {exc}") from exc
        self._next_id = 1
        handshake = self._read_record()
        if not handshake.get("ready") or not isinstance(handshake.get("sample_rate"), int):
            raise EngineFailure(f"bad bridge handshake: {handshake!r}")
        self.sample_rate = handshake["sample_rate"]

    def _read_record(self) -> dict:
        line = self._proc.stdout.readline()
        if not line:
            code = self._proc.poll()
            raise EngineFailure(f"bridge closed its output (exit status {code})")
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EngineFailure(f"bridge sent malformed JSON: {line!r}") from exc
        if not isinstance(record, dict):
            raise EngineFailure(f"bridge sent non-object record: {record!r}")
        return record

    def synthesize(self, req: SynthRequest) -> Waveform:
        req_id = self._next_id
        self._next_id += 1
        message = {
            "id": req_id,
            "text": req.text,
            "language": req.language,
            "voice": req.voice_ref,
        }
        try:
            self._proc.stdin.write(json.dumps(message) + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise EngineFailure(f"cannot write to bridge: {exc}") from exc

        reply = self._read_record()
        if reply.get("id") != req_id:
            raise EngineFailure(
                f"bridge reply id {reply.get('id')!r} does not match request {req_id}"
            )
        if "error" in reply:
            if reply["error"] == "token_overflow":
                raise Overflow(reply.get("detail", "token overflow"))
            raise EngineFailure(
                f"bridge error {reply['error']!r}: {reply.get('detail', '')}"
            )
        wav_path = reply.get("wav")
        if not isinstance(wav_path, str):
            raise EngineFailure(f"bridge reply lacks a wav path: {reply!r}")
        try:
            return decode_wav(wav_path)
        except IoFailure as exc:
            raise EngineFailure(str(exc)) from exc

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


def synthesize_unit(
    plan: SynthUnit,
    engine: Engine,
    limits: EngineLimits,
    language: str = "en",
    voice_ref: str = "",
) -> SynthUnit:
    """Synthesize every piece of a unit, splitting further on overflow.

    An overflowing piece is cut in two at its whitespace median and both
    halves retried, to a depth of eight; a piece with no whitespace left
    cannot shrink and fails the run.  Transient engine errors are retried
    twice.  Piece outputs are resampled to the engine's declared rate and
    concatenated in order.
    """
    done_pieces: list[str] = []
    waves: list[Waveform] = []

    def synth_piece(text: str, depth: int) -> None:
        if not text.strip():
            return
        try:
            wave = _call_with_retry(engine, SynthRequest(text, language, voice_ref),
                                    plan.seg.anchor_id)
        except Overflow as exc:
            if depth >= _REACTIVE_DEPTH_CAP:
                raise UnsplittableOverflow(
                    f"{plan.seg.anchor_id}: split depth exhausted on {text[:40]!r}"
                ) from exc
            halves = _median_halves(text)
            if halves is None:
                raise UnsplittableOverflow(
                    f"{plan.seg.anchor_id}: engine overflow on single word {text[:40]!r}"
                ) from exc
            synth_piece(halves[0], depth + 1)
            synth_piece(halves[1], depth + 1)
            return
        done_pieces.append(text)
        waves.append(wave)

    for piece in plan.pieces:
        synth_piece(piece, 0)

    return replace(plan, pieces=done_pieces,
                   waveform=concat(waves, engine.sample_rate))


def _call_with_retry(engine: Engine, req: SynthRequest, anchor_id: str) -> Waveform:
    attempts = _NON_OVERFLOW_RETRIES + 1
    last: AloudError | None = None
    for _ in range(attempts):
        try:
            return engine.synthesize(req)
        except Overflow:
            raise
        except EngineFailure as exc:
            last = exc
    raise EngineFailure(f"{anchor_id}: engine failed after {attempts} attempts: {last}")
