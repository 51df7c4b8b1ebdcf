"""End-to-end conversion: narrated EPUB in, Media-Overlay EPUB 3 out.

Three phases run in order: anchor injection into every spine document with
narratable text, per-chapter synthesis and stitching (parallel across
chapters), and packaging — SMIL, audio, highlight CSS, and the updated
package document written back into a copy of the original container.
"""

from __future__ import annotations

import os
import posixpath
import sys
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .audio import StitchParams, encode_chapter_audio, stitch
from .container import ContainerModel, PackageDoc, open_container, parse_package, write_container
from .drift import DriftReport, evaluate, export_report, extract_sync_map
from .errors import NoOverlays
from .overlay import (
    DEFAULT_ACTIVE_CLASS,
    ChapterOverlay,
    OverlayBundle,
    SmilDoc,
    compute_intervals,
    emit_smil,
    emit_css,
    inject_css_link,
    relative_href,
    update_package,
)
from .segmenter import SentenceSeg, inject_anchors
from .synth import (
    Engine,
    EngineLimits,
    MockEngine,
    SubprocessEngine,
    SynthUnit,
    plan_units,
    synthesize_unit,
)

_XHTML_TYPES = {"application/xhtml+xml", "text/html"}


@dataclass
class RunConfig:
    input_epub: str
    output_epub: str
    voice: str = ""
    language: str = "en"
    engine: str = "mock"  # "mock" or a bridge command line
    gpu: bool = False
    skip_audio: bool = False
    delta_s: float = 0.15
    fade_ms: float = 50.0
    lambda_plus: int = 200
    lambda_minus: int = 60
    jobs: int = 0  # 0: one per logical processor, capped at chapter count
    encoder_cmd: str | None = None
    active_class: str = DEFAULT_ACTIVE_CLASS

    def validate(self) -> None:
        if os.path.abspath(self.input_epub) == os.path.abspath(self.output_epub):
            raise ValueError("output path must differ from the input path")
        if self.engine != "mock" and not self.skip_audio and not self.voice:
            raise ValueError("--voice is required with an external engine")


@dataclass
class ChapterResult:
    item_id: str
    href: str
    n_sentences: int
    n_units: int
    duration_s: float
    unit_durations: list[float] = field(default_factory=list)
    delta_s: float = 0.0


@dataclass
class ConvertResult:
    output_path: str
    chapters: list[ChapterResult] = field(default_factory=list)

    @property
    def n_sentences(self) -> int:
        return sum(c.n_sentences for c in self.chapters)

    @property
    def total_duration_s(self) -> float:
        return sum(c.duration_s for c in self.chapters)


@dataclass
class _ChapterJob:
    chapter_index: int  # narrated-order index, drives anchor numbering
    item_id: str
    href: str           # OPF-relative
    archive_path: str
    xhtml: bytes        # with anchors injected, CSS link not yet added
    segs: list[SentenceSeg]


def run_convert(config: RunConfig, log=None) -> ConvertResult:
    """Convert one EPUB; returns per-chapter stats for reporting."""
    config.validate()
    log = log or (lambda msg: print(msg, file=sys.stderr))
    limits = EngineLimits(lambda_plus=config.lambda_plus,
                          lambda_minus=config.lambda_minus)

    model = open_container(config.input_epub)
    pkg = parse_package(model)

    jobs = _collect_chapters(model, pkg)
    if not jobs:
        raise NoOverlays(f"{config.input_epub}: no spine document has narratable text")
    log(f"{len(jobs)} chapter(s) to narrate; "
        f"max-chars={limits.lambda_plus} min-chars={limits.lambda_minus} "
        f"gap={config.delta_s}s fade={config.fade_ms}ms "
        f"engine={'mock' if _use_mock(config) else config.engine}")

    workers = config.jobs if config.jobs > 0 else (os.cpu_count() or 1)
    workers = max(1, min(workers, len(jobs)))
    engines = _EnginePool(config)
    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            built = list(pool.map(
                lambda job: _build_chapter(job, engines, limits, config, log),
                jobs,
            ))
    finally:
        engines.close_all()

    return _package(model, pkg, config, jobs, built)


def _use_mock(config: RunConfig) -> bool:
    return config.skip_audio or config.engine == "mock"


class _EnginePool:
    """One engine per worker thread; mock engines are shared and stateless."""

    def __init__(self, config: RunConfig):
        self._config = config
        self._local = threading.local()
        self._created: list[Engine] = []
        self._lock = threading.Lock()

    def get(self) -> Engine:
        engine = getattr(self._local, "engine", None)
        if engine is None:
            if _use_mock(self._config):
                engine = MockEngine()
            else:
                engine = SubprocessEngine(self._config.engine, use_gpu=self._config.gpu)
            self._local.engine = engine
            with self._lock:
                self._created.append(engine)
        return engine

    def close_all(self) -> None:
        with self._lock:
            engines, self._created = self._created, []
        for engine in engines:
            engine.close()


def _collect_chapters(model: ContainerModel, pkg: PackageDoc) -> list[_ChapterJob]:
    """Inject anchors into every spine document that yields sentences.

    Documents with no narratable text (covers, image-only pages) are left
    untouched and do not consume a chapter number.
    """
    jobs: list[_ChapterJob] = []
    for idref in pkg.spine:
        item = pkg.item_by_id(idref)
        if item is None or item.media_type not in _XHTML_TYPES:
            continue
        archive_path = model.resolve(item.href)
        data = model.entries.get(archive_path)
        if data is None:
            continue
        rewritten, segs = inject_anchors(data, chapter_index=len(jobs))
        if not segs:
            continue
        jobs.append(_ChapterJob(
            chapter_index=len(jobs),
            item_id=item.id,
            href=item.href,
            archive_path=archive_path,
            xhtml=rewritten,
            segs=segs,
        ))
    return jobs


@dataclass
class _BuiltChapter:
    units: list[SynthUnit]
    smil: SmilDoc  # textref/audio_src filled during packaging
    audio_bytes: bytes
    audio_media_type: str
    unit_durations: list[float]
    delta_s: float


def _build_chapter(
    job: _ChapterJob,
    engines: _EnginePool,
    limits: EngineLimits,
    config: RunConfig,
    log,
) -> _BuiltChapter:
    engine = engines.get()
    plans = plan_units(job.segs, limits)
    units = [
        synthesize_unit(plan, engine, limits,
                        language=config.language, voice_ref=config.voice)
        for plan in plans
    ]
    params = StitchParams(fade_ms=config.fade_ms, delta_s=config.delta_s,
                          sample_rate=engine.sample_rate)
    stitched = stitch([u.waveform for u in units], params)
    pars = compute_intervals(stitched.unit_durations, stitched.delta_s,
                             [u.anchor_ids for u in units])

    with tempfile.TemporaryDirectory(prefix="aloud-ch-") as tmp:
        out = Path(tmp) / "chapter.audio"
        media_type = encode_chapter_audio(stitched.audio, out, config.encoder_cmd)
        audio_bytes = out.read_bytes()

    smil = SmilDoc(textref="", audio_src="", pars=pars,
                   total_duration=pars[-1].t_end)
    log(f"chapter {job.chapter_index + 1}: {len(job.segs)} sentence(s), "
        f"{len(units)} unit(s), {smil.total_duration:.1f}s audio")
    return _BuiltChapter(units, smil, audio_bytes, media_type,
                         stitched.unit_durations, stitched.delta_s)


def _package(
    model: ContainerModel,
    pkg: PackageDoc,
    config: RunConfig,
    jobs: list[_ChapterJob],
    built: list[_BuiltChapter],
) -> ConvertResult:
    taken_ids = {item.id for item in pkg.manifest}
    taken_hrefs = {item.href for item in pkg.manifest}
    css_href = _unique_href("css/media-overlay.css", taken_hrefs)

    chapters: list[ChapterOverlay] = []
    result = ConvertResult(output_path=config.output_epub)
    for job, b in zip(jobs, built):
        n = job.chapter_index + 1
        stem = posixpath.splitext(posixpath.basename(job.href))[0]
        ext = ".mp3" if b.audio_media_type == "audio/mpeg" else ".wav"
        smil_href = _unique_href(f"smil/{stem}.smil", taken_hrefs)
        audio_href = _unique_href(f"audio/{stem}{ext}", taken_hrefs)
        smil_id = _unique_id(f"smil_{n:02d}", taken_ids)
        audio_id = _unique_id(f"audio_{n:02d}", taken_ids)

        b.smil.textref = relative_href(smil_href, job.href)
        b.smil.audio_src = relative_href(smil_href, audio_href)

        chapters.append(ChapterOverlay(
            item_id=job.item_id,
            smil_id=smil_id,
            audio_id=audio_id,
            smil_href=smil_href,
            audio_href=audio_href,
            audio_media_type=b.audio_media_type,
            smil=b.smil,
        ))
        result.chapters.append(ChapterResult(
            item_id=job.item_id,
            href=job.href,
            n_sentences=len(job.segs),
            n_units=len(b.units),
            duration_s=b.smil.total_duration,
            unit_durations=b.unit_durations,
            delta_s=b.delta_s,
        ))

    bundle = OverlayBundle(chapters=chapters, css_href=css_href,
                           active_class=config.active_class)

    for job in jobs:
        linked = inject_css_link(job.xhtml, relative_href(job.href, css_href))
        model.put(job.archive_path, linked)
    for overlay, b in zip(chapters, built):
        model.put(model.resolve(overlay.smil_href), emit_smil(overlay.smil))
        model.put(model.resolve(overlay.audio_href), b.audio_bytes)
    model.put(model.resolve(css_href), emit_css(config.active_class))

    _, new_opf = update_package(pkg, bundle, model.entries[model.opf_path])
    model.put(model.opf_path, new_opf)

    write_container(model, config.output_epub)
    return result


def _unique_href(href: str, taken: set[str]) -> str:
    if href not in taken:
        taken.add(href)
        return href
    stem, ext = posixpath.splitext(href)
    n = 2
    while f"{stem}_{n}{ext}" in taken:
        n += 1
    final = f"{stem}_{n}{ext}"
    taken.add(final)
    return final


def _unique_id(base: str, taken: set[str]) -> str:
    if base not in taken:
        taken.add(base)
        return base
    n = 2
    while f"{base}_{n}" in taken:
        n += 1
    final = f"{base}_{n}"
    taken.add(final)
    return final


def run_drift(
    reference_path: str,
    candidate_path: str,
    csv_path: str | None = None,
    json_path: str | None = None,
    log=None,
) -> DriftReport:
    """Compare two Media-Overlay EPUBs; print and optionally export stats."""
    log = log or (lambda msg: print(msg))
    reference = extract_sync_map(reference_path)
    candidate = extract_sync_map(candidate_path)
    samples, report = evaluate(reference, candidate)
    export_report(report, samples, csv_path=csv_path, json_path=json_path)
    log("n_matched  match%  min      p10      mean     median   p90      max      acceptable%")
    log(f"{report.n_matched:<10d} {report.match_rate * 100:<7.1f} "
        f"{report.min:<8.3f} {report.p10:<8.3f} {report.mean:<8.3f} "
        f"{report.median:<8.3f} {report.p90:<8.3f} {report.max:<8.3f} "
        f"{report.pct_acceptable * 100:.1f}")
    return report
