"""Compile EPUBs into EPUB 3 audiobooks with synchronized highlighting.

The pipeline injects sentence-level anchors into each chapter, synthesizes
narration through a pluggable TTS engine, derives exact Media Overlay
timestamps from the synthesized sample counts, and repacks the container
without disturbing any entry it does not deliberately rewrite.  A drift
evaluator compares the synchronization maps of two such books.
"""

from .audio import StitchedChapter, StitchParams, Waveform, fade_out, stitch
from .container import (
    ContainerModel,
    ManifestItem,
    PackageDoc,
    open_container,
    parse_package,
    write_container,
)
from .drift import (
    DriftReport,
    DriftSample,
    SyncRecord,
    evaluate,
    extract_sync_map,
    match_sentences,
    summarize,
)
from .errors import AloudError
from .overlay import (
    ChapterOverlay,
    ClipInterval,
    OverlayBundle,
    SmilDoc,
    compute_intervals,
    emit_css,
    emit_smil,
    format_clock,
    parse_clock,
    update_package,
)
from .pipeline import ConvertResult, RunConfig, run_convert, run_drift
from .segmenter import (
    BlockRef,
    SentenceSeg,
    extract_blocks,
    inject_anchors,
    make_anchor_id,
    normalize_text,
    split_sentences,
)
from .synth import (
    EngineLimits,
    MockEngine,
    SubprocessEngine,
    SynthRequest,
    SynthUnit,
    plan_units,
    split_text,
    synthesize_unit,
)

__version__ = "0.1.0"

__all__ = [
    "AloudError",
    "BlockRef",
    "ChapterOverlay",
    "ClipInterval",
    "ContainerModel",
    "ConvertResult",
    "DriftReport",
    "DriftSample",
    "EngineLimits",
    "ManifestItem",
    "MockEngine",
    "OverlayBundle",
    "PackageDoc",
    "RunConfig",
    "SentenceSeg",
    "SmilDoc",
    "StitchParams",
    "StitchedChapter",
    "SubprocessEngine",
    "SynthRequest",
    "SynthUnit",
    "SyncRecord",
    "Waveform",
    "compute_intervals",
    "emit_css",
    "emit_smil",
    "evaluate",
    "extract_blocks",
    "extract_sync_map",
    "fade_out",
    "format_clock",
    "inject_anchors",
    "make_anchor_id",
    "match_sentences",
    "normalize_text",
    "open_container",
    "parse_clock",
    "parse_package",
    "plan_units",
    "run_convert",
    "run_drift",
    "split_sentences",
    "split_text",
    "stitch",
    "summarize",
    "synthesize_unit",
    "update_package",
    "write_container",
]
