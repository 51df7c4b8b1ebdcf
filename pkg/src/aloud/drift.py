"""Synchronization-drift evaluation between two Media-Overlay EPUBs.

Sentences are paired by equal normalized text within the same spine
position, then the difference of their highlight start times is summarized.
Drift is reference start minus candidate start, so a negative value means
the candidate highlights later than the reference (the highlight lags the
audio when the reference is ground truth).
"""

from __future__ import annotations

import csv
import json
import posixpath
from dataclasses import asdict, dataclass

import numpy as np

from . import xmlscan
from .container import open_container, parse_package
from .errors import BrokenTextRef, EmptyInput, IoFailure, MalformedOpf, NoOverlays
from .overlay import parse_clock
from .segmenter import normalize_text

ACCEPT_LOW_S = -0.050
ACCEPT_HIGH_S = 0.150


@dataclass(frozen=True)
class SyncRecord:
    chapter_index: int  # spine position of the chapter document
    sentence_text: str  # normalized
    t_start: float


@dataclass(frozen=True)
class DriftSample:
    sentence_text: str
    chapter_index: int
    drift_s: float
    acceptable: bool


@dataclass
class DriftReport:
    n_matched: int
    match_rate: float
    min: float
    p10: float
    mean: float
    median: float
    p90: float
    max: float
    pct_acceptable: float


def extract_sync_map(epub_path) -> list[SyncRecord]:
    """Read every par of every overlay: (chapter, sentence text, start time).

    Records follow spine order, then par order within each SMIL document.
    Each par's text reference is resolved to its span in the chapter
    document and the span's text content is normalized for matching.
    """
    model = open_container(epub_path)
    pkg = parse_package(model)

    narrated = []
    for spine_i, idref in enumerate(pkg.spine):
        item = pkg.item_by_id(idref)
        if item is not None and item.media_overlay:
            narrated.append((spine_i, item))
    if not narrated:
        raise NoOverlays(f"{epub_path}: no spine item carries a media-overlay")

    xhtml_cache: dict[str, tuple[str, list, list]] = {}

    def doc_forest(archive_path: str):
        if archive_path not in xhtml_cache:
            data = model.entries.get(archive_path)
            if data is None:
                raise BrokenTextRef(f"text document {archive_path!r} is not in the container")
            doc = data.decode("utf-8")
            tokens = xmlscan.tokenize(doc)
            xhtml_cache[archive_path] = (doc, tokens, xmlscan.build_tree(doc, tokens))
        return xhtml_cache[archive_path]

    records: list[SyncRecord] = []
    for spine_i, item in narrated:
        smil_item = pkg.item_by_id(item.media_overlay)
        if smil_item is None:
            raise MalformedOpf(f"media-overlay {item.media_overlay!r} is not in the manifest")
        smil_path = model.resolve(smil_item.href)
        smil_bytes = model.entries.get(smil_path)
        if smil_bytes is None:
            raise MalformedOpf(f"overlay entry {smil_path!r} is not in the container")

        smil_doc = smil_bytes.decode("utf-8")
        smil_tokens = xmlscan.tokenize(smil_doc)
        forest = xmlscan.build_tree(smil_doc, smil_tokens)
        for par in _pars_in_order(forest):
            par_id = par.attrs.get("id", "<unnamed par>")
            src, clip_begin = _par_refs(par)
            if src is None or "#" not in src:
                raise BrokenTextRef(f"{par_id}: par lacks a text src with a fragment")
            rel_path, frag = src.split("#", 1)
            target = model.resolve(_join_relative(smil_item.href, rel_path))
            doc, tokens, tree = doc_forest(target)
            elem = xmlscan.find_element_by_id(doc, tokens, tree, frag)
            if elem is None:
                raise BrokenTextRef(f"{par_id}: anchor {frag!r} not found in {target!r}")
            if clip_begin is None:
                raise BrokenTextRef(f"{par_id}: audio element lacks clipBegin")
            records.append(SyncRecord(
                chapter_index=spine_i,
                sentence_text=normalize_text(xmlscan.element_text(doc, tokens, elem)),
                t_start=parse_clock(clip_begin),
            ))
    return records


def _pars_in_order(nodes) -> list[xmlscan.ElementNode]:
    found: list[xmlscan.ElementNode] = []

    def walk(children) -> None:
        for node in children:
            if isinstance(node, xmlscan.ElementNode):
                if xmlscan.local_name(node.name) == "par":
                    found.append(node)
                else:
                    walk(node.children)

    walk(nodes)
    return found


def _par_refs(par: xmlscan.ElementNode) -> tuple[str | None, str | None]:
    src = clip_begin = None
    for child in par.children:
        if not isinstance(child, xmlscan.ElementNode):
            continue
        name = xmlscan.local_name(child.name)
        if name == "text" and src is None:
            src = child.attrs.get("src")
        elif name == "audio" and clip_begin is None:
            clip_begin = child.attrs.get("clipBegin")
    return src, clip_begin


def _join_relative(base_href: str, rel: str) -> str:
    base_dir = posixpath.dirname(base_href)
    return posixpath.join(base_dir, rel) if base_dir else rel


def match_sentences(
    reference: list[SyncRecord],
    candidate: list[SyncRecord],
) -> list[DriftSample]:
    """Pair identical sentences within each chapter, in reading order.

    The pairing is the longest in-order matching of equal texts (so its
    size does not depend on which map is called the reference); repeated
    sentence text pairs positionally, first with first.  Unmatched records
    on either side are dropped.
    """
    by_chapter: dict[int, tuple[list[SyncRecord], list[SyncRecord]]] = {}
    for rec in reference:
        by_chapter.setdefault(rec.chapter_index, ([], []))[0].append(rec)
    for rec in candidate:
        by_chapter.setdefault(rec.chapter_index, ([], []))[1].append(rec)

    samples: list[DriftSample] = []
    for chapter in sorted(by_chapter):
        refs, cands = by_chapter[chapter]
        for ri, ci in _in_order_pairs([r.sentence_text for r in refs],
                                      [c.sentence_text for c in cands]):
            drift = refs[ri].t_start - cands[ci].t_start
            samples.append(DriftSample(
                sentence_text=refs[ri].sentence_text,
                chapter_index=chapter,
                drift_s=drift,
                acceptable=ACCEPT_LOW_S <= drift <= ACCEPT_HIGH_S,
            ))
    return samples


def _in_order_pairs(a: list[str], b: list[str]) -> list[tuple[int, int]]:
    """Longest common subsequence pairing, first-to-first on ties."""
    n, m = len(a), len(b)
    # dp[i][j] = best pairing size for a[i:], b[j:]
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, nxt = dp[i], dp[i + 1]
        for j in range(m - 1, -1, -1):
            best = nxt[j] if nxt[j] >= row[j + 1] else row[j + 1]
            if a[i] == b[j] and nxt[j + 1] + 1 > best:
                best = nxt[j + 1] + 1
            row[j] = best
    pairs: list[tuple[int, int]] = []
    i = j = 0
    while i < n and j < m:
        if a[i] == b[j] and dp[i][j] == dp[i + 1][j + 1] + 1:
            pairs.append((i, j))
            i += 1
            j += 1
        elif dp[i + 1][j] >= dp[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def summarize(samples: list[DriftSample], n_reference: int | None = None) -> DriftReport:
    """Distribution statistics over drift values.

    Quantiles use linear interpolation between order statistics.  When the
    reference record count is given, the match rate is matched over that
    count; otherwise full coverage is assumed.
    """
    if not samples:
        raise EmptyInput("no matched sentences to summarize")
    xs = [s.drift_s for s in samples]
    n = len(xs)
    p10, median, p90 = (float(q) for q in np.quantile(xs, [0.10, 0.50, 0.90]))
    return DriftReport(
        n_matched=n,
        match_rate=(n / n_reference) if n_reference else 1.0,
        min=min(xs),
        p10=p10,
        mean=sum(xs) / n,
        median=median,
        p90=p90,
        max=max(xs),
        pct_acceptable=sum(1 for s in samples if s.acceptable) / n,
    )


def evaluate(
    reference: list[SyncRecord],
    candidate: list[SyncRecord],
) -> tuple[list[DriftSample], DriftReport]:
    samples = match_sentences(reference, candidate)
    return samples, summarize(samples, n_reference=len(reference))


def export_report(
    report: DriftReport,
    samples: list[DriftSample],
    csv_path=None,
    json_path=None,
) -> None:
    """Write per-sentence CSV and/or the summary JSON."""
    try:
        if csv_path is not None:
            with open(csv_path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["chapter", "text", "drift_s", "acceptable"])
                for s in samples:
                    writer.writerow([s.chapter_index, s.sentence_text,
                                     f"{s.drift_s:.6f}", s.acceptable])
        if json_path is not None:
            with open(json_path, "w", encoding="utf-8") as fh:
                json.dump(asdict(report), fh, indent=2)
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write report: {exc}") from exc
