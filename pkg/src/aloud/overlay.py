"""Media Overlay construction: clip timing, SMIL emission, CSS, OPF update.

Clip intervals are gapless by construction: each sentence's end time is the
next sentence's start time, and the formatted clock strings are compared
directly so millisecond truncation can never open a gap in the serialized
document.  The OPF is edited surgically — insertions into the original
bytes — so publisher metadata and formatting survive untouched.
"""

from __future__ import annotations

import posixpath
from dataclasses import dataclass

from . import xmlscan
from .container import ManifestItem, PackageDoc
from .errors import EmptyChapter, MalformedOpf, MissingChapterItem

DEFAULT_ACTIVE_CLASS = "-epub-media-overlay-active"

_SMIL_MEDIA_TYPE = "application/smil+xml"


@dataclass(frozen=True)
class ClipInterval:
    anchor_id: str
    t_start: float
    t_end: float

    def __post_init__(self) -> None:
        if not 0 <= self.t_start < self.t_end:
            raise ValueError(
                f"clip for {self.anchor_id} must have 0 <= start < end, "
                f"got [{self.t_start}, {self.t_end})"
            )


@dataclass
class SmilDoc:
    textref: str
    audio_src: str
    pars: list[ClipInterval]
    total_duration: float


@dataclass
class ChapterOverlay:
    """Placement of one chapter's overlay inside the container."""

    item_id: str          # manifest id of the chapter XHTML
    smil_id: str
    audio_id: str
    smil_href: str        # relative to the OPF directory
    audio_href: str
    audio_media_type: str
    smil: SmilDoc


@dataclass
class OverlayBundle:
    chapters: list[ChapterOverlay]
    css_href: str
    active_class: str = DEFAULT_ACTIVE_CLASS

    @property
    def total_duration(self) -> float:
        return sum(ch.smil.total_duration for ch in self.chapters)


def compute_intervals(
    unit_durations: list[float],
    delta_s: float,
    anchors: list[list[str]],
) -> list[ClipInterval]:
    """Gapless intervals: each clip ends where the next begins.

    A unit's start is the sum of every earlier duration plus its silence
    gap; its end is the next unit's start, and the final unit ends after
    its own duration and gap.  A unit covering several merged sentences
    yields one interval under its first anchor.
    """
    if len(unit_durations) != len(anchors):
        raise ValueError("durations and anchors must pair up")
    if not unit_durations:
        raise EmptyChapter("chapter produced no synthesis units")

    starts: list[float] = []
    t = 0.0
    for dur in unit_durations:
        starts.append(t)
        t += dur + delta_s
    ends = starts[1:] + [t]
    return [
        ClipInterval(anchor_list[0], s, e)
        for anchor_list, s, e in zip(anchors, starts, ends)
    ]


def format_clock(seconds: float) -> str:
    """Clock value "H:MM:SS.mmm", milliseconds truncated, hours unpadded.

    Times here always lie on an audio sample grid, where any value is
    either exactly on a millisecond or at least a microsecond away from
    one; nudging by half that before truncating undoes float
    representation error without ever reaching the next millisecond.
    """
    if seconds < 0:
        raise ValueError("clock values are non-negative")
    ms_total = int(seconds * 1000 + 1e-3)
    hours, rest = divmod(ms_total, 3_600_000)
    minutes, rest = divmod(rest, 60_000)
    secs, ms = divmod(rest, 1000)
    return f"{hours}:{minutes:02d}:{secs:02d}.{ms:03d}"


def parse_clock(value: str) -> float:
    """Inverse of :func:`format_clock`; accepts SS, MM:SS, and H:MM:SS forms."""
    parts = value.strip().split(":")
    if not 1 <= len(parts) <= 3:
        raise ValueError(f"bad clock value {value!r}")
    seconds = float(parts[-1])
    if len(parts) >= 2:
        seconds += 60 * int(parts[-2])
    if len(parts) == 3:
        seconds += 3600 * int(parts[-3])
    return seconds


def emit_smil(doc: SmilDoc) -> bytes:
    """Serialize one chapter's overlay as SMIL 3.0.

    Refuses any par list whose formatted clip boundaries are not exactly
    contiguous — a gap or overlap here would desynchronize highlighting,
    so it is a hard error rather than something to quietly absorb.
    """
    if not doc.pars:
        raise EmptyChapter("cannot emit an overlay with no pars")
    begins = [format_clock(p.t_start) for p in doc.pars]
    ends = [format_clock(p.t_end) for p in doc.pars]
    if begins[0] != "0:00:00.000":
        raise ValueError(f"first clip must start at zero, got {begins[0]}")
    for k in range(len(doc.pars) - 1):
        if ends[k] != begins[k + 1]:
            raise ValueError(
                f"clips {k} and {k + 1} are not contiguous: "
                f"{ends[k]} != {begins[k + 1]}"
            )

    lines = [
        '<?xml version="1.0" encoding="utf-8"?>',
        '<smil xmlns="http://www.w3.org/ns/SMIL"',
        '      xmlns:epub="http://www.idpf.org/2007/ops" version="3.0">',
        "  <body>",
        f'    <seq id="seq1" epub:textref="{doc.textref}">',
    ]
    for par, begin, end in zip(doc.pars, begins, ends):
        lines += [
            f'      <par id="par_{par.anchor_id}">',
            f'        <text src="{doc.textref}#{par.anchor_id}"/>',
            f'        <audio src="{doc.audio_src}" clipBegin="{begin}" clipEnd="{end}"/>',
            "      </par>",
        ]
    lines += ["    </seq>", "  </body>", "</smil>", ""]
    return "\n".join(lines).encode("utf-8")


def emit_css(active_class: str = DEFAULT_ACTIVE_CLASS) -> bytes:
    """Highlight style for the active sentence, with a dark-mode variant."""
    return (
        f".{active_class} {{\n"
        f"  background-color: #ffe680;\n"
        f"}}\n"
        f"\n"
        f"@media (prefers-color-scheme: dark) {{\n"
        f"  .{active_class} {{\n"
        f"    background-color: #5a4a78;\n"
        f"  }}\n"
        f"}}\n"
    ).encode("utf-8")


def inject_css_link(xhtml_bytes: bytes, css_href: str) -> bytes:
    """Add a stylesheet link as the last child of the document head."""
    doc = xhtml_bytes.decode("utf-8")
    tokens = xmlscan.tokenize(doc)
    for tok in tokens:
        if tok.kind == xmlscan.END and xmlscan.local_name(tok.name) == "head":
            link = f'<link rel="stylesheet" type="text/css" href="{css_href}"/>'
            return (doc[:tok.start] + link + doc[tok.start:]).encode("utf-8")
    return xhtml_bytes


def relative_href(from_href: str, to_href: str) -> str:
    """Path from one OPF-relative resource to another (for SMIL/XHTML refs)."""
    start = posixpath.dirname(from_href) or "."
    return posixpath.relpath(to_href, start)


# -- OPF update ------------------------------------------------------------

def update_package(
    pkg: PackageDoc,
    bundle: OverlayBundle,
    opf_bytes: bytes,
) -> tuple[PackageDoc, bytes]:
    """Bind overlays into the package document.

    Adds SMIL/audio/CSS manifest items, points each narrated chapter item
    at its SMIL via ``media-overlay``, and records per-chapter and total
    ``media:duration`` plus ``media:active-class`` metadata.  Returns the
    updated model and the surgically edited OPF bytes.
    """
    doc = opf_bytes.decode("utf-8")
    tokens = xmlscan.tokenize(doc)

    known_ids = {item.id for item in pkg.manifest}
    for ch in bundle.chapters:
        if ch.item_id not in known_ids:
            raise MissingChapterItem(f"manifest has no item {ch.item_id!r}")

    # Insertions are gathered as (position, text) and applied in one pass.
    inserts: list[tuple[int, str]] = []
    # In-place attribute edits on existing chapter item tags.
    overlay_for = {ch.item_id: ch.smil_id for ch in bundle.chapters}
    replacements: list[tuple[int, int, str]] = []

    manifest_close = _find_close(doc, tokens, "manifest")
    metadata_close = _find_close(doc, tokens, "metadata")
    if manifest_close is None or metadata_close is None:
        raise MalformedOpf("package lacks metadata or manifest")

    for tok in tokens:
        if tok.kind not in (xmlscan.START, xmlscan.EMPTY):
            continue
        if xmlscan.local_name(tok.name) != "item":
            continue
        attrs = xmlscan.parse_attrs(doc, tok)
        item_id = attrs.get("id")
        if item_id in overlay_for:
            replacements.append(_set_media_overlay(doc, tok, overlay_for[item_id]))

    item_lines: list[str] = []
    meta_lines: list[str] = []
    css_id = _unique_id("css_overlay", known_ids)
    for ch in bundle.chapters:
        item_lines.append(
            f'<item id="{ch.smil_id}" href="{ch.smil_href}" '
            f'media-type="{_SMIL_MEDIA_TYPE}"/>'
        )
        item_lines.append(
            f'<item id="{ch.audio_id}" href="{ch.audio_href}" '
            f'media-type="{ch.audio_media_type}"/>'
        )
        meta_lines.append(
            f'<meta property="media:duration" refines="#{ch.smil_id}">'
            f"{format_clock(ch.smil.total_duration)}</meta>"
        )
    item_lines.append(
        f'<item id="{css_id}" href="{bundle.css_href}" media-type="text/css"/>'
    )
    meta_lines.append(
        f'<meta property="media:duration">'
        f"{format_clock(bundle.total_duration)}</meta>"
    )
    meta_lines.append(
        f'<meta property="media:active-class">{bundle.active_class}</meta>'
    )

    man_pos, man_indent = _indent_before(doc, manifest_close)
    meta_pos, meta_indent = _indent_before(doc, metadata_close)
    inserts.append((man_pos,
                    "".join(f"{man_indent}  {line}\n" for line in item_lines)))
    inserts.append((meta_pos,
                    "".join(f"{meta_indent}  {line}\n" for line in meta_lines)))

    version_edit = _bump_version(doc, tokens)
    if version_edit is not None:
        replacements.append(version_edit)

    edits = sorted(
        [(pos, pos, text) for pos, text in inserts] + replacements,
        key=lambda e: e[0],
    )
    out: list[str] = []
    cursor = 0
    for start, end, text in edits:
        out.append(doc[cursor:start])
        out.append(text)
        cursor = end
    out.append(doc[cursor:])
    new_bytes = "".join(out).encode("utf-8")

    new_pkg = PackageDoc(
        metadata=list(pkg.metadata),
        manifest=[
            ManifestItem(i.id, i.href, i.media_type, i.properties,
                         overlay_for.get(i.id, i.media_overlay))
            for i in pkg.manifest
        ],
        spine=list(pkg.spine),
    )
    for ch in bundle.chapters:
        new_pkg.manifest.append(ManifestItem(ch.smil_id, ch.smil_href, _SMIL_MEDIA_TYPE))
        new_pkg.manifest.append(
            ManifestItem(ch.audio_id, ch.audio_href, ch.audio_media_type))
        new_pkg.metadata.append(
            ("media:duration", f"#{ch.smil_id}", format_clock(ch.smil.total_duration)))
    new_pkg.manifest.append(ManifestItem(css_id, bundle.css_href, "text/css"))
    new_pkg.metadata.append(("media:duration", None, format_clock(bundle.total_duration)))
    new_pkg.metadata.append(("media:active-class", None, bundle.active_class))
    return new_pkg, new_bytes


def _indent_before(doc: str, pos: int) -> tuple[int, str]:
    """Back up over the spaces/tabs before a close tag; reuse them as indent."""
    i = pos
    while i > 0 and doc[i - 1] in " \t":
        i -= 1
    return i, doc[i:pos]


def _find_close(doc: str, tokens: list[xmlscan.Token], name: str) -> int | None:
    for tok in tokens:
        if tok.kind == xmlscan.END and xmlscan.local_name(tok.name) == name:
            return tok.start
    return None


def _set_media_overlay(doc, tok, smil_id: str) -> tuple[int, int, str]:
    """Edit one <item> tag: add or replace its media-overlay attribute."""
    raw = tok.doc_slice(doc)
    existing = xmlscan.attr_value_span(raw, "media-overlay")
    if existing is not None:
        v0, v1 = existing
        return (tok.start + v0, tok.start + v1, smil_id)
    tail = 2 if raw.endswith("/>") else 1
    pos = tok.end - tail
    return (pos, pos, f' media-overlay="{smil_id}"')


def _bump_version(doc: str, tokens) -> tuple[int, int, str] | None:
    for tok in tokens:
        if (tok.kind in (xmlscan.START, xmlscan.EMPTY)
                and xmlscan.local_name(tok.name) == "package"):
            raw = tok.doc_slice(doc)
            span = xmlscan.attr_value_span(raw, "version")
            if span is None:
                tail = 2 if raw.endswith("/>") else 1
                pos = tok.end - tail
                return (pos, pos, ' version="3.0"')
            v0, v1 = span
            try:
                major = float(raw[v0:v1])
            except ValueError:
                major = 0.0
            if major < 3.0:
                return (tok.start + v0, tok.start + v1, "3.0")
            return None
    raise MalformedOpf("no <package> element")


def _unique_id(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    n = 2
    while f"{base}_{n}" in taken:
        n += 1
    return f"{base}_{n}"
