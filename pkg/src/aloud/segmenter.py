"""Sentence segmentation and anchor injection for chapter documents.

Each narrative block of a chapter is segmented into sentences and every
sentence is wrapped in ``<span id="...">`` so a Media Overlay can target it.
The rewrite is surgical: output bytes are the input bytes with span tags
inserted at computed offsets, so markup, attributes, comments, and entity
references all survive untouched.
"""

from __future__ import annotations

import re
import unicodedata
from bisect import bisect_right
from dataclasses import dataclass

from . import xmlscan
from .xmlscan import ElementNode, OtherNode, TextishNode, Token

BLOCK_TAGS = {
    "p", "h1", "h2", "h3", "h4", "h5", "h6",
    "li", "blockquote", "figcaption", "td",
}

# Subtrees whose text is never narrated.  The same set guards both whole
# regions of the document (head, script) and inline islands within a block
# (code fragments, page-number markers).
_EXCLUDED_TAGS = {"head", "script", "style", "audio", "video", "template",
                  "pre", "code"}

DEFAULT_ABBREVIATIONS = ("mr", "mrs", "dr", "st", "vs", "e.g", "i.e", "etc")

_TERMINATORS = ".!?…"
_CLOSERS = "\"'”’»)]"
_OPENERS = "\"'“‘«(["

_WS_RUN = re.compile(r"\s+")


def _is_excluded(elem: ElementNode) -> bool:
    tag = xmlscan.local_name(elem.name)
    if tag in _EXCLUDED_TAGS:
        return True
    epub_type = elem.attrs.get("epub:type", "")
    if "pagebreak" in epub_type.split():
        return True
    if tag == "nav" and "toc" in epub_type.split():
        return True
    return False


# -- text normalization ----------------------------------------------------

_PUNCT_MAP = str.maketrans({
    "‘": "'", "’": "'", "‚": "'", "‛": "'",
    "“": '"', "”": '"', "„": '"', "‟": '"',
    "–": "-", "—": "-", "―": "-",
    "…": "...",
})


def normalize_text(raw: str) -> str:
    """Canonical synthesis form: NFC, plain ASCII punctuation, tight spacing.

    Dashes keep whatever spacing surrounded them in the source; only the dash
    character itself is replaced.
    """
    s = unicodedata.normalize("NFC", raw)
    s = s.translate(_PUNCT_MAP)
    return _WS_RUN.sub(" ", s).strip()


# -- sentence boundaries ---------------------------------------------------

_ABBREV_TOKEN = re.compile(r"[A-Za-z]+(?:\.[A-Za-z]+)*$")


def find_sentence_spans(
    text: str,
    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS,
) -> list[tuple[int, int]]:
    """Half-open (start, end) spans of sentences, trimmed of whitespace.

    A boundary sits after a terminator (plus any closing quotes or brackets)
    that is followed by whitespace and then an uppercase letter or opening
    quote.  Boundaries after listed abbreviations are suppressed; a period
    inside a decimal number never qualifies because it has no trailing
    whitespace.
    """
    abbrevs = {a.lower() for a in abbreviations}
    n = len(text)
    first = 0
    while first < n and text[first].isspace():
        first += 1
    if first == n:
        return []
    last = n
    while text[last - 1].isspace():
        last -= 1

    starts = [first]
    ends: list[int] = []
    i = first
    while i < last:
        ch = text[i]
        if ch not in _TERMINATORS:
            i += 1
            continue
        j = i + 1
        while j < last and text[j] in _CLOSERS:
            j += 1
        ws_start = j
        while j < last and text[j].isspace():
            j += 1
        if j == ws_start or j >= last:
            i += 1
            continue
        nxt = text[j]
        if not (nxt.isupper() or nxt in _OPENERS):
            i = j
            continue
        if ch == "." and _is_abbreviation(text, i, abbrevs):
            i = ws_start
            continue
        ends.append(ws_start)
        starts.append(j)
        i = j
    ends.append(last)
    return list(zip(starts, ends))


def _is_abbreviation(text: str, dot: int, abbrevs: set[str]) -> bool:
    window = text[max(0, dot - 16):dot]
    m = _ABBREV_TOKEN.search(window)
    return bool(m) and m.group().lower() in abbrevs


def split_sentences(
    text: str,
    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS,
) -> list[str]:
    """Sentences of a normalized text, in order."""
    return [text[a:b] for a, b in find_sentence_spans(text, abbreviations)]


# -- anchors ---------------------------------------------------------------

def make_anchor_id(chapter_index: int, seg_index: int) -> str:
    """Publication-unique span id for one sentence."""
    if chapter_index < 0 or seg_index < 0:
        raise ValueError("indices must be non-negative")
    return f"c{chapter_index + 1:02d}_s{seg_index + 1:04d}"


# -- domain records --------------------------------------------------------

@dataclass(frozen=True, slots=True)
class BlockRef:
    chapter_index: int
    block_index: int
    element_name: str


@dataclass(frozen=True, slots=True)
class SentenceSeg:
    anchor_id: str
    display_text: str
    tts_text: str
    block: BlockRef
    seg_index: int


# -- block layout ----------------------------------------------------------

@dataclass(slots=True)
class _Run:
    d0: int                  # start in decoded block text
    d1: int
    rel_starts: list[int]    # decoded-index -> offset within the raw token
    base: int                # raw offset of the token in the document
    excluded: bool
    top_i: int               # index of the enclosing top-level child
    splittable: bool         # True when a span tag may be inserted mid-run


@dataclass(slots=True)
class _Layout:
    text: str
    excluded: bytearray
    runs: list[_Run]
    run_d0s: list[int]
    top_spans: list[tuple[int, int, int, int]]  # (d0, d1, raw_s, raw_e)

    def run_at(self, d: int) -> _Run:
        return self.runs[bisect_right(self.run_d0s, d) - 1]

    def raw_of(self, d: int) -> int:
        run = self.run_at(d)
        return run.base + run.rel_starts[d - run.d0]

    def raw_end_of(self, d: int) -> int:
        """Raw offset just past decoded character ``d``."""
        run = self.run_at(d)
        return run.base + run.rel_starts[d - run.d0 + 1]


def _node_raw_span(tokens: list[Token], node) -> tuple[int, int]:
    if isinstance(node, ElementNode):
        return tokens[node.open_i].start, tokens[node.close_i].end
    return tokens[node.token_i].start, tokens[node.token_i].end


def _flatten_block(doc: str, tokens: list[Token], block: ElementNode) -> _Layout:
    parts: list[str] = []
    excl = bytearray()
    runs: list[_Run] = []
    top_spans: list[tuple[int, int, int, int]] = []
    d = 0

    def emit_text(node: TextishNode, excluded: bool, top_i: int,
                  at_top: bool) -> None:
        nonlocal d
        tok = tokens[node.token_i]
        raw = tok.doc_slice(doc)
        if node.is_cdata:
            content = xmlscan.cdata_content(raw)
            rel = list(range(9, 9 + len(content) + 1))
        else:
            content, rel = xmlscan.decode_entities(raw)
        if not content:
            return
        runs.append(_Run(d, d + len(content), rel, tok.start, excluded,
                         top_i, at_top and not node.is_cdata))
        parts.append(content)
        excl.extend((b"\x01" if excluded else b"\x00") * len(content))
        d += len(content)

    def walk(node, excluded: bool, top_i: int, at_top: bool) -> None:
        if isinstance(node, TextishNode):
            emit_text(node, excluded, top_i, at_top)
        elif isinstance(node, ElementNode):
            child_excluded = excluded or _is_excluded(node)
            for child in node.children:
                walk(child, child_excluded, top_i, False)

    for top_i, child in enumerate(block.children):
        d0 = d
        raw_s, raw_e = _node_raw_span(tokens, child)
        walk(child, False, top_i, True)
        top_spans.append((d0, d, raw_s, raw_e))

    layout = _Layout("".join(parts), excl, runs, [r.d0 for r in runs], top_spans)
    return layout


# -- cut placement ---------------------------------------------------------
#
# Sentence boundaries computed on decoded text must become insertion points
# in the raw stream.  A cut may split a text node; a cut that would fall
# strictly inside an inline element slides forward to the element's end, and
# if it reaches the next cut the two sentences merge into one sync unit.

def _resolve_first(layout: _Layout, p: int) -> tuple[int, int]:
    run = layout.run_at(p)
    if run.splittable:
        return p, layout.raw_of(p)
    d0, _, raw_s, _ = layout.top_spans[run.top_i]
    return d0, raw_s


def _resolve_last(layout: _Layout, p: int) -> tuple[int, int]:
    run = layout.run_at(p - 1)
    if run.splittable:
        return p, layout.raw_end_of(p - 1)
    _, d1, _, raw_e = layout.top_spans[run.top_i]
    return d1, raw_e


def _resolve_interior(layout: _Layout, p: int, limit: int) -> tuple[int, int] | None:
    while True:
        run = layout.run_at(p)
        if run.splittable:
            return p, layout.raw_of(p)
        d0, d1, raw_s, _ = layout.top_spans[run.top_i]
        if p == d0:
            return d0, raw_s
        q = d1
        while q < limit:
            r2 = layout.run_at(q)
            if r2.splittable and layout.text[q].isspace():
                q += 1
            else:
                break
        if q >= limit:
            return None
        p = q


# -- block discovery -------------------------------------------------------

def _has_block_descendant(elem: ElementNode) -> bool:
    for child in elem.children:
        if isinstance(child, ElementNode):
            if xmlscan.local_name(child.name) in BLOCK_TAGS or _has_block_descendant(child):
                return True
    return False


def _has_narratable_text(doc: str, tokens: list[Token], elem: ElementNode) -> bool:
    def walk(node) -> bool:
        if isinstance(node, TextishNode):
            tok = tokens[node.token_i]
            raw = tok.doc_slice(doc)
            text = (xmlscan.cdata_content(raw) if node.is_cdata
                    else xmlscan.decode_entities(raw)[0])
            return bool(text.strip())
        if isinstance(node, ElementNode) and not _is_excluded(node):
            return any(walk(c) for c in node.children)
        return False
    return any(walk(c) for c in elem.children)


def _narrative_blocks(doc: str, tokens: list[Token], forest: list) -> list[ElementNode]:
    blocks: list[ElementNode] = []

    def walk(nodes) -> None:
        for node in nodes:
            if not isinstance(node, ElementNode) or _is_excluded(node):
                continue
            if (xmlscan.local_name(node.name) in BLOCK_TAGS
                    and not _has_block_descendant(node)
                    and _has_narratable_text(doc, tokens, node)):
                blocks.append(node)
            else:
                walk(node.children)

    walk(forest)
    return blocks


# -- public operations -----------------------------------------------------

def extract_blocks(xhtml_bytes: bytes, chapter_index: int = 0) -> list[BlockRef]:
    """Narrative blocks of a chapter in document order.

    Only leaf block elements are returned: a block containing another block
    element defers to its descendants.  Regions that are never narrated
    (head, script, style, audio, video, code samples, the TOC nav) are
    skipped, as are blocks whose text is pure whitespace.
    """
    doc = xhtml_bytes.decode("utf-8")
    tokens = xmlscan.tokenize(doc)
    forest = xmlscan.build_tree(doc, tokens)
    return [
        BlockRef(chapter_index, i, xmlscan.local_name(elem.name))
        for i, elem in enumerate(_narrative_blocks(doc, tokens, forest))
    ]


def inject_anchors(
    xhtml_bytes: bytes,
    chapter_index: int,
    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS,
) -> tuple[bytes, list[SentenceSeg]]:
    """Wrap every sentence of every narrative block in an identified span.

    Returns the rewritten document and the sentence records in reading
    order.  All output bytes outside the inserted ``<span>`` tags are
    byte-identical to the input.
    """
    doc = xhtml_bytes.decode("utf-8")
    tokens = xmlscan.tokenize(doc)
    forest = xmlscan.build_tree(doc, tokens)
    blocks = _narrative_blocks(doc, tokens, forest)

    segs: list[SentenceSeg] = []
    replacements: list[tuple[int, int, str]] = []
    seg_counter = 0

    for block_i, elem in enumerate(blocks):
        layout = _flatten_block(doc, tokens, elem)
        # Mask non-narrated islands so they cannot influence boundaries.
        masked = "".join(
            " " if layout.excluded[i] else ch
            for i, ch in enumerate(layout.text)
        )
        spans = find_sentence_spans(masked, abbreviations)
        if not spans:
            continue

        first = _resolve_first(layout, spans[0][0])
        last = _resolve_last(layout, spans[-1][1])
        cuts = [first]
        for start, _ in spans[1:]:
            resolved = _resolve_interior(layout, start, last[0])
            if resolved is not None and resolved[0] > cuts[-1][0]:
                cuts.append(resolved)
        cuts.append(last)

        block_ref = BlockRef(chapter_index, block_i, xmlscan.local_name(elem.name))
        content_start = tokens[elem.open_i].end
        content_end = tokens[elem.close_i].start
        pieces: list[str] = []
        pos = content_start
        for (d_a, raw_a), (d_b, raw_b) in zip(cuts, cuts[1:]):
            display = layout.text[d_a:d_b]
            tts = normalize_text("".join(
                ch for i, ch in enumerate(display)
                if not layout.excluded[d_a + i]
            ))
            if not tts:
                continue
            anchor = make_anchor_id(chapter_index, seg_counter)
            segs.append(SentenceSeg(anchor, display, tts, block_ref, seg_counter))
            seg_counter += 1
            pieces.append(doc[pos:raw_a])
            pieces.append(f'<span id="{anchor}">')
            pieces.append(doc[raw_a:raw_b])
            pieces.append("</span>")
            pos = raw_b
        if not pieces:
            continue
        pieces.append(doc[pos:content_end])
        replacements.append((content_start, content_end, "".join(pieces)))

    if not replacements:
        return xhtml_bytes, segs

    out: list[str] = []
    pos = 0
    for start, end, new in replacements:
        out.append(doc[pos:start])
        out.append(new)
        pos = end
    out.append(doc[pos:])
    return "".join(out).encode("utf-8"), segs


def strip_injected_spans(xhtml_bytes: bytes) -> bytes:
    """Remove spans produced by :func:`inject_anchors`, keeping their content."""
    doc = xhtml_bytes.decode("utf-8")
    pattern = re.compile(r'<span id="c\d{2,}_s\d{4,}">|</span>')
    # Only spans opened by our id scheme are dropped; their matching closers
    # are found by tracking nesting depth over all span tags.
    out: list[str] = []
    pos = 0
    drop_depth: list[int] = []
    depth = 0
    for tok in xmlscan.tokenize(doc):
        if tok.kind == xmlscan.START and xmlscan.local_name(tok.name) == "span":
            raw = tok.doc_slice(doc)
            depth += 1
            if pattern.fullmatch(raw):
                out.append(doc[pos:tok.start])
                pos = tok.end
                drop_depth.append(depth)
        elif tok.kind == xmlscan.END and xmlscan.local_name(tok.name) == "span":
            if drop_depth and drop_depth[-1] == depth:
                out.append(doc[pos:tok.start])
                pos = tok.end
                drop_depth.pop()
            depth -= 1
    out.append(doc[pos:])
    return "".join(out).encode("utf-8")


def document_text(xhtml_bytes: bytes) -> str:
    """Concatenated decoded text content of a document (body and head alike)."""
    doc = xhtml_bytes.decode("utf-8")
    tokens = xmlscan.tokenize(doc)
    parts: list[str] = []
    for tok in tokens:
        if tok.kind == xmlscan.TEXT:
            parts.append(xmlscan.decode_entities(tok.doc_slice(doc))[0])
        elif tok.kind == xmlscan.CDATA:
            parts.append(xmlscan.cdata_content(tok.doc_slice(doc)))
    return "".join(parts)
