"""Token-level XML scanning for surgical document edits.

The pipeline never rebuilds a DOM and re-serializes it; instead every edit is
an insertion into (or replacement of a slice of) the original character
stream.  This module provides the scanner that makes that safe: it tokenizes
a well-formed XML document into non-overlapping slices (tags, text, comments,
CDATA, processing instructions, doctype) whose concatenation is exactly the
input, plus helpers to parse attributes out of a tag slice and to decode
character/entity references with an offset map back into the raw text.
"""

from __future__ import annotations

import html.entities
import re
from dataclasses import dataclass

from .errors import MalformedXhtml

# Token kinds
TEXT = "text"
START = "start"
END = "end"
EMPTY = "empty"          # self-closing tag
COMMENT = "comment"
CDATA = "cdata"
PI = "pi"                # includes the XML declaration
DOCTYPE = "doctype"

_NAME_RE = re.compile(r"[^\s/>=]+")
_WS_RE = re.compile(r"\s+")


@dataclass(slots=True)
class Token:
    kind: str
    start: int
    end: int
    name: str = ""       # tag local name, lowercased, for START/END/EMPTY

    def raw(self, doc: str) -> str:
        return self.doc_slice(doc)

    def doc_slice(self, doc: str) -> str:
        return doc[self.start:self.end]


def local_name(qname: str) -> str:
    """Lowercased name with any namespace prefix stripped."""
    return qname.rpartition(":")[2].lower()


def tokenize(doc: str) -> list[Token]:
    """Split a document into tokens covering every character exactly once."""
    tokens: list[Token] = []
    i, n = 0, len(doc)
    while i < n:
        lt = doc.find("<", i)
        if lt < 0:
            tokens.append(Token(TEXT, i, n))
            break
        if lt > i:
            tokens.append(Token(TEXT, i, lt))
        if doc.startswith("<!--", lt):
            end = doc.find("-->", lt + 4)
            if end < 0:
                raise MalformedXhtml("unterminated comment")
            tokens.append(Token(COMMENT, lt, end + 3))
            i = end + 3
        elif doc.startswith("<![CDATA[", lt):
            end = doc.find("]]>", lt + 9)
            if end < 0:
                raise MalformedXhtml("unterminated CDATA section")
            tokens.append(Token(CDATA, lt, end + 3))
            i = end + 3
        elif doc.startswith("<!", lt):
            i = _scan_doctype(doc, lt, tokens)
        elif doc.startswith("<?", lt):
            end = doc.find("?>", lt + 2)
            if end < 0:
                raise MalformedXhtml("unterminated processing instruction")
            tokens.append(Token(PI, lt, end + 2))
            i = end + 2
        elif doc.startswith("</", lt):
            m = _NAME_RE.match(doc, lt + 2)
            if not m:
                raise MalformedXhtml(f"bad end tag at offset {lt}")
            gt = doc.find(">", m.end())
            if gt < 0:
                raise MalformedXhtml("unterminated end tag")
            tokens.append(Token(END, lt, gt + 1, m.group()))
            i = gt + 1
        else:
            i = _scan_start_tag(doc, lt, tokens)
    return tokens


def _scan_doctype(doc: str, lt: int, tokens: list[Token]) -> int:
    depth = 0
    j = lt + 2
    n = len(doc)
    while j < n:
        c = doc[j]
        if c == "[":
            depth += 1
        elif c == "]":
            depth -= 1
        elif c == ">" and depth == 0:
            tokens.append(Token(DOCTYPE, lt, j + 1))
            return j + 1
        j += 1
    raise MalformedXhtml("unterminated doctype declaration")


def _scan_start_tag(doc: str, lt: int, tokens: list[Token]) -> int:
    m = _NAME_RE.match(doc, lt + 1)
    if not m:
        raise MalformedXhtml(f"bad start tag at offset {lt}")
    name = m.group()
    j = m.end()
    n = len(doc)
    while j < n:
        ws = _WS_RE.match(doc, j)
        if ws:
            j = ws.end()
            continue
        c = doc[j]
        if c == ">":
            tokens.append(Token(START, lt, j + 1, name))
            return j + 1
        if c == "/":
            if not doc.startswith("/>", j):
                raise MalformedXhtml(f"stray '/' in tag at offset {j}")
            tokens.append(Token(EMPTY, lt, j + 2, name))
            return j + 2
        # attribute
        am = _NAME_RE.match(doc, j)
        if not am:
            raise MalformedXhtml(f"bad attribute at offset {j}")
        j = am.end()
        ws = _WS_RE.match(doc, j)
        if ws:
            j = ws.end()
        if j < n and doc[j] == "=":
            j += 1
            ws = _WS_RE.match(doc, j)
            if ws:
                j = ws.end()
            if j >= n or doc[j] not in "\"'":
                raise MalformedXhtml(f"unquoted attribute value at offset {j}")
            quote = doc[j]
            close = doc.find(quote, j + 1)
            if close < 0:
                raise MalformedXhtml("unterminated attribute value")
            j = close + 1
        # bare attribute without value is tolerated (not well-formed XML,
        # but some toolchains emit it); it simply carries no value
    raise MalformedXhtml("unterminated start tag")


def _iter_attr_spans(raw: str):
    """Yield (name, value_start, value_end) spans within a start-tag string.

    Value spans exclude the quotes; a bare attribute yields an empty span
    at its own end.
    """
    m = _NAME_RE.match(raw, 1)
    j = m.end() if m else 1
    n = len(raw)
    while j < n:
        ws = _WS_RE.match(raw, j)
        if ws:
            j = ws.end()
            continue
        if raw[j] in "/>":
            break
        am = _NAME_RE.match(raw, j)
        if not am:
            break
        name = am.group()
        j = am.end()
        ws = _WS_RE.match(raw, j)
        if ws:
            j = ws.end()
        if j < n and raw[j] == "=":
            j += 1
            ws = _WS_RE.match(raw, j)
            if ws:
                j = ws.end()
            quote = raw[j]
            close = raw.find(quote, j + 1)
            yield name, j + 1, close
            j = close + 1
        else:
            yield name, j, j


def parse_attrs(doc: str, token: Token) -> dict[str, str]:
    """Attributes of a START/EMPTY token, entity-decoded, in document order.

    Keys keep their original prefix and case (``epub:type`` stays as written).
    """
    raw = doc[token.start:token.end]
    return {
        name: decode_entities(raw[v0:v1])[0]
        for name, v0, v1 in _iter_attr_spans(raw)
    }


def attr_value_span(raw: str, attr_name: str) -> tuple[int, int] | None:
    """Span of an attribute's raw value inside a start-tag string, if present."""
    for name, v0, v1 in _iter_attr_spans(raw):
        if name == attr_name:
            return v0, v1
    return None


_ENTITY_RE = re.compile(r"&(#[0-9]+|#x[0-9a-fA-F]+|[A-Za-z][A-Za-z0-9.]*);")


def decode_entities(raw: str) -> tuple[str, list[int]]:
    """Decode character and entity references.

    Returns ``(decoded, starts)`` where ``starts`` has ``len(decoded) + 1``
    offsets into ``raw``: ``starts[i]`` is where decoded character ``i``
    begins, with the final entry equal to ``len(raw)``.  Unknown entities are
    left verbatim so a document with sloppy references still round-trips.
    """
    decoded: list[str] = []
    starts: list[int] = []
    pos = 0
    for m in _ENTITY_RE.finditer(raw):
        for k in range(pos, m.start()):
            starts.append(k)
            decoded.append(raw[k])
        expansion = _expand_entity(m.group(1))
        if expansion is None:
            for k in range(m.start(), m.end()):
                starts.append(k)
                decoded.append(raw[k])
        else:
            for ch in expansion:
                starts.append(m.start())
                decoded.append(ch)
        pos = m.end()
    for k in range(pos, len(raw)):
        starts.append(k)
        decoded.append(raw[k])
    starts.append(len(raw))
    return "".join(decoded), starts


_XML_ENTITIES = {"amp": "&", "lt": "<", "gt": ">", "quot": '"', "apos": "'"}


def _expand_entity(body: str) -> str | None:
    if body.startswith("#x") or body.startswith("#X"):
        try:
            return chr(int(body[2:], 16))
        except ValueError:
            return None
    if body.startswith("#"):
        try:
            return chr(int(body[1:]))
        except ValueError:
            return None
    if body in _XML_ENTITIES:
        return _XML_ENTITIES[body]
    return html.entities.html5.get(body + ";")


# -- element tree ----------------------------------------------------------
#
# A lightweight tree over the token list.  Nodes only carry token indices,
# so the original text is always recoverable by slicing.

@dataclass(slots=True)
class ElementNode:
    name: str
    open_i: int          # index of START/EMPTY token
    close_i: int         # index of END token (== open_i for EMPTY)
    children: list
    attrs: dict[str, str]


@dataclass(slots=True)
class TextishNode:
    """A TEXT or CDATA token; CDATA content is taken literally."""
    token_i: int
    is_cdata: bool


@dataclass(slots=True)
class OtherNode:
    """Comment, PI, or doctype: contributes no text content."""
    token_i: int


def build_tree(doc: str, tokens: list[Token]) -> list:
    """Parse tokens into a node forest (prolog nodes + the root element)."""
    root: list = []
    stack: list[ElementNode] = []

    def sink() -> list:
        return stack[-1].children if stack else root

    for i, tok in enumerate(tokens):
        if tok.kind == TEXT:
            sink().append(TextishNode(i, False))
        elif tok.kind == CDATA:
            sink().append(TextishNode(i, True))
        elif tok.kind in (COMMENT, PI, DOCTYPE):
            sink().append(OtherNode(i))
        elif tok.kind == EMPTY:
            sink().append(
                ElementNode(tok.name, i, i, [], parse_attrs(doc, tok))
            )
        elif tok.kind == START:
            node = ElementNode(tok.name, i, -1, [], parse_attrs(doc, tok))
            sink().append(node)
            stack.append(node)
        elif tok.kind == END:
            if not stack or stack[-1].name != tok.name:
                raise MalformedXhtml(
                    f"mismatched </{tok.name}> at offset {tok.start}"
                )
            stack.pop().close_i = i
    if stack:
        raise MalformedXhtml(f"unclosed <{stack[-1].name}>")
    return root


def cdata_content(raw: str) -> str:
    return raw[9:-3]  # strip "<![CDATA[" and "]]>"


def element_text(doc: str, tokens: list[Token], node: ElementNode) -> str:
    """Decoded text content of an element subtree."""
    parts: list[str] = []

    def walk(n) -> None:
        if isinstance(n, TextishNode):
            raw = tokens[n.token_i].doc_slice(doc)
            parts.append(cdata_content(raw) if n.is_cdata else decode_entities(raw)[0])
        elif isinstance(n, ElementNode):
            for child in n.children:
                walk(child)

    walk(node)
    return "".join(parts)


def find_element_by_id(doc: str, tokens: list[Token], forest: list,
                       elem_id: str) -> ElementNode | None:
    found: list[ElementNode] = []

    def walk(nodes) -> None:
        for n in nodes:
            if isinstance(n, ElementNode):
                if not found and n.attrs.get("id") == elem_id:
                    found.append(n)
                    return
                walk(n.children)

    walk(forest)
    return found[0] if found else None
