"""Token scanner and tree builder behavior."""

import pytest
from hypothesis import given, strategies as st

from aloud import xmlscan
from aloud.errors import MalformedXhtml


DOC = (
    '<?xml version="1.0"?><!DOCTYPE html><html xmlns="http://x"><!-- c -->'
    "<body><p class=\"a\">Hi &amp; bye</p><br/><![CDATA[raw <stuff>]]></body></html>"
)


def test_tokens_cover_document_exactly():
    tokens = xmlscan.tokenize(DOC)
    assert "".join(t.doc_slice(DOC) for t in tokens) == DOC
    assert tokens[0].start == 0 and tokens[-1].end == len(DOC)


def test_token_kinds():
    kinds = [t.kind for t in xmlscan.tokenize(DOC)]
    for expected in (xmlscan.PI, xmlscan.DOCTYPE, xmlscan.COMMENT,
                     xmlscan.CDATA, xmlscan.EMPTY, xmlscan.START, xmlscan.END,
                     xmlscan.TEXT):
        assert expected in kinds


def test_unterminated_tag_rejected():
    with pytest.raises(MalformedXhtml):
        xmlscan.tokenize("<html><p")  # tag still open at end of input
    doc = "<html><p>never closed"
    with pytest.raises(MalformedXhtml):
        xmlscan.build_tree(doc, xmlscan.tokenize(doc))


def test_mismatched_nesting_rejected():
    doc = "<a><b></a></b>"
    with pytest.raises(MalformedXhtml):
        xmlscan.build_tree(doc, xmlscan.tokenize(doc))


def test_unclosed_element_rejected():
    doc = "<a><b></b>"
    with pytest.raises(MalformedXhtml):
        xmlscan.build_tree(doc, xmlscan.tokenize(doc))


def test_attrs_quoting_and_entities():
    doc = "<p a=\"x &amp; y\" b='2' checked epub:type=\"pagebreak\">t</p>"
    tok = xmlscan.tokenize(doc)[0]
    attrs = xmlscan.parse_attrs(doc, tok)
    assert attrs == {"a": "x & y", "b": "2", "checked": "",
                     "epub:type": "pagebreak"}


def test_attr_value_with_angle_lookalikes():
    doc = '<p title="a > b">x</p>'
    tokens = xmlscan.tokenize(doc)
    assert tokens[0].kind == xmlscan.START
    assert xmlscan.parse_attrs(doc, tokens[0])["title"] == "a > b"


def test_attr_value_span_locates_raw_value():
    raw = '<item id="x" media-overlay="smil_01"/>'
    span = xmlscan.attr_value_span(raw, "media-overlay")
    assert raw[span[0]:span[1]] == "smil_01"
    assert xmlscan.attr_value_span(raw, "absent") is None


def test_decode_entities_offsets():
    decoded, starts = xmlscan.decode_entities("a&amp;b&#65;&unknown;")
    assert decoded == "a&bA&unknown;"
    assert len(starts) == len(decoded) + 1
    # Offsets point back into the raw string at each decoded char's origin.
    assert starts[0] == 0 and starts[1] == 1  # 'a', then '&amp;'
    assert starts[2] == 6                     # 'b'


def test_named_html5_entities():
    assert xmlscan.decode_entities("&nbsp;&hellip;")[0] == "\xa0…"


def test_cdata_content():
    assert xmlscan.cdata_content("<![CDATA[a <b> c]]>") == "a <b> c"


def test_tree_and_element_text():
    doc = "<html><body><p>One <em>two</em> three</p></body></html>"
    tokens = xmlscan.tokenize(doc)
    forest = xmlscan.build_tree(doc, tokens)
    p = forest[0].children[0].children[0]
    assert p.name == "p"
    assert xmlscan.element_text(doc, tokens, p) == "One two three"


def test_find_element_by_id():
    doc = '<html><body><p><span id="s1">A</span><span id="s2">B</span></p></body></html>'
    tokens = xmlscan.tokenize(doc)
    forest = xmlscan.build_tree(doc, tokens)
    hit = xmlscan.find_element_by_id(doc, tokens, forest, "s2")
    assert hit is not None
    assert xmlscan.element_text(doc, tokens, hit) == "B"
    assert xmlscan.find_element_by_id(doc, tokens, forest, "nope") is None


def test_local_name():
    assert xmlscan.local_name("epub:textref") == "textref"
    assert xmlscan.local_name("p") == "p"


@given(st.lists(st.sampled_from(
    ["<p>", "</p>", "text ", "&amp;", "<br/>", "<!-- x -->", "more"]
), max_size=12))
def test_tokenize_partition_property(parts):
    """Whatever scans successfully must partition the input exactly."""
    doc = "".join(parts)
    try:
        tokens = xmlscan.tokenize(doc)
    except MalformedXhtml:
        return
    assert "".join(t.doc_slice(doc) for t in tokens) == doc
