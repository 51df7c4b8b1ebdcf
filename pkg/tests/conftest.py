"""Shared fixtures: programmatic EPUB construction and acceptance reporting."""

from __future__ import annotations

import random
import zipfile

import pytest

WORDS = (
    "the quick brown fox jumps over a lazy dog near the riverbank while "
    "autumn leaves drift slowly past old stone bridges and distant bells "
    "ring through quiet valleys where travellers rest beneath ancient oaks "
    "sharing tales of harbours storms compasses lanterns and maps"
).split()

CONTAINER_XML = """<?xml version="1.0"?>
<container version="1.0" xmlns="urn:oasis:names:tc:opendocument:xmlns:container">
  <rootfiles>
    <rootfile full-path="OEBPS/content.opf" media-type="application/oebps-package+xml"/>
  </rootfiles>
</container>
"""

BOOK_CSS = "p { margin: 0.5em 0; }\nh1 { font-size: 1.4em; }\n"

# A 1x1 transparent GIF: a binary entry that must survive byte-identically.
PIXEL_GIF = (
    b"GIF89a\x01\x00\x01\x00\x80\x00\x00\x00\x00\x00\xff\xff\xff!\xf9\x04"
    b"\x01\x00\x00\x00\x00,\x00\x00\x00\x00\x01\x00\x01\x00\x00\x02\x02D"
    b"\x01\x00;"
)


def make_sentences(rng: random.Random, count: int) -> list[str]:
    """Deterministic sentence texts with varied lengths and punctuation."""
    out = []
    for i in range(count):
        n_words = rng.randint(3, 16)
        words = [rng.choice(WORDS) for _ in range(n_words)]
        words[0] = words[0].capitalize()
        terminator = rng.choice([".", ".", ".", "!", "?"])
        out.append(" ".join(words) + terminator)
    return out


def chapter_xhtml(title: str, sentences: list[str], per_para: int = 5) -> str:
    paras = []
    for i in range(0, len(sentences), per_para):
        paras.append("<p>" + " ".join(sentences[i:i + per_para]) + "</p>")
    body = "\n".join(paras)
    return (
        '<?xml version="1.0" encoding="utf-8"?>\n'
        '<html xmlns="http://www.w3.org/1999/xhtml">\n'
        f"<head><title>{title}</title>"
        '<link rel="stylesheet" href="../css/book.css"/></head>\n'
        f"<body>\n<h1>{title}</h1>\n{body}\n</body></html>\n"
    )


def build_epub(path, chapters: list[str], version: str = "3.0") -> str:
    """Write a complete EPUB with the given chapter documents."""
    items = []
    spine = []
    for i in range(len(chapters)):
        items.append(
            f'<item id="text_{i + 1:02d}" href="text/chapter{i + 1}.xhtml" '
            f'media-type="application/xhtml+xml"/>'
        )
        spine.append(f'<itemref idref="text_{i + 1:02d}"/>')
    items.append('<item id="css_book" href="css/book.css" media-type="text/css"/>')
    items.append('<item id="img_pixel" href="img/pixel.gif" media-type="image/gif"/>')
    opf = (
        '<?xml version="1.0" encoding="utf-8"?>\n'
        f'<package xmlns="http://www.idpf.org/2007/opf" version="{version}" '
        'unique-identifier="uid">\n'
        '  <metadata xmlns:dc="http://purl.org/dc/elements/1.1/">\n'
        '    <dc:identifier id="uid">urn:uuid:0f5a</dc:identifier>\n'
        "    <dc:title>Fixture Book</dc:title>\n"
        "    <dc:language>en</dc:language>\n"
        "  </metadata>\n"
        "  <manifest>\n"
        + "".join(f"    {line}\n" for line in items)
        + "  </manifest>\n"
        "  <spine>\n"
        + "".join(f"    {line}\n" for line in spine)
        + "  </spine>\n"
        "</package>\n"
    )
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr(zipfile.ZipInfo("mimetype"), b"application/epub+zip",
                    zipfile.ZIP_STORED)
        zf.writestr("META-INF/container.xml", CONTAINER_XML)
        zf.writestr("OEBPS/content.opf", opf)
        for i, xhtml in enumerate(chapters):
            zf.writestr(f"OEBPS/text/chapter{i + 1}.xhtml", xhtml)
        zf.writestr("OEBPS/css/book.css", BOOK_CSS)
        zf.writestr("OEBPS/img/pixel.gif", PIXEL_GIF)
    return str(path)


@pytest.fixture
def small_epub(tmp_path):
    rng = random.Random(7)
    chapters = [
        chapter_xhtml("Chapter One", make_sentences(rng, 12)),
        chapter_xhtml("Chapter Two", make_sentences(rng, 10)),
    ]
    return build_epub(tmp_path / "small.epub", chapters)


@pytest.fixture(scope="session")
def big_epub(tmp_path_factory):
    """Two chapters, well over 200 sentences in total."""
    rng = random.Random(99)
    chapters = [
        chapter_xhtml("Chapter One", make_sentences(rng, 130)),
        chapter_xhtml("Chapter Two", make_sentences(rng, 120)),
    ]
    path = tmp_path_factory.mktemp("fixtures") / "big.epub"
    return build_epub(path, chapters)


@pytest.fixture(scope="session")
def converted_big(big_epub, tmp_path_factory):
    from aloud.pipeline import RunConfig, run_convert

    out = tmp_path_factory.mktemp("converted") / "big_out.epub"
    result = run_convert(
        RunConfig(input_epub=big_epub, output_epub=str(out)),
        log=lambda msg: None,
    )
    return str(out), result


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): acceptance criterion checked by this test")


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    for name, value in report.user_properties:
        if name == "criterion":
            status = "PASS" if report.passed else "FAIL"
            print(f"\n[{status}] {value}", flush=True)
