"""EPUB container reading and writing.

An EPUB is a zip archive in the Open Container Format: a stored ``mimetype``
entry first, ``META-INF/container.xml`` pointing at the package document
(OPF), and the publication resources.  :class:`ContainerModel` holds every
entry's raw bytes so that entries the pipeline does not touch can be written
back byte-for-byte identical.
"""

from __future__ import annotations

import posixpath
import zipfile
from dataclasses import dataclass, field
from urllib.parse import unquote

from . import xmlscan
from .errors import (
    DanglingSpineRef,
    IoFailure,
    MalformedOpf,
    MissingContainerXml,
    MissingMimetype,
    NotZip,
)

MIMETYPE_BYTES = b"application/epub+zip"

# Fixed timestamp for entries we write, so repeated runs produce identical
# archives.  (Zip's DOS format cannot represent anything before 1980.)
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class ManifestItem:
    id: str
    href: str
    media_type: str
    properties: str = ""
    media_overlay: str | None = None


@dataclass
class PackageDoc:
    metadata: list[tuple[str, str | None, str]]
    manifest: list[ManifestItem]
    spine: list[str]

    def item_by_id(self, item_id: str) -> ManifestItem | None:
        for item in self.manifest:
            if item.id == item_id:
                return item
        return None

    def item_by_href(self, href: str) -> ManifestItem | None:
        target = unquote(href)
        for item in self.manifest:
            if unquote(item.href) == target:
                return item
        return None


@dataclass
class ContainerModel:
    entries: dict[str, bytes]
    opf_path: str
    modified: set[str] = field(default_factory=set)
    added: set[str] = field(default_factory=set)

    @property
    def opf_dir(self) -> str:
        return posixpath.dirname(self.opf_path)

    def resolve(self, href: str) -> str:
        """Archive path of a manifest href (relative to the OPF directory)."""
        joined = posixpath.join(self.opf_dir, unquote(href)) if self.opf_dir else unquote(href)
        return posixpath.normpath(joined)

    def put(self, path: str, data: bytes) -> None:
        """Record new or replacement bytes for an archive entry."""
        if path in self.entries and path not in self.added:
            self.modified.add(path)
        elif path not in self.entries:
            self.added.add(path)
        self.entries[path] = data


def open_container(file_path) -> ContainerModel:
    try:
        with zipfile.ZipFile(file_path) as zf:
            names = zf.namelist()
            entries = {name: zf.read(name) for name in names if not name.endswith("/")}
    except zipfile.BadZipFile as exc:
        raise NotZip(f"not a zip archive: {file_path}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {file_path}: {exc}") from exc

    if entries.get("mimetype") != MIMETYPE_BYTES:
        raise MissingMimetype(
            'container must hold a "mimetype" entry with exact bytes '
            '"application/epub+zip"'
        )
    if "META-INF/container.xml" not in entries:
        raise MissingContainerXml("META-INF/container.xml is absent")

    opf_path = _rootfile_path(entries["META-INF/container.xml"])
    if opf_path not in entries:
        raise MalformedOpf(f"container.xml names missing package document {opf_path!r}")
    return ContainerModel(entries=entries, opf_path=opf_path)


def _rootfile_path(container_xml: bytes) -> str:
    try:
        doc = container_xml.decode("utf-8")
        tokens = xmlscan.tokenize(doc)
    except Exception as exc:
        raise MissingContainerXml(f"container.xml is unreadable: {exc}") from exc
    for tok in tokens:
        if (tok.kind in (xmlscan.START, xmlscan.EMPTY)
                and xmlscan.local_name(tok.name) == "rootfile"):
            attrs = xmlscan.parse_attrs(doc, tok)
            path = attrs.get("full-path")
            if path:
                return path
    raise MissingContainerXml("container.xml names no rootfile full-path")


def parse_package(model: ContainerModel) -> PackageDoc:
    doc_bytes = model.entries[model.opf_path]
    try:
        doc = doc_bytes.decode("utf-8")
        tokens = xmlscan.tokenize(doc)
        forest = xmlscan.build_tree(doc, tokens)
    except Exception as exc:
        raise MalformedOpf(f"package document is not well-formed: {exc}") from exc

    package = _find_child(forest, "package")
    if package is None:
        raise MalformedOpf("no <package> root element")

    metadata: list[tuple[str, str | None, str]] = []
    manifest: list[ManifestItem] = []
    spine: list[str] = []

    meta_elem = _find_child(package.children, "metadata")
    if meta_elem is not None:
        for child in meta_elem.children:
            if not isinstance(child, xmlscan.ElementNode):
                continue
            text = xmlscan.element_text(doc, tokens, child).strip()
            if child.name.startswith("dc:"):
                metadata.append((child.name, None, text))
            elif xmlscan.local_name(child.name) == "meta":
                prop = child.attrs.get("property") or child.attrs.get("name", "")
                refines = child.attrs.get("refines")
                value = text or child.attrs.get("content", "")
                metadata.append((prop, refines, value))

    man_elem = _find_child(package.children, "manifest")
    if man_elem is None:
        raise MalformedOpf("no <manifest> element")
    for child in man_elem.children:
        if (isinstance(child, xmlscan.ElementNode)
                and xmlscan.local_name(child.name) == "item"):
            attrs = child.attrs
            if "id" not in attrs or "href" not in attrs:
                raise MalformedOpf("manifest item lacks id or href")
            manifest.append(ManifestItem(
                id=attrs["id"],
                href=attrs["href"],
                media_type=attrs.get("media-type", ""),
                properties=attrs.get("properties", ""),
                media_overlay=attrs.get("media-overlay"),
            ))

    spine_elem = _find_child(package.children, "spine")
    if spine_elem is None:
        raise MalformedOpf("no <spine> element")
    ids = {item.id for item in manifest}
    for child in spine_elem.children:
        if (isinstance(child, xmlscan.ElementNode)
                and xmlscan.local_name(child.name) == "itemref"):
            idref = child.attrs.get("idref", "")
            if idref not in ids:
                raise DanglingSpineRef(f"spine idref {idref!r} not in manifest")
            spine.append(idref)

    return PackageDoc(metadata=metadata, manifest=manifest, spine=spine)


def _find_child(nodes, name: str) -> xmlscan.ElementNode | None:
    for node in nodes:
        if isinstance(node, xmlscan.ElementNode) and xmlscan.local_name(node.name) == name:
            return node
    return None


def write_container(model: ContainerModel, out_path) -> None:
    ordered = list(model.entries)
    ordered.sort(key=lambda p: p != "mimetype")  # stable: mimetype first, rest as-is
    try:
        with zipfile.ZipFile(out_path, "w") as zf:
            for name in ordered:
                data = model.entries[name]
                info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
                if name == "mimetype":
                    info.compress_type = zipfile.ZIP_STORED
                else:
                    info.compress_type = zipfile.ZIP_DEFLATED
                zf.writestr(info, data)
    except OSError as exc:
        raise IoFailure(f"cannot write {out_path}: {exc}") from exc
