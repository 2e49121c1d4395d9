"""Parsing and canonical emission of the `.story.xml` interchange format.

The format is a small XML dialect, version 1:

    <story version="1">
      <node id="a" kind="image" x="0" y="0">
        <param name="src">assets/skull.png</param>
      </node>
      <edge from="a" from-port="main-out" to="b" to-port="main-in"/>
    </story>

Emission is canonical: nodes sorted by id, edges sorted by (from, to),
attributes and params in a fixed order, two-space indent, UTF-8, LF line
endings. `parse(emit(doc))` reproduces `doc` exactly, and emission is
byte-identical across runs and platforms.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from xml.parsers import expat
from xml.sax.saxutils import escape, quoteattr

from scrollstory.model import (
    CAMERA_KINDS,
    KIND_CLASSES,
    MAIN_IN,
    MAIN_OUT,
    SUB_IN,
    SUB_OUT,
    Camera,
    Diagnostic,
    Edge,
    GraphError,
    NodeId,
    StoryError,
    StoryGraph,
    StoryNode,
)

SUPPORTED_VERSIONS = (1,)

_PORT_TO_XML = {MAIN_OUT: "main-out", SUB_OUT: "sub-out", MAIN_IN: "main-in", SUB_IN: "sub-in"}
_PORT_FROM_XML = {v: k for k, v in _PORT_TO_XML.items()}

# Per-kind param schema: (xml param name, model field, type, required).
# Emission writes every param in this order so defaults survive round trips.
_PARAM_SCHEMAS: dict[str, list[tuple[str, str, str, bool]]] = {
    "text": [("content", "content", "str", False), ("h-align", "h_align", "str", False), ("v-align", "v_align", "str", False)],
    "image": [("src", "src", "str", True), ("position", "position", "str", False), ("size", "size", "str", False)],
    "video": [("src", "src", "str", True), ("position", "position", "str", False), ("size", "size", "str", False)],
    "audio": [("src", "src", "str", True)],
    "map": [("lat", "lat", "float", True), ("lon", "lon", "float", True), ("zoom-level", "zoom_level", "float", False)],
    "volume": [
        ("src", "src", "str", True),
        ("mode", "mode", "str", False),
        ("iso-value", "iso_value", "float", False),
        ("intensity-lo", "intensity_lo", "float", False),
        ("intensity-hi", "intensity_hi", "float", False),
    ],
    "slice": [("src", "src", "str", True), ("axis", "axis", "str", False), ("index", "index", "int", False)],
    "surface": [("model-ref", "model_ref", "str", True)],
    "decision": [("prompt", "prompt", "str", False)],
}

_EDGE_ATTRS = ("from", "from-port", "to", "to-port", "label")

# Characters XML 1.0 cannot represent at all, even as character references.
_ILLEGAL_XML = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f\ud800-\udfff￾￿]")

_TEXT_ENTITIES = {"\r": "&#13;"}
_ATTR_ENTITIES = {"\r": "&#13;", "\n": "&#10;", "\t": "&#9;"}


class ParseError(StoryError):
    """Raised when a document cannot be parsed; carries all diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.severity == "error"] or self.diagnostics
        suffix = f" (+{len(errors) - 1} more)" if len(errors) > 1 else ""
        super().__init__(f"{errors[0]}{suffix}")


@dataclass
class StoryDocument:
    """A parsed story file: the graph plus editor layout hints."""

    graph: StoryGraph
    layout_hints: dict[NodeId, tuple[float, float]] = field(default_factory=dict)
    format_version: int = 1
    warnings: list[Diagnostic] = field(default_factory=list, compare=False, repr=False)


# -- low-level XML reading ----------------------------------------------------


@dataclass
class _XmlElement:
    tag: str
    attrs: dict[str, str]
    line: int
    column: int
    text_chunks: list[tuple[str, int]] = field(default_factory=list)
    children: list["_XmlElement"] = field(default_factory=list)

    @property
    def text(self) -> str:
        return "".join(chunk for chunk, _ in self.text_chunks)


class _DoctypeRejected(Exception):
    def __init__(self, line: int, column: int):
        self.line, self.column = line, column


def _read_tree(data: bytes) -> _XmlElement:
    """Parse bytes into a positioned element tree; DTDs are rejected outright."""
    parser = expat.ParserCreate()
    roots: list[_XmlElement] = []
    stack: list[_XmlElement] = []

    def start(tag: str, attrs: dict[str, str]) -> None:
        elem = _XmlElement(tag, dict(attrs), parser.CurrentLineNumber, parser.CurrentColumnNumber + 1)
        (stack[-1].children if stack else roots).append(elem)
        stack.append(elem)

    def end(tag: str) -> None:
        stack.pop()

    def chars(text: str) -> None:
        if stack:
            stack[-1].text_chunks.append((text, parser.CurrentLineNumber))

    def doctype(*args: object) -> None:
        raise _DoctypeRejected(parser.CurrentLineNumber, parser.CurrentColumnNumber + 1)

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    parser.StartDoctypeDeclHandler = doctype
    parser.buffer_text = True

    try:
        parser.Parse(data, True)
    except expat.ExpatError as exc:
        message = expat.errors.messages[exc.code]
        raise ParseError([Diagnostic("error", "document", f"malformed XML: {message}", exc.lineno, exc.offset + 1)]) from None
    except _DoctypeRejected as exc:
        raise ParseError([Diagnostic("error", "document", "DOCTYPE declarations are not allowed", exc.line, exc.column)]) from None
    return roots[0]


# -- parsing -------------------------------------------------------------------


class _Parser:
    def __init__(self, lenient: bool):
        self.lenient = lenient
        self.errors: list[Diagnostic] = []
        self.warnings: list[Diagnostic] = []
        self.node_lines: dict[str, int] = {}
        self.edge_lines: dict[str, int] = {}

    def error(self, ref: str, message: str, elem: _XmlElement | None = None, line: int | None = None) -> None:
        if elem is not None and line is None:
            line = elem.line
        column = elem.column if elem is not None and line == elem.line else None
        self.errors.append(Diagnostic("error", ref, message, line, column))

    def unknown(self, ref: str, message: str, elem: _XmlElement) -> None:
        """Route an unknown-construct finding per strict/lenient mode."""
        if self.lenient:
            self.warnings.append(Diagnostic("warning", ref, message, elem.line, elem.column))
        else:
            self.error(ref, message, elem)

    def run(self, root: _XmlElement) -> StoryDocument:
        if root.tag != "story":
            self.error("document", f"root element must be <story>, got <{root.tag}>", root)
            raise ParseError(self.errors)
        version = self._parse_version(root)
        self._check_stray_text(root)
        for name in root.attrs:
            if name != "version":
                self.unknown("story", f"unknown attribute {name!r} on <story>", root)

        graph = StoryGraph()
        layout: dict[str, tuple[float, float]] = {}
        for child in root.children:
            if child.tag == "node":
                self._parse_node(child, graph, layout)
            elif child.tag == "edge":
                self._parse_edge(child, graph)
            else:
                self.unknown("document", f"unknown element <{child.tag}>", child)

        if not self.errors:
            for diag in graph.validate():
                line = None
                if diag.ref.startswith("node "):
                    line = self.node_lines.get(diag.ref[len("node "):])
                elif diag.ref.startswith("edge "):
                    line = self.edge_lines.get(diag.ref)
                entry = Diagnostic(diag.severity, diag.ref, diag.message, line)
                (self.errors if diag.severity == "error" else self.warnings).append(entry)

        if self.errors:
            raise ParseError(self.errors + self.warnings)
        return StoryDocument(graph=graph, layout_hints=layout, format_version=version, warnings=self.warnings)

    def _parse_version(self, root: _XmlElement) -> int:
        raw = root.attrs.get("version")
        if raw is None:
            self.error("story", "missing version attribute", root)
            return SUPPORTED_VERSIONS[0]
        try:
            version = int(raw)
        except ValueError:
            self.error("story", f"version must be an integer, got {raw!r}", root)
            return SUPPORTED_VERSIONS[0]
        if version not in SUPPORTED_VERSIONS:
            supported = ", ".join(map(str, SUPPORTED_VERSIONS))
            self.error("story", f"unsupported format version {version} (supported: {supported})", root)
        return version

    def _check_stray_text(self, elem: _XmlElement) -> None:
        for chunk, line in elem.text_chunks:
            if chunk.strip():
                self.error(elem.tag, f"unexpected text {chunk.strip()[:30]!r}", elem, line=line)

    def _parse_node(self, elem: _XmlElement, graph: StoryGraph, layout: dict[str, tuple[float, float]]) -> None:
        self._check_stray_text(elem)
        node_id = elem.attrs.get("id")
        kind_tag = elem.attrs.get("kind")
        if not node_id:
            self.error("node", "missing or empty id attribute", elem)
            return
        ref = f"node {node_id}"
        self.node_lines.setdefault(node_id, elem.line)
        if node_id in graph.nodes:
            self.error(ref, f"duplicate node id {node_id!r}", elem)
            return
        if kind_tag not in _PARAM_SCHEMAS:
            self.error(ref, f"unknown node kind {kind_tag!r}", elem)
            return

        params = self._collect_params(elem, ref, kind_tag)
        values: dict[str, object] = {}
        ok = params is not None
        if params is not None:
            for xml_name, field_name, typ, required in _PARAM_SCHEMAS[kind_tag]:
                if xml_name not in params:
                    if required:
                        self.error(ref, f"missing required parameter {xml_name!r} for kind {kind_tag!r}", elem)
                        ok = False
                    continue
                raw = params[xml_name]
                try:
                    values[field_name] = self._convert(raw, typ)
                except ValueError:
                    expected = "an integer" if typ == "int" else "a number"
                    self.error(ref, f"parameter {xml_name!r} must be {expected}, got {raw!r}", elem)
                    ok = False

        camera = self._parse_camera(elem, ref, kind_tag)
        if camera is not None:
            values["camera"] = camera
        extent = self._parse_extent(elem, ref)
        self._parse_layout_hint(elem, ref, node_id, layout)
        for name in elem.attrs:
            if name in ("id", "kind", "x", "y", "extent"):
                continue
            if name in ("camera-pos", "camera-rot", "camera-zoom") and kind_tag in CAMERA_KINDS:
                continue
            self.unknown(ref, f"unknown attribute {name!r} on <node>", elem)

        if not ok:
            return
        try:
            kind = KIND_CLASSES[kind_tag](**values)
            graph.insert_node(StoryNode(id=node_id, kind=kind, extent_override=extent))
        except GraphError as exc:
            self.error(ref, str(exc), elem)

    def _collect_params(self, elem: _XmlElement, ref: str, kind_tag: str) -> dict[str, str] | None:
        known = {name for name, _, _, _ in _PARAM_SCHEMAS[kind_tag]}
        params: dict[str, str] = {}
        bad = False
        for child in elem.children:
            if child.tag != "param":
                self.unknown(ref, f"unknown element <{child.tag}> inside <node>", child)
                continue
            name = child.attrs.get("name")
            if not name:
                self.error(ref, "param element missing name attribute", child)
                bad = True
                continue
            for attr in child.attrs:
                if attr != "name":
                    self.unknown(ref, f"unknown attribute {attr!r} on <param>", child)
            if child.children:
                self.error(ref, f"param {name!r} must not contain child elements", child)
                bad = True
                continue
            if name not in known:
                self.unknown(ref, f"unknown parameter {name!r} for kind {kind_tag!r}", child)
                continue
            if name in params:
                self.error(ref, f"duplicate parameter {name!r}", child)
                bad = True
                continue
            params[name] = child.text
        return None if bad else params

    def _convert(self, raw: str, typ: str) -> object:
        if typ == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        if typ == "int":
            return int(raw.strip())
        return raw

    def _parse_camera(self, elem: _XmlElement, ref: str, kind_tag: str) -> Camera | None:
        if kind_tag not in CAMERA_KINDS:
            return None
        pos_raw = elem.attrs.get("camera-pos")
        rot_raw = elem.attrs.get("camera-rot")
        zoom_raw = elem.attrs.get("camera-zoom")
        if pos_raw is None and rot_raw is None and zoom_raw is None:
            return None  # kind default applies
        try:
            pos = self._parse_vector(pos_raw, 3) if pos_raw is not None else (0.0, 0.0, 0.0)
            rot = self._parse_vector(rot_raw, 4) if rot_raw is not None else (1.0, 0.0, 0.0, 0.0)
            zoom = float(zoom_raw) if zoom_raw is not None else 1.0
            return Camera.normalized(pos, rot, zoom)
        except (ValueError, GraphError) as exc:
            self.error(ref, f"invalid camera attributes: {exc}", elem)
            return None

    def _parse_vector(self, raw: str, n: int) -> tuple[float, ...]:
        parts = [float(p) for p in raw.split(",")]
        if len(parts) != n:
            raise ValueError(f"expected {n} comma-separated numbers, got {raw!r}")
        return tuple(parts)

    def _parse_extent(self, elem: _XmlElement, ref: str) -> float | None:
        raw = elem.attrs.get("extent")
        if raw is None:
            return None
        try:
            extent = float(raw)
            if not (math.isfinite(extent) and extent > 0):
                raise ValueError(raw)
            return extent
        except ValueError:
            self.error(ref, f"extent must be a positive number, got {raw!r}", elem)
            return None

    def _parse_layout_hint(self, elem: _XmlElement, ref: str, node_id: str, layout: dict[str, tuple[float, float]]) -> None:
        x_raw, y_raw = elem.attrs.get("x"), elem.attrs.get("y")
        if x_raw is None and y_raw is None:
            return
        if x_raw is None or y_raw is None:
            self.error(ref, "layout hint needs both x and y attributes", elem)
            return
        try:
            layout[node_id] = (float(x_raw), float(y_raw))
        except ValueError:
            self.error(ref, f"layout hint coordinates must be numbers, got x={x_raw!r} y={y_raw!r}", elem)

    def _parse_edge(self, elem: _XmlElement, graph: StoryGraph) -> None:
        self._check_stray_text(elem)
        for child in elem.children:
            self.unknown("edge", f"unknown element <{child.tag}> inside <edge>", child)
        missing = [a for a in ("from", "from-port", "to", "to-port") if a not in elem.attrs]
        if missing:
            self.error("edge", f"missing attributes: {', '.join(missing)}", elem)
            return
        ref = f"edge {elem.attrs['from']}->{elem.attrs['to']}"
        self.edge_lines.setdefault(ref, elem.line)
        for name in elem.attrs:
            if name not in _EDGE_ATTRS:
                self.unknown(ref, f"unknown attribute {name!r} on <edge>", elem)
        from_port = _PORT_FROM_XML.get(elem.attrs["from-port"])
        to_port = _PORT_FROM_XML.get(elem.attrs["to-port"])
        bad = False
        if from_port not in (MAIN_OUT, SUB_OUT):
            self.error(ref, f"unknown from-port {elem.attrs['from-port']!r}", elem)
            bad = True
        if to_port not in (MAIN_IN, SUB_IN):
            self.error(ref, f"unknown to-port {elem.attrs['to-port']!r}", elem)
            bad = True
        for endpoint in (elem.attrs["from"], elem.attrs["to"]):
            if endpoint not in graph.nodes:
                self.error(ref, f"unknown node id {endpoint!r}", elem)
                bad = True
        if bad:
            return
        graph.edges.append(
            Edge(from_id=elem.attrs["from"], from_port=from_port, to_id=elem.attrs["to"], to_port=to_port, label=elem.attrs.get("label"))
        )


def parse(data: bytes | str, lenient: bool = False) -> StoryDocument:
    """Parse story XML into a validated StoryDocument.

    Strict by default: unknown elements, attributes, and parameters are
    errors. With `lenient=True` they are skipped and reported on the
    document's `warnings` list. Raises ParseError on any error; the
    exception carries one Diagnostic per problem, with line and column
    where known.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    root = _read_tree(data)
    return _Parser(lenient).run(root)


# -- emission ------------------------------------------------------------------


def _fmt_num(value: float) -> str:
    """Canonical number text: integral floats print as integers."""
    value = float(value)
    if value.is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


def _xml_text(value: str) -> str:
    if _ILLEGAL_XML.search(value):
        raise GraphError(f"string contains characters XML cannot represent: {value!r}")
    return escape(value, _TEXT_ENTITIES)


def _xml_attr(value: str) -> str:
    if _ILLEGAL_XML.search(value):
        raise GraphError(f"string contains characters XML cannot represent: {value!r}")
    return quoteattr(value, _ATTR_ENTITIES)


def _node_attrs(node: StoryNode, hint: tuple[float, float] | None) -> list[tuple[str, str]]:
    attrs = [("id", node.id), ("kind", node.kind.kind)]
    if hint is not None:
        attrs.append(("x", _fmt_num(hint[0])))
        attrs.append(("y", _fmt_num(hint[1])))
    if node.extent_override is not None:
        attrs.append(("extent", _fmt_num(node.extent_override)))
    camera = getattr(node.kind, "camera", None)
    if camera is not None:
        attrs.append(("camera-pos", ",".join(_fmt_num(c) for c in camera.position)))
        attrs.append(("camera-rot", ",".join(_fmt_num(c) for c in camera.rotation)))
        attrs.append(("camera-zoom", _fmt_num(camera.zoom)))
    return attrs


def emit(doc: StoryDocument) -> bytes:
    """Serialize a document to canonical story XML bytes.

    The graph must validate without errors and every layout hint must
    reference an existing node; otherwise GraphError is raised.
    """
    issues = [d for d in doc.graph.validate() if d.severity == "error"]
    if issues:
        raise GraphError(f"cannot emit invalid document: {issues[0]}")
    if doc.format_version not in SUPPORTED_VERSIONS:
        raise GraphError(f"cannot emit unsupported format version {doc.format_version}")
    for node_id in doc.layout_hints:
        if node_id not in doc.graph.nodes:
            raise GraphError(f"layout hint references unknown node {node_id!r}")

    lines = [f'<story version="{doc.format_version}">']
    for node_id in sorted(doc.graph.nodes):
        node = doc.graph.nodes[node_id]
        attrs = _node_attrs(node, doc.layout_hints.get(node_id))
        head = " ".join(f"{name}={_xml_attr(value)}" for name, value in attrs)
        lines.append(f"  <node {head}>")
        for xml_name, field_name, typ, _ in _PARAM_SCHEMAS[node.kind.kind]:
            value = getattr(node.kind, field_name)
            text = _fmt_num(value) if typ in ("float", "int") else str(value)
            lines.append(f'    <param name="{xml_name}">{_xml_text(text)}</param>')
        lines.append("  </node>")
    for edge in sorted(doc.graph.edges, key=lambda e: (e.from_id, e.to_id)):
        attrs = [
            ("from", edge.from_id),
            ("from-port", _PORT_TO_XML[edge.from_port]),
            ("to", edge.to_id),
            ("to-port", _PORT_TO_XML[edge.to_port]),
        ]
        if edge.label is not None:
            attrs.append(("label", edge.label))
        head = " ".join(f"{name}={_xml_attr(value)}" for name, value in attrs)
        lines.append(f"  <edge {head}/>")
    lines.append("</story>")
    return ("\n".join(lines) + "\n").encode("utf-8")
