"""In-memory story graph: nodes with typed ports, edges, and validation.

A story graph is the source program of the compiler pipeline. Nodes carry
one media payload each (text, image, video, audio, map, volume, slice,
surface, or decision). Edges connect a node's right-hand main port to the
next node's left-hand main port, or its bottom sub port to a layered
child's top sub port. Valid graphs are trees: one root, at most one
incoming edge per node, no cycles, and only decision nodes fan out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import ClassVar, Union

NodeId = str

MAIN_OUT = "main_out"
SUB_OUT = "sub_out"
MAIN_IN = "main_in"
SUB_IN = "sub_in"

H_ALIGNS = ("left", "center", "right")
V_ALIGNS = ("top", "middle", "bottom")
VOLUME_MODES = ("mip", "iso", "dvr")
SLICE_AXES = ("x", "y", "z")

# Sub-path layers the authoring UI normally offers; anything else is legal
# but flagged with a warning.
STANDARD_SUB_KINDS = ("text", "image", "video", "audio")


class StoryError(Exception):
    """Base class for all story toolchain errors."""


class GraphError(StoryError):
    """A story graph operation was rejected; the graph is unchanged."""


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding, either blocking ('error') or advisory ('warning')."""

    severity: str
    ref: str
    message: str
    line: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        loc = f" at line {self.line}" if self.line is not None else ""
        return f"{self.severity}: {self.ref}: {self.message}{loc}"


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise GraphError(message)


def _finite(value: float) -> bool:
    return isinstance(value, (int, float)) and math.isfinite(value)


@dataclass(frozen=True)
class Camera:
    """A 3D view: world position, unit-quaternion rotation (w, x, y, z), zoom."""

    position: tuple[float, float, float]
    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    zoom: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "rotation", tuple(float(c) for c in self.rotation))
        object.__setattr__(self, "zoom", float(self.zoom))
        _require(len(self.position) == 3, "camera position must have 3 components")
        _require(len(self.rotation) == 4, "camera rotation must have 4 components")
        _require(all(_finite(c) for c in self.position), "camera position must be finite")
        _require(all(_finite(c) for c in self.rotation), "camera rotation must be finite")
        norm = math.sqrt(sum(c * c for c in self.rotation))
        _require(
            abs(norm - 1.0) <= 1e-9,
            f"camera rotation must be a unit quaternion (norm {norm!r})",
        )
        _require(_finite(self.zoom) and self.zoom > 0, f"camera zoom must be > 0, got {self.zoom!r}")

    @classmethod
    def normalized(
        cls,
        position: tuple[float, float, float],
        rotation: tuple[float, float, float, float],
        zoom: float = 1.0,
    ) -> Camera:
        """Build a camera, renormalizing a not-quite-unit rotation quaternion."""
        rot = tuple(float(c) for c in rotation)
        norm = math.sqrt(sum(c * c for c in rot))
        _require(norm > 1e-12, "camera rotation quaternion has zero norm")
        if abs(norm - 1.0) > 1e-9:
            rot = tuple(c / norm for c in rot)
        return cls(position=tuple(position), rotation=rot, zoom=zoom)


DEFAULT_CAMERA = Camera(position=(0.0, 0.0, 0.0))


@dataclass(frozen=True)
class Text:
    kind: ClassVar[str] = "text"
    content: str = ""
    h_align: str = "center"
    v_align: str = "middle"

    def __post_init__(self) -> None:
        _require(self.h_align in H_ALIGNS, f"text h_align must be one of {H_ALIGNS}, got {self.h_align!r}")
        _require(self.v_align in V_ALIGNS, f"text v_align must be one of {V_ALIGNS}, got {self.v_align!r}")


@dataclass(frozen=True)
class Image:
    kind: ClassVar[str] = "image"
    src: str
    position: str = "center"
    size: str = "medium"

    def __post_init__(self) -> None:
        _require(bool(self.src), "image src must be nonempty")
        _require(bool(self.position), "image position must be nonempty")
        _require(bool(self.size), "image size must be nonempty")


@dataclass(frozen=True)
class Video:
    kind: ClassVar[str] = "video"
    src: str
    position: str = "center"
    size: str = "medium"

    def __post_init__(self) -> None:
        _require(bool(self.src), "video src must be nonempty")
        _require(bool(self.position), "video position must be nonempty")
        _require(bool(self.size), "video size must be nonempty")


@dataclass(frozen=True)
class Audio:
    kind: ClassVar[str] = "audio"
    src: str

    def __post_init__(self) -> None:
        _require(bool(self.src), "audio src must be nonempty")


@dataclass(frozen=True)
class Map:
    kind: ClassVar[str] = "map"
    lat: float
    lon: float
    zoom_level: float = 4.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        object.__setattr__(self, "zoom_level", float(self.zoom_level))
        _require(_finite(self.lat) and -90.0 <= self.lat <= 90.0, f"map lat out of range [-90, 90]: {self.lat!r}")
        _require(_finite(self.lon) and -180.0 <= self.lon <= 180.0, f"map lon out of range [-180, 180]: {self.lon!r}")
        _require(_finite(self.zoom_level) and self.zoom_level > 0, f"map zoom_level must be > 0, got {self.zoom_level!r}")


@dataclass(frozen=True)
class Volume:
    kind: ClassVar[str] = "volume"
    src: str
    mode: str = "dvr"
    iso_value: float = 0.5
    intensity_lo: float = 0.0
    intensity_hi: float = 1.0
    camera: Camera = DEFAULT_CAMERA

    def __post_init__(self) -> None:
        object.__setattr__(self, "iso_value", float(self.iso_value))
        object.__setattr__(self, "intensity_lo", float(self.intensity_lo))
        object.__setattr__(self, "intensity_hi", float(self.intensity_hi))
        _require(bool(self.src), "volume src must be nonempty")
        _require(self.mode in VOLUME_MODES, f"volume mode must be one of {VOLUME_MODES}, got {self.mode!r}")
        _require(_finite(self.iso_value), f"volume iso_value must be finite, got {self.iso_value!r}")
        _require(_finite(self.intensity_lo), f"volume intensity_lo must be finite, got {self.intensity_lo!r}")
        _require(_finite(self.intensity_hi), f"volume intensity_hi must be finite, got {self.intensity_hi!r}")
        _require(
            self.intensity_lo <= self.intensity_hi,
            f"intensity range inverted: intensity_lo {self.intensity_lo!r} > intensity_hi {self.intensity_hi!r}",
        )


@dataclass(frozen=True)
class Slice:
    kind: ClassVar[str] = "slice"
    src: str
    axis: str = "z"
    index: int = 0
    camera: Camera = DEFAULT_CAMERA

    def __post_init__(self) -> None:
        _require(bool(self.src), "slice src must be nonempty")
        _require(self.axis in SLICE_AXES, f"slice axis must be one of {SLICE_AXES}, got {self.axis!r}")
        _require(isinstance(self.index, int) and self.index >= 0, f"slice index must be an integer >= 0, got {self.index!r}")


@dataclass(frozen=True)
class Surface:
    kind: ClassVar[str] = "surface"
    model_ref: str
    camera: Camera = DEFAULT_CAMERA

    def __post_init__(self) -> None:
        _require(bool(self.model_ref), "surface model_ref must be nonempty")


@dataclass(frozen=True)
class Decision:
    kind: ClassVar[str] = "decision"
    prompt: str = ""


NodeKind = Union[Text, Image, Video, Audio, Map, Volume, Slice, Surface, Decision]

KIND_CLASSES: dict[str, type] = {
    cls.kind: cls for cls in (Text, Image, Video, Audio, Map, Volume, Slice, Surface, Decision)
}

# Kinds whose parameters include a 3D camera.
CAMERA_KINDS = ("volume", "slice", "surface")


@dataclass
class StoryNode:
    """One authored content item plus an optional per-node scroll extent."""

    id: NodeId
    kind: NodeKind
    extent_override: float | None = None

    def __post_init__(self) -> None:
        _require(bool(self.id), "node id must be nonempty")
        if self.extent_override is not None:
            self.extent_override = float(self.extent_override)
            _require(
                _finite(self.extent_override) and self.extent_override > 0,
                f"extent_override must be > 0, got {self.extent_override!r}",
            )


@dataclass(frozen=True)
class Edge:
    """A typed port connection; main edges sequence, sub edges layer."""

    from_id: NodeId
    from_port: str
    to_id: NodeId
    to_port: str
    label: str | None = None

    def __post_init__(self) -> None:
        _require(self.from_port in (MAIN_OUT, SUB_OUT), f"unknown from_port {self.from_port!r}")
        _require(self.to_port in (MAIN_IN, SUB_IN), f"unknown to_port {self.to_port!r}")

    @property
    def is_sub(self) -> bool:
        return self.from_port == SUB_OUT


def _ports_match(edge: Edge) -> bool:
    return (edge.from_port == MAIN_OUT) == (edge.to_port == MAIN_IN)


@dataclass
class StoryGraph:
    """Mutable story graph; every mutating operation is atomic.

    Nodes live in an insertion-ordered table, edges in authored order.
    Authored edge order is semantic: it fixes the option order offered at a
    decision node. Equality ignores edge order so that any permutation of
    the same connect calls compares equal.
    """

    nodes: dict[NodeId, StoryNode] = field(default_factory=dict)
    edges: list[Edge] = field(default_factory=list)
    _fresh_counter: int = field(default=1, repr=False, compare=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StoryGraph):
            return NotImplemented
        key = lambda e: (e.from_id, e.to_id, e.from_port)
        return self.nodes == other.nodes and sorted(self.edges, key=key) == sorted(other.edges, key=key)

    # -- lookups ------------------------------------------------------------

    def node(self, node_id: NodeId) -> StoryNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise GraphError(f"unknown node id {node_id!r}") from None

    def out_edges(self, node_id: NodeId) -> list[Edge]:
        return [e for e in self.edges if e.from_id == node_id]

    def in_edges(self, node_id: NodeId) -> list[Edge]:
        return [e for e in self.edges if e.to_id == node_id]

    def main_successors(self, node_id: NodeId) -> list[NodeId]:
        return [e.to_id for e in self.edges if e.from_id == node_id and not e.is_sub]

    def sub_successor(self, node_id: NodeId) -> NodeId | None:
        for e in self.edges:
            if e.from_id == node_id and e.is_sub:
                return e.to_id
        return None

    def _reachable(self, start: NodeId, goal: NodeId) -> bool:
        stack, seen = [start], set()
        while stack:
            cur = stack.pop()
            if cur == goal:
                return True
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(e.to_id for e in self.edges if e.from_id == cur)
        return False

    # -- operations ---------------------------------------------------------

    def add_node(self, kind: NodeKind, extent_override: float | None = None) -> NodeId:
        """Insert a node under a fresh deterministic id and return the id."""
        if not isinstance(kind, tuple(KIND_CLASSES.values())):
            raise GraphError(f"unknown node kind {type(kind).__name__!r}")
        while f"n{self._fresh_counter}" in self.nodes:
            self._fresh_counter += 1
        node_id = f"n{self._fresh_counter}"
        self._fresh_counter += 1
        self.nodes[node_id] = StoryNode(id=node_id, kind=kind, extent_override=extent_override)
        return node_id

    def insert_node(self, node: StoryNode) -> None:
        """Insert a node under its own id (used by parsers and fixtures)."""
        _require(node.id not in self.nodes, f"duplicate node id {node.id!r}")
        self.nodes[node.id] = node

    def connect(
        self,
        from_id: NodeId,
        from_port: str,
        to_id: NodeId,
        label: str | None = None,
    ) -> Edge:
        """Add an edge out of `from_port`; the matching input port is implied.

        Re-checks the incremental graph invariants and raises GraphError,
        leaving the graph unchanged, on any violation.
        """
        src = self.node(from_id)
        dst = self.node(to_id)
        _require(from_port in (MAIN_OUT, SUB_OUT), f"unknown from_port {from_port!r}")
        _require(from_id != to_id, f"self-loop on node {from_id!r}")
        is_sub = from_port == SUB_OUT
        from_decision = isinstance(src.kind, Decision)
        if from_decision:
            _require(not is_sub, f"sub edge out of decision node {from_id!r}")
            _require(label is not None, f"edge out of decision node {from_id!r} needs an option label")
        else:
            _require(label is None, f"label on edge out of non-decision node {from_id!r}")
            if not is_sub and self.main_successors(from_id):
                raise GraphError(f"node {from_id!r} already has a main successor")
        if is_sub:
            _require(not isinstance(dst.kind, Decision), f"decision node {to_id!r} may not be a sub-path layer")
            if self.sub_successor(from_id) is not None:
                raise GraphError(f"node {from_id!r} already has a sub successor")
        if self.in_edges(to_id):
            raise GraphError(f"node {to_id!r} already has an incoming edge")
        if self._reachable(to_id, from_id):
            raise GraphError(f"edge {from_id!r} -> {to_id!r} would introduce a cycle")
        edge = Edge(
            from_id=from_id,
            from_port=from_port,
            to_id=to_id,
            to_port=SUB_IN if is_sub else MAIN_IN,
            label=label,
        )
        self.edges.append(edge)
        return edge

    def duplicate_node(self, node_id: NodeId) -> NodeId:
        """Copy a node with all its parameters and main-connect the copy to it.

        Rapid way to author an animated transition: copy, then adjust the
        copy's camera or parameters.
        """
        original = self.node(node_id)
        if isinstance(original.kind, Decision):
            raise GraphError(f"cannot duplicate decision node {node_id!r}: the auto-connected copy would need an option label")
        if self.main_successors(node_id):
            raise GraphError(f"node {node_id!r} already has a main successor")
        copy_id = self.add_node(replace(original.kind), extent_override=original.extent_override)
        self.connect(node_id, MAIN_OUT, copy_id)
        return copy_id

    def remove_node(self, node_id: NodeId) -> None:
        """Remove a node together with all incident edges."""
        self.node(node_id)
        del self.nodes[node_id]
        self.edges = [e for e in self.edges if node_id not in (e.from_id, e.to_id)]

    def root(self) -> NodeId:
        """Return the unique node with no incoming edge."""
        targets = {e.to_id for e in self.edges}
        roots = [nid for nid in self.nodes if nid not in targets]
        if not roots:
            raise GraphError("graph has no root")
        if len(roots) > 1:
            raise GraphError(f"multiple roots: {', '.join(sorted(roots))}")
        return roots[0]

    # -- validation ----------------------------------------------------------

    def validate(self) -> list[Diagnostic]:
        """Check every graph invariant; an empty result means the graph is valid.

        Structural errors (bad ports, degree violations, missing root,
        cycles) are reported first; sub-path placement rules that need a
        well-formed tree are only checked once the structure is sound.
        """
        diags: list[Diagnostic] = []

        def error(ref: str, message: str) -> None:
            diags.append(Diagnostic("error", ref, message))

        def warning(ref: str, message: str) -> None:
            diags.append(Diagnostic("warning", ref, message))

        edge_ref = lambda e: f"edge {e.from_id}->{e.to_id}"

        for e in self.edges:
            known_endpoints = True
            for endpoint in (e.from_id, e.to_id):
                if endpoint not in self.nodes:
                    error(edge_ref(e), f"edge references unknown node {endpoint!r}")
                    known_endpoints = False
            if not known_endpoints:
                continue
            if e.from_id == e.to_id:
                error(edge_ref(e), "self-loop")
                continue
            if not _ports_match(e):
                error(edge_ref(e), f"port mismatch: {e.from_port} cannot feed {e.to_port}")
            from_decision = isinstance(self.nodes[e.from_id].kind, Decision)
            if from_decision and e.label is None and not e.is_sub:
                error(edge_ref(e), "edge out of a decision node needs an option label")
            if not from_decision and e.label is not None:
                error(edge_ref(e), "label on edge out of a non-decision node")
            if e.is_sub and isinstance(self.nodes[e.to_id].kind, Decision):
                error(edge_ref(e), f"decision node {e.to_id!r} may not be a sub-path layer")
            if e.is_sub:
                target_kind = self.nodes[e.to_id].kind.kind
                if target_kind not in STANDARD_SUB_KINDS and target_kind != "decision":
                    warning(f"node {e.to_id}", f"non-standard sub-path layer kind {target_kind!r}")

        structural_ok = not diags or all(d.severity == "warning" for d in diags)

        incoming: dict[NodeId, int] = {nid: 0 for nid in self.nodes}
        for e in self.edges:
            if e.to_id in incoming:
                incoming[e.to_id] += 1
        for nid, count in incoming.items():
            if count > 1:
                error(f"node {nid}", f"{count} incoming edges (branch rejoin is not allowed)")
                structural_ok = False

        for nid, node in self.nodes.items():
            mains = self.main_successors(nid)
            subs = [e for e in self.out_edges(nid) if e.is_sub]
            if isinstance(node.kind, Decision):
                if len(mains) < 2:
                    error(f"node {nid}", f"decision needs >=2 branches, has {len(mains)}")
                if subs:
                    error(f"node {nid}", "sub edge out of a decision node")
                    structural_ok = False
            else:
                if len(mains) > 1:
                    error(f"node {nid}", f"{len(mains)} main successors on a non-decision node")
                    structural_ok = False
            if len(subs) > 1:
                error(f"node {nid}", f"{len(subs)} sub successors")
                structural_ok = False

        roots = [nid for nid, count in incoming.items() if count == 0]
        if not roots:
            error("graph", "no root node" if self.nodes else "empty graph")
            structural_ok = False
        elif len(roots) > 1:
            error("graph", f"multiple roots: {', '.join(sorted(roots))}")
            structural_ok = False

        cyclic = self._report_cycles(diags)
        if cyclic:
            structural_ok = False

        if structural_ok and roots:
            self._check_sub_path_placement(roots[0], diags)

        return diags

    def _report_cycles(self, diags: list[Diagnostic]) -> bool:
        """Append one error per directed cycle; returns whether any was found."""
        WHITE, GRAY, BLACK = 0, 1, 2
        color = {nid: WHITE for nid in self.nodes}
        found = False
        for start in self.nodes:
            if color[start] != WHITE:
                continue
            stack: list[tuple[NodeId, int]] = [(start, 0)]
            path: list[NodeId] = []
            while stack:
                nid, idx = stack.pop()
                if idx == 0:
                    color[nid] = GRAY
                    path.append(nid)
                succs = [e.to_id for e in self.out_edges(nid) if e.to_id in self.nodes]
                advanced = False
                while idx < len(succs):
                    succ = succs[idx]
                    idx += 1
                    if color[succ] == GRAY:
                        cycle = path[path.index(succ):] + [succ]
                        diags.append(Diagnostic("error", f"node {succ}", "cycle: " + " -> ".join(cycle)))
                        found = True
                    elif color[succ] == WHITE:
                        stack.append((nid, idx))
                        stack.append((succ, 0))
                        advanced = True
                        break
                if not advanced:
                    color[nid] = BLACK
                    path.pop()
        return found

    def _check_sub_path_placement(self, root: NodeId, diags: list[Diagnostic]) -> None:
        """Flag decision nodes that end up inside a flattened sub-path.

        Depth 0 is the main chain; a sub edge descends one level and a main
        edge stays on its source's level. Decisions are only meaningful at
        depth 0, where a whole segment can branch.
        """
        stack: list[tuple[NodeId, int]] = [(root, 0)]
        while stack:
            nid, depth = stack.pop()
            node = self.nodes[nid]
            if depth > 0 and isinstance(node.kind, Decision):
                in_edge = self.in_edges(nid)[0]
                if not in_edge.is_sub:
                    diags.append(Diagnostic("error", f"node {nid}", "decision node inside a sub-path"))
            sub = self.sub_successor(nid)
            if sub is not None:
                stack.append((sub, depth + 1))
            for succ in self.main_successors(nid):
                stack.append((succ, depth))
