"""Scroll-space timeline planning and pure evaluation.

The planner assigns each step a scroll extent (default 3000 px per node)
and classifies what happens at each step boundary: plain crossfades, map
flights, camera and parameter blends for same-source 3D media, and play
triggers for video and audio. A crossfade window (default 1000 px) is
centered on every boundary, so each node spends half a window fading in
and half fading out inside its own extent.

Evaluation is a pure function of (scroll offset, recorded decisions):
replaying any scroll history lands on the same frame, which is what makes
rapid, incremental, reversible scrolling work.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Union

from scrollstory.model import Camera, GraphError, Map, NodeId, Slice, StoryGraph, Surface, Volume
from scrollstory.tree import SegmentId, Step, StoryTree

RHO = math.sqrt(2.0)  # pan-zoom path tradeoff between panning and zooming

# Web-Mercator singularity guard; latitudes are clamped to the square world.
_MAX_MERCATOR_LAT = 85.05112877980659

StepKey = tuple[SegmentId, int]


@dataclass(frozen=True)
class TimelineConfig:
    """Scroll geometry: pixels per node, crossfade window width, easing."""

    node_extent_px: float = 3000.0
    transition_window_px: float = 1000.0
    easing: str = "linear"

    def __post_init__(self) -> None:
        object.__setattr__(self, "node_extent_px", float(self.node_extent_px))
        object.__setattr__(self, "transition_window_px", float(self.transition_window_px))
        if not (math.isfinite(self.node_extent_px) and self.node_extent_px > 0):
            raise GraphError(f"node_extent_px must be > 0, got {self.node_extent_px!r}")
        if not (math.isfinite(self.transition_window_px) and self.transition_window_px > 0):
            raise GraphError(f"transition_window_px must be > 0, got {self.transition_window_px!r}")
        if self.transition_window_px > self.node_extent_px:
            raise GraphError("transition_window_px must not exceed node_extent_px")
        if self.easing not in ("linear", "smoothstep"):
            raise GraphError(f"easing must be 'linear' or 'smoothstep', got {self.easing!r}")


@dataclass(frozen=True)
class MapView:
    """A map camera: geographic center plus zoom level."""

    lat: float
    lon: float
    zoom_level: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        object.__setattr__(self, "zoom_level", float(self.zoom_level))
        if not -90.0 <= self.lat <= 90.0:
            raise GraphError(f"map view lat out of range: {self.lat!r}")
        if not -180.0 <= self.lon <= 180.0:
            raise GraphError(f"map view lon out of range: {self.lon!r}")
        if not self.zoom_level > 0:
            raise GraphError(f"map view zoom_level must be > 0: {self.zoom_level!r}")


@dataclass(frozen=True)
class Crossfade:
    tag = "crossfade"


@dataclass(frozen=True)
class VideoTrigger:
    """Fade like a crossfade, plus a scroll-linked play trigger at runtime."""

    tag = "videoTrigger"


@dataclass(frozen=True)
class MapEnter:
    """Fade in a map while zooming from far away toward the target view."""

    tag = "mapEnter"
    to_view: MapView
    start_zoom: float = 1.0


@dataclass(frozen=True)
class MapFly:
    """Smooth pan-zoom flight between two map views."""

    tag = "mapFly"
    from_view: MapView
    to_view: MapView


@dataclass(frozen=True)
class CameraBlend:
    """Blend camera and scalar parameters between same-source volume or slice nodes."""

    tag = "cameraBlend"
    from_camera: Camera
    to_camera: Camera
    scalars: tuple[tuple[str, float, float], ...] = ()
    integers: tuple[tuple[str, int, int], ...] = ()
    discrete: tuple[tuple[str, str, str], ...] = ()


@dataclass(frozen=True)
class SurfaceBlend:
    """Blend the camera between two views of the same surface model."""

    tag = "surfaceBlend"
    from_camera: Camera
    to_camera: Camera


TransitionSpec = Union[Crossfade, VideoTrigger, MapEnter, MapFly, CameraBlend, SurfaceBlend]

# How a layer participates in a boundary window: fading in, fading out,
# carrying a parameter blend, or replaced by the blended counterpart layer.
DIRECTION_IN = "in"
DIRECTION_OUT = "out"
DIRECTION_BLEND = "blend"
DIRECTION_REPLACED = "replaced"


@dataclass(frozen=True)
class LayerTransition:
    direction: str
    spec: TransitionSpec


@dataclass(frozen=True)
class VisibleLayer:
    """One rendered layer: id, opacity, and fully resolved parameters."""

    node_id: NodeId
    opacity: float
    params: dict


@dataclass(frozen=True)
class RenderState:
    """Pure evaluation result at one scroll offset."""

    visible: tuple[VisibleLayer, ...]
    total_height: float
    progress: tuple[SegmentId, float]
    active_decision: tuple[SegmentId, tuple[tuple[SegmentId, str | None], ...]] | None = None
    clamp_max_scroll: float | None = None

    def opacity_of(self, node_id: NodeId) -> float:
        for layer in self.visible:
            if layer.node_id == node_id:
                return layer.opacity
        return 0.0


@dataclass
class Timeline:
    """The planned scroll timeline for one story tree."""

    tree: StoryTree
    config: TimelineConfig
    step_extents: dict[StepKey, float]
    boundaries: dict[tuple[StepKey, StepKey], dict[NodeId, LayerTransition]]
    clamp_points: dict[tuple[SegmentId, ...], float]
    layer_params: dict[NodeId, dict] = field(default_factory=dict)

    def evaluate(self, scroll_px: float, decisions: dict[SegmentId, int] | None = None) -> RenderState:
        return _evaluate(self, scroll_px, decisions or {})

    def path_height(self, path: list[SegmentId]) -> float:
        total = 0.0
        for seg_id in path:
            for index in range(len(self.tree.segments[seg_id].steps)):
                total += self.step_extents[(seg_id, index)]
        return total


# -- easing and interpolators ---------------------------------------------------


def ease(t: float, mode: str) -> float:
    if mode == "smoothstep":
        return t * t * (3.0 - 2.0 * t)
    return t


def _lerp(a: float, b: float, t: float) -> float:
    return a + (b - a) * t


def slerp(
    q0: tuple[float, float, float, float],
    q1: tuple[float, float, float, float],
    t: float,
) -> tuple[float, float, float, float]:
    """Shortest-arc spherical interpolation of unit quaternions (w, x, y, z)."""
    dot = sum(a * b for a, b in zip(q0, q1))
    if dot < 0.0:
        q1 = tuple(-c for c in q1)
        dot = -dot
    if dot > 1.0 - 1e-12:
        # Nearly parallel (including a negated duplicate of q0): linear blend.
        out = tuple(_lerp(a, b, t) for a, b in zip(q0, q1))
    else:
        theta = math.acos(min(1.0, dot))
        sin_theta = math.sin(theta)
        w0 = math.sin((1.0 - t) * theta) / sin_theta
        w1 = math.sin(t * theta) / sin_theta
        out = tuple(w0 * a + w1 * b for a, b in zip(q0, q1))
    norm = math.sqrt(sum(c * c for c in out))
    return tuple(c / norm for c in out)


def interpolate_camera(c0: Camera, c1: Camera, t: float) -> Camera:
    """Blend two cameras: linear position and zoom, shortest-arc rotation."""
    if t <= 0.0:
        return c0
    if t >= 1.0:
        return c1
    return Camera(
        position=tuple(_lerp(a, b, t) for a, b in zip(c0.position, c1.position)),
        rotation=slerp(c0.rotation, c1.rotation, t),
        zoom=_lerp(c0.zoom, c1.zoom, t),
    )


def round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


def interpolate_params(p0, p1, t: float):
    """Blend the tweenable parameters of two same-kind, same-source payloads.

    Volume: iso value and intensity range linear, camera blended, render
    mode switching at the halfway point. Slice: index rounded half-up from
    the linear value. Surface: camera only.
    """
    if type(p0) is not type(p1):
        raise GraphError(f"cannot interpolate between kinds {type(p0).__name__} and {type(p1).__name__}")
    if isinstance(p0, Volume):
        if p0.src != p1.src:
            raise GraphError("cannot interpolate volumes with different sources")
        return Volume(
            src=p0.src,
            mode=p0.mode if t < 0.5 else p1.mode,
            iso_value=_lerp(p0.iso_value, p1.iso_value, t),
            intensity_lo=_lerp(p0.intensity_lo, p1.intensity_lo, t),
            intensity_hi=_lerp(p0.intensity_hi, p1.intensity_hi, t),
            camera=interpolate_camera(p0.camera, p1.camera, t),
        )
    if isinstance(p0, Slice):
        if p0.src != p1.src or p0.axis != p1.axis:
            raise GraphError("cannot interpolate slices with different sources or axes")
        index = max(0, round_half_up(_lerp(p0.index, p1.index, t)))
        return Slice(src=p0.src, axis=p0.axis, index=index, camera=interpolate_camera(p0.camera, p1.camera, t))
    if isinstance(p0, Surface):
        if p0.model_ref != p1.model_ref:
            raise GraphError("cannot interpolate surfaces with different models")
        return Surface(model_ref=p0.model_ref, camera=interpolate_camera(p0.camera, p1.camera, t))
    raise GraphError(f"kind {type(p0).__name__} has no tweenable parameters")


# -- smooth map flight -----------------------------------------------------------


def mercator(view: MapView) -> tuple[float, float]:
    """Project to the normalized Web-Mercator square ([0,1] x [0,1])."""
    lat = max(-_MAX_MERCATOR_LAT, min(_MAX_MERCATOR_LAT, view.lat))
    x = (view.lon + 180.0) / 360.0
    phi = math.radians(lat)
    y = (1.0 - math.log(math.tan(math.pi / 4.0 + phi / 2.0)) / math.pi) / 2.0
    return x, y


def _inverse_mercator(x: float, y: float) -> tuple[float, float]:
    lon = x * 360.0 - 180.0
    phi = 2.0 * math.atan(math.exp(math.pi * (1.0 - 2.0 * y))) - math.pi / 2.0
    lat = math.degrees(phi)
    return max(-90.0, min(90.0, lat)), max(-180.0, min(180.0, lon))


def viewport_width(zoom_level: float) -> float:
    return 2.0 ** (-zoom_level)


def map_flight(v0: MapView, v1: MapView, t: float) -> MapView:
    """Smooth optimal pan-zoom path between two map views.

    The path minimizes perceived motion in the projected plane: the view
    zooms out, pans across, and zooms back in along a closed-form curve,
    parametrized proportionally to perceptual arc length. Coincident
    centers degenerate to a pure exponential zoom.
    """
    if t <= 0.0:
        return v0
    if t >= 1.0:
        return v1
    x0, y0 = mercator(v0)
    x1, y1 = mercator(v1)
    w0 = viewport_width(v0.zoom_level)
    w1 = viewport_width(v1.zoom_level)
    dist = math.hypot(x1 - x0, y1 - y0)

    if dist < 1e-12:
        if abs(v1.zoom_level - v0.zoom_level) < 1e-12:
            return v0
        zoom = _lerp(v0.zoom_level, v1.zoom_level, t)  # exponential in width
        lat, lon = _inverse_mercator(x0, y0)
        return MapView(lat=lat, lon=lon, zoom_level=zoom)

    rho_sq = RHO * RHO
    b0 = (w1 * w1 - w0 * w0 + rho_sq * rho_sq * dist * dist) / (2.0 * w0 * rho_sq * dist)
    b1 = (w1 * w1 - w0 * w0 - rho_sq * rho_sq * dist * dist) / (2.0 * w1 * rho_sq * dist)
    r0 = math.asinh(-b0)
    r1 = math.asinh(-b1)
    total = (r1 - r0) / RHO
    s = t * total

    u = (w0 / rho_sq) * math.cosh(r0) * math.tanh(RHO * s + r0) - (w0 / rho_sq) * math.sinh(r0)
    w = w0 * math.cosh(r0) / math.cosh(RHO * s + r0)

    frac = u / dist
    x = x0 + (x1 - x0) * frac
    y = y0 + (y1 - y0) * frac
    lat, lon = _inverse_mercator(x, y)
    return MapView(lat=lat, lon=lon, zoom_level=-math.log2(w))


# -- transition classification ----------------------------------------------------


def _blend_spec(kind0, kind1) -> TransitionSpec | None:
    """A single blend spec for same-kind, same-source continuous media, else None."""
    if isinstance(kind0, Volume) and isinstance(kind1, Volume) and kind0.src == kind1.src:
        return CameraBlend(
            from_camera=kind0.camera,
            to_camera=kind1.camera,
            scalars=(
                ("isoValue", kind0.iso_value, kind1.iso_value),
                ("intensityLo", kind0.intensity_lo, kind1.intensity_lo),
                ("intensityHi", kind0.intensity_hi, kind1.intensity_hi),
            ),
            discrete=(("mode", kind0.mode, kind1.mode),),
        )
    if isinstance(kind0, Slice) and isinstance(kind1, Slice) and kind0.src == kind1.src and kind0.axis == kind1.axis:
        return CameraBlend(
            from_camera=kind0.camera,
            to_camera=kind1.camera,
            integers=(("index", kind0.index, kind1.index),),
        )
    if isinstance(kind0, Surface) and isinstance(kind1, Surface) and kind0.model_ref == kind1.model_ref:
        return SurfaceBlend(from_camera=kind0.camera, to_camera=kind1.camera)
    if isinstance(kind0, Map) and isinstance(kind1, Map):
        return MapFly(
            from_view=MapView(kind0.lat, kind0.lon, kind0.zoom_level),
            to_view=MapView(kind1.lat, kind1.lon, kind1.zoom_level),
        )
    return None


def classify_transition(prev: Step, next_step: Step, graph: StoryGraph) -> dict[NodeId, LayerTransition]:
    """Decide per layer what happens across one step boundary.

    Layers present on both sides persist at full opacity and get no entry.
    When the exiting and entering owners are same-source continuous media,
    one blend spec replaces their crossfade pair; the entering layer
    carries the blend and the exiting layer is marked replaced.
    """
    prev_set = set(prev.layers)
    next_set = set(next_step.layers)
    result: dict[NodeId, LayerTransition] = {}

    exiting_owner = prev.owner
    entering_owner = next_step.owner
    if exiting_owner not in next_set and entering_owner not in prev_set:
        blend = _blend_spec(graph.node(exiting_owner).kind, graph.node(entering_owner).kind)
        if blend is not None:
            result[entering_owner] = LayerTransition(DIRECTION_BLEND, blend)
            result[exiting_owner] = LayerTransition(DIRECTION_REPLACED, blend)

    for layer in prev.layers:
        if layer in next_set or layer in result:
            continue
        result[layer] = LayerTransition(DIRECTION_OUT, Crossfade())
    for layer in next_step.layers:
        if layer in prev_set or layer in result:
            continue
        kind = graph.node(layer).kind
        if isinstance(kind, Map):
            view = MapView(kind.lat, kind.lon, kind.zoom_level)
            spec = MapEnter(to_view=view, start_zoom=max(1.0, kind.zoom_level - 4.0))
            result[layer] = LayerTransition(DIRECTION_IN, spec)
        elif kind.kind in ("video", "audio"):
            result[layer] = LayerTransition(DIRECTION_IN, VideoTrigger())
        else:
            result[layer] = LayerTransition(DIRECTION_IN, Crossfade())
    return result


# -- planning ----------------------------------------------------------------------


def _camera_dict(camera: Camera) -> dict:
    return {"position": list(camera.position), "rotation": list(camera.rotation), "zoom": camera.zoom}


def node_params(graph: StoryGraph, node_id: NodeId) -> dict:
    """JSON-style resolved parameters for one node, keyed like the descriptor."""
    kind = graph.node(node_id).kind
    tag = kind.kind
    if tag == "text":
        return {"kind": tag, "content": kind.content, "hAlign": kind.h_align, "vAlign": kind.v_align}
    if tag in ("image", "video"):
        return {"kind": tag, "src": kind.src, "position": kind.position, "size": kind.size}
    if tag == "audio":
        return {"kind": tag, "src": kind.src}
    if tag == "map":
        return {"kind": tag, "lat": kind.lat, "lon": kind.lon, "zoomLevel": kind.zoom_level}
    if tag == "volume":
        return {
            "kind": tag,
            "src": kind.src,
            "mode": kind.mode,
            "isoValue": kind.iso_value,
            "intensityLo": kind.intensity_lo,
            "intensityHi": kind.intensity_hi,
            "camera": _camera_dict(kind.camera),
        }
    if tag == "slice":
        return {"kind": tag, "src": kind.src, "axis": kind.axis, "index": kind.index, "camera": _camera_dict(kind.camera)}
    if tag == "surface":
        return {"kind": tag, "modelRef": kind.model_ref, "camera": _camera_dict(kind.camera)}
    return {"kind": tag, "prompt": kind.prompt}


def plan(tree: StoryTree, config: TimelineConfig | None = None) -> Timeline:
    """Compile a story tree into its scroll timeline.

    Every step takes its owner's extent override or the configured node
    extent; every adjacent step pair on every path gets a boundary entry;
    every decision gets a clamp point half a window before its step ends.
    """
    config = config or TimelineConfig()
    graph = tree.graph
    window = config.transition_window_px

    step_extents: dict[StepKey, float] = {}
    for segment in tree.segments.values():
        for index, step in enumerate(segment.steps):
            node = graph.node(step.owner)
            extent = node.extent_override if node.extent_override is not None else config.node_extent_px
            if extent < window:
                raise GraphError(
                    f"step extent {extent} px of node {step.owner!r} is smaller than the {window} px transition window"
                )
            step_extents[(segment.id, index)] = extent

    boundaries: dict[tuple[StepKey, StepKey], dict[NodeId, LayerTransition]] = {}
    for segment in tree.segments.values():
        for index in range(len(segment.steps) - 1):
            key = ((segment.id, index), (segment.id, index + 1))
            boundaries[key] = classify_transition(segment.steps[index], segment.steps[index + 1], graph)
        last = (segment.id, len(segment.steps) - 1)
        for child_id, _ in tree.children.get(segment.id, ()):
            child = tree.segments[child_id]
            boundaries[(last, (child_id, 0))] = classify_transition(segment.steps[-1], child.steps[0], graph)

    clamp_points: dict[tuple[SegmentId, ...], float] = {}

    def walk(segment_id: SegmentId, prefix: tuple[SegmentId, ...], height: float) -> None:
        segment = tree.segments[segment_id]
        prefix = prefix + (segment_id,)
        for index in range(len(segment.steps)):
            height += step_extents[(segment_id, index)]
        if segment.is_decision:
            clamp_points[prefix] = height - window / 2.0
        for child_id, _ in tree.children.get(segment_id, ()):
            walk(child_id, prefix, height)

    if tree.segments:
        walk(tree.root, (), 0.0)

    layer_params = {node_id: node_params(graph, node_id) for node_id in graph.nodes}
    return Timeline(
        tree=tree,
        config=config,
        step_extents=step_extents,
        boundaries=boundaries,
        clamp_points=clamp_points,
        layer_params=layer_params,
    )


# -- evaluation --------------------------------------------------------------------


def _resolve_blend_params(timeline: Timeline, node_id: NodeId, trans: LayerTransition, t: float) -> dict:
    params = dict(timeline.layer_params[node_id])
    spec = trans.spec
    if isinstance(spec, MapEnter):
        params["zoomLevel"] = _lerp(spec.start_zoom, spec.to_view.zoom_level, t)
    elif isinstance(spec, MapFly):
        view = map_flight(spec.from_view, spec.to_view, t)
        params.update({"lat": view.lat, "lon": view.lon, "zoomLevel": view.zoom_level})
    elif isinstance(spec, (CameraBlend, SurfaceBlend)):
        params["camera"] = _camera_dict(interpolate_camera(spec.from_camera, spec.to_camera, t))
        if isinstance(spec, CameraBlend):
            for name, a, b in spec.scalars:
                params[name] = _lerp(a, b, t)
            for name, a, b in spec.integers:
                params[name] = max(0, round_half_up(_lerp(a, b, t)))
            for name, a, b in spec.discrete:
                params[name] = a if t < 0.5 else b
    return params


def _evaluate(timeline: Timeline, scroll_px: float, decisions: dict[SegmentId, int]) -> RenderState:
    tree = timeline.tree
    window = timeline.config.transition_window_px

    # Hook the path implied by the recorded decisions.
    path: list[SegmentId] = []
    steps: list[tuple[StepKey, Step]] = []
    pending: SegmentId | None = None
    seg = tree.root
    while True:
        path.append(seg)
        segment = tree.segments[seg]
        for index, step in enumerate(segment.steps):
            steps.append(((seg, index), step))
        children = tree.children.get(seg, ())
        if not children:
            break
        if segment.is_decision:
            if seg not in decisions:
                pending = seg
                break
            choice = decisions[seg]
            if not 0 <= choice < len(children):
                raise GraphError(f"decision index {choice} out of range for segment {seg!r} with {len(children)} options")
            seg = children[choice][0]
        else:
            seg = children[0][0]

    offsets = [0.0]
    for key, _ in steps:
        offsets.append(offsets[-1] + timeline.step_extents[key])
    total = offsets[-1]

    clamp = None
    active = None
    if pending is not None:
        clamp = timeline.clamp_points[tuple(path)]

    s = max(0.0, min(float(scroll_px), total))
    if clamp is not None:
        if scroll_px >= clamp:
            active = (pending, tree.children[pending])
        s = min(s, clamp)

    index = bisect_right(offsets, s) - 1
    if index >= len(steps):
        index = len(steps) - 1

    in_window = None  # (boundary index k, local eased t)
    if index >= 1 and s < offsets[index] + window / 2.0:
        in_window = (index, s)
    elif index + 1 < len(steps) and s >= offsets[index + 1] - window / 2.0:
        in_window = (index + 1, s)

    visible: list[VisibleLayer] = []
    if in_window is None:
        for layer in steps[index][1].layers:
            visible.append(VisibleLayer(layer, 1.0, dict(timeline.layer_params[layer])))
    else:
        k, _ = in_window
        boundary = offsets[k]
        t = ease((s - (boundary - window / 2.0)) / window, timeline.config.easing)
        prev_key, prev_step = steps[k - 1]
        next_key, next_step = steps[k]
        table = timeline.boundaries[(prev_key, next_key)]
        merged = list(prev_step.layers) + [l for l in next_step.layers if l not in prev_step.layers]
        for layer in merged:
            trans = table.get(layer)
            if trans is None:
                visible.append(VisibleLayer(layer, 1.0, dict(timeline.layer_params[layer])))
            elif trans.direction == DIRECTION_OUT:
                if 1.0 - t > 0.0:
                    visible.append(VisibleLayer(layer, 1.0 - t, dict(timeline.layer_params[layer])))
            elif trans.direction == DIRECTION_IN:
                if t > 0.0:
                    visible.append(VisibleLayer(layer, t, _resolve_blend_params(timeline, layer, trans, t)))
            elif trans.direction == DIRECTION_BLEND:
                visible.append(VisibleLayer(layer, 1.0, _resolve_blend_params(timeline, layer, trans, t)))
            # DIRECTION_REPLACED layers are hidden; the blend layer shows instead.

    seg_id = steps[index][0][0]
    seg_start = None
    seg_extent = 0.0
    for pos, (key, _) in enumerate(steps):
        if key[0] == seg_id:
            if seg_start is None:
                seg_start = offsets[pos]
            seg_extent += timeline.step_extents[key]
    fraction = 1.0 if s >= total else (s - seg_start) / seg_extent
    fraction = max(0.0, min(1.0, fraction))

    return RenderState(
        visible=tuple(visible),
        total_height=total,
        progress=(seg_id, fraction),
        active_decision=active,
        clamp_max_scroll=clamp,
    )
