"""Emit a deployable website bundle from a planned story.

The bundle is self-contained: an entry page, a stylesheet, the story
descriptor (`story.json`), content-addressed copies of every referenced
asset, and a `runtime.js` that plays the story in the browser. Output is
deterministic: identical inputs produce byte-identical bundles.
"""

from __future__ import annotations

import hashlib
import html
import json
import zipfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from scrollstory.model import Diagnostic, NodeId, StoryError
from scrollstory.timeline import (
    CameraBlend,
    Crossfade,
    LayerTransition,
    MapEnter,
    MapFly,
    MapView,
    StepKey,
    SurfaceBlend,
    Timeline,
    TimelineConfig,
    VideoTrigger,
    plan,
)
from scrollstory.tree import build_tree
from scrollstory.xmlio import StoryDocument

DESCRIPTOR_VERSION = 1

# Node kinds whose src/model_ref parameter names a file under the assets root.
_ASSET_FIELDS = {"image": "src", "video": "src", "audio": "src", "volume": "src", "slice": "src", "surface": "model_ref"}

_INDEX_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8"/>
<meta name="viewport" content="width=device-width, initial-scale=1"/>
<title>{title}</title>
<link rel="stylesheet" href="style.css"/>
</head>
<body>
<div id="story-root" data-story="story.json"></div>
<script src="runtime.js"></script>
</body>
</html>
"""


class CompileError(StoryError):
    """Story compilation failed; carries diagnostics when available."""

    def __init__(self, message: str, diagnostics: list[Diagnostic] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


@dataclass(frozen=True)
class CompileConfig:
    """Site compilation settings."""

    timeline: TimelineConfig = field(default_factory=TimelineConfig)
    output: str = "directory"
    runtime_bundle_path: Path | None = None
    title: str = "Untitled Story"

    def __post_init__(self) -> None:
        if self.output not in ("directory", "zip"):
            raise CompileError(f"output must be 'directory' or 'zip', got {self.output!r}")


@dataclass
class SiteBundle:
    """In-memory website: relative path -> bytes, plus a checksum manifest."""

    files: dict[str, bytes] = field(default_factory=dict)

    @property
    def manifest(self) -> list[tuple[str, int, str]]:
        return [(path, len(data), hashlib.sha256(data).hexdigest()) for path, data in sorted(self.files.items())]


def _camera_json(camera) -> dict:
    return {"position": list(camera.position), "rotation": list(camera.rotation), "zoom": camera.zoom}


def _view_json(view: MapView) -> dict:
    return {"lat": view.lat, "lon": view.lon, "zoomLevel": view.zoom_level}


def _transition_json(trans: LayerTransition) -> dict:
    spec = trans.spec
    out: dict = {"direction": trans.direction, "kind": spec.tag}
    if isinstance(spec, MapEnter):
        out["toView"] = _view_json(spec.to_view)
        out["startZoom"] = spec.start_zoom
    elif isinstance(spec, MapFly):
        out["fromView"] = _view_json(spec.from_view)
        out["toView"] = _view_json(spec.to_view)
    elif isinstance(spec, CameraBlend):
        out["fromCamera"] = _camera_json(spec.from_camera)
        out["toCamera"] = _camera_json(spec.to_camera)
        out["scalars"] = [list(entry) for entry in spec.scalars]
        out["integers"] = [list(entry) for entry in spec.integers]
        out["discrete"] = [list(entry) for entry in spec.discrete]
    elif isinstance(spec, SurfaceBlend):
        out["fromCamera"] = _camera_json(spec.from_camera)
        out["toCamera"] = _camera_json(spec.to_camera)
    elif not isinstance(spec, (Crossfade, VideoTrigger)):
        raise CompileError(f"unknown transition spec {spec!r}")
    return out


def build_descriptor(timeline: Timeline, title: str, asset_paths: dict[NodeId, str]) -> dict:
    """Assemble the story.json structure from a planned timeline."""
    tree = timeline.tree
    step_uids: dict[StepKey, int] = {}
    segments_json = []
    for segment in tree.segments.values():
        steps_json = []
        for index, step in enumerate(segment.steps):
            uid = len(step_uids)
            step_uids[(segment.id, index)] = uid
            steps_json.append(
                {
                    "uid": uid,
                    "owner": step.owner,
                    "layers": list(step.layers),
                    "extentPx": timeline.step_extents[(segment.id, index)],
                }
            )
        segments_json.append(
            {"id": segment.id, "headKind": segment.kind_icon, "isDecision": segment.is_decision, "steps": steps_json}
        )

    transitions_json = {}
    for (prev_key, next_key), table in timeline.boundaries.items():
        key = f"{step_uids[prev_key]}>{step_uids[next_key]}"
        transitions_json[key] = {layer: _transition_json(trans) for layer, trans in table.items()}

    layers_json = {}
    for node_id, params in timeline.layer_params.items():
        entry = dict(params)
        if node_id in asset_paths:
            entry["assetPath"] = asset_paths[node_id]
        layers_json[node_id] = entry

    return {
        "version": DESCRIPTOR_VERSION,
        "title": title,
        "config": {
            "nodeExtentPx": timeline.config.node_extent_px,
            "transitionWindowPx": timeline.config.transition_window_px,
            "easing": timeline.config.easing,
        },
        "root": tree.root,
        "segments": segments_json,
        "treeChildren": {
            seg_id: [{"id": child, "label": label} for child, label in children]
            for seg_id, children in tree.children.items()
        },
        "transitions": transitions_json,
        "layers": layers_json,
    }


def _collect_assets(doc: StoryDocument, assets_root: Path) -> tuple[dict[NodeId, str], dict[str, bytes]]:
    """Read every referenced asset and give it a content-addressed bundle path."""
    root = assets_root.resolve()
    node_paths: dict[NodeId, str] = {}
    files: dict[str, bytes] = {}
    for node_id in sorted(doc.graph.nodes):
        node = doc.graph.nodes[node_id]
        fld = _ASSET_FIELDS.get(node.kind.kind)
        if fld is None:
            continue
        raw = getattr(node.kind, fld)
        candidate = (root / raw).resolve()
        if not candidate.is_relative_to(root):
            raise CompileError(f"node {node_id}: asset path escapes the assets root: {raw!r}")
        if not candidate.is_file():
            raise CompileError(f"node {node_id}: asset not found: {raw!r}")
        data = candidate.read_bytes()
        digest = hashlib.sha256(data).hexdigest()[:16]
        suffix = candidate.suffix.lower()
        rel = f"assets/{digest}{suffix}"
        files[rel] = data
        node_paths[node_id] = rel
    return node_paths, files


def _runtime_bytes(cfg: CompileConfig) -> bytes:
    if cfg.runtime_bundle_path is not None:
        path = Path(cfg.runtime_bundle_path)
        try:
            return path.read_bytes()
        except OSError as exc:
            raise CompileError(f"cannot read runtime bundle {path}: {exc}") from exc
    return resources.files("scrollstory").joinpath("data/runtime_stub.js").read_bytes()


def _stylesheet() -> bytes:
    return resources.files("scrollstory").joinpath("data/style.css").read_bytes()


def compile_site(doc: StoryDocument, assets_root: Path | str, cfg: CompileConfig | None = None) -> SiteBundle:
    """Compile a story document plus its media into a website bundle.

    Raises CompileError on validation errors, missing assets, or an
    unreadable runtime bundle.
    """
    cfg = cfg or CompileConfig()
    errors = [d for d in doc.graph.validate() if d.severity == "error"]
    if errors:
        raise CompileError(f"story is invalid: {errors[0]}", errors)

    tree = build_tree(doc.graph)
    timeline = plan(tree, cfg.timeline)
    asset_paths, asset_files = _collect_assets(doc, Path(assets_root))
    descriptor = build_descriptor(timeline, cfg.title, asset_paths)

    try:
        descriptor_bytes = (json.dumps(descriptor, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")
    except (TypeError, ValueError) as exc:
        raise CompileError(f"descriptor serialization failed: {exc}") from exc

    bundle = SiteBundle()
    bundle.files["index.html"] = _INDEX_TEMPLATE.format(title=html.escape(cfg.title)).encode("utf-8")
    bundle.files["style.css"] = _stylesheet()
    bundle.files["story.json"] = descriptor_bytes
    bundle.files["runtime.js"] = _runtime_bytes(cfg)
    bundle.files.update(asset_files)
    return bundle


def write_bundle(bundle: SiteBundle, destination: Path | str, as_zip: bool | None = None) -> None:
    """Write a bundle as a directory tree or a single zip archive.

    Zip metadata carries fixed timestamps, so re-running over unchanged
    inputs is byte-idempotent in both modes.
    """
    destination = Path(destination)
    if as_zip is None:
        as_zip = destination.suffix == ".zip"
    try:
        if as_zip:
            destination.parent.mkdir(parents=True, exist_ok=True)
            with zipfile.ZipFile(destination, "w") as archive:
                for path, data in sorted(bundle.files.items()):
                    info = zipfile.ZipInfo(path, date_time=(1980, 1, 1, 0, 0, 0))
                    info.compress_type = zipfile.ZIP_DEFLATED
                    info.external_attr = 0o644 << 16
                    archive.writestr(info, data)
        else:
            for path, data in sorted(bundle.files.items()):
                target = destination / path
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_bytes(data)
    except OSError as exc:
        raise CompileError(f"cannot write bundle to {destination}: {exc}") from exc


def _is_relative_ref(ref: str) -> bool:
    if not ref or ref.startswith(("/", "\\")) or "://" in ref:
        return False
    return ".." not in Path(ref).parts


def link_check(bundle: SiteBundle) -> list[Diagnostic]:
    """Verify every intra-bundle reference resolves; empty list on success."""
    diags: list[Diagnostic] = []

    if "index.html" not in bundle.files:
        diags.append(Diagnostic("error", "index.html", "missing entry page"))
    else:
        page = bundle.files["index.html"].decode("utf-8", errors="replace")
        for ref in ("style.css", "runtime.js", "story.json"):
            if ref not in page:
                diags.append(Diagnostic("error", "index.html", f"entry page does not reference {ref}"))
            elif ref not in bundle.files:
                diags.append(Diagnostic("error", "index.html", f"referenced file missing from bundle: {ref}"))

    if "story.json" in bundle.files:
        try:
            descriptor = json.loads(bundle.files["story.json"])
        except ValueError as exc:
            diags.append(Diagnostic("error", "story.json", f"descriptor is not valid JSON: {exc}"))
            return diags
        for node_id, layer in sorted(descriptor.get("layers", {}).items()):
            ref = layer.get("assetPath")
            if ref is None:
                continue
            if not _is_relative_ref(ref):
                diags.append(Diagnostic("error", f"node {node_id}", f"non-relative reference {ref!r}"))
            elif ref not in bundle.files:
                diags.append(Diagnostic("error", f"node {node_id}", f"asset missing from bundle: {ref!r}"))
    return diags
