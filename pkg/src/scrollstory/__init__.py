"""scrollstory: compile story graphs into scroll-driven branching websites."""

from scrollstory.model import (
    Audio,
    Camera,
    Decision,
    Diagnostic,
    Edge,
    GraphError,
    Image,
    Map,
    NodeId,
    NodeKind,
    Slice,
    StoryError,
    StoryGraph,
    StoryNode,
    Surface,
    Text,
    Video,
    Volume,
)
from scrollstory.xmlio import ParseError, StoryDocument, emit, parse
from scrollstory.tree import Step, StorySegment, StoryTree, build_tree, enumerate_paths, flatten_segment
from scrollstory.timeline import (
    MapView,
    RenderState,
    Timeline,
    TimelineConfig,
    interpolate_camera,
    interpolate_params,
    map_flight,
    plan,
)
from scrollstory.site import CompileConfig, CompileError, SiteBundle, compile_site, link_check, write_bundle

__version__ = "0.1.0"

__all__ = [
    "Audio",
    "Camera",
    "CompileConfig",
    "CompileError",
    "Decision",
    "Diagnostic",
    "Edge",
    "GraphError",
    "Image",
    "Map",
    "MapView",
    "NodeId",
    "NodeKind",
    "ParseError",
    "RenderState",
    "SiteBundle",
    "Slice",
    "Step",
    "StoryDocument",
    "StoryError",
    "StoryGraph",
    "StoryNode",
    "StorySegment",
    "StoryTree",
    "Surface",
    "Text",
    "Timeline",
    "TimelineConfig",
    "Video",
    "Volume",
    "build_tree",
    "compile_site",
    "emit",
    "enumerate_paths",
    "flatten_segment",
    "interpolate_camera",
    "interpolate_params",
    "link_check",
    "map_flight",
    "parse",
    "plan",
    "write_bundle",
]
