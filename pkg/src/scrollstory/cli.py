"""Command-line front end: validate, compile, inspect, report, new."""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys
from enum import IntEnum
from pathlib import Path

from scrollstory.model import Diagnostic, StoryError
from scrollstory.site import CompileConfig, SiteBundle, compile_site, link_check, write_bundle
from scrollstory.timeline import TimelineConfig, plan
from scrollstory.tree import build_tree, enumerate_paths
from scrollstory.xmlio import ParseError, StoryDocument, parse


class ExitStatus(IntEnum):
    OK = 0
    DIAGNOSTICS = 1
    USAGE = 2


# 1x1 transparent PNG, used for scaffolded placeholder assets.
_PLACEHOLDER_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNk+M9QDwADhgGAWjR9awAAAABJRU5ErkJggg=="
)

_SAMPLE_STORY = """<story version="1">
  <node id="intro" kind="image" x="0" y="0">
    <param name="src">ruins.png</param>
    <param name="position">center</param>
    <param name="size">large</param>
  </node>
  <node id="intro-text" kind="text" x="0" y="120">
    <param name="content">Stone walls rise from the savanna. Scroll to explore the site.</param>
    <param name="h-align">left</param>
    <param name="v-align">middle</param>
  </node>
  <node id="overview" kind="map" x="220" y="0">
    <param name="lat">-20.267</param>
    <param name="lon">30.934</param>
    <param name="zoom-level">5</param>
  </node>
  <node id="site" kind="map" x="440" y="0">
    <param name="lat">-20.2675</param>
    <param name="lon">30.9336</param>
    <param name="zoom-level">14</param>
  </node>
  <node id="fork" kind="decision" x="660" y="0">
    <param name="prompt">Which part of the site do you want to visit?</param>
  </node>
  <node id="tower" kind="image" x="880" y="-80">
    <param name="src">tower.png</param>
    <param name="position">center</param>
    <param name="size">large</param>
  </node>
  <node id="tower-text" kind="text" x="880" y="40">
    <param name="content">The conical tower, seen from the inner passage.</param>
  </node>
  <node id="walls" kind="image" x="880" y="160">
    <param name="src">walls.png</param>
    <param name="position">center</param>
    <param name="size">large</param>
  </node>
  <edge from="intro" from-port="sub-out" to="intro-text" to-port="sub-in"/>
  <edge from="intro" from-port="main-out" to="overview" to-port="main-in"/>
  <edge from="overview" from-port="main-out" to="site" to-port="main-in"/>
  <edge from="site" from-port="main-out" to="fork" to-port="main-in"/>
  <edge from="fork" from-port="main-out" to="tower" to-port="main-in" label="The tower"/>
  <edge from="fork" from-port="main-out" to="walls" to-port="main-in" label="The walls"/>
  <edge from="tower" from-port="sub-out" to="tower-text" to-port="sub-in"/>
</story>
"""


def _print_diagnostics(diagnostics: list[Diagnostic]) -> None:
    for diag in diagnostics:
        print(str(diag), file=sys.stderr)


def _diag_json(diag: Diagnostic) -> dict:
    return {"severity": diag.severity, "ref": diag.ref, "message": diag.message, "line": diag.line, "column": diag.column}


def _load(path: str, lenient: bool) -> StoryDocument:
    data = Path(path).read_bytes()
    return parse(data, lenient=lenient)


def _timeline_config(args: argparse.Namespace) -> TimelineConfig:
    return TimelineConfig(
        node_extent_px=args.node_extent,
        transition_window_px=args.transition_window,
        easing=args.easing,
    )


def _add_timeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--node-extent", type=float, default=3000.0, metavar="PX", help="scroll extent per story node (default 3000)")
    parser.add_argument("--transition-window", type=float, default=1000.0, metavar="PX", help="crossfade window width (default 1000)")
    parser.add_argument("--easing", choices=("linear", "smoothstep"), default="linear")


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        doc = _load(args.file, args.lenient)
    except ParseError as exc:
        if args.format == "json":
            print(json.dumps({"errors": [_diag_json(d) for d in exc.diagnostics if d.severity == "error"],
                              "warnings": [_diag_json(d) for d in exc.diagnostics if d.severity == "warning"]}, indent=2))
        else:
            _print_diagnostics(exc.diagnostics)
            errors = sum(1 for d in exc.diagnostics if d.severity == "error")
            warnings = len(exc.diagnostics) - errors
            print(f"{errors} errors, {warnings} warnings")
        return ExitStatus.DIAGNOSTICS

    warnings = list(doc.warnings) + doc.graph.validate()
    if args.format == "json":
        print(json.dumps({"errors": [], "warnings": [_diag_json(d) for d in warnings]}, indent=2))
    else:
        _print_diagnostics(warnings)
        print(f"0 errors, {len(warnings)} warnings")
    return ExitStatus.OK


def _inspect_payload(doc: StoryDocument, config: TimelineConfig) -> dict:
    from scrollstory.site import build_descriptor

    tree = build_tree(doc.graph)
    timeline = plan(tree, config)
    descriptor = build_descriptor(timeline, title="", asset_paths={})
    paths = enumerate_paths(tree)
    heights = [timeline.path_height(path) for path in paths]
    step_counts = [sum(len(tree.segments[seg].steps) for seg in path) for path in paths]
    return {
        "root": descriptor["root"],
        "segments": descriptor["segments"],
        "treeChildren": descriptor["treeChildren"],
        "paths": [
            {"segments": path, "steps": steps, "heightPx": height}
            for path, steps, height in zip(paths, step_counts, heights)
        ],
        "stats": {
            "nodes": len(doc.graph.nodes),
            "edges": len(doc.graph.edges),
            "segments": len(tree.segments),
            "decisions": sum(1 for seg in tree.segments.values() if seg.is_decision),
            "paths": len(paths),
            "minHeightPx": min(heights),
            "maxHeightPx": max(heights),
        },
    }


def _cmd_inspect(args: argparse.Namespace) -> int:
    try:
        doc = _load(args.file, lenient=False)
        payload = _inspect_payload(doc, _timeline_config(args))
    except (ParseError, StoryError) as exc:
        if isinstance(exc, ParseError):
            _print_diagnostics(exc.diagnostics)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return ExitStatus.DIAGNOSTICS

    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
        return ExitStatus.OK

    sections = {"tree": args.tree, "paths": args.paths, "stats": args.stats}
    if not any(sections.values()):
        sections = {key: True for key in sections}

    if sections["tree"]:
        print(f"root: {payload['root']}")
        for segment in payload["segments"]:
            marker = " (decision)" if segment["isDecision"] else ""
            print(f"segment {segment['id']} [{segment['headKind']}]{marker}")
            for step in segment["steps"]:
                print(f"  step {step['uid']}: [{', '.join(step['layers'])}]  {step['extentPx']:.0f} px")
            children = payload["treeChildren"].get(segment["id"], [])
            for child in children:
                label = f" ({child['label']})" if child["label"] else ""
                print(f"  -> {child['id']}{label}")
    if sections["paths"]:
        for number, path in enumerate(payload["paths"], start=1):
            print(f"path {number}: {' > '.join(path['segments'])}  ({path['steps']} steps, {path['heightPx']:.0f} px)")
    if sections["stats"]:
        for key, value in payload["stats"].items():
            print(f"{key}: {value}")
    return ExitStatus.OK


def _cmd_compile(args: argparse.Namespace) -> int:
    runtime = args.runtime or os.environ.get("SCROLLY_RUNTIME")
    title = args.title or Path(args.file).name.split(".")[0].replace("-", " ").replace("_", " ").title()
    try:
        doc = _load(args.file, args.lenient)
        cfg = CompileConfig(
            timeline=_timeline_config(args),
            output="zip" if args.zip else "directory",
            runtime_bundle_path=Path(runtime) if runtime else None,
            title=title,
        )
        bundle = compile_site(doc, Path(args.assets), cfg)
        problems = link_check(bundle)
        if problems:
            _print_diagnostics(problems)
            return ExitStatus.DIAGNOSTICS
        destination = Path(args.out)
        if args.zip and destination.suffix != ".zip":
            destination = destination.with_suffix(".zip")
        write_bundle(bundle, destination, as_zip=args.zip)
    except ParseError as exc:
        _print_diagnostics(exc.diagnostics)
        return ExitStatus.DIAGNOSTICS
    except StoryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ExitStatus.DIAGNOSTICS
    print(f"wrote {len(bundle.files)} files to {destination}")
    return ExitStatus.OK


def _cmd_report(args: argparse.Namespace) -> int:
    from scrollstory.report import write_report

    try:
        doc = _load(args.file, lenient=False)
        tree = build_tree(doc.graph)
        timeline = plan(tree, _timeline_config(args))
        written = write_report(timeline, Path(args.out), samples=args.samples, dpi=args.dpi)
    except ParseError as exc:
        _print_diagnostics(exc.diagnostics)
        return ExitStatus.DIAGNOSTICS
    except StoryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ExitStatus.DIAGNOSTICS
    for path in written:
        print(path)
    return ExitStatus.OK


def _cmd_new(args: argparse.Namespace) -> int:
    target = Path(args.dir)
    story_path = target / "sample.story.xml"
    if story_path.exists():
        print(f"error: {story_path} already exists", file=sys.stderr)
        return ExitStatus.DIAGNOSTICS
    assets = target / "assets"
    assets.mkdir(parents=True, exist_ok=True)
    story_path.write_text(_SAMPLE_STORY, encoding="utf-8")
    for name in ("ruins.png", "tower.png", "walls.png"):
        (assets / name).write_bytes(_PLACEHOLDER_PNG)
    print(f"scaffolded {story_path}")
    print(f"next: scrollstory compile {story_path} --assets {assets} --out {target / 'site'}")
    return ExitStatus.OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scrollstory", description="Compile story graphs into scrollytelling websites.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a story file and print diagnostics")
    p_validate.add_argument("file")
    p_validate.add_argument("--lenient", action="store_true", help="skip unknown XML constructs with warnings")
    p_validate.add_argument("--format", choices=("text", "json"), default="text")
    p_validate.set_defaults(func=_cmd_validate)

    p_compile = sub.add_parser("compile", help="compile a story plus assets into a website bundle")
    p_compile.add_argument("file")
    p_compile.add_argument("--assets", required=True, metavar="DIR")
    p_compile.add_argument("--out", required=True, metavar="DIR")
    p_compile.add_argument("--zip", action="store_true", help="write a zip archive instead of a directory")
    p_compile.add_argument("--runtime", metavar="FILE", help="runtime bundle to embed (default: $SCROLLY_RUNTIME or built-in stub)")
    p_compile.add_argument("--title", metavar="TEXT")
    p_compile.add_argument("--lenient", action="store_true")
    _add_timeline_flags(p_compile)
    p_compile.set_defaults(func=_cmd_compile)

    p_inspect = sub.add_parser("inspect", help="print segments, layer stacks, paths, and heights")
    p_inspect.add_argument("file")
    p_inspect.add_argument("--paths", action="store_true")
    p_inspect.add_argument("--tree", action="store_true")
    p_inspect.add_argument("--stats", action="store_true")
    p_inspect.add_argument("--format", choices=("text", "json"), default="text")
    _add_timeline_flags(p_inspect)
    p_inspect.set_defaults(func=_cmd_inspect)

    p_report = sub.add_parser("report", help="render story tree and opacity track figures plus CSV samples")
    p_report.add_argument("file")
    p_report.add_argument("--out", required=True, metavar="DIR")
    p_report.add_argument("--samples", type=int, default=600)
    p_report.add_argument("--dpi", type=int, default=150)
    _add_timeline_flags(p_report)
    p_report.set_defaults(func=_cmd_report)

    p_new = sub.add_parser("new", help="scaffold a sample story with placeholder assets")
    p_new.add_argument("dir")
    p_new.set_defaults(func=_cmd_new)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else ExitStatus.USAGE
    try:
        return int(args.func(args))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ExitStatus.DIAGNOSTICS


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
