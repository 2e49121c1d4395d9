"""Render story diagnostics as figures and delimited samples.

The report path draws the compiled story tree and, for every root-to-leaf
path, the per-layer opacity tracks over scroll space. Alongside each
figure a CSV carries the sampled values so the numbers can be diffed or
post-processed without re-running the toolchain.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from scrollstory.timeline import Timeline
from scrollstory.tree import SegmentId, StoryTree, enumerate_paths

_KIND_COLORS = {
    "text": "#7f8c99",
    "image": "#4c8cbf",
    "video": "#bf7f4c",
    "audio": "#8c6dbf",
    "map": "#4cbf8c",
    "volume": "#bf4c6d",
    "slice": "#bf9c4c",
    "surface": "#5cbf4c",
    "decision": "#e0c341",
}


def _tree_layout(tree: StoryTree) -> dict[SegmentId, tuple[float, float]]:
    """Leaves get sequential x slots, parents center over their children."""
    positions: dict[SegmentId, tuple[float, float]] = {}
    next_x = [0.0]

    def place(seg_id: SegmentId, depth: int) -> float:
        children = tree.child_segments(seg_id)
        if not children:
            x = next_x[0]
            next_x[0] += 1.0
        else:
            xs = [place(child, depth + 1) for child in children]
            x = sum(xs) / len(xs)
        positions[seg_id] = (x, float(depth))
        return x

    place(tree.root, 0)
    return positions


def save_tree_figure(tree: StoryTree, out_path: Path, dpi: int = 150) -> None:
    """Draw the story tree: one glyph per segment, decisions fan out."""
    positions = _tree_layout(tree)
    width = max(x for x, _ in positions.values()) + 1.0
    depth = max(y for _, y in positions.values()) + 1.0

    fig, ax = plt.subplots(figsize=(max(4.0, 1.6 * width), max(3.0, 1.1 * depth)))
    for seg_id, children in tree.children.items():
        x0, y0 = positions[seg_id]
        for child_id, label in children:
            x1, y1 = positions[child_id]
            ax.plot([x0, x1], [y0, y1], color="#7a8894", lw=1.2, zorder=1)
            if label:
                ax.annotate(label, ((x0 + x1) / 2, (y0 + y1) / 2), fontsize=7, color="#5a6874", ha="center")
    for seg_id, (x, y) in positions.items():
        segment = tree.segments[seg_id]
        color = _KIND_COLORS.get(segment.kind_icon, "#999999")
        marker = "D" if segment.is_decision else "o"
        ax.scatter([x], [y], s=420, marker=marker, color=color, edgecolors="#2a3138", zorder=2)
        ax.annotate(f"{seg_id}\n{segment.kind_icon}", (x, y), fontsize=7, ha="center", va="center", zorder=3)

    ax.invert_yaxis()
    ax.set_axis_off()
    ax.set_title("story tree")
    fig.tight_layout()
    fig.savefig(out_path, dpi=dpi)
    plt.close(fig)


def _sample_path(timeline: Timeline, path: list[SegmentId], samples: int) -> tuple[list[float], dict[str, list[float]]]:
    decisions: dict[SegmentId, int] = {}
    for seg_id, following in zip(path, path[1:]):
        children = timeline.tree.child_segments(seg_id)
        if timeline.tree.segments[seg_id].is_decision:
            decisions[seg_id] = children.index(following)
    height = timeline.path_height(path)
    offsets = [height * i / (samples - 1) for i in range(samples)]
    layer_ids = sorted({layer for seg_id in path for step in timeline.tree.segments[seg_id].steps for layer in step.layers})
    tracks: dict[str, list[float]] = {layer: [] for layer in layer_ids}
    for offset in offsets:
        state = timeline.evaluate(offset, decisions)
        by_id = {layer.node_id: layer.opacity for layer in state.visible}
        for layer in layer_ids:
            tracks[layer].append(by_id.get(layer, 0.0))
    return offsets, tracks


def save_path_figure(timeline: Timeline, path: list[SegmentId], out_path: Path, samples: int = 600, dpi: int = 150) -> None:
    """Plot each layer's opacity over scroll offset along one path."""
    offsets, tracks = _sample_path(timeline, path, samples)
    fig, ax = plt.subplots(figsize=(9.0, 3.6))
    for layer, values in tracks.items():
        kind = timeline.layer_params[layer]["kind"]
        ax.plot(offsets, values, label=f"{layer} ({kind})", lw=1.4, color=_KIND_COLORS.get(kind))
    boundary = 0.0
    for seg_id in path:
        for index in range(len(timeline.tree.segments[seg_id].steps)):
            boundary += timeline.step_extents[(seg_id, index)]
            ax.axvline(boundary, color="#cccccc", lw=0.6, ls=":", zorder=0)
    ax.set_xlabel("scroll offset (px)")
    ax.set_ylabel("opacity")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(" > ".join(path))
    ax.legend(fontsize=7, ncol=2, loc="lower right")
    fig.tight_layout()
    fig.savefig(out_path, dpi=dpi)
    plt.close(fig)


def write_path_samples(timeline: Timeline, path: list[SegmentId], out_path: Path, samples: int = 600) -> None:
    """Write the sampled opacity tracks for one path as CSV."""
    offsets, tracks = _sample_path(timeline, path, samples)
    layers = list(tracks)
    with out_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["scroll_px"] + layers)
        for row_index, offset in enumerate(offsets):
            writer.writerow([f"{offset:.2f}"] + [f"{tracks[layer][row_index]:.6f}" for layer in layers])


def write_report(timeline: Timeline, out_dir: Path, samples: int = 600, dpi: int = 150) -> list[Path]:
    """Render the full report into a directory; returns the written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    tree_path = out_dir / "story_tree.png"
    save_tree_figure(timeline.tree, tree_path, dpi=dpi)
    written.append(tree_path)

    paths = enumerate_paths(timeline.tree)
    summary_path = out_dir / "paths.csv"
    with summary_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["path", "segments", "steps", "height_px"])
        for number, path in enumerate(paths, start=1):
            steps = sum(len(timeline.tree.segments[seg_id].steps) for seg_id in path)
            writer.writerow([number, " > ".join(path), steps, f"{timeline.path_height(path):.0f}"])
    written.append(summary_path)

    for number, path in enumerate(paths, start=1):
        figure_path = out_dir / f"path-{number:02d}-opacity.png"
        save_path_figure(timeline, path, figure_path, samples=samples, dpi=dpi)
        written.append(figure_path)
        csv_path = out_dir / f"path-{number:02d}-samples.csv"
        write_path_samples(timeline, path, csv_path, samples=samples)
        written.append(csv_path)

    return written
