"""Compile a story graph into a branching tree of flattened segments.

A segment is a main-chain node together with its flattened sub-path. Each
step of a segment is the ordered stack of layers visible at that point,
bottom first. Decision nodes become their own single-step segments whose
children are the branch heads, in authored edge order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from scrollstory.model import Decision, GraphError, NodeId, StoryGraph

SegmentId = str


@dataclass(frozen=True)
class Step:
    """One visibility state: simultaneously visible layers, bottom first.

    The owner is the node whose traversal this step represents and is
    always the topmost layer.
    """

    layers: tuple[NodeId, ...]

    def __post_init__(self) -> None:
        if not self.layers:
            raise GraphError("step must have at least one layer")
        if len(set(self.layers)) != len(self.layers):
            raise GraphError(f"duplicate layers in step: {self.layers}")

    @property
    def owner(self) -> NodeId:
        return self.layers[-1]


@dataclass(frozen=True)
class StorySegment:
    """A head node plus the flattened steps of its sub-path."""

    id: SegmentId
    head: NodeId
    steps: tuple[Step, ...]
    kind_icon: str
    is_decision: bool = False


@dataclass
class StoryTree:
    """The compiled branching structure; leaves are story endpoints."""

    segments: dict[SegmentId, StorySegment] = field(default_factory=dict)
    root: SegmentId = ""
    children: dict[SegmentId, tuple[tuple[SegmentId, str | None], ...]] = field(default_factory=dict)
    graph: StoryGraph = field(default_factory=StoryGraph, repr=False)

    def child_segments(self, segment_id: SegmentId) -> list[SegmentId]:
        return [child for child, _ in self.children.get(segment_id, ())]

    def leaves(self) -> list[SegmentId]:
        return [sid for sid in self.segments if not self.children.get(sid)]


def flatten_segment(graph: StoryGraph, head: NodeId) -> list[Step]:
    """Flatten the sub-tree hanging off `head` into ordered steps.

    Traversal is depth-first with sub edges before main edges: a sub
    successor pushes a new layer on top of the current stack, and a main
    successor of a layered node replaces that node at the same level.
    The head's own main successor starts the next segment and is not
    consumed here.
    """
    node = graph.node(head)
    if isinstance(node.kind, Decision):
        raise GraphError(f"decision node {head!r} has no sub-path to flatten")

    steps: list[Step] = []

    def visit(current: NodeId, stack: tuple[NodeId, ...]) -> None:
        layers = stack + (current,)
        steps.append(Step(layers=layers))
        sub = graph.sub_successor(current)
        if sub is not None:
            visit(sub, layers)
        if stack:
            for succ in graph.main_successors(current):
                visit(succ, stack)

    visit(head, ())
    return steps


def build_tree(graph: StoryGraph) -> StoryTree:
    """Compile a validated graph into its story tree.

    One segment per depth-0 main-chain node; decision segments carry one
    step showing only the decision node, and their children keep the
    authored edge order together with the option labels.
    """
    errors = [d for d in graph.validate() if d.severity == "error"]
    if errors:
        raise GraphError(f"cannot build tree from invalid graph: {errors[0]}")

    tree = StoryTree(graph=graph)

    def add_chain(head: NodeId) -> SegmentId:
        node = graph.node(head)
        if isinstance(node.kind, Decision):
            segment = StorySegment(
                id=head,
                head=head,
                steps=(Step(layers=(head,)),),
                kind_icon=node.kind.kind,
                is_decision=True,
            )
            tree.segments[head] = segment
            branches = [(e.to_id, e.label) for e in graph.edges if e.from_id == head and not e.is_sub]
            tree.children[head] = tuple((add_chain(target), label) for target, label in branches)
            return head
        segment = StorySegment(
            id=head,
            head=head,
            steps=tuple(flatten_segment(graph, head)),
            kind_icon=node.kind.kind,
        )
        tree.segments[head] = segment
        successors = graph.main_successors(head)
        if successors:
            tree.children[head] = ((add_chain(successors[0]), None),)
        else:
            tree.children[head] = ()
        return head

    tree.root = add_chain(graph.root())
    return tree


def enumerate_paths(tree: StoryTree) -> list[list[SegmentId]]:
    """List every root-to-leaf segment path in depth-first child order."""
    paths: list[list[SegmentId]] = []

    def walk(segment_id: SegmentId, prefix: list[SegmentId]) -> None:
        prefix = prefix + [segment_id]
        children = tree.children.get(segment_id, ())
        if not children:
            paths.append(prefix)
            return
        for child, _ in children:
            walk(child, prefix)

    walk(tree.root, [])
    return paths
