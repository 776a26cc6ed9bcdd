"""Graphviz DOT rendering of the trace graph for visual exploration."""

from __future__ import annotations

from traceforge.graph import TraceGraph
from traceforge.model import ArtifactKind, LinkType, NodeStatus

_SHAPES = {
    ArtifactKind.SYSTEM_REQUIREMENT: "box",
    ArtifactKind.HIGH_LEVEL_REQUIREMENT: "box",
    ArtifactKind.LOW_LEVEL_REQUIREMENT: "box",
    ArtifactKind.DESIGN_ELEMENT: "box",
    ArtifactKind.SOURCE_UNIT: "component",
    ArtifactKind.TEST_CASE: "ellipse",
    ArtifactKind.TEST_RESULT: "ellipse",
    ArtifactKind.ISSUE: "note",
    ArtifactKind.COMMIT: "diamond",
    ArtifactKind.DOCUMENT: "folder",
}


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_graph_dot(
    graph: TraceGraph,
    kind_filter: set[ArtifactKind] | None = None,
    type_filter: set[LinkType] | None = None,
) -> str:
    """Byte-deterministic DOT digraph: Active nodes sorted by id, shaped by
    kind; edges sorted by (from, type, to), suspect edges dashed."""
    lines = ["digraph trace {"]
    visible: set[str] = set()
    for key in sorted(graph.nodes):
        node = graph.nodes[key]
        if node.status is not NodeStatus.ACTIVE:
            continue
        if kind_filter is not None and node.kind not in kind_filter:
            continue
        visible.add(key)
        lines.append(f"  {_quote(key)} [shape={_SHAPES[node.kind]}];")
    for key in sorted(graph.links):
        link = graph.links[key]
        if type_filter is not None and link.type not in type_filter:
            continue
        if key[0] not in visible or key[2] not in visible:
            continue
        style = ", style=dashed" if link.suspect else ""
        lines.append(
            f"  {_quote(key[0])} -> {_quote(key[2])} [label={_quote(link.type.value)}{style}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
