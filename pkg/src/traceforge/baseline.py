"""Content-addressed baselines: the canonical configuration index and diffs.

The index hash covers the bytes from the [NODES] marker to the end of the
document, so the same configuration produced at different times (or under a
different baseline name) hashes identically.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from traceforge.errors import ValidationError
from traceforge.graph import TraceGraph

INDEX_HEADER = "CONFIGURATION-INDEX v1"
NODES_MARKER = "[NODES]"
LINKS_MARKER = "[LINKS]"

NodeLine = tuple[str, str, int, str, str]  # id, kind, revision, content_hash, status
LinkLine = tuple[str, str, str, bool]  # from, type, to, suspect


@dataclass(frozen=True)
class Baseline:
    baseline_id: str
    name: str
    created: str
    graph_revision: int
    index_text: str
    index_hash: str
    parent: str | None = None

    def to_dict(self) -> dict:
        return {
            "baseline_id": self.baseline_id,
            "name": self.name,
            "created": self.created,
            "graph_revision": self.graph_revision,
            "index_hash": self.index_hash,
            "parent": self.parent,
        }


def render_index(project: str, baseline_name: str, created: str, graph: TraceGraph) -> str:
    """Canonical index bytes: header, then every node (Active and Deleted
    alike) and every link, bytewise sorted, tab-separated, LF-terminated."""
    lines = [
        INDEX_HEADER,
        f"project: {project}",
        f"baseline: {baseline_name}",
        f"created: {created}",
        NODES_MARKER,
    ]
    for key in sorted(graph.nodes):
        node = graph.nodes[key]
        lines.append(
            f"{key}\t{node.kind.value}\t{node.revision}\t{node.content_hash}\t{node.status.value}"
        )
    lines.append(LINKS_MARKER)
    for key in sorted(graph.links):
        link = graph.links[key]
        lines.append(f"{key[0]}\t{key[1]}\t{key[2]}\t{int(link.suspect)}")
    return "\n".join(lines) + "\n"


def index_body(index_text: str) -> str:
    """The hashed region: from the [NODES] marker line to end of document."""
    marker = NODES_MARKER + "\n"
    position = index_text.find("\n" + marker)
    if position >= 0:
        return index_text[position + 1 :]
    if index_text.startswith(marker):
        return index_text
    raise ValidationError("index document has no [NODES] section")


def compute_index_hash(index_text: str) -> str:
    return hashlib.sha256(index_body(index_text).encode("utf-8")).hexdigest()


def verify_baseline(baseline: Baseline) -> bool:
    """Recompute the hash over the stored index bytes and compare."""
    try:
        return compute_index_hash(baseline.index_text) == baseline.index_hash
    except ValidationError:
        return False


def parse_index(index_text: str) -> tuple[dict[str, str], list[NodeLine], list[LinkLine]]:
    """Parse an index document back into header fields and node/link tuples."""
    lines = index_text.split("\n")
    if not lines or lines[0] != INDEX_HEADER:
        raise ValidationError("not a configuration index document")
    header: dict[str, str] = {}
    nodes: list[NodeLine] = []
    links: list[LinkLine] = []
    section = "header"
    for line in lines[1:]:
        if line == "" and section == "links":
            continue
        if line == NODES_MARKER:
            section = "nodes"
            continue
        if line == LINKS_MARKER:
            section = "links"
            continue
        if section == "header":
            if ": " not in line:
                raise ValidationError(f"bad header line {line!r}")
            key, value = line.split(": ", 1)
            header[key] = value
        elif section == "nodes":
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValidationError(f"bad node line {line!r}")
            nodes.append((parts[0], parts[1], int(parts[2]), parts[3], parts[4]))
        else:
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValidationError(f"bad link line {line!r}")
            links.append((parts[0], parts[1], parts[2], parts[3] == "1"))
    return header, nodes, links


@dataclass(frozen=True)
class BaselineDiff:
    nodes_added: tuple[str, ...]
    nodes_removed: tuple[str, ...]
    nodes_modified: tuple[str, ...]
    links_added: tuple[tuple[str, str, str], ...]
    links_removed: tuple[tuple[str, str, str], ...]
    links_suspect_changed: tuple[tuple[str, str, str], ...]

    @property
    def empty(self) -> bool:
        return not (
            self.nodes_added
            or self.nodes_removed
            or self.nodes_modified
            or self.links_added
            or self.links_removed
            or self.links_suspect_changed
        )

    def to_dict(self) -> dict:
        return {
            "nodes": {
                "added": list(self.nodes_added),
                "removed": list(self.nodes_removed),
                "modified": list(self.nodes_modified),
            },
            "links": {
                "added": [list(t) for t in self.links_added],
                "removed": [list(t) for t in self.links_removed],
                "suspect_changed": [list(t) for t in self.links_suspect_changed],
            },
        }


def diff_baselines(a: Baseline, b: Baseline) -> BaselineDiff:
    """Set differences between two snapshots; 'modified' means present in both
    with a different revision or content hash."""
    _, nodes_a, links_a = parse_index(a.index_text)
    _, nodes_b, links_b = parse_index(b.index_text)
    map_a = {n[0]: n for n in nodes_a}
    map_b = {n[0]: n for n in nodes_b}
    added = sorted(set(map_b) - set(map_a))
    removed = sorted(set(map_a) - set(map_b))
    modified = sorted(
        node_id
        for node_id in set(map_a) & set(map_b)
        if map_a[node_id][2] != map_b[node_id][2] or map_a[node_id][3] != map_b[node_id][3]
    )
    la = {(f, t, to): suspect for f, t, to, suspect in links_a}
    lb = {(f, t, to): suspect for f, t, to, suspect in links_b}
    links_added = tuple(sorted(set(lb) - set(la)))
    links_removed = tuple(sorted(set(la) - set(lb)))
    suspect_changed = tuple(
        sorted(key for key in set(la) & set(lb) if la[key] != lb[key])
    )
    return BaselineDiff(
        nodes_added=tuple(added),
        nodes_removed=tuple(removed),
        nodes_modified=tuple(modified),
        links_added=links_added,
        links_removed=links_removed,
        links_suspect_changed=suspect_changed,
    )
