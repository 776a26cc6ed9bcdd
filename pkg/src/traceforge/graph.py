"""The typed bidirectional trace graph.

Single-writer, multi-reader discipline: all mutations go through one writer
(the project engine serializes them); reads never observe a half-applied
operation because node and link records are immutable values that are swapped
in atomically per operation.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator

from traceforge.errors import (
    AlreadyDeletedError,
    DanglingEndpointError,
    DuplicateLinkError,
    KindChangedError,
    NotFoundError,
    SelfLinkError,
    TypeMatrixViolationError,
    ValidationError,
)
from traceforge.model import (
    ArtifactId,
    ArtifactKind,
    ArtifactNode,
    LinkType,
    NodeSource,
    NodeStatus,
    TraceLink,
    canonical_hash,
    endpoints_allowed,
    kind_from_name,
    link_type_from_name,
    source_from_name,
)

LinkKey = tuple[str, str, str]


class Direction(Enum):
    OUTGOING = "Outgoing"
    INCOMING = "Incoming"
    BOTH = "Both"


class UpsertResult(Enum):
    CREATED = "created"
    UPDATED = "updated"
    UNCHANGED = "unchanged"


@dataclass(frozen=True)
class UpsertOutcome:
    result: UpsertResult
    node: ArtifactNode
    marked_suspect: tuple[TraceLink, ...] = ()


@dataclass(frozen=True)
class ClosureEntry:
    node_id: ArtifactId
    distance: int
    path: tuple[tuple[LinkType, ArtifactId], ...]


def canonical_json(value: object) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class TraceGraph:
    """Nodes, links, and the forward/backward adjacency indices.

    ``graph_revision`` strictly increases: every mutating call bumps it by
    exactly one, so it doubles as the count of applied mutations.
    """

    nodes: dict[str, ArtifactNode] = field(default_factory=dict)
    links: dict[LinkKey, TraceLink] = field(default_factory=dict)
    forward: dict[str, set[LinkKey]] = field(default_factory=dict)
    backward: dict[str, set[LinkKey]] = field(default_factory=dict)
    graph_revision: int = 0

    # -- lookups ------------------------------------------------------------

    def get_node(self, node_id: ArtifactId | str) -> ArtifactNode:
        key = node_id.render() if isinstance(node_id, ArtifactId) else node_id
        node = self.nodes.get(key)
        if node is None:
            raise NotFoundError(f"node {key} not found")
        return node

    def has_node(self, node_id: ArtifactId | str) -> bool:
        key = node_id.render() if isinstance(node_id, ArtifactId) else node_id
        return key in self.nodes

    def get_link(self, from_id: ArtifactId, link_type: LinkType, to_id: ArtifactId) -> TraceLink:
        key = (from_id.render(), link_type.value, to_id.render())
        link = self.links.get(key)
        if link is None:
            raise NotFoundError(f"link {key[0]} -{key[1]}-> {key[2]} not found")
        return link

    def has_link(self, from_id: ArtifactId, link_type: LinkType, to_id: ArtifactId) -> bool:
        return (from_id.render(), link_type.value, to_id.render()) in self.links

    def incident_links(self, node_id: ArtifactId | str) -> list[TraceLink]:
        """All links touching the node, in (from, type, to) order."""
        key = node_id.render() if isinstance(node_id, ArtifactId) else node_id
        keys = self.forward.get(key, set()) | self.backward.get(key, set())
        return [self.links[k] for k in sorted(keys)]

    def suspect_incident(self, node_id: ArtifactId | str) -> list[TraceLink]:
        return [link for link in self.incident_links(node_id) if link.suspect]

    def iter_links(self) -> Iterator[TraceLink]:
        for key in sorted(self.links):
            yield self.links[key]

    def active_nodes(self) -> list[ArtifactNode]:
        return [
            self.nodes[k] for k in sorted(self.nodes) if self.nodes[k].status is NodeStatus.ACTIVE
        ]

    # -- mutations ------------------------------------------------------------

    def plan_upsert(
        self,
        node_id: ArtifactId,
        kind: ArtifactKind,
        title: str,
        body: str = "",
        attributes: dict[str, str] | None = None,
        source: NodeSource = NodeSource.MANUAL,
    ) -> tuple[UpsertResult, ArtifactNode, tuple[TraceLink, ...]]:
        """Dry-run of upsert_node: the outcome, the node as it would be stored,
        and the links that would be marked suspect. Raises like upsert_node."""
        incoming = ArtifactNode(
            id=node_id,
            kind=kind,
            title=title,
            body=body,
            attributes=dict(attributes or {}),
            source=source,
        )
        incoming = replace(incoming, content_hash=canonical_hash(incoming))
        key = node_id.render()
        existing = self.nodes.get(key)
        if existing is None:
            return (
                UpsertResult.CREATED,
                replace(incoming, revision=1, status=NodeStatus.ACTIVE),
                (),
            )
        if existing.kind is not kind:
            raise KindChangedError(
                f"node {key} exists with kind {existing.kind}; kinds are immutable"
            )
        if existing.status is NodeStatus.ACTIVE and existing.content_hash == incoming.content_hash:
            return (UpsertResult.UNCHANGED, existing, ())
        stored = replace(incoming, revision=existing.revision + 1, status=NodeStatus.ACTIVE)
        return (UpsertResult.UPDATED, stored, tuple(self.incident_links(key)))

    def upsert_node(
        self,
        node_id: ArtifactId,
        kind: ArtifactKind,
        title: str,
        body: str = "",
        attributes: dict[str, str] | None = None,
        source: NodeSource = NodeSource.MANUAL,
    ) -> UpsertOutcome:
        """Create or update a node by content identity.

        Unchanged content is a no-op; changed content bumps the node revision
        and marks every incident link suspect. A tombstoned node is revived as
        an update. Kinds are immutable per id.
        """
        result, stored, _ = self.plan_upsert(node_id, kind, title, body, attributes, source)
        if result is UpsertResult.UNCHANGED:
            return UpsertOutcome(result, stored)
        key = node_id.render()
        self.nodes[key] = stored
        self.forward.setdefault(key, set())
        self.backward.setdefault(key, set())
        marked = self._mark_suspects(key) if result is UpsertResult.UPDATED else ()
        self._bump()
        return UpsertOutcome(result, stored, marked_suspect=marked)

    def check_link(self, from_id: ArtifactId, to_id: ArtifactId, link_type: LinkType) -> None:
        """Validation half of add_link; raises without mutating."""
        from_key, to_key = from_id.render(), to_id.render()
        if from_key == to_key:
            raise SelfLinkError(f"self link on {from_key}")
        from_node = self.nodes.get(from_key)
        to_node = self.nodes.get(to_key)
        if from_node is None or from_node.status is NodeStatus.DELETED:
            raise DanglingEndpointError(f"link endpoint {from_key} missing or deleted")
        if to_node is None or to_node.status is NodeStatus.DELETED:
            raise DanglingEndpointError(f"link endpoint {to_key} missing or deleted")
        if not endpoints_allowed(link_type, from_node.kind, to_node.kind):
            raise TypeMatrixViolationError(
                f"{link_type} may not connect {from_node.kind} to {to_node.kind}"
            )
        if (from_key, link_type.value, to_key) in self.links:
            raise DuplicateLinkError(f"link {from_key} -{link_type}-> {to_key} already exists")

    def add_link(self, from_id: ArtifactId, to_id: ArtifactId, link_type: LinkType) -> TraceLink:
        self.check_link(from_id, to_id, link_type)
        from_key, to_key = from_id.render(), to_id.render()
        key = (from_key, link_type.value, to_key)
        self._bump()
        link = TraceLink(
            from_id=from_id,
            to_id=to_id,
            type=link_type,
            suspect=False,
            created_rev=self.graph_revision,
        )
        self.links[key] = link
        self.forward.setdefault(from_key, set()).add(key)
        self.backward.setdefault(to_key, set()).add(key)
        return link

    def remove_link(self, from_id: ArtifactId, link_type: LinkType, to_id: ArtifactId) -> TraceLink:
        link = self.get_link(from_id, link_type, to_id)
        key = link.key
        del self.links[key]
        self.forward[key[0]].discard(key)
        self.backward[key[2]].discard(key)
        self._bump()
        return link

    def plan_remove_node(self, node_id: ArtifactId) -> list[TraceLink]:
        """Dry-run of remove_node: the links that would be dropped."""
        key = node_id.render()
        node = self.nodes.get(key)
        if node is None:
            raise NotFoundError(f"node {key} not found")
        if node.status is NodeStatus.DELETED:
            raise AlreadyDeletedError(f"node {key} is already deleted")
        return self.incident_links(key)

    def remove_node(self, node_id: ArtifactId) -> list[TraceLink]:
        """Tombstone a node; returns the incident links that were dropped."""
        removed = self.plan_remove_node(node_id)
        key = node_id.render()
        node = self.nodes[key]
        for link in removed:
            lk = link.key
            del self.links[lk]
            self.forward[lk[0]].discard(lk)
            self.backward[lk[2]].discard(lk)
        self.nodes[key] = replace(node, status=NodeStatus.DELETED, revision=node.revision + 1)
        self._bump()
        return removed

    def clear_suspects(self, node_id: ArtifactId) -> list[TraceLink]:
        """Clear the suspect flag on every suspect link incident to the node."""
        key = node_id.render() if isinstance(node_id, ArtifactId) else node_id
        if key not in self.nodes:
            raise NotFoundError(f"node {key} not found")
        cleared = []
        for link in self.incident_links(key):
            if link.suspect:
                updated = replace(link, suspect=False)
                self.links[link.key] = updated
                cleared.append(updated)
        if cleared:
            self._bump()
        return cleared

    def _mark_suspects(self, key: str) -> tuple[TraceLink, ...]:
        marked = []
        for link in self.incident_links(key):
            updated = replace(link, suspect=True)
            self.links[link.key] = updated
            marked.append(updated)
        return tuple(marked)

    def _bump(self) -> None:
        self.graph_revision += 1

    # -- traversal ------------------------------------------------------------

    def neighbors(
        self,
        node_id: ArtifactId,
        direction: Direction = Direction.BOTH,
        type_filter: Iterable[LinkType] | None = None,
    ) -> list[tuple[TraceLink, ArtifactId]]:
        """Incident links passing the direction/type filter, with the partner
        node, sorted bytewise by partner id (ties by link key)."""
        key = node_id.render()
        if key not in self.nodes:
            raise NotFoundError(f"node {key} not found")
        allowed = set(type_filter) if type_filter is not None else None
        out: list[tuple[TraceLink, ArtifactId]] = []
        if direction in (Direction.OUTGOING, Direction.BOTH):
            for lk in self.forward.get(key, set()):
                link = self.links[lk]
                if allowed is None or link.type in allowed:
                    out.append((link, link.to_id))
        if direction in (Direction.INCOMING, Direction.BOTH):
            for lk in self.backward.get(key, set()):
                link = self.links[lk]
                if allowed is None or link.type in allowed:
                    out.append((link, link.from_id))
        out.sort(key=lambda pair: (pair[1].render(), pair[0].key))
        return out

    def trace_closure(
        self,
        start: ArtifactId,
        direction: Direction = Direction.BOTH,
        max_depth: int | None = None,
        type_filter: Iterable[LinkType] | None = None,
    ) -> list[ClosureEntry]:
        """Breadth-first closure from ``start`` (excluded) over filtered links.

        Each reached node carries its BFS distance and one shortest path;
        ties resolve by expanding the bytewise-smallest neighbor id first.
        Result is sorted by (distance, node id).
        """
        if not self.has_node(start):
            raise NotFoundError(f"node {start.render()} not found")
        reached = self._bfs([start], direction, max_depth, type_filter)
        entries = [
            ClosureEntry(node_id=nid, distance=dist, path=path)
            for nid, (dist, path) in reached.items()
            if nid.render() != start.render()
        ]
        entries.sort(key=lambda e: (e.distance, e.node_id.render()))
        return entries

    def _bfs(
        self,
        seeds: list[ArtifactId],
        direction: Direction,
        max_depth: int | None,
        type_filter: Iterable[LinkType] | None,
    ) -> dict[ArtifactId, tuple[int, tuple[tuple[LinkType, ArtifactId], ...]]]:
        """Multi-source BFS used by both trace_closure and impact analysis."""
        allowed = set(type_filter) if type_filter is not None else None
        reached: dict[ArtifactId, tuple[int, tuple[tuple[LinkType, ArtifactId], ...]]] = {}
        queue: deque[ArtifactId] = deque()
        for seed in sorted(seeds, key=lambda s: s.render()):
            if seed not in reached:
                reached[seed] = (0, ())
                queue.append(seed)
        while queue:
            current = queue.popleft()
            dist, path = reached[current]
            if max_depth is not None and dist >= max_depth:
                continue
            for link, partner in self.neighbors(current, direction, allowed):
                if partner not in reached:
                    reached[partner] = (dist + 1, path + ((link.type, partner),))
                    queue.append(partner)
        return reached


# -- JSON round trip ------------------------------------------------------------


def node_to_dict(node: ArtifactNode) -> dict:
    return {
        "id": node.id.render(),
        "kind": node.kind.value,
        "title": node.title,
        "body": node.body,
        "attributes": dict(sorted(node.attributes.items())),
        "source": node.source.value,
        "revision": node.revision,
        "status": node.status.value,
        "content_hash": node.content_hash,
    }


def link_to_dict(link: TraceLink) -> dict:
    return {
        "from": link.from_id.render(),
        "to": link.to_id.render(),
        "type": link.type.value,
        "suspect": link.suspect,
        "created_rev": link.created_rev,
    }


def graph_to_dict(graph: TraceGraph) -> dict:
    return {
        "nodes": [node_to_dict(graph.nodes[k]) for k in sorted(graph.nodes)],
        "links": [link_to_dict(graph.links[k]) for k in sorted(graph.links)],
    }


def graph_to_json(graph: TraceGraph) -> str:
    return canonical_json(graph_to_dict(graph))


def graph_from_dict(data: dict) -> TraceGraph:
    """Rebuild a graph from its JSON export. Validates kinds, endpoint matrix,
    and dangling references; trusts stored revisions and hashes."""
    if not isinstance(data, dict) or "nodes" not in data or "links" not in data:
        raise ValidationError("graph document must contain 'nodes' and 'links'")
    graph = TraceGraph()
    max_rev = 0
    for rec in data["nodes"]:
        kind = kind_from_name(rec.get("kind", ""))
        if kind is None:
            raise ValidationError(f"unknown node kind {rec.get('kind')!r}")
        source = source_from_name(rec.get("source", "Manual"))
        if source is None:
            raise ValidationError(f"unknown node source {rec.get('source')!r}")
        status = NodeStatus.ACTIVE if rec.get("status") == "Active" else NodeStatus.DELETED
        node_id = ArtifactId.parse(rec["id"])
        node = ArtifactNode(
            id=node_id,
            kind=kind,
            title=rec.get("title", ""),
            body=rec.get("body", ""),
            attributes=dict(rec.get("attributes", {})),
            source=source,
            revision=int(rec.get("revision", 1)),
            status=status,
            content_hash=rec.get("content_hash", ""),
        )
        if not node.content_hash:
            node = replace(node, content_hash=canonical_hash(node))
        key = node_id.render()
        if key in graph.nodes:
            raise ValidationError(f"duplicate node id {key}")
        graph.nodes[key] = node
        graph.forward.setdefault(key, set())
        graph.backward.setdefault(key, set())
    for rec in data["links"]:
        link_type = link_type_from_name(rec.get("type", ""))
        if link_type is None:
            raise ValidationError(f"unknown link type {rec.get('type')!r}")
        from_id = ArtifactId.parse(rec["from"])
        to_id = ArtifactId.parse(rec["to"])
        for endpoint in (from_id, to_id):
            if endpoint.render() not in graph.nodes:
                raise ValidationError(f"link references missing node {endpoint.render()}")
        from_kind = graph.nodes[from_id.render()].kind
        to_kind = graph.nodes[to_id.render()].kind
        if not endpoints_allowed(link_type, from_kind, to_kind):
            raise ValidationError(f"{link_type} may not connect {from_kind} to {to_kind}")
        link = TraceLink(
            from_id=from_id,
            to_id=to_id,
            type=link_type,
            suspect=bool(rec.get("suspect", False)),
            created_rev=int(rec.get("created_rev", 0)),
        )
        if link.key in graph.links:
            raise ValidationError(f"duplicate link {link.key}")
        graph.links[link.key] = link
        graph.forward[link.key[0]].add(link.key)
        graph.backward[link.key[2]].add(link.key)
        max_rev = max(max_rev, link.created_rev)
    graph.graph_revision = max_rev
    return graph


def graph_from_json(text: str) -> TraceGraph:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid graph JSON: {exc}") from exc
    return graph_from_dict(data)
