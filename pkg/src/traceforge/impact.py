"""Change impact analysis: multi-source BFS producing an auditable item list."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from traceforge.errors import EmptySeedsError, UnknownSeedError, ValidationError
from traceforge.graph import Direction, TraceGraph
from traceforge.model import ArtifactId, LinkType, NodeStatus, link_type_from_name

ALL_LINK_TYPES = frozenset(LinkType)


class ItemStatus(Enum):
    PENDING = "Pending"
    RESOLVED = "Resolved"
    WAIVED = "Waived"
    STALE = "Stale"


@dataclass(frozen=True)
class ImpactConfig:
    """Traversal settings; direction is always both ways — influence flows
    with and against link direction."""

    allowed_types: frozenset[LinkType] = ALL_LINK_TYPES
    max_depth: int | None = None

    def __post_init__(self):
        if not self.allowed_types:
            raise ValidationError("impact config needs at least one link type")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError("max_depth must be positive or unlimited")

    def to_dict(self) -> dict:
        return {
            "types": sorted(t.value for t in self.allowed_types),
            "max_depth": self.max_depth,
            "direction": "Both",
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ImpactConfig":
        types = frozenset(link_type_from_name(t) for t in data.get("types", []))
        if None in types:
            raise ValidationError("impact config contains an unknown link type")
        return cls(allowed_types=types, max_depth=data.get("max_depth"))


@dataclass(frozen=True)
class ImpactItem:
    node_id: str
    distance: int
    path: tuple[tuple[LinkType, str], ...]
    status: ItemStatus = ItemStatus.PENDING
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "node": self.node_id,
            "distance": self.distance,
            "path": [{"type": t.value, "node": n} for t, n in self.path],
            "status": self.status.value,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ImpactItem":
        path = tuple(
            (link_type_from_name(step["type"]), step["node"]) for step in data.get("path", [])
        )
        return cls(
            node_id=data["node"],
            distance=int(data["distance"]),
            path=path,
            status=ItemStatus(data.get("status", "Pending")),
            note=data.get("note", ""),
        )


@dataclass(frozen=True)
class ImpactSet:
    seeds: tuple[str, ...]
    config: ImpactConfig
    items: tuple[ImpactItem, ...]
    computed_at: int

    def item_for(self, node_id: str) -> ImpactItem | None:
        for item in self.items:
            if item.node_id == node_id:
                return item
        return None

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "config": self.config.to_dict(),
            "computed_at": self.computed_at,
            "items": [item.to_dict() for item in self.items],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ImpactSet":
        return cls(
            seeds=tuple(data["seeds"]),
            config=ImpactConfig.from_dict(data["config"]),
            items=tuple(ImpactItem.from_dict(item) for item in data["items"]),
            computed_at=int(data["computed_at"]),
        )


def _sorted_items(items: list[ImpactItem]) -> tuple[ImpactItem, ...]:
    return tuple(sorted(items, key=lambda item: (item.distance, item.node_id)))


def validate_seeds(graph: TraceGraph, seeds: list[ArtifactId]) -> list[ArtifactId]:
    if not seeds:
        raise EmptySeedsError("impact analysis needs at least one seed")
    for seed in seeds:
        key = seed.render()
        node = graph.nodes.get(key)
        if node is None or node.status is not NodeStatus.ACTIVE:
            raise UnknownSeedError(f"seed {key} does not exist or is not active")
    return seeds


def compute_impact(
    graph: TraceGraph, seeds: list[ArtifactId], config: ImpactConfig | None = None
) -> ImpactSet:
    """Multi-source BFS over the allowed link types in both directions, one
    shortest path per reached node, every item Pending."""
    config = config or ImpactConfig()
    validate_seeds(graph, seeds)
    reached = graph._bfs(seeds, Direction.BOTH, config.max_depth, config.allowed_types)
    items = [
        ImpactItem(
            node_id=node_id.render(),
            distance=dist,
            path=tuple((t, n.render()) for t, n in path),
        )
        for node_id, (dist, path) in reached.items()
    ]
    return ImpactSet(
        seeds=tuple(sorted(seed.render() for seed in set(seeds))),
        config=config,
        items=_sorted_items(items),
        computed_at=graph.graph_revision,
    )


def refresh_impact(impact: ImpactSet, graph: TraceGraph) -> ImpactSet:
    """Recompute reachability with the same seeds/config, preserving item
    history: still-reachable items keep their status (Stale ones return to
    Pending), unreachable ones become Stale, new nodes arrive Pending."""
    seeds = [ArtifactId.parse(s) for s in impact.seeds]
    fresh = compute_impact(graph, seeds, impact.config)
    fresh_by_node = {item.node_id: item for item in fresh.items}
    merged: list[ImpactItem] = []
    known: set[str] = set()
    for old in impact.items:
        known.add(old.node_id)
        new = fresh_by_node.get(old.node_id)
        if new is None:
            merged.append(replace(old, status=ItemStatus.STALE))
        else:
            status = ItemStatus.PENDING if old.status is ItemStatus.STALE else old.status
            merged.append(replace(new, status=status, note=old.note))
    for item in fresh.items:
        if item.node_id not in known:
            merged.append(item)
    return ImpactSet(
        seeds=impact.seeds,
        config=impact.config,
        items=_sorted_items(merged),
        computed_at=graph.graph_revision,
    )
