"""Change requests: guarded lifecycle over a computed impact map.

The lifecycle ties closure to trace consistency: a change request can only be
verified once every impacted artifact is resolved or waived, and only closed
once no impacted artifact has a suspect link left.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from traceforge.errors import (
    AlreadyResolvedError,
    GuardFailedError,
    IllegalTransitionError,
    SeedDeletedError,
    UnknownItemError,
    WrongStateError,
)
from traceforge.graph import TraceGraph
from traceforge.impact import ImpactSet, ItemStatus, refresh_impact
from traceforge.model import NodeStatus


class CrState(Enum):
    DRAFT = "Draft"
    ANALYZED = "Analyzed"
    APPROVED = "Approved"
    IMPLEMENTING = "Implementing"
    VERIFIED = "Verified"
    CLOSED = "Closed"
    REJECTED = "Rejected"

    def __str__(self) -> str:
        return self.value


_EDGES: dict[CrState, frozenset[CrState]] = {
    CrState.DRAFT: frozenset({CrState.ANALYZED, CrState.REJECTED}),
    CrState.ANALYZED: frozenset({CrState.APPROVED, CrState.REJECTED}),
    CrState.APPROVED: frozenset({CrState.IMPLEMENTING}),
    CrState.IMPLEMENTING: frozenset({CrState.VERIFIED}),
    CrState.VERIFIED: frozenset({CrState.CLOSED}),
    CrState.CLOSED: frozenset(),
    CrState.REJECTED: frozenset(),
}

RESOLVABLE_STATES = frozenset({CrState.ANALYZED, CrState.APPROVED, CrState.IMPLEMENTING})
RECOMPUTABLE_STATES = RESOLVABLE_STATES | {CrState.DRAFT}


class Resolution(Enum):
    RESOLVED = "Resolved"
    WAIVED = "Waived"


@dataclass(frozen=True)
class ChangeRequest:
    cr_id: str
    title: str
    description: str
    state: CrState
    impact: ImpactSet | None
    created: str
    updated: str

    def to_dict(self) -> dict:
        return {
            "cr_id": self.cr_id,
            "title": self.title,
            "description": self.description,
            "state": self.state.value,
            "impact": self.impact.to_dict() if self.impact else None,
            "created": self.created,
            "updated": self.updated,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChangeRequest":
        impact = data.get("impact")
        return cls(
            cr_id=data["cr_id"],
            title=data["title"],
            description=data["description"],
            state=CrState(data["state"]),
            impact=ImpactSet.from_dict(impact) if impact else None,
            created=data["created"],
            updated=data["updated"],
        )


def check_transition(cr: ChangeRequest, target: CrState, graph: TraceGraph) -> None:
    """Raise unless the edge is legal and its guard holds."""
    if target not in _EDGES[cr.state]:
        raise IllegalTransitionError(
            f"no transition {cr.state} -> {target}",
            detail={"from": cr.state.value, "to": target.value},
        )
    if target is CrState.ANALYZED:
        if cr.impact is None or not cr.impact.seeds:
            raise GuardFailedError("impact map missing or has no seeds")
    elif target is CrState.VERIFIED:
        unresolved = [
            item
            for item in cr.impact.items
            if item.status in (ItemStatus.PENDING, ItemStatus.STALE)
        ]
        if unresolved:
            raise GuardFailedError(
                f"{len(unresolved)} unresolved",
                detail={"nodes": [item.node_id for item in unresolved]},
            )
    elif target is CrState.CLOSED:
        suspect_nodes = sorted(
            {
                item.node_id
                for item in cr.impact.items
                if item.node_id in graph.nodes and graph.suspect_incident(item.node_id)
            }
        )
        if suspect_nodes:
            raise GuardFailedError(
                f"{len(suspect_nodes)} impacted node(s) still have suspect links",
                detail={"nodes": suspect_nodes},
            )


def apply_transition(cr: ChangeRequest, target: CrState, ts: str) -> ChangeRequest:
    return replace(cr, state=target, updated=ts)


def apply_resolution(
    cr: ChangeRequest, node_id: str, resolution: Resolution, note: str, ts: str
) -> ChangeRequest:
    """Update one impact item's status; suspect clearing is handled by the
    caller against the graph."""
    if cr.state not in RESOLVABLE_STATES:
        raise WrongStateError(f"cannot resolve items while {cr.state}")
    item = cr.impact.item_for(node_id) if cr.impact else None
    if item is None:
        raise UnknownItemError(f"{node_id} is not in the impact set")
    if item.status not in (ItemStatus.PENDING, ItemStatus.STALE):
        raise AlreadyResolvedError(f"item {node_id} is already {item.status.value}")
    updated_item = replace(item, status=ItemStatus(resolution.value), note=note)
    items = tuple(updated_item if i.node_id == node_id else i for i in cr.impact.items)
    return replace(cr, impact=replace(cr.impact, items=items), updated=ts)


def recompute(cr: ChangeRequest, graph: TraceGraph, ts: str) -> ChangeRequest:
    """Refresh the impact map after graph movement, preserving item history."""
    if cr.state not in RECOMPUTABLE_STATES:
        raise WrongStateError(f"cannot recompute impact while {cr.state}")
    for seed in cr.impact.seeds:
        node = graph.nodes.get(seed)
        if node is not None and node.status is NodeStatus.DELETED:
            raise SeedDeletedError(f"seed {seed} was deleted")
    if graph.graph_revision == cr.impact.computed_at:
        return cr
    return replace(cr, impact=refresh_impact(cr.impact, graph), updated=ts)
