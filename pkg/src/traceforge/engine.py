"""Event-sourced project engine: the single writer owning graph, change
requests, and baselines.

Every mutation is planned against the current state, appended to the hash
chain (durable before acknowledgement), and then applied through the same
``_apply`` path that replay uses — so a replayed log reproduces live state
exactly, and graph_revision equals the count of graph-mutating events.
"""

from __future__ import annotations

import re
from dataclasses import replace
from pathlib import Path

from traceforge.baseline import Baseline, BaselineDiff, compute_index_hash, diff_baselines, render_index
from traceforge.change import (
    ChangeRequest,
    CrState,
    Resolution,
    apply_resolution,
    apply_transition,
    check_transition,
    recompute,
)
from traceforge.compliance import CoverageRuleSet, DalLevel, GapReport, check_coverage, default_ruleset
from traceforge.errors import (
    BadEventError,
    DuplicateNameError,
    NotFoundError,
    ValidationError,
    WrongStateError,
)
from traceforge.events import (
    Event,
    EventKind,
    EventLog,
    GRAPH_MUTATING_KINDS,
    now_utc,
)
from traceforge.graph import TraceGraph, UpsertOutcome, UpsertResult
from traceforge.impact import ImpactConfig, ImpactSet, compute_impact
from traceforge.ingest import (
    CommitRecord,
    Diagnostic,
    IngestReport,
    IssueRecord,
    RequirementRecord,
    Severity,
    merge_into_graph,
    parse_issue_export,
    parse_reqif_subset,
    parse_requirements_csv,
    parse_vcs_log,
)
from traceforge.model import (
    ArtifactId,
    ArtifactKind,
    LinkType,
    NodeSource,
    TraceLink,
    kind_from_name,
    link_type_from_name,
    source_from_name,
)
from traceforge.store import ProjectStore

_CR_ID_RE = re.compile(r"^CR-(\d+)$")
_BL_ID_RE = re.compile(r"^BL-(\d+)$")

INGEST_FORMATS = ("csv", "reqif", "issues", "vcslog")


def _link_triple(link: TraceLink) -> list[str]:
    return [link.from_id.render(), link.type.value, link.to_id.render()]


class ProjectEngine:
    """State + log for one project. Not thread-safe by itself: the service
    layer serializes access per project."""

    def __init__(self, store: ProjectStore, recover: bool = True):
        self.store = store
        self.graph = TraceGraph()
        self.crs: dict[str, ChangeRequest] = {}
        self.baselines: dict[str, Baseline] = {}
        self._cr_counter = 0
        self._baseline_counter = 0
        self.log = EventLog(store.events_log)
        self.recovery_warnings = self.log.load(recover=recover)
        for event in self.log.events:
            self._apply(event)

    @property
    def name(self) -> str:
        return self.store.name

    @classmethod
    def create(cls, home: Path, name: str) -> "ProjectEngine":
        store = ProjectStore.create(home, name, created=now_utc())
        return cls(store)

    @classmethod
    def open(cls, home: Path, name: str, recover: bool = True) -> "ProjectEngine":
        return cls(ProjectStore.open(home, name), recover=recover)

    # -- event plumbing ------------------------------------------------------------

    def _emit(self, kind: EventKind, payload: dict) -> Event:
        event = self.log.append(kind, payload)
        self.log.commit()
        self._apply(event)
        return event

    def _emit_batch(self, batch: list[tuple[EventKind, dict]]) -> list[Event]:
        events = [self.log.append(kind, payload) for kind, payload in batch]
        self.log.commit()
        for event in events:
            self._apply(event)
        return events

    def _apply(self, event: Event) -> None:
        before = self.graph.graph_revision
        handler = _APPLIERS[event.kind]
        handler(self, event)
        expected = before + 1 if event.kind in GRAPH_MUTATING_KINDS else before
        if self.graph.graph_revision != expected:
            raise BadEventError(
                f"event {event.seq}: graph revision drifted while applying {event.kind.value}",
                seq=event.seq,
            )

    # -- graph mutations ------------------------------------------------------------

    def upsert_node(
        self,
        node_id: ArtifactId,
        kind: ArtifactKind,
        title: str,
        body: str = "",
        attributes: dict[str, str] | None = None,
        source: NodeSource = NodeSource.MANUAL,
    ) -> UpsertOutcome:
        result, stored, marked = self.graph.plan_upsert(
            node_id, kind, title, body, attributes, source
        )
        if result is UpsertResult.UNCHANGED:
            return UpsertOutcome(result, stored)
        payload = {
            "id": node_id.render(),
            "kind": kind.value,
            "title": title,
            "body": body,
            "attributes": dict(attributes or {}),
            "source": source.value,
            "outcome": result.value,
            "marked_suspect": [_link_triple(link) for link in marked],
        }
        batch: list[tuple[EventKind, dict]] = [(EventKind.NODE_UPSERTED, payload)]
        if marked:
            batch.append(
                (
                    EventKind.SUSPECT_MARKED,
                    {
                        "node": node_id.render(),
                        "links": [_link_triple(link) for link in marked],
                    },
                )
            )
        self._emit_batch(batch)
        node = self.graph.get_node(node_id)
        marked_now = tuple(
            self.graph.get_link(link.from_id, link.type, link.to_id) for link in marked
        )
        return UpsertOutcome(result, node, marked_suspect=marked_now)

    def add_link(self, from_id: ArtifactId, to_id: ArtifactId, link_type: LinkType) -> TraceLink:
        self.graph.check_link(from_id, to_id, link_type)
        self._emit(
            EventKind.LINK_ADDED,
            {"from": from_id.render(), "to": to_id.render(), "type": link_type.value},
        )
        return self.graph.get_link(from_id, link_type, to_id)

    def has_link(self, from_id: ArtifactId, link_type: LinkType, to_id: ArtifactId) -> bool:
        return self.graph.has_link(from_id, link_type, to_id)

    def remove_link(self, from_id: ArtifactId, link_type: LinkType, to_id: ArtifactId) -> TraceLink:
        link = self.graph.get_link(from_id, link_type, to_id)
        self._emit(
            EventKind.LINK_REMOVED,
            {"from": from_id.render(), "type": link_type.value, "to": to_id.render()},
        )
        return link

    def remove_node(self, node_id: ArtifactId) -> int:
        removed = self.graph.plan_remove_node(node_id)
        self._emit(
            EventKind.NODE_REMOVED,
            {
                "id": node_id.render(),
                "removed_links": [_link_triple(link) for link in removed],
            },
        )
        return len(removed)

    # -- ingestion ------------------------------------------------------------

    def ingest_text(self, fmt: str, content: str) -> IngestReport:
        """Parse one export payload and merge it. All failures are diagnostics;
        the merge itself is event-sourced through this engine."""
        if fmt not in INGEST_FORMATS:
            raise ValidationError(f"unknown ingest format {fmt!r}")
        requirements: list[RequirementRecord] = []
        issues: list[IssueRecord] = []
        commits: list[CommitRecord] = []
        diagnostics: list[Diagnostic]
        if fmt == "csv":
            requirements, diagnostics = parse_requirements_csv(content)
        elif fmt == "reqif":
            requirements, diagnostics = parse_reqif_subset(content)
        elif fmt == "issues":
            issues, diagnostics = parse_issue_export(content)
        else:
            commits, diagnostics = parse_vcs_log(content)
        report = merge_into_graph(
            self,
            requirements=requirements,
            issues=issues,
            commits=commits,
            diagnostics=diagnostics,
        )
        self._emit(EventKind.INGESTED, {"format": fmt, "report": report.to_dict()})
        return report

    def ingest_records(
        self,
        requirements: list[RequirementRecord] | None = None,
        issues: list[IssueRecord] | None = None,
        commits: list[CommitRecord] | None = None,
    ) -> IngestReport:
        report = merge_into_graph(
            self, requirements=requirements, issues=issues, commits=commits
        )
        self._emit(EventKind.INGESTED, {"format": "records", "report": report.to_dict()})
        return report

    # -- impact and change requests ------------------------------------------------------------

    def preview_impact(self, seeds: list[ArtifactId], config: ImpactConfig | None = None) -> ImpactSet:
        """Stateless what-if impact; no event, no state change."""
        return compute_impact(self.graph, seeds, config)

    def create_cr(
        self,
        title: str,
        description: str,
        seeds: list[ArtifactId],
        config: ImpactConfig | None = None,
    ) -> ChangeRequest:
        impact = compute_impact(self.graph, seeds, config)
        ts = now_utc()
        cr = ChangeRequest(
            cr_id=f"CR-{self._cr_counter + 1}",
            title=title,
            description=description,
            state=CrState.DRAFT,
            impact=impact,
            created=ts,
            updated=ts,
        )
        self._emit(EventKind.CR_CREATED, {"cr": cr.to_dict()})
        return self.crs[cr.cr_id]

    def get_cr(self, cr_id: str) -> ChangeRequest:
        cr = self.crs.get(cr_id)
        if cr is None:
            raise NotFoundError(f"change request {cr_id} not found")
        return cr

    def transition_cr(self, cr_id: str, target: CrState) -> ChangeRequest:
        cr = self.get_cr(cr_id)
        check_transition(cr, target, self.graph)
        self._emit(
            EventKind.CR_TRANSITIONED,
            {"cr_id": cr_id, "from": cr.state.value, "to": target.value},
        )
        return self.crs[cr_id]

    def resolve_item(
        self, cr_id: str, node_id: str, resolution: Resolution, note: str = ""
    ) -> ChangeRequest:
        cr = self.get_cr(cr_id)
        # Validate before emitting anything.
        apply_resolution(cr, node_id, resolution, note, cr.updated)
        batch: list[tuple[EventKind, dict]] = [
            (
                EventKind.CR_ITEM_RESOLVED,
                {
                    "cr_id": cr_id,
                    "node": node_id,
                    "resolution": resolution.value,
                    "note": note,
                },
            )
        ]
        if resolution is Resolution.RESOLVED and node_id in self.graph.nodes:
            suspects = self.graph.suspect_incident(node_id)
            if suspects:
                batch.append(
                    (
                        EventKind.SUSPECT_CLEARED,
                        {
                            "node": node_id,
                            "links": [_link_triple(link) for link in suspects],
                        },
                    )
                )
        self._emit_batch(batch)
        return self.crs[cr_id]

    def recompute_cr(self, cr_id: str) -> ChangeRequest:
        cr = self.get_cr(cr_id)
        refreshed = recompute(cr, self.graph, cr.updated)
        if refreshed is cr:
            return cr
        self._emit(
            EventKind.CR_RECOMPUTED,
            {"cr_id": cr_id, "impact": refreshed.impact.to_dict()},
        )
        return self.crs[cr_id]

    # -- baselines ------------------------------------------------------------

    def create_baseline(self, name: str) -> Baseline:
        if not name:
            raise ValidationError("baseline name must be non-empty")
        if "\n" in name or "\r" in name:
            raise ValidationError("baseline name must not contain newlines")
        if any(b.name == name for b in self.baselines.values()):
            raise DuplicateNameError(f"baseline named {name!r} already exists")
        created = now_utc()
        index_text = render_index(self.name, name, created, self.graph)
        parent = f"BL-{self._baseline_counter}" if self._baseline_counter else None
        payload = {
            "baseline_id": f"BL-{self._baseline_counter + 1}",
            "name": name,
            "created": created,
            "graph_revision": self.graph.graph_revision,
            "index_hash": compute_index_hash(index_text),
            "parent": parent,
        }
        self._emit(EventKind.BASELINE_CREATED, payload)
        baseline = self.baselines[payload["baseline_id"]]
        try:
            path = self.store.baselines_dir / f"{baseline.baseline_id}.index"
            path.write_text(baseline.index_text, encoding="utf-8", newline="")
        except OSError:
            pass  # the log remains authoritative; the file is an export
        return baseline

    def get_baseline(self, ref: str) -> Baseline:
        """Look up by baseline id or by name."""
        baseline = self.baselines.get(ref)
        if baseline is None:
            for candidate in self.baselines.values():
                if candidate.name == ref:
                    return candidate
            raise NotFoundError(f"baseline {ref} not found")
        return baseline

    def diff_baselines(self, a_ref: str, b_ref: str) -> BaselineDiff:
        return diff_baselines(self.get_baseline(a_ref), self.get_baseline(b_ref))

    # -- read-side ------------------------------------------------------------

    def check_coverage(self, dal: DalLevel, ruleset: CoverageRuleSet | None = None) -> GapReport:
        return check_coverage(self.graph, dal, ruleset or default_ruleset())

    def events_since(self, since_seq: int) -> list[Event]:
        return self.log.since(since_seq)

    def verify_log(self) -> int:
        """Re-read the file from disk and verify the chain; returns event count."""
        fresh = EventLog(self.store.events_log)
        fresh.load(recover=False)
        return len(fresh.events)


# -- event application ------------------------------------------------------------


def _apply_node_upserted(engine: ProjectEngine, event: Event) -> None:
    p = event.payload
    kind = kind_from_name(p["kind"])
    source = source_from_name(p["source"])
    if kind is None or source is None:
        raise BadEventError(f"event {event.seq}: unknown kind or source", seq=event.seq)
    outcome = engine.graph.upsert_node(
        ArtifactId.parse(p["id"]), kind, p["title"], p["body"], dict(p["attributes"]), source
    )
    if outcome.result.value != p["outcome"]:
        raise BadEventError(
            f"event {event.seq}: recorded outcome {p['outcome']} but applied "
            f"{outcome.result.value}",
            seq=event.seq,
        )


def _apply_suspect_marked(engine: ProjectEngine, event: Event) -> None:
    # Notification companion to NodeUpserted; the marking is already applied.
    return


def _apply_node_removed(engine: ProjectEngine, event: Event) -> None:
    engine.graph.remove_node(ArtifactId.parse(event.payload["id"]))


def _apply_link_added(engine: ProjectEngine, event: Event) -> None:
    p = event.payload
    link_type = link_type_from_name(p["type"])
    if link_type is None:
        raise BadEventError(f"event {event.seq}: unknown link type", seq=event.seq)
    engine.graph.add_link(ArtifactId.parse(p["from"]), ArtifactId.parse(p["to"]), link_type)


def _apply_link_removed(engine: ProjectEngine, event: Event) -> None:
    p = event.payload
    link_type = link_type_from_name(p["type"])
    if link_type is None:
        raise BadEventError(f"event {event.seq}: unknown link type", seq=event.seq)
    engine.graph.remove_link(ArtifactId.parse(p["from"]), link_type, ArtifactId.parse(p["to"]))


def _apply_suspect_cleared(engine: ProjectEngine, event: Event) -> None:
    cleared = engine.graph.clear_suspects(event.payload["node"])
    recorded = {tuple(t) for t in event.payload["links"]}
    applied = {tuple(_link_triple(link)) for link in cleared}
    if recorded != applied:
        raise BadEventError(
            f"event {event.seq}: cleared links do not match the recorded set", seq=event.seq
        )


def _apply_cr_created(engine: ProjectEngine, event: Event) -> None:
    cr = ChangeRequest.from_dict(event.payload["cr"])
    match = _CR_ID_RE.match(cr.cr_id)
    if match is None or cr.cr_id in engine.crs:
        raise BadEventError(f"event {event.seq}: bad CR id {cr.cr_id!r}", seq=event.seq)
    engine.crs[cr.cr_id] = cr
    engine._cr_counter = max(engine._cr_counter, int(match.group(1)))


def _apply_cr_transitioned(engine: ProjectEngine, event: Event) -> None:
    p = event.payload
    cr = engine.crs.get(p["cr_id"])
    if cr is None or cr.state.value != p["from"]:
        raise BadEventError(f"event {event.seq}: transition does not fit CR state", seq=event.seq)
    engine.crs[cr.cr_id] = apply_transition(cr, CrState(p["to"]), event.ts)


def _apply_cr_item_resolved(engine: ProjectEngine, event: Event) -> None:
    p = event.payload
    cr = engine.crs.get(p["cr_id"])
    if cr is None:
        raise BadEventError(f"event {event.seq}: unknown CR {p['cr_id']!r}", seq=event.seq)
    engine.crs[cr.cr_id] = apply_resolution(
        cr, p["node"], Resolution(p["resolution"]), p["note"], event.ts
    )


def _apply_cr_recomputed(engine: ProjectEngine, event: Event) -> None:
    p = event.payload
    cr = engine.crs.get(p["cr_id"])
    if cr is None:
        raise BadEventError(f"event {event.seq}: unknown CR {p['cr_id']!r}", seq=event.seq)
    if cr.state not in (CrState.DRAFT, CrState.ANALYZED, CrState.APPROVED, CrState.IMPLEMENTING):
        raise WrongStateError(f"cannot recompute impact while {cr.state}")
    engine.crs[cr.cr_id] = replace(cr, impact=ImpactSet.from_dict(p["impact"]), updated=event.ts)


def _apply_baseline_created(engine: ProjectEngine, event: Event) -> None:
    p = event.payload
    match = _BL_ID_RE.match(p["baseline_id"])
    if match is None or p["baseline_id"] in engine.baselines:
        raise BadEventError(f"event {event.seq}: bad baseline id", seq=event.seq)
    if p["graph_revision"] != engine.graph.graph_revision:
        raise BadEventError(
            f"event {event.seq}: baseline revision {p['graph_revision']} does not match "
            f"graph revision {engine.graph.graph_revision}",
            seq=event.seq,
        )
    index_text = render_index(engine.name, p["name"], p["created"], engine.graph)
    index_hash = compute_index_hash(index_text)
    if index_hash != p["index_hash"]:
        raise BadEventError(
            f"event {event.seq}: baseline index hash mismatch on replay", seq=event.seq
        )
    engine.baselines[p["baseline_id"]] = Baseline(
        baseline_id=p["baseline_id"],
        name=p["name"],
        created=p["created"],
        graph_revision=p["graph_revision"],
        index_text=index_text,
        index_hash=index_hash,
        parent=p.get("parent"),
    )
    engine._baseline_counter = max(engine._baseline_counter, int(match.group(1)))


def _apply_ingested(engine: ProjectEngine, event: Event) -> None:
    # Summary/notification record; the node and link events carry the changes.
    return


_APPLIERS = {
    EventKind.NODE_UPSERTED: _apply_node_upserted,
    EventKind.NODE_REMOVED: _apply_node_removed,
    EventKind.LINK_ADDED: _apply_link_added,
    EventKind.LINK_REMOVED: _apply_link_removed,
    EventKind.SUSPECT_MARKED: _apply_suspect_marked,
    EventKind.SUSPECT_CLEARED: _apply_suspect_cleared,
    EventKind.CR_CREATED: _apply_cr_created,
    EventKind.CR_TRANSITIONED: _apply_cr_transitioned,
    EventKind.CR_ITEM_RESOLVED: _apply_cr_item_resolved,
    EventKind.CR_RECOMPUTED: _apply_cr_recomputed,
    EventKind.BASELINE_CREATED: _apply_baseline_created,
    EventKind.INGESTED: _apply_ingested,
}
