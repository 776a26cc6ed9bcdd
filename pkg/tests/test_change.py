from __future__ import annotations

import random

import pytest

from conftest import build_g1
from traceforge.change import (
    ChangeRequest,
    CrState,
    Resolution,
    apply_resolution,
    apply_transition,
    check_transition,
    recompute,
)
from traceforge.errors import (
    AlreadyResolvedError,
    GuardFailedError,
    IllegalTransitionError,
    SeedDeletedError,
    UnknownItemError,
    WrongStateError,
)
from traceforge.graph import TraceGraph
from traceforge.impact import ImpactConfig, ItemStatus, compute_impact
from traceforge.model import ArtifactId, ArtifactKind, LinkType

HLR1 = ArtifactId.parse("HLR-1")
TRACE_TYPES = frozenset(
    {LinkType.SATISFIES, LinkType.REFINES, LinkType.IMPLEMENTS, LinkType.VERIFIES}
)
TS = "2026-01-01T00:00:00.000000Z"


def make_cr(graph, seeds=None, config=None, state=CrState.DRAFT) -> ChangeRequest:
    impact = compute_impact(graph, seeds or [HLR1], config or ImpactConfig(allowed_types=TRACE_TYPES))
    return ChangeRequest(
        cr_id="CR-1",
        title="change boot",
        description="",
        state=state,
        impact=impact,
        created=TS,
        updated=TS,
    )


def resolve_all(cr: ChangeRequest) -> ChangeRequest:
    for item in cr.impact.items:
        cr = apply_resolution(cr, item.node_id, Resolution.RESOLVED, "done", TS)
    return cr


class TestTransitions:
    def test_draft_to_approved_is_illegal(self, g1):
        cr = make_cr(g1)
        with pytest.raises(IllegalTransitionError):
            check_transition(cr, CrState.APPROVED, g1)

    def test_verified_requires_all_resolved(self, g1):
        cr = make_cr(g1, state=CrState.IMPLEMENTING)
        with pytest.raises(GuardFailedError) as info:
            check_transition(cr, CrState.VERIFIED, g1)
        assert "5 unresolved" in str(info.value)

    def test_full_legal_chain_to_closed(self, g1):
        cr = make_cr(g1)
        for target in (CrState.ANALYZED, CrState.APPROVED, CrState.IMPLEMENTING):
            check_transition(cr, target, g1)
            cr = apply_transition(cr, target, TS)
        cr = resolve_all(cr)
        for target in (CrState.VERIFIED, CrState.CLOSED):
            check_transition(cr, target, g1)
            cr = apply_transition(cr, target, TS)
        assert cr.state is CrState.CLOSED

    def test_closed_blocked_by_suspect_link(self, g1):
        cr = make_cr(g1)
        for target in (CrState.ANALYZED, CrState.APPROVED, CrState.IMPLEMENTING):
            cr = apply_transition(cr, target, TS)
        cr = resolve_all(cr)
        cr = apply_transition(cr, CrState.VERIFIED, TS)
        # a late content change makes links incident to an impacted node suspect
        g1.upsert_node(ArtifactId.parse("SYS-1"), ArtifactKind.SYSTEM_REQUIREMENT, "System boots", "v2")
        with pytest.raises(GuardFailedError):
            check_transition(cr, CrState.CLOSED, g1)

    def test_reject_only_from_draft_or_analyzed(self, g1):
        cr = make_cr(g1)
        check_transition(cr, CrState.REJECTED, g1)
        cr = apply_transition(cr, CrState.ANALYZED, TS)
        check_transition(cr, CrState.REJECTED, g1)
        cr = apply_transition(cr, CrState.APPROVED, TS)
        with pytest.raises(IllegalTransitionError):
            check_transition(cr, CrState.REJECTED, g1)

    def test_stale_counts_as_unresolved(self, g1):
        cr = make_cr(g1, state=CrState.IMPLEMENTING)
        cr = resolve_all(cr)
        g1.remove_link(ArtifactId.parse("LLR-1"), LinkType.REFINES, HLR1)
        cr = recompute(cr, g1, TS)
        assert cr.impact.item_for("LLR-1").status is ItemStatus.STALE
        with pytest.raises(GuardFailedError):
            check_transition(cr, CrState.VERIFIED, g1)


class TestResolveItem:
    def test_resolve_pending_item(self, g1):
        cr = make_cr(g1, state=CrState.IMPLEMENTING)
        cr = apply_resolution(cr, "LLR-1", Resolution.RESOLVED, "patched", TS)
        item = cr.impact.item_for("LLR-1")
        assert item.status is ItemStatus.RESOLVED
        assert item.note == "patched"

    def test_waive(self, g1):
        cr = make_cr(g1, state=CrState.ANALYZED)
        cr = apply_resolution(cr, "SYS-1", Resolution.WAIVED, "not affected", TS)
        assert cr.impact.item_for("SYS-1").status is ItemStatus.WAIVED

    def test_double_resolve(self, g1):
        cr = make_cr(g1, state=CrState.IMPLEMENTING)
        cr = apply_resolution(cr, "LLR-1", Resolution.RESOLVED, "", TS)
        with pytest.raises(AlreadyResolvedError):
            apply_resolution(cr, "LLR-1", Resolution.RESOLVED, "", TS)

    def test_wrong_state(self, g1):
        cr = make_cr(g1)  # Draft
        with pytest.raises(WrongStateError):
            apply_resolution(cr, "LLR-1", Resolution.RESOLVED, "", TS)

    def test_unknown_item(self, g1):
        cr = make_cr(g1, state=CrState.IMPLEMENTING)
        with pytest.raises(UnknownItemError):
            apply_resolution(cr, "TR-1", Resolution.RESOLVED, "", TS)

    def test_resolution_touches_only_target_item(self, g1):
        cr = make_cr(g1, state=CrState.IMPLEMENTING)
        before = {i.node_id: i.status for i in cr.impact.items}
        cr = apply_resolution(cr, "LLR-1", Resolution.RESOLVED, "", TS)
        after = {i.node_id: i.status for i in cr.impact.items}
        for node_id, status in after.items():
            if node_id == "LLR-1":
                continue
            assert status == before[node_id]


class TestRecompute:
    def test_noop_when_revision_unchanged(self, g1):
        cr = make_cr(g1)
        assert recompute(cr, g1, TS) is cr

    def test_wrong_state(self, g1):
        cr = make_cr(g1, state=CrState.CLOSED)
        g1.upsert_node(ArtifactId.parse("DOC-1"), ArtifactKind.DOCUMENT, "x")
        with pytest.raises(WrongStateError):
            recompute(cr, g1, TS)

    def test_seed_deleted(self, g1):
        cr = make_cr(g1)
        g1.remove_node(HLR1)
        with pytest.raises(SeedDeletedError):
            recompute(cr, g1, TS)

    def test_new_verifier_appears_pending_resolutions_untouched(self, g1):
        cr = make_cr(g1, state=CrState.IMPLEMENTING)
        cr = apply_resolution(cr, "LLR-1", Resolution.RESOLVED, "done", TS)
        tc2 = ArtifactId.parse("TC-2")
        g1.upsert_node(tc2, ArtifactKind.TEST_CASE, "t2")
        g1.add_link(tc2, HLR1, LinkType.VERIFIES)
        cr = recompute(cr, g1, TS)
        assert cr.impact.item_for("TC-2").status is ItemStatus.PENDING
        assert cr.impact.item_for("TC-2").distance == 1
        assert cr.impact.item_for("LLR-1").status is ItemStatus.RESOLVED
        assert cr.impact.item_for("LLR-1").note == "done"


class TestStateMachineSafety:
    """Random action sequences can never reach a state violating its invariant."""

    ACTIONS = ("transition", "resolve", "recompute", "mutate_graph")

    def test_random_sequences(self):
        rng = random.Random(31)
        for trial in range(60):
            graph = build_g1(TraceGraph())
            cr = make_cr(graph)
            for _ in range(25):
                action = rng.choice(self.ACTIONS)
                try:
                    if action == "transition":
                        target = rng.choice(list(CrState))
                        check_transition(cr, target, graph)
                        cr = apply_transition(cr, target, TS)
                    elif action == "resolve":
                        item = rng.choice(cr.impact.items)
                        resolution = rng.choice(list(Resolution))
                        cr = apply_resolution(cr, item.node_id, resolution, "", TS)
                        if resolution is Resolution.RESOLVED and item.node_id in graph.nodes:
                            graph.clear_suspects(item.node_id)
                    elif action == "recompute":
                        cr = recompute(cr, graph, TS)
                    else:
                        self.random_graph_mutation(rng, graph)
                except Exception:
                    pass  # rejected actions must leave the CR unchanged
                self.assert_invariants(cr, graph)

    @staticmethod
    def random_graph_mutation(rng, graph):
        choice = rng.random()
        keys = sorted(graph.nodes)
        if choice < 0.5 and keys:
            key = rng.choice(keys)
            node = graph.nodes[key]
            if node.status.value == "Active":
                graph.upsert_node(node.id, node.kind, node.title, f"v{rng.random()}", node.attributes)
        elif graph.links:
            key = rng.choice(sorted(graph.links))
            link = graph.links[key]
            graph.remove_link(link.from_id, link.type, link.to_id)

    @staticmethod
    def assert_invariants(cr: ChangeRequest, graph: TraceGraph):
        if cr.state in (CrState.VERIFIED, CrState.CLOSED):
            for item in cr.impact.items:
                assert item.status not in (ItemStatus.PENDING, ItemStatus.STALE), (
                    f"{cr.state} with {item.status} item"
                )
        if cr.state is not CrState.DRAFT and cr.state is not CrState.REJECTED:
            assert cr.impact is not None and cr.impact.seeds
        for item in cr.impact.items:
            assert (item.distance == 0) == (item.node_id in cr.impact.seeds)
            assert len(item.path) == item.distance
