from __future__ import annotations

import hashlib
import random
from dataclasses import replace

from conftest import G1_LINKS, G1_NODES, build_g1
from helpers import random_graph
from traceforge.baseline import (
    Baseline,
    compute_index_hash,
    diff_baselines,
    parse_index,
    render_index,
    verify_baseline,
)
from traceforge.graph import TraceGraph
from traceforge.model import ArtifactId, ArtifactKind

TS = "2026-01-01T00:00:00.000000Z"

# SHA-256 of "[NODES]\n[LINKS]\n": the empty-graph index body.
EMPTY_INDEX_HASH = "f59a228dbf15ad079111a818332b67b764371e8c693ea68c17aadb4a86c0529d"


def baseline_of(graph, name="b1", created=TS, project="proj", baseline_id="BL-1") -> Baseline:
    index_text = render_index(project, name, created, graph)
    return Baseline(
        baseline_id=baseline_id,
        name=name,
        created=created,
        graph_revision=graph.graph_revision,
        index_text=index_text,
        index_hash=compute_index_hash(index_text),
    )


class TestRenderIndex:
    def test_empty_graph_template(self):
        text = render_index("p", "rel-1", TS, TraceGraph())
        assert text == (
            "CONFIGURATION-INDEX v1\n"
            "project: p\n"
            "baseline: rel-1\n"
            f"created: {TS}\n"
            "[NODES]\n"
            "[LINKS]\n"
        )
        assert compute_index_hash(text) == EMPTY_INDEX_HASH

    def test_g1_counts_and_first_node_line(self, g1):
        text = render_index("p", "b", TS, g1)
        _, nodes, links = parse_index(text)
        assert len(nodes) == len(G1_NODES)
        assert len(links) == len(G1_LINKS)
        first = text.split("[NODES]\n", 1)[1].split("\n", 1)[0]
        commit_hash = g1.get_node("CMT-0aaa").content_hash
        assert first == f"CMT-0aaa\tCommit\t1\t{commit_hash}\tActive"

    def test_serialize_twice_identical(self, g1):
        assert render_index("p", "b", TS, g1) == render_index("p", "b", TS, g1)

    def test_hash_excludes_header(self, g1):
        a = render_index("p", "b", TS, g1)
        b = render_index("other", "release", "2027-09-09T01:02:03.000000Z", g1)
        assert a != b
        assert compute_index_hash(a) == compute_index_hash(b)

    def test_deterministic_under_shuffled_history(self):
        rng = random.Random(8)
        reference = None
        nodes = list(G1_NODES)
        links = list(G1_LINKS)
        for _ in range(5):
            rng.shuffle(nodes)
            rng.shuffle(links)
            graph = TraceGraph()
            for node_id, kind, title, body, attributes in nodes:
                graph.upsert_node(ArtifactId.parse(node_id), kind, title, body, attributes)
            for from_id, link_type, to_id in links:
                graph.add_link(ArtifactId.parse(from_id), ArtifactId.parse(to_id), link_type)
            body_hash = compute_index_hash(render_index("p", "b", TS, graph))
            if reference is None:
                reference = body_hash
            assert body_hash == reference


class TestVerify:
    def test_untouched_baseline(self, g1):
        assert verify_baseline(baseline_of(g1))

    def test_tampered_node_line(self, g1):
        baseline = baseline_of(g1)
        tampered = replace(
            baseline, index_text=baseline.index_text.replace("\t1\t", "\t2\t", 1)
        )
        assert not verify_baseline(tampered)

    def test_altered_header_only_still_verifies(self, g1):
        baseline = baseline_of(g1)
        tampered = replace(
            baseline,
            index_text=baseline.index_text.replace(f"created: {TS}", "created: 1999-01-01T00:00:00Z"),
        )
        assert verify_baseline(tampered)


class TestRoundTrip:
    def test_index_parses_back_to_snapshot(self, g1):
        g1.upsert_node(ArtifactId.parse("HLR-1"), ArtifactKind.HIGH_LEVEL_REQUIREMENT, "Boot time", "v2")
        g1.remove_node(ArtifactId.parse("TR-1"))
        header, nodes, links = parse_index(render_index("p", "b", TS, g1))
        assert header == {"project": "p", "baseline": "b", "created": TS}
        expected_nodes = [
            (k, n.kind.value, n.revision, n.content_hash, n.status.value)
            for k, n in sorted(g1.nodes.items())
        ]
        assert nodes == expected_nodes
        expected_links = [
            (k[0], k[1], k[2], l.suspect) for k, l in sorted(g1.links.items())
        ]
        assert links == expected_links


class TestDiff:
    def test_diff_self_is_empty(self, g1):
        baseline = baseline_of(g1)
        assert diff_baselines(baseline, baseline).empty

    def test_content_update_shows_modified_and_suspects(self, g1):
        a = baseline_of(g1)
        g1.upsert_node(ArtifactId.parse("HLR-1"), ArtifactKind.HIGH_LEVEL_REQUIREMENT, "Boot time", "v2")
        b = baseline_of(g1, name="b2", baseline_id="BL-2")
        diff = diff_baselines(a, b)
        assert diff.nodes_modified == ("HLR-1",)
        assert diff.nodes_added == () and diff.nodes_removed == ()
        assert set(diff.links_suspect_changed) == {
            ("HLR-1", "SATISFIES", "SYS-1"),
            ("ISS-1", "TRACKS", "HLR-1"),
            ("LLR-1", "REFINES", "HLR-1"),
            ("TC-1", "VERIFIES", "HLR-1"),
        }

    def test_tombstone_shows_modified_and_removed_links(self, g1):
        a = baseline_of(g1)
        g1.remove_node(ArtifactId.parse("HLR-1"))
        b = baseline_of(g1, name="b2", baseline_id="BL-2")
        diff = diff_baselines(a, b)
        assert diff.nodes_modified == ("HLR-1",)
        assert len(diff.links_removed) == 4

    def test_swap_inverts_added_removed(self, g1):
        a = baseline_of(g1)
        g1.upsert_node(ArtifactId.parse("DOC-1"), ArtifactKind.DOCUMENT, "doc")
        g1.remove_node(ArtifactId.parse("TR-1"))
        b = baseline_of(g1, name="b2", baseline_id="BL-2")
        forward = diff_baselines(a, b)
        backward = diff_baselines(b, a)
        assert forward.nodes_added == backward.nodes_removed
        assert forward.nodes_removed == backward.nodes_added
        assert forward.links_added == backward.links_removed
        assert forward.links_removed == backward.links_added
        assert forward.nodes_modified == backward.nodes_modified
        assert forward.links_suspect_changed == backward.links_suspect_changed

    def test_node_lists_disjoint(self):
        rng = random.Random(44)
        graph = random_graph(rng, max_nodes=25, max_links=50)
        a = baseline_of(graph)
        for _ in range(8):
            keys = sorted(graph.nodes)
            key = rng.choice(keys)
            node = graph.nodes[key]
            if node.status.value == "Active" and rng.random() < 0.5:
                graph.upsert_node(node.id, node.kind, node.title, f"v{rng.random()}")
            else:
                graph.upsert_node(
                    ArtifactId.parse(f"NEW-{rng.randint(0, 99)}"), ArtifactKind.DOCUMENT, "n"
                )
        b = baseline_of(graph, name="b2", baseline_id="BL-2")
        diff = diff_baselines(a, b)
        added, removed, modified = (
            set(diff.nodes_added),
            set(diff.nodes_removed),
            set(diff.nodes_modified),
        )
        assert not (added & removed) and not (added & modified) and not (removed & modified)


class TestImmutability:
    def test_diff_and_verify_do_not_mutate(self, g1):
        baseline = baseline_of(g1)
        snapshot = baseline.index_text
        verify_baseline(baseline)
        diff_baselines(baseline, baseline)
        assert baseline.index_text == snapshot
        assert hashlib.sha256(snapshot.encode()).hexdigest() == hashlib.sha256(
            baseline.index_text.encode()
        ).hexdigest()
