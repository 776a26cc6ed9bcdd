"""Property tests over generated graphs and mutation sequences."""

from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

from traceforge.graph import TraceGraph, UpsertResult
from traceforge.model import (
    ArtifactId,
    ArtifactKind,
    LINK_TYPE_MATRIX,
    LinkType,
    canonical_hash,
)

kinds = st.sampled_from(list(ArtifactKind))
node_indices = st.integers(min_value=0, max_value=14)
texts = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=20
)
attribute_maps = st.dictionaries(
    st.text(alphabet="abcdefgh", min_size=1, max_size=4), texts, max_size=3
)


@st.composite
def graph_specs(draw):
    """A list of node specs plus matrix-legal link attempts between them."""
    count = draw(st.integers(min_value=1, max_value=15))
    nodes = []
    for index in range(count):
        kind = draw(kinds)
        nodes.append((f"N-{index}", kind, draw(texts), draw(texts), draw(attribute_maps)))
    links = []
    for _ in range(draw(st.integers(min_value=0, max_value=25))):
        link_type = draw(st.sampled_from(list(LinkType)))
        pairs = sorted(LINK_TYPE_MATRIX[link_type], key=lambda p: (p[0].value, p[1].value))
        from_kind, to_kind = draw(st.sampled_from(pairs))
        candidates_from = [n[0] for n in nodes if n[1] is from_kind]
        candidates_to = [n[0] for n in nodes if n[1] is to_kind]
        if not candidates_from or not candidates_to:
            continue
        links.append(
            (draw(st.sampled_from(candidates_from)), link_type, draw(st.sampled_from(candidates_to)))
        )
    return nodes, links


def build(spec) -> TraceGraph:
    nodes, links = spec
    graph = TraceGraph()
    for node_id, kind, title, body, attributes in nodes:
        graph.upsert_node(ArtifactId.parse(node_id), kind, title, body, attributes)
    for from_id, link_type, to_id in links:
        if from_id == to_id or graph.has_link(
            ArtifactId.parse(from_id), link_type, ArtifactId.parse(to_id)
        ):
            continue
        graph.add_link(ArtifactId.parse(from_id), ArtifactId.parse(to_id), link_type)
    return graph


@given(graph_specs())
@settings(max_examples=60, deadline=None)
def test_no_stored_link_violates_endpoint_matrix(spec):
    graph = build(spec)
    for link in graph.iter_links():
        from_kind = graph.nodes[link.from_id.render()].kind
        to_kind = graph.nodes[link.to_id.render()].kind
        assert (from_kind, to_kind) in LINK_TYPE_MATRIX[link.type]


@given(graph_specs())
@settings(max_examples=60, deadline=None)
def test_content_hash_invariant_holds_everywhere(spec):
    graph = build(spec)
    for node in graph.nodes.values():
        assert node.content_hash == canonical_hash(node)


@given(graph_specs(), node_indices, texts)
@settings(max_examples=60, deadline=None)
def test_suspect_completeness_on_update(spec, index, new_body):
    graph = build(spec)
    keys = sorted(graph.nodes)
    key = keys[index % len(keys)]
    node = graph.nodes[key]
    incident = {link.key for link in graph.incident_links(key)}
    suspect_before = {k for k, link in graph.links.items() if link.suspect}
    outcome = graph.upsert_node(node.id, node.kind, node.title, new_body, node.attributes)
    if outcome.result is UpsertResult.UNCHANGED:
        assert {k for k, link in graph.links.items() if link.suspect} == suspect_before
        return
    for link_key, link in graph.links.items():
        if link_key in incident:
            assert link.suspect
        else:
            assert link.suspect == (link_key in suspect_before)


@given(graph_specs(), node_indices)
@settings(max_examples=60, deadline=None)
def test_upsert_is_idempotent(spec, index):
    graph = build(spec)
    keys = sorted(graph.nodes)
    key = keys[index % len(keys)]
    node = graph.nodes[key]
    first = graph.upsert_node(node.id, node.kind, node.title, "settled", node.attributes)
    assert first.result in (UpsertResult.UPDATED, UpsertResult.UNCHANGED)
    revision = graph.graph_revision
    second = graph.upsert_node(node.id, node.kind, node.title, "settled", node.attributes)
    assert second.result is UpsertResult.UNCHANGED
    assert graph.graph_revision == revision
