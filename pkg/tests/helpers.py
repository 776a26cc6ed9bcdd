"""Independent oracles and random-graph generators used across the suite.

The oracles deliberately avoid the library's adjacency indices and rule
dispatch: they work from plain link-triple lists so they stay an independent
check on the production implementations.
"""

from __future__ import annotations

import random

from traceforge.compliance import CoverageRuleSet, DalLevel, RuleDirection
from traceforge.graph import Direction, TraceGraph
from traceforge.model import (
    ArtifactId,
    ArtifactKind,
    LINK_TYPE_MATRIX,
    LinkType,
)

KINDS = list(ArtifactKind)
LINK_TYPES = list(LinkType)


def random_graph(
    rng: random.Random,
    max_nodes: int = 50,
    max_links: int = 120,
    derived_probability: float = 0.15,
) -> TraceGraph:
    """A random matrix-legal graph built through the normal mutation API."""
    graph = TraceGraph()
    node_count = rng.randint(1, max_nodes)
    by_kind: dict[ArtifactKind, list[ArtifactId]] = {kind: [] for kind in KINDS}
    for index in range(node_count):
        kind = rng.choice(KINDS)
        node_id = ArtifactId.parse(f"{kind.value[:3].upper()}-{index}")
        attributes = {}
        if rng.random() < derived_probability:
            attributes["derived"] = "true"
        graph.upsert_node(node_id, kind, f"title {index}", f"body {index}", attributes)
        by_kind[kind].append(node_id)
    attempts = rng.randint(0, max_links)
    for _ in range(attempts):
        link_type = rng.choice(LINK_TYPES)
        pairs = [
            (f, t)
            for f, t in LINK_TYPE_MATRIX[link_type]
            if by_kind[f] and by_kind[t]
        ]
        if not pairs:
            continue
        from_kind, to_kind = rng.choice(pairs)
        from_id = rng.choice(by_kind[from_kind])
        to_id = rng.choice(by_kind[to_kind])
        if from_id.render() == to_id.render():
            continue
        if graph.has_link(from_id, link_type, to_id):
            continue
        graph.add_link(from_id, to_id, link_type)
    return graph


def link_triples(graph: TraceGraph) -> list[tuple[str, str, str]]:
    return [key for key in sorted(graph.links)]


def brute_force_bfs(
    triples: list[tuple[str, str, str]],
    seeds: list[str],
    allowed_types: set[str],
    max_depth: int | None,
    direction: Direction = Direction.BOTH,
) -> dict[str, int]:
    """Layer-by-layer reachability by rescanning the raw link list; returns
    node -> distance including the seeds at 0."""
    distances = {seed: 0 for seed in seeds}
    frontier = set(seeds)
    depth = 0
    while frontier and (max_depth is None or depth < max_depth):
        depth += 1
        next_frontier = set()
        for from_id, type_name, to_id in triples:
            if type_name not in allowed_types:
                continue
            if direction in (Direction.OUTGOING, Direction.BOTH):
                if from_id in frontier and to_id not in distances:
                    next_frontier.add(to_id)
            if direction in (Direction.INCOMING, Direction.BOTH):
                if to_id in frontier and from_id not in distances:
                    next_frontier.add(from_id)
        for node in next_frontier:
            distances[node] = depth
        frontier = next_frontier
    return distances


def brute_force_coverage(
    graph: TraceGraph, dal: DalLevel, ruleset: CoverageRuleSet
) -> set[tuple]:
    """Node x rule iteration, counting links by scanning the full link list.
    Returns gap identities: ('missing', node, rule) and, when the level checks
    suspects, one ('suspect', from, type, to) per suspect link."""
    gaps: set[tuple] = set()
    links = [
        (k[0], k[1], k[2], graph.links[k].suspect) for k in sorted(graph.links)
    ]
    for key in sorted(graph.nodes):
        node = graph.nodes[key]
        if node.status.value != "Active":
            continue
        for rule in ruleset.rules:
            if dal not in rule.applies_to:
                continue
            if rule.subject_kind is not node.kind:
                continue
            if rule.exempt_derived and node.attributes.get("derived") == "true":
                continue
            if rule.direction is RuleDirection.OUTGOING:
                count = sum(
                    1 for f, t, _to, _s in links if f == key and t == rule.link_type.value
                )
            else:
                count = sum(
                    1 for _f, t, to, _s in links if to == key and t == rule.link_type.value
                )
            if count < rule.min_count:
                gaps.add(("missing", key, rule.rule_id))
    if dal in ruleset.check_suspect_links:
        for f, t, to, suspect in links:
            if suspect:
                gaps.add(("suspect", f, t, to))
    return gaps


def gap_identities(report) -> set[tuple]:
    """Map a GapReport to the oracle's identity space."""
    identities: set[tuple] = set()
    for gap in report.gaps:
        if gap.rule_id == "SUSPECT":
            # detail format: "suspect link <from> -<TYPE>-> <to>"
            _, _, from_id, arrow, to_id = gap.detail.split(" ")
            identities.add(("suspect", from_id, arrow[1:-2], to_id))
        else:
            identities.add(("missing", gap.node_id, gap.rule_id))
    assert len(identities) == len(report.gaps), "duplicate gaps in report"
    return identities


def gap_pairs(report) -> set[tuple[str, str]]:
    return {(gap.node_id, gap.rule_id) for gap in report.gaps}
