from __future__ import annotations

from pathlib import Path

import pytest

from traceforge.graph import TraceGraph
from traceforge.model import ArtifactId, ArtifactKind, LinkType

FIXTURES = Path(__file__).parent / "fixtures"

# Shared fixture graph: one artifact of every flavor plus a full trace path.
G1_NODES = [
    ("SYS-1", ArtifactKind.SYSTEM_REQUIREMENT, "System boots", "The system shall boot.", {}),
    ("HLR-1", ArtifactKind.HIGH_LEVEL_REQUIREMENT, "Boot time", "Starts in 2s.", {}),
    ("HLR-2", ArtifactKind.HIGH_LEVEL_REQUIREMENT, "Watchdog", "Watchdog logic.", {"derived": "true"}),
    ("LLR-1", ArtifactKind.LOW_LEVEL_REQUIREMENT, "Boot sequencer", "Init order.", {}),
    ("SRC:src/a.c", ArtifactKind.SOURCE_UNIT, "src/a.c", "boot code", {}),
    ("TC-1", ArtifactKind.TEST_CASE, "boot test", "steps", {"env": "rig"}),
    ("TR-1", ArtifactKind.TEST_RESULT, "boot test run", "pass", {}),
    ("ISS-1", ArtifactKind.ISSUE, "crash", "Crash on boot.", {}),
    ("CMT-0aaa", ArtifactKind.COMMIT, "fix boot", "fix boot\n\nResolves: ISS-1", {}),
]

G1_LINKS = [
    ("HLR-1", LinkType.SATISFIES, "SYS-1"),
    ("LLR-1", LinkType.REFINES, "HLR-1"),
    ("SRC:src/a.c", LinkType.IMPLEMENTS, "LLR-1"),
    ("TC-1", LinkType.VERIFIES, "HLR-1"),
    ("TR-1", LinkType.RECORDS, "TC-1"),
    ("ISS-1", LinkType.TRACKS, "HLR-1"),
    ("CMT-0aaa", LinkType.MODIFIES, "SRC:src/a.c"),
    ("CMT-0aaa", LinkType.RESOLVES, "ISS-1"),
]


def build_g1(target):
    """Populate any graph-mutator (TraceGraph or ProjectEngine) with G1."""
    for node_id, kind, title, body, attributes in G1_NODES:
        target.upsert_node(ArtifactId.parse(node_id), kind, title, body, attributes)
    for from_id, link_type, to_id in G1_LINKS:
        target.add_link(ArtifactId.parse(from_id), ArtifactId.parse(to_id), link_type)
    return target


@pytest.fixture
def g1() -> TraceGraph:
    return build_g1(TraceGraph())


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
