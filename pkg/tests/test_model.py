from __future__ import annotations

import pytest

from traceforge.errors import InvalidArtifactIdError
from traceforge.model import (
    ArtifactId,
    ArtifactKind,
    ArtifactNode,
    LINK_TYPE_MATRIX,
    LinkType,
    canonical_hash,
    endpoints_allowed,
)

# Golden value: SHA-256 of "TestCase\nTC-1\nboot test\nsteps\nenv=rig\n",
# computed with hashlib before the hash function existed.
TC1_GOLDEN = "c5b5d2372c5fdf07228d13d4bdf7cd390410f7148dc802a9dc48aa17aa7cb311"
# SHA-256 of "HighLevelRequirement\nHLR-1\n\n\n"
EMPTY_HLR_GOLDEN = "2e903e4abe826e10e5bafc719e029c15199736b923c37dab9f85bc00f5084964"


def make_node(**overrides) -> ArtifactNode:
    defaults = dict(
        id=ArtifactId.parse("HLR-1"),
        kind=ArtifactKind.HIGH_LEVEL_REQUIREMENT,
        title="",
        body="",
        attributes={},
    )
    defaults.update(overrides)
    return ArtifactNode(**defaults)


class TestArtifactId:
    def test_bare_token(self):
        aid = ArtifactId.parse("HLR-1")
        assert aid.namespace == ""
        assert aid.render() == "HLR-1"

    def test_namespaced(self):
        aid = ArtifactId.parse("SRC:src/a.c")
        assert aid.namespace == "SRC"
        assert aid.local == "src/a.c"
        assert aid.render() == "SRC:src/a.c"

    def test_lowercase_prefix_is_bare(self):
        aid = ArtifactId.parse("src:a")
        assert aid.namespace == ""
        assert aid.local == "src:a"

    @pytest.mark.parametrize("bad", ["", "A B", "A\tB", "A\nB", "NS:"])
    def test_rejects_whitespace_and_empty(self, bad):
        with pytest.raises(InvalidArtifactIdError):
            ArtifactId.parse(bad)

    def test_ordering_is_bytewise_on_rendered_form(self):
        ids = [ArtifactId.parse(t) for t in ["TC-1", "ISS-1", "LLR-1", "SYS-1"]]
        assert [i.render() for i in sorted(ids)] == ["ISS-1", "LLR-1", "SYS-1", "TC-1"]


class TestCanonicalHash:
    def test_empty_content_case(self):
        node = make_node()
        assert canonical_hash(node) == EMPTY_HLR_GOLDEN

    def test_golden_value(self):
        node = make_node(
            id=ArtifactId.parse("TC-1"),
            kind=ArtifactKind.TEST_CASE,
            title="boot test",
            body="steps",
            attributes={"env": "rig"},
        )
        assert canonical_hash(node) == TC1_GOLDEN

    def test_attribute_order_invariance(self):
        a = make_node(attributes={"x": "1", "a": "2", "m": "3"})
        b = make_node(attributes={"m": "3", "x": "1", "a": "2"})
        assert canonical_hash(a) == canonical_hash(b)

    def test_excludes_revision_source_status(self):
        from traceforge.model import NodeSource, NodeStatus

        a = make_node()
        b = make_node(revision=7, source=NodeSource.VCS, status=NodeStatus.DELETED)
        assert canonical_hash(a) == canonical_hash(b)

    def test_sensitive_to_each_content_field(self):
        base = canonical_hash(make_node())
        assert canonical_hash(make_node(title="t")) != base
        assert canonical_hash(make_node(body="b")) != base
        assert canonical_hash(make_node(attributes={"k": "v"})) != base
        assert canonical_hash(make_node(id=ArtifactId.parse("HLR-2"))) != base


class TestLinkTypeMatrix:
    def test_every_type_has_endpoints(self):
        for link_type in LinkType:
            assert LINK_TYPE_MATRIX[link_type]

    def test_satisfies_is_hlr_to_sys(self):
        assert endpoints_allowed(
            LinkType.SATISFIES,
            ArtifactKind.HIGH_LEVEL_REQUIREMENT,
            ArtifactKind.SYSTEM_REQUIREMENT,
        )
        assert not endpoints_allowed(
            LinkType.SATISFIES,
            ArtifactKind.SYSTEM_REQUIREMENT,
            ArtifactKind.HIGH_LEVEL_REQUIREMENT,
        )

    def test_verifies_targets_requirements_only(self):
        assert endpoints_allowed(
            LinkType.VERIFIES, ArtifactKind.TEST_CASE, ArtifactKind.LOW_LEVEL_REQUIREMENT
        )
        assert not endpoints_allowed(
            LinkType.VERIFIES, ArtifactKind.TEST_CASE, ArtifactKind.SYSTEM_REQUIREMENT
        )

    def test_initials_unambiguous_within_any_endpoint_pair(self):
        # REFINES/RECORDS/RESOLVES share an initial; they must never be
        # compatible with the same (row, col) kind pair, or matrix cells
        # would be ambiguous.
        by_initial: dict[str, list[LinkType]] = {}
        for link_type in LinkType:
            by_initial.setdefault(link_type.value[0], []).append(link_type)
        for group in by_initial.values():
            pairs = set()
            for link_type in group:
                for pair in LINK_TYPE_MATRIX[link_type]:
                    assert pair not in pairs
                    assert (pair[1], pair[0]) not in pairs
                    pairs.add(pair)
