"""Core artifact/link data model for the bidirectional trace graph.

Node identity, the closed artifact-kind and link-type vocabularies, the
endpoint matrix that keeps stored links semantically well-formed, and the
canonical content hash that drives suspect marking and baselining.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum

from traceforge.errors import InvalidArtifactIdError

_NAMESPACE_RE = re.compile(r"^[A-Z][A-Z0-9_]{0,15}$")
_WHITESPACE_RE = re.compile(r"[ \t\r\n\f\v]")


@dataclass(frozen=True, order=True)
class ArtifactId:
    """Stable artifact identity: optional short uppercase namespace + local token.

    Rendered as ``NAMESPACE:LOCAL`` (or the bare local token when the
    namespace is empty). Ordering and equality are bytewise on the rendered
    form, which UTF-8 preserves for ``str`` comparison.
    """

    namespace: str
    local: str

    def __post_init__(self):
        if self.namespace and not _NAMESPACE_RE.match(self.namespace):
            raise InvalidArtifactIdError(
                f"namespace {self.namespace!r} is not a short uppercase token"
            )
        if not self.local:
            raise InvalidArtifactIdError("artifact id local part is empty")
        rendered = self.render()
        if _WHITESPACE_RE.search(rendered):
            raise InvalidArtifactIdError(f"artifact id {rendered!r} contains whitespace")

    def render(self) -> str:
        return f"{self.namespace}:{self.local}" if self.namespace else self.local

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "ArtifactId":
        """Parse a rendered id. A prefix before the first ``:`` that looks like
        an uppercase token becomes the namespace; otherwise the whole string is
        a bare local token."""
        if not text:
            raise InvalidArtifactIdError("artifact id is empty")
        if ":" in text:
            prefix, rest = text.split(":", 1)
            if _NAMESPACE_RE.match(prefix):
                return cls(namespace=prefix, local=rest)
        return cls(namespace="", local=text)


class ArtifactKind(Enum):
    SYSTEM_REQUIREMENT = "SystemRequirement"
    HIGH_LEVEL_REQUIREMENT = "HighLevelRequirement"
    LOW_LEVEL_REQUIREMENT = "LowLevelRequirement"
    DESIGN_ELEMENT = "DesignElement"
    SOURCE_UNIT = "SourceUnit"
    TEST_CASE = "TestCase"
    TEST_RESULT = "TestResult"
    ISSUE = "Issue"
    COMMIT = "Commit"
    DOCUMENT = "Document"

    def __str__(self) -> str:
        return self.value


_KIND_BY_NAME = {k.value: k for k in ArtifactKind}

# Short codes shared by the ingestion formats and the rule-config grammar.
KIND_CODES: dict[str, ArtifactKind] = {
    "SYS": ArtifactKind.SYSTEM_REQUIREMENT,
    "HLR": ArtifactKind.HIGH_LEVEL_REQUIREMENT,
    "LLR": ArtifactKind.LOW_LEVEL_REQUIREMENT,
    "DES": ArtifactKind.DESIGN_ELEMENT,
    "SRC": ArtifactKind.SOURCE_UNIT,
    "TC": ArtifactKind.TEST_CASE,
    "TR": ArtifactKind.TEST_RESULT,
    "ISS": ArtifactKind.ISSUE,
    "CMT": ArtifactKind.COMMIT,
    "DOC": ArtifactKind.DOCUMENT,
}


def kind_from_name(name: str) -> ArtifactKind | None:
    return _KIND_BY_NAME.get(name)


def resolve_kind(token: str) -> ArtifactKind | None:
    """Accept either a short code (``HLR``) or a full kind name."""
    return KIND_CODES.get(token) or _KIND_BY_NAME.get(token)


class NodeSource(Enum):
    REQ_STORE = "ReqStore"
    ISSUE_TRACKER = "IssueTracker"
    VCS = "Vcs"
    MANUAL = "Manual"

    def __str__(self) -> str:
        return self.value


_SOURCE_BY_NAME = {s.value: s for s in NodeSource}


def source_from_name(name: str) -> NodeSource | None:
    return _SOURCE_BY_NAME.get(name)


class NodeStatus(Enum):
    ACTIVE = "Active"
    DELETED = "Deleted"

    def __str__(self) -> str:
        return self.value


class LinkType(Enum):
    SATISFIES = "SATISFIES"
    REFINES = "REFINES"
    IMPLEMENTS = "IMPLEMENTS"
    VERIFIES = "VERIFIES"
    RECORDS = "RECORDS"
    TRACKS = "TRACKS"
    RESOLVES = "RESOLVES"
    MODIFIES = "MODIFIES"
    CONTRIBUTES = "CONTRIBUTES"

    def __str__(self) -> str:
        return self.value


_LINK_TYPE_BY_NAME = {t.value: t for t in LinkType}


def link_type_from_name(name: str) -> LinkType | None:
    return _LINK_TYPE_BY_NAME.get(name)


# Endpoint matrix: which (from-kind, to-kind) pairs each link type may connect.
LINK_TYPE_MATRIX: dict[LinkType, frozenset[tuple[ArtifactKind, ArtifactKind]]] = {
    LinkType.SATISFIES: frozenset(
        {(ArtifactKind.HIGH_LEVEL_REQUIREMENT, ArtifactKind.SYSTEM_REQUIREMENT)}
    ),
    LinkType.REFINES: frozenset(
        {(ArtifactKind.LOW_LEVEL_REQUIREMENT, ArtifactKind.HIGH_LEVEL_REQUIREMENT)}
    ),
    LinkType.IMPLEMENTS: frozenset(
        {(ArtifactKind.SOURCE_UNIT, ArtifactKind.LOW_LEVEL_REQUIREMENT)}
    ),
    LinkType.VERIFIES: frozenset(
        {
            (ArtifactKind.TEST_CASE, ArtifactKind.HIGH_LEVEL_REQUIREMENT),
            (ArtifactKind.TEST_CASE, ArtifactKind.LOW_LEVEL_REQUIREMENT),
        }
    ),
    LinkType.RECORDS: frozenset({(ArtifactKind.TEST_RESULT, ArtifactKind.TEST_CASE)}),
    LinkType.TRACKS: frozenset(
        {
            (ArtifactKind.ISSUE, ArtifactKind.SYSTEM_REQUIREMENT),
            (ArtifactKind.ISSUE, ArtifactKind.HIGH_LEVEL_REQUIREMENT),
            (ArtifactKind.ISSUE, ArtifactKind.LOW_LEVEL_REQUIREMENT),
        }
    ),
    LinkType.RESOLVES: frozenset({(ArtifactKind.COMMIT, ArtifactKind.ISSUE)}),
    LinkType.MODIFIES: frozenset({(ArtifactKind.COMMIT, ArtifactKind.SOURCE_UNIT)}),
    LinkType.CONTRIBUTES: frozenset(
        {
            (ArtifactKind.COMMIT, ArtifactKind.HIGH_LEVEL_REQUIREMENT),
            (ArtifactKind.COMMIT, ArtifactKind.LOW_LEVEL_REQUIREMENT),
        }
    ),
}


def endpoints_allowed(link_type: LinkType, from_kind: ArtifactKind, to_kind: ArtifactKind) -> bool:
    return (from_kind, to_kind) in LINK_TYPE_MATRIX[link_type]


DERIVED_ATTRIBUTE = "derived"


@dataclass(frozen=True)
class ArtifactNode:
    id: ArtifactId
    kind: ArtifactKind
    title: str
    body: str
    attributes: dict[str, str] = field(default_factory=dict)
    source: NodeSource = NodeSource.MANUAL
    revision: int = 1
    status: NodeStatus = NodeStatus.ACTIVE
    content_hash: str = ""

    @property
    def is_derived(self) -> bool:
        return self.attributes.get(DERIVED_ATTRIBUTE) == "true"


@dataclass(frozen=True)
class TraceLink:
    from_id: ArtifactId
    to_id: ArtifactId
    type: LinkType
    suspect: bool = False
    created_rev: int = 0

    @property
    def key(self) -> tuple[str, str, str]:
        """Uniqueness key, also the deterministic sort order (from, type, to)."""
        return (self.from_id.render(), self.type.value, self.to_id.render())


def canonical_content_bytes(
    kind: ArtifactKind, node_id: ArtifactId, title: str, body: str, attributes: dict[str, str]
) -> bytes:
    lines = [kind.value, node_id.render(), title, body]
    text = "\n".join(lines) + "\n"
    for key in sorted(attributes):
        text += f"{key}={attributes[key]}\n"
    return text.encode("utf-8")


def canonical_hash(node: ArtifactNode) -> str:
    """SHA-256 (lowercase hex) of the node's canonical content.

    Covers kind, id, title, body, and attributes in bytewise key order;
    excludes revision, source, and status by construction.
    """
    return hashlib.sha256(
        canonical_content_bytes(node.kind, node.id, node.title, node.body, node.attributes)
    ).hexdigest()
