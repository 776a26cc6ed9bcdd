"""File-export ingestion: requirement CSV/ReqIF, issue-tracker JSON, VCS JSONL.

All parsers are total: malformed input never raises, it turns into
diagnostics with a locatable position, and the offending record produces no
mutation. Merging normalizes record order so ingestion is deterministic and
idempotent regardless of input order.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Protocol
from xml.etree import ElementTree

from traceforge.errors import TraceForgeError
from traceforge.graph import UpsertOutcome, UpsertResult
from traceforge.model import (
    ArtifactId,
    ArtifactKind,
    KIND_CODES,
    LinkType,
    NodeSource,
    TraceLink,
)


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    location: str
    message: str

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.value,
            "location": self.location,
            "message": self.message,
        }


# Kind codes accepted in requirement exports. Issues and commits arrive
# through their own formats, so ISS/CMT are not valid here.
REQUIREMENT_KIND_CODES: dict[str, ArtifactKind] = {
    code: kind for code, kind in KIND_CODES.items() if code not in ("ISS", "CMT")
}

# Link type implied by a requirement record's own kind when parent_id is set.
PARENT_LINK_TYPES: dict[ArtifactKind, LinkType] = {
    ArtifactKind.HIGH_LEVEL_REQUIREMENT: LinkType.SATISFIES,
    ArtifactKind.LOW_LEVEL_REQUIREMENT: LinkType.REFINES,
    ArtifactKind.SOURCE_UNIT: LinkType.IMPLEMENTS,
    ArtifactKind.TEST_CASE: LinkType.VERIFIES,
    ArtifactKind.TEST_RESULT: LinkType.RECORDS,
}

ISSUE_TYPES = ("defect", "task", "story")

REQUIREMENTS_CSV_HEADER = ["id", "kind", "title", "body", "parent_id", "derived", "attributes"]

_COMMIT_HASH_RE = re.compile(r"^[0-9a-f]{7,40}$")
_TRAILER_KEYS = {"implements": "Implements", "verifies": "Verifies", "resolves": "Resolves", "refs": "Refs"}
_TRAILER_RE = re.compile(r"^([A-Za-z]+)\s*:\s*(.+)$")


@dataclass(frozen=True)
class RequirementRecord:
    id: str
    kind: ArtifactKind
    title: str
    body: str = ""
    parent_id: str | None = None
    derived: bool = False
    attributes: dict[str, str] = field(default_factory=dict)

    def sort_key(self) -> tuple:
        return (
            self.id,
            self.kind.value,
            self.title,
            self.body,
            self.parent_id or "",
            self.derived,
            tuple(sorted(self.attributes.items())),
        )


@dataclass(frozen=True)
class IssueRecord:
    key: str
    issue_type: str
    summary: str = ""
    status: str = ""
    links: tuple[tuple[str, str], ...] = ()

    def sort_key(self) -> tuple:
        return (self.key, self.issue_type, self.summary, self.status, self.links)


@dataclass(frozen=True)
class CommitRecord:
    hash: str
    author: str
    date: str
    files: tuple[str, ...]
    message: str = ""

    def sort_key(self) -> tuple:
        return (parse_rfc3339(self.date), self.hash, self.files, self.message)


@dataclass
class IngestReport:
    created: int = 0
    updated: int = 0
    unchanged: int = 0
    links_created: int = 0
    links_skipped: int = 0
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def has_errors(self) -> bool:
        return any(d.severity is Severity.ERROR for d in self.diagnostics)

    def to_dict(self) -> dict:
        return {
            "counts": {
                "created": self.created,
                "updated": self.updated,
                "unchanged": self.unchanged,
                "links_created": self.links_created,
                "links_skipped": self.links_skipped,
            },
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC 3339 timestamp; raises ValueError on anything else."""
    normalized = text.replace("Z", "+00:00") if text.endswith("Z") else text
    value = datetime.fromisoformat(normalized)
    if value.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return value


def _valid_artifact_id(text: str) -> bool:
    try:
        ArtifactId.parse(text)
    except TraceForgeError:
        return False
    return True


def _utf8_clean(*parts: str) -> bool:
    """Reject text that cannot round-trip through UTF-8 (lone surrogates can
    arrive via \\uXXXX escapes in JSON payloads)."""
    for part in parts:
        try:
            part.encode("utf-8")
        except UnicodeEncodeError:
            return False
    return True


# -- requirements CSV ------------------------------------------------------------


def parse_requirements_csv(text: str) -> tuple[list[RequirementRecord], list[Diagnostic]]:
    """RFC 4180 CSV with the mandatory header row. Bad rows become per-row
    diagnostics; parsing always continues."""
    records: list[RequirementRecord] = []
    diagnostics: list[Diagnostic] = []
    reader = csv.reader(io.StringIO(text.lstrip("﻿")))
    try:
        rows = list(reader)
    except csv.Error as exc:
        diagnostics.append(Diagnostic(Severity.ERROR, "document", f"CSV parse failure: {exc}"))
        return records, diagnostics
    if not rows or rows[0] != REQUIREMENTS_CSV_HEADER:
        diagnostics.append(
            Diagnostic(
                Severity.ERROR,
                "row 1",
                "missing header; expected " + ",".join(REQUIREMENTS_CSV_HEADER),
            )
        )
        return records, diagnostics
    for index, row in enumerate(rows[1:], start=2):
        location = f"row {index}"
        if not row:
            continue
        if len(row) != len(REQUIREMENTS_CSV_HEADER):
            diagnostics.append(
                Diagnostic(Severity.ERROR, location, f"expected 7 fields, found {len(row)}")
            )
            continue
        rec_id, kind_code, title, body, parent, derived_cell, attrs_cell = row
        if not rec_id or not _valid_artifact_id(rec_id):
            diagnostics.append(Diagnostic(Severity.ERROR, location, f"malformed id {rec_id!r}"))
            continue
        kind = REQUIREMENT_KIND_CODES.get(kind_code)
        if kind is None:
            diagnostics.append(Diagnostic(Severity.ERROR, location, f"bad kind code {kind_code!r}"))
            continue
        if parent and not _valid_artifact_id(parent):
            diagnostics.append(
                Diagnostic(Severity.ERROR, location, f"malformed parent_id {parent!r}")
            )
            continue
        if derived_cell not in ("", "true", "false"):
            diagnostics.append(
                Diagnostic(Severity.ERROR, location, f"derived must be true/false/empty, got {derived_cell!r}")
            )
            continue
        attributes, attr_error = _parse_attributes_cell(attrs_cell)
        if attr_error:
            diagnostics.append(Diagnostic(Severity.ERROR, location, attr_error))
            continue
        if not _utf8_clean(rec_id, title, body, parent, *attributes, *attributes.values()):
            diagnostics.append(Diagnostic(Severity.ERROR, location, "field is not valid UTF-8"))
            continue
        records.append(
            RequirementRecord(
                id=rec_id,
                kind=kind,
                title=title,
                body=body,
                parent_id=parent or None,
                derived=derived_cell == "true",
                attributes=attributes,
            )
        )
    return records, diagnostics


def _parse_attributes_cell(cell: str) -> tuple[dict[str, str], str | None]:
    attributes: dict[str, str] = {}
    if not cell:
        return attributes, None
    for segment in cell.split(";"):
        if "=" not in segment:
            return {}, f"attribute segment {segment!r} is not k=v"
        key, value = segment.split("=", 1)
        if not key:
            return {}, "attribute with empty key"
        if key == "derived":
            return {}, "attribute key 'derived' is reserved; use the derived column"
        if key in attributes:
            return {}, f"duplicate attribute key {key!r}"
        attributes[key] = value
    return attributes, None


# -- ReqIF subset ------------------------------------------------------------


def _local_name(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


REQIF_ATTRIBUTE_NAMES = ("Kind", "Body", "Parent", "Derived")


def parse_reqif_subset(text: str) -> tuple[list[RequirementRecord], list[Diagnostic]]:
    """Small named ReqIF subset: SPEC-OBJECTs with IDENTIFIER/LONG-NAME and
    string attribute values whose definition LONG-NAME is Kind, Body, Parent,
    or Derived. Everything else is ignored with an info diagnostic."""
    records: list[RequirementRecord] = []
    diagnostics: list[Diagnostic] = []
    try:
        root = ElementTree.fromstring(text)
    except (ElementTree.ParseError, ValueError) as exc:
        # ValueError covers expat's UnicodeEncodeError on surrogate input
        diagnostics.append(Diagnostic(Severity.ERROR, "document", f"malformed XML: {exc}"))
        return records, diagnostics

    definitions: dict[str, str] = {}
    for element in root.iter():
        name = _local_name(element.tag)
        if name.startswith("ATTRIBUTE-DEFINITION-"):
            identifier = element.get("IDENTIFIER")
            long_name = element.get("LONG-NAME")
            if identifier and long_name:
                definitions[identifier] = long_name

    spec_objects = [e for e in root.iter() if _local_name(e.tag) == "SPEC-OBJECT"]
    for index, obj in enumerate(spec_objects):
        location = f"spec-object {index}"
        identifier = obj.get("IDENTIFIER")
        if not identifier:
            diagnostics.append(Diagnostic(Severity.ERROR, location, "missing IDENTIFIER"))
            continue
        if not _valid_artifact_id(identifier):
            diagnostics.append(
                Diagnostic(Severity.ERROR, location, f"malformed IDENTIFIER {identifier!r}")
            )
            continue
        title = obj.get("LONG-NAME", "")
        values: dict[str, str] = {}
        for element in obj.iter():
            name = _local_name(element.tag)
            if not name.startswith("ATTRIBUTE-VALUE-"):
                continue
            if name != "ATTRIBUTE-VALUE-STRING":
                diagnostics.append(
                    Diagnostic(Severity.INFO, location, f"ignored non-string value {name}")
                )
                continue
            attr_name = _resolve_reqif_definition(element, definitions)
            the_value = element.get("THE-VALUE", "")
            if attr_name in REQIF_ATTRIBUTE_NAMES:
                values[attr_name] = the_value
            else:
                diagnostics.append(
                    Diagnostic(
                        Severity.INFO, location, f"ignored attribute {attr_name or '<unresolved>'}"
                    )
                )
        kind_code = values.get("Kind", "")
        kind = REQUIREMENT_KIND_CODES.get(kind_code)
        if kind is None:
            diagnostics.append(
                Diagnostic(Severity.ERROR, location, f"bad kind code {kind_code!r}")
            )
            continue
        parent = values.get("Parent", "")
        if parent and not _valid_artifact_id(parent):
            diagnostics.append(
                Diagnostic(Severity.ERROR, location, f"malformed Parent {parent!r}")
            )
            continue
        derived_value = values.get("Derived", "")
        if derived_value not in ("", "true", "false"):
            diagnostics.append(
                Diagnostic(Severity.ERROR, location, f"Derived must be true/false, got {derived_value!r}")
            )
            continue
        if not _utf8_clean(identifier, title, values.get("Body", ""), parent):
            diagnostics.append(Diagnostic(Severity.ERROR, location, "field is not valid UTF-8"))
            continue
        records.append(
            RequirementRecord(
                id=identifier,
                kind=kind,
                title=title,
                body=values.get("Body", ""),
                parent_id=parent or None,
                derived=derived_value == "true",
            )
        )
    return records, diagnostics


def _resolve_reqif_definition(value_element: ElementTree.Element, definitions: dict[str, str]) -> str:
    for child in value_element.iter():
        if _local_name(child.tag) == "ATTRIBUTE-DEFINITION-STRING-REF":
            ref = (child.text or "").strip()
            return definitions.get(ref, "")
    return ""


# -- issue-tracker export ------------------------------------------------------------


def parse_issue_export(text: str) -> tuple[list[IssueRecord], list[Diagnostic]]:
    records: list[IssueRecord] = []
    diagnostics: list[Diagnostic] = []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        diagnostics.append(Diagnostic(Severity.ERROR, "document", f"invalid JSON: {exc}"))
        return records, diagnostics
    if not isinstance(data, list):
        diagnostics.append(Diagnostic(Severity.ERROR, "document", "top level is not an array"))
        return records, diagnostics
    for index, entry in enumerate(data):
        location = f"object {index}"
        if not isinstance(entry, dict):
            diagnostics.append(Diagnostic(Severity.ERROR, location, "entry is not an object"))
            continue
        key = entry.get("key")
        if not isinstance(key, str) or not key:
            diagnostics.append(Diagnostic(Severity.ERROR, location, "missing key"))
            continue
        if not _valid_artifact_id(key):
            diagnostics.append(Diagnostic(Severity.ERROR, location, f"malformed key {key!r}"))
            continue
        issue_type = entry.get("type")
        if issue_type not in ISSUE_TYPES:
            diagnostics.append(
                Diagnostic(Severity.ERROR, location, f"unknown issue type {issue_type!r}")
            )
            continue
        links: list[tuple[str, str]] = []
        raw_links = entry.get("links", [])
        if not isinstance(raw_links, list):
            diagnostics.append(Diagnostic(Severity.ERROR, location, "links is not an array"))
            continue
        for link in raw_links:
            if not isinstance(link, dict):
                diagnostics.append(Diagnostic(Severity.WARNING, location, "dropped non-object link"))
                continue
            relation = link.get("type")
            target = link.get("target")
            if relation != "tracks":
                diagnostics.append(
                    Diagnostic(
                        Severity.WARNING, location, f"dropped link with unknown relation {relation!r}"
                    )
                )
                continue
            if not isinstance(target, str) or not target:
                diagnostics.append(Diagnostic(Severity.WARNING, location, "dropped link without target"))
                continue
            links.append((relation, target))
        summary = str(entry.get("summary", ""))
        status = str(entry.get("status", ""))
        if not _utf8_clean(key, summary, status, *(t for _, t in links)):
            diagnostics.append(Diagnostic(Severity.ERROR, location, "field is not valid UTF-8"))
            continue
        records.append(
            IssueRecord(
                key=key,
                issue_type=issue_type,
                summary=summary,
                status=status,
                links=tuple(links),
            )
        )
    return records, diagnostics


# -- VCS log (JSONL) ------------------------------------------------------------


def parse_vcs_log(text: str) -> tuple[list[CommitRecord], list[Diagnostic]]:
    records: list[CommitRecord] = []
    diagnostics: list[Diagnostic] = []
    for number, line in enumerate(text.splitlines(), start=1):
        location = f"line {number}"
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            diagnostics.append(Diagnostic(Severity.ERROR, location, f"invalid JSON: {exc}"))
            continue
        if not isinstance(entry, dict):
            diagnostics.append(Diagnostic(Severity.ERROR, location, "entry is not an object"))
            continue
        commit_hash = entry.get("hash")
        if not isinstance(commit_hash, str) or not _COMMIT_HASH_RE.match(commit_hash):
            diagnostics.append(
                Diagnostic(Severity.ERROR, location, f"bad commit hash {commit_hash!r}")
            )
            continue
        date = entry.get("date")
        if not isinstance(date, str):
            diagnostics.append(Diagnostic(Severity.ERROR, location, "missing date"))
            continue
        try:
            parse_rfc3339(date)
        except ValueError as exc:
            diagnostics.append(Diagnostic(Severity.ERROR, location, str(exc)))
            continue
        files = entry.get("files")
        if not isinstance(files, list) or not files:
            diagnostics.append(Diagnostic(Severity.ERROR, location, "files must be a non-empty array"))
            continue
        bad_file = next(
            (f for f in files if not isinstance(f, str) or not f or "\n" in f), None
        )
        if bad_file is not None:
            diagnostics.append(Diagnostic(Severity.ERROR, location, f"bad file path {bad_file!r}"))
            continue
        author = str(entry.get("author", ""))
        message = str(entry.get("message", ""))
        if not _utf8_clean(author, message, *files):
            diagnostics.append(Diagnostic(Severity.ERROR, location, "field is not valid UTF-8"))
            continue
        records.append(
            CommitRecord(
                hash=commit_hash,
                author=author,
                date=date,
                files=tuple(files),
                message=message,
            )
        )
    return records, diagnostics


# -- commit trailers ------------------------------------------------------------


def parse_trailers(message: str) -> list[tuple[str, list[str]]]:
    """Trailer lines (`Key: v1, v2`) from the final paragraph of a commit
    message. Keys are matched case-insensitively against Implements, Verifies,
    Resolves, and Refs; anything else is ignored."""
    lines = message.splitlines()
    last_blank = -1
    for index, line in enumerate(lines):
        if not line.strip():
            last_blank = index
    paragraph = lines[last_blank + 1 :]
    found: list[tuple[str, list[str]]] = []
    for line in paragraph:
        match = _TRAILER_RE.match(line)
        if not match:
            continue
        key = _TRAILER_KEYS.get(match.group(1).lower())
        if key is None:
            continue
        values = [token.strip() for token in match.group(2).split(",")]
        values = [v for v in values if v]
        if values:
            found.append((key, values))
    return found


# -- merge ------------------------------------------------------------


class GraphMutator(Protocol):
    """Mutation surface shared by TraceGraph and the event-sourced engine."""

    def upsert_node(
        self,
        node_id: ArtifactId,
        kind: ArtifactKind,
        title: str,
        body: str = ...,
        attributes: dict[str, str] | None = ...,
        source: NodeSource = ...,
    ) -> UpsertOutcome: ...

    def add_link(self, from_id: ArtifactId, to_id: ArtifactId, link_type: LinkType) -> TraceLink: ...

    def has_link(self, from_id: ArtifactId, link_type: LinkType, to_id: ArtifactId) -> bool: ...


def merge_into_graph(
    target: GraphMutator,
    requirements: list[RequirementRecord] | None = None,
    issues: list[IssueRecord] | None = None,
    commits: list[CommitRecord] | None = None,
    diagnostics: list[Diagnostic] | None = None,
) -> IngestReport:
    """Apply parsed records to the graph in normalized order: requirements by
    id, then issues by key, then commits by (date, hash). All requirement
    nodes land before any parent link so intra-batch references resolve. Link
    failures become diagnostics; an identical pre-existing link is a silent
    no-op so repeated ingestion stays clean."""
    report = IngestReport(diagnostics=list(diagnostics or []))

    sorted_requirements = sorted(requirements or [], key=RequirementRecord.sort_key)
    linkable: list[RequirementRecord] = []
    for record in sorted_requirements:
        location = f"requirement {record.id}"
        attributes = dict(record.attributes)
        if record.derived:
            attributes["derived"] = "true"
        try:
            outcome = target.upsert_node(
                ArtifactId.parse(record.id),
                record.kind,
                record.title,
                record.body,
                attributes,
                NodeSource.REQ_STORE,
            )
        except TraceForgeError as exc:
            report.diagnostics.append(Diagnostic(Severity.ERROR, location, exc.message))
            continue
        _count(report, outcome)
        if record.parent_id:
            linkable.append(record)
    for record in linkable:
        location = f"requirement {record.id}"
        link_type = PARENT_LINK_TYPES.get(record.kind)
        if link_type is None:
            report.links_skipped += 1
            report.diagnostics.append(
                Diagnostic(
                    Severity.WARNING,
                    location,
                    f"no parent link defined for kind {record.kind}",
                )
            )
        else:
            _add_link(target, report, location, record.id, record.parent_id, link_type)

    for record in sorted(issues or [], key=IssueRecord.sort_key):
        location = f"issue {record.key}"
        attributes = {"issue_type": record.issue_type, "status": record.status}
        try:
            outcome = target.upsert_node(
                ArtifactId.parse(record.key),
                ArtifactKind.ISSUE,
                record.summary,
                "",
                attributes,
                NodeSource.ISSUE_TRACKER,
            )
        except TraceForgeError as exc:
            report.diagnostics.append(Diagnostic(Severity.ERROR, location, exc.message))
            continue
        _count(report, outcome)
        for _relation, tracked in record.links:
            _add_link(target, report, location, record.key, tracked, LinkType.TRACKS)

    for record in sorted(commits or [], key=CommitRecord.sort_key):
        commit_id = f"CMT-{record.hash}"
        location = f"commit {record.hash}"
        trailers = parse_trailers(record.message)
        attributes = {"author": record.author, "date": record.date}
        refs = [v for key, values in trailers for v in values if key == "Refs"]
        if refs:
            attributes["refs"] = ",".join(refs)
        try:
            outcome = target.upsert_node(
                ArtifactId.parse(commit_id),
                ArtifactKind.COMMIT,
                record.message.splitlines()[0] if record.message else "",
                record.message,
                attributes,
                NodeSource.VCS,
            )
        except TraceForgeError as exc:
            report.diagnostics.append(Diagnostic(Severity.ERROR, location, exc.message))
            continue
        _count(report, outcome)
        for path in sorted(set(record.files)):
            source_id = f"SRC:{path}"
            try:
                source_outcome = target.upsert_node(
                    ArtifactId.parse(source_id),
                    ArtifactKind.SOURCE_UNIT,
                    path,
                    record.hash,
                    None,
                    NodeSource.VCS,
                )
            except TraceForgeError as exc:
                report.diagnostics.append(Diagnostic(Severity.ERROR, location, exc.message))
                continue
            _count(report, source_outcome)
            _add_link(target, report, location, commit_id, source_id, LinkType.MODIFIES)
        for key, values in trailers:
            if key in ("Implements", "Verifies"):
                for value in values:
                    _add_link(target, report, location, commit_id, value, LinkType.CONTRIBUTES)
            elif key == "Resolves":
                for value in values:
                    _add_link(target, report, location, commit_id, value, LinkType.RESOLVES)

    return report


def _count(report: IngestReport, outcome: UpsertOutcome) -> None:
    if outcome.result is UpsertResult.CREATED:
        report.created += 1
    elif outcome.result is UpsertResult.UPDATED:
        report.updated += 1
    else:
        report.unchanged += 1


def _add_link(
    target: GraphMutator,
    report: IngestReport,
    location: str,
    from_text: str,
    to_text: str,
    link_type: LinkType,
) -> None:
    try:
        from_id = ArtifactId.parse(from_text)
        to_id = ArtifactId.parse(to_text)
        if target.has_link(from_id, link_type, to_id):
            return
        target.add_link(from_id, to_id, link_type)
    except TraceForgeError as exc:
        report.links_skipped += 1
        report.diagnostics.append(Diagnostic(Severity.WARNING, location, exc.message))
        return
    report.links_created += 1
