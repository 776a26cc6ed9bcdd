"""DAL-parameterized coverage rules, the gap checker, and trace matrices.

The built-in rule set approximates common trace objectives per assurance
level. It is a default, not certification guidance, and is fully replaceable
through the line-based rule config format.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum

from traceforge.errors import (
    BadDalSetError,
    IncompatibleTypesError,
    RuleConfigError,
    UnknownKindError,
    UnknownLinkTypeError,
)
from traceforge.graph import TraceGraph
from traceforge.model import (
    ArtifactKind,
    LINK_TYPE_MATRIX,
    LinkType,
    link_type_from_name,
    resolve_kind,
)


class DalLevel(Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"

    def __str__(self) -> str:
        return self.value


def dal_from_letter(letter: str) -> DalLevel | None:
    try:
        return DalLevel(letter)
    except ValueError:
        return None


def dal_range(most_stringent: DalLevel, least_stringent: DalLevel) -> frozenset[DalLevel]:
    order = list(DalLevel)
    lo, hi = order.index(most_stringent), order.index(least_stringent)
    return frozenset(order[lo : hi + 1])


class RuleDirection(Enum):
    OUTGOING = "out"
    INCOMING = "in"


@dataclass(frozen=True)
class CoverageRule:
    rule_id: str
    subject_kind: ArtifactKind
    direction: RuleDirection
    link_type: LinkType
    min_count: int = 1
    exempt_derived: bool = False
    applies_to: frozenset[DalLevel] = frozenset()


@dataclass(frozen=True)
class CoverageRuleSet:
    name: str
    rules: tuple[CoverageRule, ...] = ()
    check_suspect_links: frozenset[DalLevel] = frozenset()

    def rules_for(self, dal: DalLevel) -> list[CoverageRule]:
        return [rule for rule in self.rules if dal in rule.applies_to]


def default_ruleset() -> CoverageRuleSet:
    a = DalLevel.A
    return CoverageRuleSet(
        name="default",
        rules=(
            CoverageRule(
                "R1",
                ArtifactKind.HIGH_LEVEL_REQUIREMENT,
                RuleDirection.OUTGOING,
                LinkType.SATISFIES,
                exempt_derived=True,
                applies_to=dal_range(a, DalLevel.D),
            ),
            CoverageRule(
                "R2",
                ArtifactKind.LOW_LEVEL_REQUIREMENT,
                RuleDirection.OUTGOING,
                LinkType.REFINES,
                exempt_derived=True,
                applies_to=dal_range(a, DalLevel.C),
            ),
            CoverageRule(
                "R3",
                ArtifactKind.LOW_LEVEL_REQUIREMENT,
                RuleDirection.INCOMING,
                LinkType.IMPLEMENTS,
                applies_to=dal_range(a, DalLevel.C),
            ),
            CoverageRule(
                "R4",
                ArtifactKind.HIGH_LEVEL_REQUIREMENT,
                RuleDirection.INCOMING,
                LinkType.VERIFIES,
                applies_to=dal_range(a, DalLevel.D),
            ),
            CoverageRule(
                "R5",
                ArtifactKind.LOW_LEVEL_REQUIREMENT,
                RuleDirection.INCOMING,
                LinkType.VERIFIES,
                applies_to=dal_range(a, DalLevel.B),
            ),
            CoverageRule(
                "R6",
                ArtifactKind.TEST_CASE,
                RuleDirection.INCOMING,
                LinkType.RECORDS,
                applies_to=dal_range(a, DalLevel.D),
            ),
            CoverageRule(
                "R7",
                ArtifactKind.SOURCE_UNIT,
                RuleDirection.OUTGOING,
                LinkType.IMPLEMENTS,
                applies_to=dal_range(a, DalLevel.C),
            ),
        ),
        check_suspect_links=dal_range(a, DalLevel.D),
    )


def load_ruleset(text: str) -> CoverageRuleSet:
    """Parse the line-based rule config; the parsed set replaces the defaults
    entirely. Blank lines and '#' comments are skipped."""
    name = "unnamed"
    rules: list[CoverageRule] = []
    seen_ids: set[str] = set()
    suspect: frozenset[DalLevel] = frozenset()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "name":
            if len(tokens) < 2:
                raise RuleConfigError(f"line {number}: name requires a value")
            name = line.split(None, 1)[1]
        elif tokens[0] == "suspect":
            if len(tokens) != 2 or not tokens[1].startswith("dal="):
                raise RuleConfigError(f"line {number}: expected 'suspect dal=<letters>'")
            suspect = _parse_dal_set(tokens[1][4:], number)
        elif tokens[0] == "rule":
            rules.append(_parse_rule_line(tokens, number, seen_ids))
        else:
            raise RuleConfigError(f"line {number}: unknown directive {tokens[0]!r}")
    return CoverageRuleSet(name=name, rules=tuple(rules), check_suspect_links=suspect)


def _parse_rule_line(tokens: list[str], number: int, seen_ids: set[str]) -> CoverageRule:
    if len(tokens) < 6:
        raise RuleConfigError(
            f"line {number}: expected 'rule <id> <Kind> <out|in> <TYPE> min=<n> "
            f"[exempt-derived] dal=<letters>'"
        )
    rule_id = tokens[1]
    if rule_id in seen_ids:
        raise RuleConfigError(f"line {number}: duplicate rule id {rule_id!r}")
    seen_ids.add(rule_id)
    kind = resolve_kind(tokens[2])
    if kind is None:
        raise UnknownKindError(f"line {number}: unknown kind {tokens[2]!r}")
    if tokens[3] not in ("out", "in"):
        raise RuleConfigError(f"line {number}: direction must be out or in, got {tokens[3]!r}")
    direction = RuleDirection(tokens[3])
    link_type = link_type_from_name(tokens[4])
    if link_type is None:
        raise UnknownLinkTypeError(f"line {number}: unknown link type {tokens[4]!r}")
    min_count = None
    exempt = False
    dals: frozenset[DalLevel] | None = None
    for token in tokens[5:]:
        if token.startswith("min="):
            try:
                min_count = int(token[4:])
            except ValueError:
                raise RuleConfigError(f"line {number}: bad min value {token[4:]!r}") from None
            if min_count < 1:
                raise RuleConfigError(f"line {number}: min must be >= 1")
        elif token == "exempt-derived":
            exempt = True
        elif token.startswith("dal="):
            dals = _parse_dal_set(token[4:], number)
        else:
            raise RuleConfigError(f"line {number}: unexpected token {token!r}")
    if min_count is None:
        raise RuleConfigError(f"line {number}: missing min=<n>")
    if dals is None:
        raise RuleConfigError(f"line {number}: missing dal=<letters>")
    return CoverageRule(
        rule_id=rule_id,
        subject_kind=kind,
        direction=direction,
        link_type=link_type,
        min_count=min_count,
        exempt_derived=exempt,
        applies_to=dals,
    )


def _parse_dal_set(letters: str, number: int) -> frozenset[DalLevel]:
    if not letters:
        raise BadDalSetError(f"line {number}: empty DAL set")
    levels = set()
    for letter in letters:
        level = dal_from_letter(letter)
        if level is None:
            raise BadDalSetError(f"line {number}: unknown DAL letter {letter!r}")
        levels.add(level)
    return frozenset(levels)


# -- gap checking ------------------------------------------------------------


class GapKind(Enum):
    MISSING_LINK = "MissingLink"
    SUSPECT_LINK = "SuspectLink"


SUSPECT_RULE_ID = "SUSPECT"


@dataclass(frozen=True)
class Gap:
    node_id: str
    rule_id: str
    gap_kind: GapKind
    detail: str

    def sort_key(self) -> tuple[str, str, str]:
        return (self.node_id, self.rule_id, self.detail)

    def to_dict(self) -> dict:
        return {
            "node": self.node_id,
            "rule": self.rule_id,
            "kind": self.gap_kind.value,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class GapReport:
    dal: DalLevel
    ruleset_name: str
    graph_revision: int
    gaps: tuple[Gap, ...]

    @property
    def compliant(self) -> bool:
        return not self.gaps

    def to_dict(self) -> dict:
        return {
            "dal": self.dal.value,
            "ruleset": self.ruleset_name,
            "graph_revision": self.graph_revision,
            "gaps": [gap.to_dict() for gap in self.gaps],
        }


def check_coverage(graph: TraceGraph, dal: DalLevel, ruleset: CoverageRuleSet) -> GapReport:
    """Evaluate every applicable rule against every Active node and, when the
    level requires it, flag each suspect link as a gap keyed on its from-node."""
    gaps: list[Gap] = []
    rules = ruleset.rules_for(dal)
    for node in graph.active_nodes():
        for rule in rules:
            if rule.subject_kind is not node.kind:
                continue
            if rule.exempt_derived and node.is_derived:
                continue
            count = _count_links(graph, node.id.render(), rule)
            if count < rule.min_count:
                direction = "outgoing" if rule.direction is RuleDirection.OUTGOING else "incoming"
                gaps.append(
                    Gap(
                        node_id=node.id.render(),
                        rule_id=rule.rule_id,
                        gap_kind=GapKind.MISSING_LINK,
                        detail=(
                            f"expected >={rule.min_count} {direction} "
                            f"{rule.link_type}, found {count}"
                        ),
                    )
                )
    if dal in ruleset.check_suspect_links:
        for link in graph.iter_links():
            if link.suspect:
                gaps.append(
                    Gap(
                        node_id=link.from_id.render(),
                        rule_id=SUSPECT_RULE_ID,
                        gap_kind=GapKind.SUSPECT_LINK,
                        detail=(
                            f"suspect link {link.from_id.render()} "
                            f"-{link.type}-> {link.to_id.render()}"
                        ),
                    )
                )
    gaps.sort(key=Gap.sort_key)
    return GapReport(
        dal=dal,
        ruleset_name=ruleset.name,
        graph_revision=graph.graph_revision,
        gaps=tuple(gaps),
    )


def _count_links(graph: TraceGraph, node_key: str, rule: CoverageRule) -> int:
    if rule.direction is RuleDirection.OUTGOING:
        keys = graph.forward.get(node_key, set())
    else:
        keys = graph.backward.get(node_key, set())
    return sum(1 for key in keys if key[1] == rule.link_type.value)


# -- trace matrix ------------------------------------------------------------


@dataclass(frozen=True)
class TraceMatrix:
    row_kind: ArtifactKind
    col_kind: ArtifactKind
    types: tuple[LinkType, ...]
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    cells: dict[tuple[str, str], frozenset[str]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        cell_map: dict[str, dict[str, list[str]]] = {}
        for (row, col), initials in sorted(self.cells.items()):
            cell_map.setdefault(row, {})[col] = sorted(initials)
        return {
            "row_kind": self.row_kind.value,
            "col_kind": self.col_kind.value,
            "types": [t.value for t in self.types],
            "rows": list(self.rows),
            "cols": list(self.cols),
            "cells": cell_map,
        }


def build_trace_matrix(
    graph: TraceGraph,
    row_kind: ArtifactKind,
    col_kind: ArtifactKind,
    types: list[LinkType],
) -> TraceMatrix:
    """Rows and columns are the Active nodes of the two kinds (bytewise
    sorted); a cell collects the initials of included link types connecting
    its row and column in either direction."""
    for link_type in types:
        pairs = LINK_TYPE_MATRIX[link_type]
        if (row_kind, col_kind) not in pairs and (col_kind, row_kind) not in pairs:
            raise IncompatibleTypesError(
                f"{link_type} cannot connect {row_kind} and {col_kind}"
            )
    rows = tuple(n.id.render() for n in graph.active_nodes() if n.kind is row_kind)
    cols = tuple(n.id.render() for n in graph.active_nodes() if n.kind is col_kind)
    row_set, col_set = set(rows), set(cols)
    included = {t.value for t in types}
    cells: dict[tuple[str, str], set[str]] = {}
    for link in graph.iter_links():
        if link.type.value not in included:
            continue
        from_key, to_key = link.from_id.render(), link.to_id.render()
        if from_key in row_set and to_key in col_set:
            cells.setdefault((from_key, to_key), set()).add(link.type.value[0])
        if from_key in col_set and to_key in row_set:
            cells.setdefault((to_key, from_key), set()).add(link.type.value[0])
    frozen = {key: frozenset(value) for key, value in cells.items()}
    return TraceMatrix(
        row_kind=row_kind,
        col_kind=col_kind,
        types=tuple(sorted(types, key=lambda t: t.value)),
        rows=rows,
        cols=cols,
        cells=frozen,
    )


def export_matrix_csv(matrix: TraceMatrix) -> str:
    """RFC 4180 CSV with LF line endings and a trailing newline; cells join
    type initials with '+'; byte-deterministic."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["row\\col", *matrix.cols])
    for row in matrix.rows:
        cells = [
            "+".join(sorted(matrix.cells.get((row, col), frozenset()))) for col in matrix.cols
        ]
        writer.writerow([row, *cells])
    return buffer.getvalue()
