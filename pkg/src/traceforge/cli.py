"""Command-line interface: ingest, check, impact, cr, baseline, report,
export, serve, verify-log.

Exit codes: 0 success/compliant; 1 findings (gaps, or a non-empty diff under
--fail-on-diff); 2 usage error; 3 data/parse error; 4 storage/chain error.
Machine-readable output goes to stdout, human messages to stderr; every
``--json`` payload is byte-identical to the corresponding API response body.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from traceforge.change import CrState, Resolution
from traceforge.compliance import (
    DalLevel,
    build_trace_matrix,
    dal_from_letter,
    default_ruleset,
    export_matrix_csv,
    load_ruleset,
)
from traceforge.dot import export_graph_dot
from traceforge.engine import INGEST_FORMATS, ProjectEngine
from traceforge.errors import (
    ParseFailureError,
    RuleConfigError,
    StorageFailureError,
    TraceForgeError,
    ValidationError,
)
from traceforge.graph import graph_to_dict
from traceforge.impact import ImpactConfig
from traceforge.model import ArtifactId, LinkType, link_type_from_name, resolve_kind

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_STORAGE = 4

DEFAULT_HOME = ".traceforge"


def canonical_json(payload: object) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def emit_json(payload: object) -> None:
    sys.stdout.write(canonical_json(payload) + "\n")


def fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _home(args) -> Path:
    return Path(args.home or os.environ.get("TRACEFORGE_HOME") or DEFAULT_HOME)


def _engine(args) -> ProjectEngine:
    return ProjectEngine.open(_home(args), args.project)


def _parse_types(tokens: str | None) -> frozenset[LinkType] | None:
    if not tokens:
        return None
    types = set()
    for token in tokens.split(","):
        if not token:
            continue
        link_type = link_type_from_name(token)
        if link_type is None:
            raise ValidationError(f"unknown link type {token!r}")
        types.add(link_type)
    return frozenset(types) if types else None


def _parse_kind_arg(token: str):
    kind = resolve_kind(token)
    if kind is None:
        raise ValidationError(f"unknown artifact kind {token!r}")
    return kind


def _parse_dal_arg(token: str) -> DalLevel:
    dal = dal_from_letter(token)
    if dal is None:
        raise ValidationError(f"unknown DAL {token!r}; expected A-E")
    return dal


def _impact_config(args) -> ImpactConfig:
    types = _parse_types(args.types)
    depth = args.depth if getattr(args, "depth", None) else None
    if types is None:
        return ImpactConfig(max_depth=depth)
    return ImpactConfig(allowed_types=types, max_depth=depth)


def _read_input(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseFailureError(f"{path} is not valid UTF-8: {exc}") from exc


# -- commands ------------------------------------------------------------


def cmd_init(args) -> int:
    engine = ProjectEngine.create(_home(args), args.project)
    print(f"initialized project {engine.name} in {engine.store.root}", file=sys.stderr)
    return EXIT_OK


def cmd_ingest(args) -> int:
    engine = _engine(args)
    report = engine.ingest_text(args.format, _read_input(args.file))
    if args.json:
        emit_json(report.to_dict())
    else:
        counts = report.to_dict()["counts"]
        print(
            "ingested: "
            + ", ".join(f"{key}={value}" for key, value in counts.items())
        )
        for diagnostic in report.diagnostics:
            print(
                f"{diagnostic.severity.value}: {diagnostic.location}: {diagnostic.message}",
                file=sys.stderr,
            )
    return EXIT_DATA if report.has_errors else EXIT_OK


def cmd_check(args) -> int:
    engine = _engine(args)
    if args.rules:
        ruleset = load_ruleset(_read_input(args.rules))
    else:
        ruleset = default_ruleset()
    report = engine.check_coverage(_parse_dal_arg(args.dal), ruleset)
    if args.json:
        emit_json(report.to_dict())
    else:
        print(
            f"gap report: dal={report.dal} ruleset={report.ruleset_name} "
            f"graph_revision={report.graph_revision}"
        )
        for gap in report.gaps:
            print(f"{gap.node_id}\t{gap.rule_id}\t{gap.gap_kind.value}\t{gap.detail}")
        print(f"{len(report.gaps)} gap(s)")
    return EXIT_FINDINGS if report.gaps else EXIT_OK


def cmd_impact(args) -> int:
    engine = _engine(args)
    seeds = [ArtifactId.parse(seed) for seed in args.seed]
    impact = engine.preview_impact(seeds, _impact_config(args))
    if args.json:
        emit_json(impact.to_dict())
    else:
        for item in impact.items:
            print(f"d{item.distance}\t{item.node_id}\t{item.status.value}")
    return EXIT_OK


def cmd_cr(args) -> int:
    engine = _engine(args)
    if args.cr_command == "create":
        cr = engine.create_cr(
            args.title,
            args.description,
            [ArtifactId.parse(seed) for seed in args.seed],
            _impact_config(args),
        )
        if args.json:
            emit_json(cr.to_dict())
        else:
            print(f"{cr.cr_id} created with {len(cr.impact.items)} impact item(s)")
    elif args.cr_command == "list":
        entries = [engine.crs[key].to_dict() for key in sorted(engine.crs)]
        if args.json:
            emit_json(entries)
        else:
            for entry in entries:
                print(f"{entry['cr_id']}\t{entry['state']}\t{entry['title']}")
    elif args.cr_command == "show":
        cr = engine.get_cr(args.cr_id)
        if args.json:
            emit_json(cr.to_dict())
        else:
            print(f"{cr.cr_id} [{cr.state}] {cr.title}")
            for item in cr.impact.items:
                print(f"  d{item.distance}\t{item.node_id}\t{item.status.value}\t{item.note}")
    elif args.cr_command == "transition":
        try:
            target = CrState(args.target)
        except ValueError:
            raise ValidationError(f"unknown CR state {args.target!r}") from None
        cr = engine.transition_cr(args.cr_id, target)
        if args.json:
            emit_json(cr.to_dict())
        else:
            print(f"{cr.cr_id} -> {cr.state}")
    else:  # resolve
        try:
            resolution = Resolution(args.resolution)
        except ValueError:
            raise ValidationError(f"unknown resolution {args.resolution!r}") from None
        cr = engine.resolve_item(args.cr_id, args.node, resolution, args.note)
        if args.json:
            emit_json(cr.to_dict())
        else:
            item = cr.impact.item_for(args.node)
            print(f"{cr.cr_id} {args.node} -> {item.status.value}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    engine = _engine(args)
    if args.baseline_command == "create":
        baseline = engine.create_baseline(args.name)
        if args.json:
            emit_json(baseline.to_dict())
        else:
            print(f"{baseline.baseline_id} {baseline.index_hash}")
    elif args.baseline_command == "list":
        entries = [engine.baselines[key].to_dict() for key in sorted(engine.baselines)]
        if args.json:
            emit_json(entries)
        else:
            for entry in entries:
                print(f"{entry['baseline_id']}\t{entry['name']}\t{entry['index_hash']}")
    elif args.baseline_command == "show":
        baseline = engine.get_baseline(args.ref)
        sys.stdout.write(baseline.index_text)
    else:  # diff
        diff = engine.diff_baselines(args.a, args.b)
        if args.json:
            emit_json(diff.to_dict())
        else:
            payload = diff.to_dict()
            for section in ("nodes", "links"):
                for change, values in payload[section].items():
                    for value in values:
                        rendered = value if isinstance(value, str) else " ".join(value)
                        print(f"{section}.{change}\t{rendered}")
            if diff.empty:
                print("no differences")
        if args.fail_on_diff and not diff.empty:
            return EXIT_FINDINGS
    return EXIT_OK


def cmd_report(args) -> int:
    engine = _engine(args)
    types = sorted(_parse_types(args.types) or set(), key=lambda t: t.value)
    if not types:
        raise ValidationError("--types must name at least one link type")
    matrix = build_trace_matrix(
        engine.graph, _parse_kind_arg(args.rows), _parse_kind_arg(args.cols), types
    )
    if args.json:
        emit_json(matrix.to_dict())
    else:
        sys.stdout.write(export_matrix_csv(matrix))
    return EXIT_OK


def cmd_export(args) -> int:
    engine = _engine(args)
    if args.format == "json":
        emit_json(graph_to_dict(engine.graph))
    else:
        kind_filter = (
            {_parse_kind_arg(token) for token in args.kinds.split(",") if token}
            if args.kinds
            else None
        )
        sys.stdout.write(export_graph_dot(engine.graph, kind_filter, _parse_types(args.types)))
    return EXIT_OK


def cmd_verify_log(args) -> int:
    engine = _engine(args)
    count = engine.verify_log()
    print(f"chain OK ({count} events)")
    return EXIT_OK


def cmd_serve(args) -> int:
    from traceforge.service import serve

    serve(_home(args), host=args.host, port=args.port)
    return EXIT_OK


# -- parser ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="traceforge",
        description="Traceability and compliance engine for safety-critical projects.",
    )
    parser.add_argument("--home", help="store directory (default: $TRACEFORGE_HOME or ./.traceforge)")
    parser.add_argument("--project", default="default", help="project name (default: default)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("init", help="create a new project store").set_defaults(func=cmd_init)

    ingest = sub.add_parser("ingest", help="parse and merge an export file")
    ingest.add_argument("--format", required=True, choices=INGEST_FORMATS)
    ingest.add_argument("file", help="input file, or - for stdin")
    ingest.add_argument("--json", action="store_true")
    ingest.set_defaults(func=cmd_ingest)

    check = sub.add_parser("check", help="coverage gap check; exits 1 when gaps exist")
    check.add_argument("--dal", required=True, help="assurance level A-E")
    check.add_argument("--rules", help="rule config file replacing the defaults")
    check.add_argument("--json", action="store_true")
    check.set_defaults(func=cmd_check)

    impact = sub.add_parser("impact", help="what-if impact preview")
    impact.add_argument("--seed", action="append", required=True, help="seed artifact id (repeatable)")
    impact.add_argument("--types", help="comma-separated link types (default: all)")
    impact.add_argument("--depth", type=int, help="maximum traversal depth")
    impact.add_argument("--json", action="store_true")
    impact.set_defaults(func=cmd_impact)

    cr = sub.add_parser("cr", help="change request management")
    cr_sub = cr.add_subparsers(dest="cr_command", required=True)
    cr_create = cr_sub.add_parser("create")
    cr_create.add_argument("--title", required=True)
    cr_create.add_argument("--description", default="")
    cr_create.add_argument("--seed", action="append", required=True)
    cr_create.add_argument("--types")
    cr_create.add_argument("--depth", type=int)
    cr_create.add_argument("--json", action="store_true")
    cr_list = cr_sub.add_parser("list")
    cr_list.add_argument("--json", action="store_true")
    cr_show = cr_sub.add_parser("show")
    cr_show.add_argument("cr_id")
    cr_show.add_argument("--json", action="store_true")
    cr_transition = cr_sub.add_parser("transition")
    cr_transition.add_argument("cr_id")
    cr_transition.add_argument("target")
    cr_transition.add_argument("--json", action="store_true")
    cr_resolve = cr_sub.add_parser("resolve")
    cr_resolve.add_argument("cr_id")
    cr_resolve.add_argument("node")
    cr_resolve.add_argument("--resolution", required=True, choices=["Resolved", "Waived"])
    cr_resolve.add_argument("--note", default="")
    cr_resolve.add_argument("--json", action="store_true")
    cr.set_defaults(func=cmd_cr)

    baseline = sub.add_parser("baseline", help="baseline creation, listing, diff")
    baseline_sub = baseline.add_subparsers(dest="baseline_command", required=True)
    baseline_create = baseline_sub.add_parser("create")
    baseline_create.add_argument("--name", required=True)
    baseline_create.add_argument("--json", action="store_true")
    baseline_list = baseline_sub.add_parser("list")
    baseline_list.add_argument("--json", action="store_true")
    baseline_show = baseline_sub.add_parser("show")
    baseline_show.add_argument("ref", help="baseline id or name")
    baseline_diff = baseline_sub.add_parser("diff")
    baseline_diff.add_argument("a")
    baseline_diff.add_argument("b")
    baseline_diff.add_argument("--json", action="store_true")
    baseline_diff.add_argument("--fail-on-diff", action="store_true")
    baseline.set_defaults(func=cmd_baseline)

    report = sub.add_parser("report", help="evidence reports")
    report_sub = report.add_subparsers(dest="report_command", required=True)
    report_matrix = report_sub.add_parser("matrix")
    report_matrix.add_argument("--rows", required=True)
    report_matrix.add_argument("--cols", required=True)
    report_matrix.add_argument("--types", required=True)
    report_matrix.add_argument("--json", action="store_true")
    report.set_defaults(func=cmd_report)

    export = sub.add_parser("export", help="graph export")
    export.add_argument("--format", required=True, choices=["dot", "json"])
    export.add_argument("--kinds", help="comma-separated kind filter (dot only)")
    export.add_argument("--types", help="comma-separated link type filter (dot only)")
    export.set_defaults(func=cmd_export)

    sub.add_parser("verify-log", help="verify the event hash chain").set_defaults(
        func=cmd_verify_log
    )

    serve = sub.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RuleConfigError, ParseFailureError) as exc:
        fail(f"{exc.code}: {exc.message}")
        return EXIT_DATA
    except StorageFailureError as exc:
        fail(f"{exc.code}: {exc.message}")
        return EXIT_STORAGE
    except TraceForgeError as exc:
        fail(f"{exc.code}: {exc.message}")
        return EXIT_USAGE
    except FileNotFoundError as exc:
        fail(str(exc))
        return EXIT_DATA
    except OSError as exc:
        fail(str(exc))
        return EXIT_STORAGE


if __name__ == "__main__":
    raise SystemExit(main())
