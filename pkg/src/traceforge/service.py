"""HTTP/JSON API over the project engines.

One writer lock per project serializes every engine access; JSON bodies are
rendered through one canonical serializer so responses are byte-deterministic
and identical to the CLI's JSON output.
"""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import Response
from pydantic import BaseModel, Field

from traceforge.compliance import build_trace_matrix, export_matrix_csv
from traceforge.change import CrState, Resolution
from traceforge.dot import export_graph_dot
from traceforge.engine import INGEST_FORMATS, ProjectEngine
from traceforge.errors import TraceForgeError, ValidationError
from traceforge.graph import Direction, graph_to_dict, link_to_dict, node_to_dict
from traceforge.impact import ImpactConfig
from traceforge.model import ArtifactId, ArtifactKind, LinkType, link_type_from_name, resolve_kind
from traceforge.compliance import dal_from_letter, default_ruleset
from traceforge.store import ProjectStore

API_PREFIX = "/api/v1"

_STATUS_BY_CODE = {
    "Validation": 400,
    "InvalidArtifactId": 400,
    "TypeMatrixViolation": 400,
    "SelfLink": 400,
    "EmptySeeds": 400,
    "RuleSyntax": 400,
    "UnknownKind": 400,
    "UnknownLinkType": 400,
    "BadDalSet": 400,
    "IncompatibleTypes": 400,
    "NotFound": 404,
    "DanglingEndpoint": 404,
    "UnknownSeed": 404,
    "UnknownItem": 404,
    "KindChanged": 409,
    "Duplicate": 409,
    "AlreadyDeleted": 409,
    "IllegalTransition": 409,
    "GuardFailed": 409,
    "WrongState": 409,
    "AlreadyResolved": 409,
    "DuplicateName": 409,
    "SeedDeleted": 409,
    "ParseDiagnostics": 422,
    "StorageFailure": 500,
    "ChainBroken": 500,
    "BadEvent": 500,
    "Internal": 500,
}


def canonical_json(payload: object) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def json_response(payload: object, status_code: int = 200) -> Response:
    # errors="replace" keeps responses valid UTF-8 even when an error message
    # echoes unencodable input (lone surrogates from JSON escapes)
    return Response(
        content=(canonical_json(payload) + "\n").encode("utf-8", errors="replace"),
        media_type="application/json",
        status_code=status_code,
    )


def error_response(code: str, message: str, detail: object = None) -> Response:
    status = _STATUS_BY_CODE.get(code, 500)
    return json_response(
        {"error_code": code, "message": message, "detail": detail}, status_code=status
    )


class ProjectRegistry:
    """Engines cached per project, each guarded by its own writer lock."""

    def __init__(self, home: Path):
        self.home = Path(home)
        self._engines: dict[str, ProjectEngine] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._mutex = threading.Lock()

    def create(self, name: str) -> ProjectEngine:
        with self._mutex:
            engine = ProjectEngine.create(self.home, name)
            self._engines[name] = engine
            self._locks[name] = threading.RLock()
            return engine

    def list(self) -> list[str]:
        return ProjectStore.list_projects(self.home)

    @contextmanager
    def project(self, name: str):
        with self._mutex:
            if name not in self._engines:
                self._engines[name] = ProjectEngine.open(self.home, name)
                self._locks[name] = threading.RLock()
            lock = self._locks[name]
        with lock:
            yield self._engines[name]


class ProjectBody(BaseModel):
    name: str


class IngestBody(BaseModel):
    format: str
    content: str


class LinkBody(BaseModel):
    from_id: str = Field(alias="from")
    to: str
    type: str


class ImpactBody(BaseModel):
    seeds: list[str]
    types: list[str] | None = None
    max_depth: int | None = None


class CrBody(BaseModel):
    title: str
    description: str = ""
    seeds: list[str]
    types: list[str] | None = None
    max_depth: int | None = None


class TransitionBody(BaseModel):
    target: str


class ResolveBody(BaseModel):
    resolution: str
    note: str = ""


class BaselineBody(BaseModel):
    name: str


def _parse_link_type(token: str) -> LinkType:
    link_type = link_type_from_name(token)
    if link_type is None:
        raise ValidationError(f"unknown link type {token!r}")
    return link_type


def _parse_types_csv(tokens: str | None) -> set[LinkType] | None:
    if tokens is None or tokens == "":
        return None
    return {_parse_link_type(token) for token in tokens.split(",") if token}


def _parse_kind(token: str) -> ArtifactKind:
    kind = resolve_kind(token)
    if kind is None:
        raise ValidationError(f"unknown artifact kind {token!r}")
    return kind


def _impact_config(types: list[str] | None, max_depth: int | None) -> ImpactConfig:
    if types is None:
        return ImpactConfig(max_depth=max_depth)
    return ImpactConfig(
        allowed_types=frozenset(_parse_link_type(t) for t in types), max_depth=max_depth
    )


def _parse_dal(token: str):
    dal = dal_from_letter(token)
    if dal is None:
        raise ValidationError(f"unknown DAL {token!r}")
    return dal


def _parse_direction(token: str) -> Direction:
    try:
        return Direction(token)
    except ValueError:
        raise ValidationError(f"unknown direction {token!r}") from None


def _parse_cr_state(token: str) -> CrState:
    try:
        return CrState(token)
    except ValueError:
        raise ValidationError(f"unknown CR state {token!r}") from None


def _parse_resolution(token: str) -> Resolution:
    try:
        return Resolution(token)
    except ValueError:
        raise ValidationError(f"unknown resolution {token!r}") from None


def create_app(home: Path | str) -> FastAPI:
    app = FastAPI(title="traceforge", version="0.1.0")
    registry = ProjectRegistry(Path(home))
    app.state.registry = registry

    @app.exception_handler(TraceForgeError)
    async def handle_traceforge_error(request: Request, exc: TraceForgeError):
        return error_response(exc.code, exc.message, exc.detail)

    @app.exception_handler(RequestValidationError)
    async def handle_request_validation(request: Request, exc: RequestValidationError):
        return error_response("Validation", "invalid request", detail=str(exc))

    # -- projects ------------------------------------------------------------

    @app.post(API_PREFIX + "/projects")
    def create_project(body: ProjectBody):
        engine = registry.create(body.name)
        return json_response({"name": engine.name})

    @app.get(API_PREFIX + "/projects")
    def list_projects():
        return json_response(registry.list())

    # -- ingestion ------------------------------------------------------------

    @app.post(API_PREFIX + "/projects/{project}/ingest")
    def ingest(project: str, body: IngestBody):
        if body.format not in INGEST_FORMATS:
            raise ValidationError(f"unknown ingest format {body.format!r}")
        with registry.project(project) as engine:
            report = engine.ingest_text(body.format, body.content)
        if report.has_errors:
            return error_response(
                "ParseDiagnostics", "ingest produced error diagnostics", report.to_dict()
            )
        return json_response(report.to_dict())

    # -- nodes ------------------------------------------------------------

    @app.get(API_PREFIX + "/projects/{project}/nodes")
    def list_nodes(project: str, kind: str | None = None, q: str | None = None):
        kind_filter = _parse_kind(kind) if kind else None
        with registry.project(project) as engine:
            nodes = []
            for key in sorted(engine.graph.nodes):
                node = engine.graph.nodes[key]
                if kind_filter is not None and node.kind is not kind_filter:
                    continue
                if q and q.lower() not in key.lower() and q.lower() not in node.title.lower():
                    continue
                nodes.append(node_to_dict(node))
        return json_response(nodes)

    @app.get(API_PREFIX + "/projects/{project}/nodes/{node_id:path}/neighbors")
    def node_neighbors(
        project: str, node_id: str, direction: str = "Both", types: str | None = None
    ):
        with registry.project(project) as engine:
            entries = engine.graph.neighbors(
                ArtifactId.parse(node_id), _parse_direction(direction), _parse_types_csv(types)
            )
            payload = [
                {"link": link_to_dict(link), "neighbor": partner.render()}
                for link, partner in entries
            ]
        return json_response(payload)

    @app.get(API_PREFIX + "/projects/{project}/nodes/{node_id:path}")
    def get_node(project: str, node_id: str):
        with registry.project(project) as engine:
            node = engine.graph.get_node(node_id)
        return json_response(node_to_dict(node))

    # -- links ------------------------------------------------------------

    @app.post(API_PREFIX + "/projects/{project}/links")
    def add_link(project: str, body: LinkBody):
        with registry.project(project) as engine:
            link = engine.add_link(
                ArtifactId.parse(body.from_id),
                ArtifactId.parse(body.to),
                _parse_link_type(body.type),
            )
        return json_response(link_to_dict(link))

    @app.delete(API_PREFIX + "/projects/{project}/links")
    def remove_link(project: str, body: LinkBody = Body(...)):
        with registry.project(project) as engine:
            link = engine.remove_link(
                ArtifactId.parse(body.from_id),
                _parse_link_type(body.type),
                ArtifactId.parse(body.to),
            )
        return json_response(link_to_dict(link))

    # -- impact and change requests ------------------------------------------------------------

    @app.post(API_PREFIX + "/projects/{project}/impact")
    def preview_impact(project: str, body: ImpactBody):
        config = _impact_config(body.types, body.max_depth)
        with registry.project(project) as engine:
            impact = engine.preview_impact([ArtifactId.parse(s) for s in body.seeds], config)
        return json_response(impact.to_dict())

    @app.post(API_PREFIX + "/projects/{project}/crs")
    def create_cr(project: str, body: CrBody):
        config = _impact_config(body.types, body.max_depth)
        with registry.project(project) as engine:
            cr = engine.create_cr(
                body.title, body.description, [ArtifactId.parse(s) for s in body.seeds], config
            )
        return json_response(cr.to_dict())

    @app.get(API_PREFIX + "/projects/{project}/crs")
    def list_crs(project: str):
        with registry.project(project) as engine:
            payload = [engine.crs[key].to_dict() for key in sorted(engine.crs)]
        return json_response(payload)

    @app.get(API_PREFIX + "/projects/{project}/crs/{cr_id}")
    def get_cr(project: str, cr_id: str):
        with registry.project(project) as engine:
            cr = engine.get_cr(cr_id)
        return json_response(cr.to_dict())

    @app.post(API_PREFIX + "/projects/{project}/crs/{cr_id}/transition")
    def transition_cr(project: str, cr_id: str, body: TransitionBody):
        with registry.project(project) as engine:
            cr = engine.transition_cr(cr_id, _parse_cr_state(body.target))
        return json_response(cr.to_dict())

    @app.post(API_PREFIX + "/projects/{project}/crs/{cr_id}/items/{node_id:path}/resolve")
    def resolve_item(project: str, cr_id: str, node_id: str, body: ResolveBody):
        with registry.project(project) as engine:
            cr = engine.resolve_item(cr_id, node_id, _parse_resolution(body.resolution), body.note)
        return json_response(cr.to_dict())

    # -- baselines ------------------------------------------------------------

    @app.post(API_PREFIX + "/projects/{project}/baselines")
    def create_baseline(project: str, body: BaselineBody):
        with registry.project(project) as engine:
            baseline = engine.create_baseline(body.name)
        return json_response(baseline.to_dict())

    @app.get(API_PREFIX + "/projects/{project}/baselines")
    def list_baselines(project: str):
        with registry.project(project) as engine:
            payload = [engine.baselines[key].to_dict() for key in sorted(engine.baselines)]
        return json_response(payload)

    @app.get(API_PREFIX + "/projects/{project}/baselines/diff")
    def diff_baselines(project: str, a: str, b: str):
        with registry.project(project) as engine:
            diff = engine.diff_baselines(a, b)
        return json_response(diff.to_dict())

    @app.get(API_PREFIX + "/projects/{project}/baselines/{baseline_id}/index")
    def baseline_index(project: str, baseline_id: str):
        with registry.project(project) as engine:
            baseline = engine.get_baseline(baseline_id)
        return Response(content=baseline.index_text, media_type="text/plain; charset=utf-8")

    # -- compliance ------------------------------------------------------------

    @app.get(API_PREFIX + "/projects/{project}/coverage")
    def coverage(project: str, dal: str):
        with registry.project(project) as engine:
            report = engine.check_coverage(_parse_dal(dal), default_ruleset())
        return json_response(report.to_dict())

    @app.get(API_PREFIX + "/projects/{project}/matrix.csv")
    def matrix_csv(project: str, rows: str, cols: str, types: str):
        with registry.project(project) as engine:
            matrix = build_trace_matrix(
                engine.graph,
                _parse_kind(rows),
                _parse_kind(cols),
                sorted(_parse_types_csv(types) or set(), key=lambda t: t.value),
            )
        return Response(content=export_matrix_csv(matrix), media_type="text/csv; charset=utf-8")

    @app.get(API_PREFIX + "/projects/{project}/matrix")
    def matrix(project: str, rows: str, cols: str, types: str):
        with registry.project(project) as engine:
            result = build_trace_matrix(
                engine.graph,
                _parse_kind(rows),
                _parse_kind(cols),
                sorted(_parse_types_csv(types) or set(), key=lambda t: t.value),
            )
        return json_response(result.to_dict())

    # -- export and events ------------------------------------------------------------

    @app.get(API_PREFIX + "/projects/{project}/export/graph")
    def export_graph(
        project: str, format: str = "json", kinds: str | None = None, types: str | None = None
    ):
        if format not in ("json", "dot"):
            raise ValidationError(f"unknown export format {format!r}")
        kind_filter = (
            {_parse_kind(token) for token in kinds.split(",") if token} if kinds else None
        )
        type_filter = _parse_types_csv(types)
        with registry.project(project) as engine:
            if format == "json":
                return json_response(graph_to_dict(engine.graph))
            text = export_graph_dot(engine.graph, kind_filter, type_filter)
        return Response(content=text, media_type="text/vnd.graphviz; charset=utf-8")

    @app.get(API_PREFIX + "/projects/{project}/events")
    def events(project: str, since: int = 0):
        with registry.project(project) as engine:
            payload = [event.to_dict() for event in engine.events_since(since)]
        return json_response(payload)

    return app


def serve(home: Path | str, host: str = "127.0.0.1", port: int = 8080) -> None:
    import uvicorn

    uvicorn.run(create_app(home), host=host, port=port, log_level="info")
