"""traceforge: a traceability and compliance engine for safety-critical projects.

Unifies requirements, issues, tests, and version-control history into one
typed bidirectional trace graph; automates change-request impact mapping,
assurance-level coverage checking, and content-addressed baselining; and
serves the whole thing over a CLI and an HTTP API.
"""

from traceforge.change import ChangeRequest, CrState, Resolution
from traceforge.compliance import (
    CoverageRule,
    CoverageRuleSet,
    DalLevel,
    Gap,
    GapReport,
    TraceMatrix,
    build_trace_matrix,
    check_coverage,
    default_ruleset,
    export_matrix_csv,
    load_ruleset,
)
from traceforge.engine import ProjectEngine
from traceforge.graph import Direction, TraceGraph, UpsertResult, graph_from_json, graph_to_json
from traceforge.impact import ImpactConfig, ImpactItem, ImpactSet, ItemStatus, compute_impact
from traceforge.model import (
    ArtifactId,
    ArtifactKind,
    ArtifactNode,
    LinkType,
    NodeSource,
    NodeStatus,
    TraceLink,
    canonical_hash,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactId",
    "ArtifactKind",
    "ArtifactNode",
    "ChangeRequest",
    "CoverageRule",
    "CoverageRuleSet",
    "CrState",
    "DalLevel",
    "Direction",
    "Gap",
    "GapReport",
    "ImpactConfig",
    "ImpactItem",
    "ImpactSet",
    "ItemStatus",
    "LinkType",
    "NodeSource",
    "NodeStatus",
    "ProjectEngine",
    "Resolution",
    "TraceGraph",
    "TraceLink",
    "TraceMatrix",
    "UpsertResult",
    "build_trace_matrix",
    "canonical_hash",
    "check_coverage",
    "compute_impact",
    "default_ruleset",
    "export_matrix_csv",
    "graph_from_json",
    "graph_to_json",
    "load_ruleset",
    "__version__",
]
