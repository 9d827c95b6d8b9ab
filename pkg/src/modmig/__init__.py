"""Include-graph analysis and C++ Modules migration tooling."""

from .errors import (
    LayeringViolationError,
    ManifestError,
    ModmigError,
    ModulemapError,
    ModulemapParseError,
    OverlayError,
    PlanError,
    SanitizerError,
    ScanError,
    UnknownNodeError,
)
from .graph import (
    IncludeEdge,
    IncludeGraph,
    NodeKind,
    build_graph,
    find_cycles,
    graph_to_json,
    resolve_include,
    transitive_includes,
)
from .manifest import (
    ClassificationOverrides,
    LibraryManifest,
    LibrarySpec,
    load_manifest,
    manifest_from_dict,
)
from .modulemap import (
    EntryKind,
    HeaderEntry,
    ModuleDef,
    ModulemapDocument,
    generate_modulemap,
    parse_modulemap,
    render_modulemap,
)
from .overlay import (
    MountSpec,
    OverlayDocument,
    OverlayEntry,
    OverlayRoot,
    build_overlay,
    parse_overlay,
    relocate,
    render_overlay,
    resolve,
)
from .planner import (
    CostEstimate,
    DuplicationReport,
    MigrationPlan,
    ModuleDepGraph,
    bottom_up_order,
    detect_external_candidates,
    duplication_report,
    module_dependency_graph,
    parse_cost_estimate,
)
from .sanitizer import (
    CheckCommand,
    Classification,
    CompileCheckResult,
    CycleBreak,
    HeaderRecord,
    classify_headers,
    detect_broken,
    detect_macro_headers,
    header_records,
    run_standalone_checks,
    standalone_check_plan,
    suggest_cycle_breaks,
)
from .scanner import IncludeDirective, MacroStats, scan_includes, scan_source

__version__ = "0.1.0"
