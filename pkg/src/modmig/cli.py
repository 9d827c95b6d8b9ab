"""Command-line entry point.

Exit status: 0 clean, 1 analysis findings, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from functools import cached_property
from typing import Sequence

from .errors import LayeringViolationError, ModmigError, ModulemapParseError
from .graph import IncludeGraph, build_graph, find_cycles, graph_to_json
from .manifest import LibraryManifest, canonical_path, load_manifest, relative_to
from .modulemap import (
    DEFAULT_SUFFIX,
    EntryKind,
    GeneratedModulemap,
    generate_modulemap,
    parse_modulemap,
    render_modulemap,
)
from .overlay import MountSpec, build_overlay, relocate, render_overlay
from .planner import (
    bottom_up_order,
    detect_external_candidates,
    duplication_report,
    external_assignment,
    module_dependency_graph,
    parse_cost_estimate,
)
from .sanitizer import (
    DEFAULT_MISSING_INCLUDE_PATTERN,
    FINDINGS,
    Classification,
    HeaderRecord,
    classify_headers,
    header_records,
    run_standalone_checks,
    standalone_check_plan,
    suggest_cycle_breaks,
)

log = logging.getLogger("modmig")

EXIT_CLEAN = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2

CHECK_CMD_ENV = "MODMIG_CHECK_CMD"
CACHE_DIR = ".modmig-cache"


class UsageError(ModmigError):
    pass


class ToolFailure(ModmigError):
    pass


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def dump_json(data) -> str:
    return json.dumps(data, indent=2) + "\n"


class Pipeline:
    """Lazily computed analysis stages shared by the subcommands."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = args.out
        os.makedirs(self.out, exist_ok=True)

    @cached_property
    def manifest(self) -> LibraryManifest:
        if not self.args.manifest:
            raise UsageError("--manifest is required")
        manifest = load_manifest(self.args.manifest)
        if self.args.only_libs:
            manifest = manifest.only(n for spec in self.args.only_libs for n in spec.split(",") if n)
        return manifest

    def rel(self, path: str) -> str:
        return relative_to(path, self.manifest.base_dir)

    def unrel(self, path: str) -> str:
        return canonical_path(path, self.manifest.base_dir)

    @cached_property
    def graph(self) -> IncludeGraph:
        return build_graph(
            self.manifest, jobs=self.args.jobs, ignore_conditional=self.args.ignore_conditional_includes
        )

    @cached_property
    def cycles(self) -> list[frozenset[str]]:
        return find_cycles(self.graph)

    @property
    def check_cmd(self) -> str | None:
        if getattr(self.args, "no_compile_checks", False):
            return None
        return getattr(self.args, "check_cmd", None) or os.environ.get(CHECK_CMD_ENV) or None

    @property
    def checks_requested(self) -> bool:
        return bool(getattr(self.args, "no_compile_checks", False) or self.check_cmd)

    @cached_property
    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(graph_to_json(self.graph, self.manifest.base_dir).encode())
        for path in sorted(self.graph.nodes):
            with open(path, "rb") as f:
                digest.update(path.encode() + b"\0" + hashlib.sha256(f.read()).digest())
        o = self.manifest.overrides
        digest.update(
            json.dumps(
                [sorted(o.force_textual), sorted(o.force_exclude), o.macro_ratio_threshold]
            ).encode()
        )
        return digest.hexdigest()

    def _check_key(self) -> list:
        return [self.check_cmd, self.args.missing_include_regex if self.check_cmd else None]

    @property
    def _cache_path(self) -> str:
        return os.path.join(self.out, CACHE_DIR, "check.json")

    def _load_cached_records(self) -> list[HeaderRecord] | None:
        if self.args.no_cache or not os.path.exists(self._cache_path):
            return None
        try:
            with open(self._cache_path, encoding="utf-8") as f:
                cached = json.load(f)
        except (OSError, json.JSONDecodeError):
            return None
        if cached.get("inputs") != self.fingerprint:
            return None
        if self.checks_requested and cached.get("checks") != self._check_key():
            return None
        return [HeaderRecord.from_dict(r, self.unrel) for r in cached["headers"]]

    @cached_property
    def records(self) -> list[HeaderRecord]:
        cached = self._load_cached_records()
        if cached is not None:
            log.info("using cached classifications from %s", self._cache_path)
            return cached
        raw = header_records(self.graph, self.manifest)
        # no results at all: every header that would need a check is flagged unchecked
        results = {}
        cmd = self.check_cmd
        if cmd:
            plan = standalone_check_plan([r.path for r in raw], cmd)
            results = run_standalone_checks(
                plan, parallelism=self.args.jobs, missing_include_pattern=self.args.missing_include_regex
            )
            failed = [r.header for r in results if r.spawn_failed]
            if failed:
                first = next(r for r in results if r.spawn_failed)
                raise ToolFailure(f"cannot run check command for {self.rel(failed[0])}: {first.raw_diagnostics}")
        elif not self.checks_requested:
            log.warning("no --check-cmd given; standalone compile checks skipped")
        records = classify_headers(self.graph, raw, self.cycles, results, self.manifest.overrides)
        os.makedirs(os.path.dirname(self._cache_path), exist_ok=True)
        write_text(
            self._cache_path,
            dump_json(
                {
                    "inputs": self.fingerprint,
                    "checks": self._check_key(),
                    "headers": [r.to_dict(self.rel) for r in records],
                }
            ),
        )
        return records

    @cached_property
    def modulemap(self) -> GeneratedModulemap:
        return generate_modulemap(self.manifest, self.records, self.cycles, suffix=self.args.suffix)


# -- subcommands -------------------------------------------------------------


def cmd_scan(p: Pipeline) -> int:
    text = graph_to_json(p.graph, p.manifest.base_dir)
    write_text(os.path.join(p.out, "graph.json"), text)
    if p.args.format == "json":
        sys.stdout.write(text)
    else:
        g = p.graph
        print(f"{len(g.nodes)} files, {len(g.edges)} includes, {len(g.unresolved)} unresolved")
        for u in g.unresolved:
            print(f"  unresolved: {p.rel(u.source)}:{u.directive.line}: {u.directive.spelling()}")
        for d in g.diagnostics:
            print(f"  diagnostic: {p.rel(d)}")
    return EXIT_CLEAN


def _cycle_report(p: Pipeline) -> list[dict]:
    report = []
    for scc in p.cycles:
        entry = {"members": [p.rel(m) for m in sorted(scc)], "suggested_breaks": []}
        if len(scc) > 1:
            entry["suggested_breaks"] = [
                {"from": p.rel(b.source), "to": p.rel(b.target), "rationale": b.rationale}
                for b in suggest_cycle_breaks(p.graph, scc)
            ]
        report.append(entry)
    return report


def cmd_check(p: Pipeline) -> int:
    if not p.checks_requested:
        raise UsageError(f"check needs --check-cmd, ${CHECK_CMD_ENV}, or --no-compile-checks")
    records = p.records
    headers = [r.to_dict(p.rel) for r in records]
    cycles = _cycle_report(p)
    write_text(os.path.join(p.out, "headers.json"), dump_json(headers))
    write_text(os.path.join(p.out, "cycles.json"), dump_json(cycles))
    findings = [r for r in records if r.classification in FINDINGS]
    if p.args.format == "json":
        sys.stdout.write(dump_json({"headers": headers, "cycles": cycles}))
    else:
        width = max((len(c.value) for c in Classification), default=0)
        for r in records:
            line = f"{r.classification.value:<{width}}  {p.rel(r.path)}"
            if r.evidence:
                line += "  (" + "; ".join(r.evidence) + ")"
            print(line)
            for w in r.warnings:
                print(f"{'':<{width}}  warning: {w}")
        for c in cycles:
            print("cycle: " + " <-> ".join(c["members"]))
            for b in c["suggested_breaks"]:
                print(f"  break {b['from']} -> {b['to']}: {b['rationale']}")
        counts = {c: sum(1 for r in records if r.classification is c) for c in Classification}
        print(", ".join(f"{c.value}: {n}" for c, n in counts.items() if n) or "no headers")
        unchecked = [r for r in records if r.unchecked]
        if unchecked:
            print(f"{len(unchecked)} header(s) unchecked")
    return EXIT_FINDINGS if findings else EXIT_CLEAN


def cmd_genmap(p: Pipeline) -> int:
    try:
        generated = p.modulemap
    except LayeringViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FINDINGS
    text = render_modulemap(generated.document)
    write_text(os.path.join(p.out, "module.modulemap"), text)
    omitted = [
        {"path": p.rel(o.path), "classification": o.classification.value, "reason": o.reason}
        for o in generated.omitted
    ]
    write_text(os.path.join(p.out, "omitted.json"), dump_json(omitted))
    if p.args.format == "json":
        sys.stdout.write(dump_json({"modulemap": text, "omitted": omitted}))
    else:
        for m in generated.document.modules:
            textual = sum(1 for e in m.entries if e.kind is EntryKind.TEXTUAL)
            print(f"{m.name}: {len(m.entries) - textual} headers, {textual} textual")
        for o in omitted:
            print(f"omitted {o['path']} ({o['classification']}: {o['reason']})")
    return EXIT_CLEAN


def cmd_overlay(p: Pipeline) -> int:
    mounts = [MountSpec.parse(m) for m in p.args.mount]
    doc = build_overlay(mounts)
    for spec in p.args.relocate or []:
        old, sep, new = spec.partition("=")
        if not sep:
            raise UsageError(f"--relocate expects OLD=NEW, got {spec!r}")
        doc, changed = relocate(doc, old, new)
        log.info("relocated %d path(s) from %s to %s", changed, old, new)
    text = render_overlay(doc)
    write_text(os.path.join(p.out, "overlay.json"), text)
    if p.args.format == "json":
        sys.stdout.write(text)
    else:
        for root in doc.roots:
            for e in root.contents:
                print(f"{root.name.rstrip('/')}/{e.name} -> {e.external_contents}")
    return EXIT_CLEAN


def _load_assignment(p: Pipeline, path: str) -> tuple[dict[str, str], list[str]]:
    with open(path, encoding="utf-8") as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict):
        mapping = {p.unrel(k): v for k, v in data.items()}
        return mapping, sorted(set(mapping.values()))
    try:
        doc = parse_modulemap(text)
    except ModulemapParseError as exc:
        raise UsageError(f"{path} is neither a JSON assignment nor a modulemap: {exc}") from None
    mapping = {}
    for module in doc.modules:
        for e in module.entries:
            if e.kind is EntryKind.NORMAL:
                mapping[_locate_header(p.manifest, e.header_path)] = module.name
    return mapping, [m.name for m in doc.modules]


def _locate_header(manifest: LibraryManifest, spelled: str) -> str:
    for sp in manifest.search_paths:
        candidate = canonical_path(spelled, sp)
        if os.path.isfile(candidate):
            return candidate
    return canonical_path(spelled, manifest.base_dir)


def cmd_plan(p: Pipeline) -> int:
    if p.args.assignment:
        assignment, modules = _load_assignment(p, p.args.assignment)
    else:
        try:
            generated = p.modulemap
        except LayeringViolationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FINDINGS
        assignment = generated.assignment
        modules = [m.name for m in generated.document.modules]
    graph = p.graph
    assignment = {h: m for h, m in assignment.items() if h in graph.nodes}
    groups = detect_external_candidates(graph, p.manifest, assignment)
    ext = external_assignment(groups, lambda root: f"external:{p.rel(root)}")
    full = {**ext, **assignment}
    dep = module_dependency_graph(graph, full, external=set(ext.values()), modules=modules)
    plan = bottom_up_order(dep)
    lines = graph.line_counts()
    report = duplication_report(graph, assignment, lines)
    cost = parse_cost_estimate(graph, assignment, lines)

    members: dict[str, list[str]] = {}
    for h, m in full.items():
        members.setdefault(m, []).append(p.manifest.include_spelling(h))
    steps = []
    for m in plan.order:
        headers = sorted(members.get(m, []))
        step = {"module": m, "rank": plan.ranks[m], "external": m in dep.external, "headers": headers}
        if m not in dep.external:
            step["driver"] = ["rootcling", "--cxxmodule", "-moduleMapFile=module.modulemap", *headers]
        steps.append(step)
    data = {
        "order": list(plan.order),
        "cycle_groups": [list(g) for g in plan.cycle_groups],
        "external_first": plan.external_first,
        "externals": {
            f"external:{p.rel(root)}": sorted(p.rel(h) for h in paths) for root, paths in groups.items()
        },
        "module_edges": [
            {"from": a, "to": b, "multiplicity": n} for (a, b), n in sorted(dep.edges.items())
        ],
        "duplication_report": {
            "entries": [
                {
                    "path": p.rel(e.path),
                    "duplication_count": e.duplication_count,
                    "duplicated_lines": e.duplicated_lines,
                    "mapped": e.mapped,
                }
                for e in report.entries
            ],
            "total_duplicated_lines": report.total_duplicated_lines,
            "redundant_lines": report.redundant_lines,
            "offenders": [p.rel(e.path) for e in report.offenders],
        },
        "cost_estimate": {"textual_lines": cost.textual_lines, "modular_lines": cost.modular_lines},
        "steps": steps,
    }
    text = dump_json(data)
    write_text(os.path.join(p.out, "plan.json"), text)
    if p.args.format == "json":
        sys.stdout.write(text)
    else:
        print("migration order (dependencies first):")
        for s in steps:
            kind = "external" if s["external"] else "library"
            print(f"  {s['rank']:>3}  {kind:<8}  {s['module']}")
        for g in plan.cycle_groups:
            print("  cycle group (migrate together): " + ", ".join(g))
        if report.offenders:
            print("duplicated headers:")
            print(f"  {'count':>5}  {'lines':>8}  path")
            for e in report.offenders:
                print(f"  {e.duplication_count:>5}  {e.duplicated_lines:>8}  {p.rel(e.path)}")
        print(f"parse cost: textual {cost.textual_lines} lines, modular {cost.modular_lines} lines")
    return EXIT_CLEAN


COMMANDS = {
    "scan": cmd_scan,
    "check": cmd_check,
    "genmap": cmd_genmap,
    "overlay": cmd_overlay,
    "plan": cmd_plan,
}


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="codebase manifest (JSON)")
    common.add_argument("--out", default="modmig-out", help="output directory (created if absent)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1)
    common.add_argument("--no-cache", action="store_true", help="ignore cached check results")
    common.add_argument("--only-libs", action="append", metavar="NAMES",
                        help="comma-separated libraries to process (repeatable)")
    common.add_argument("--ignore-conditional-includes", action="store_true",
                        help="drop includes inside #if/#ifdef regions from the graph")
    common.add_argument("-v", "--verbose", action="store_true")

    checks = argparse.ArgumentParser(add_help=False)
    checks.add_argument("--check-cmd", help=f"per-header compile command with {{header}} (env: {CHECK_CMD_ENV})")
    checks.add_argument("--no-compile-checks", action="store_true")
    checks.add_argument("--missing-include-regex", default=DEFAULT_MISSING_INCLUDE_PATTERN)
    checks.add_argument("--suffix", default=DEFAULT_SUFFIX, help="module name suffix")

    parser = argparse.ArgumentParser(prog="modmig", description="C++ Modules migration toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("scan", parents=[common], help="build the include graph")
    sub.add_parser("check", parents=[common, checks], help="classify headers")
    sub.add_parser("genmap", parents=[common, checks], help="generate module.modulemap")
    ov = sub.add_parser("overlay", parents=[common], help="build a VFS overlay file")
    ov.add_argument("--mount", action="append", required=True, metavar="VIRT=PHYS")
    ov.add_argument("--relocate", action="append", metavar="OLD=NEW")
    pl = sub.add_parser("plan", parents=[common, checks], help="bottom-up migration plan")
    pl.add_argument("--assignment", help="JSON {header: module} or a modulemap file")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_CLEAN
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="modmig: %(message)s",
        stream=sys.stderr,
    )
    try:
        pipeline = Pipeline(args)
        return COMMANDS[args.command](pipeline)
    except (ModmigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
