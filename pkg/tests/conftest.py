import json
import os
import sys
import time

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from modmig.manifest import manifest_from_dict  # noqa: E402

TRACKER_HEADERS = ("TrackerTopology", "TrackerDetSide", "ClusterSummary")

TRACKER_TEXT = (
    "module DataFormatsTrackerCommon_xr {\n"
    '  module "TrackerTopology" {header "DataFormats/TrackerCommon/interface/TrackerTopology.h" export *}\n'
    '  module "TrackerDetSide" {header "DataFormats/TrackerCommon/interface/TrackerDetSide.h" export *}\n'
    '  module "ClusterSummary" {header "DataFormats/TrackerCommon/interface/ClusterSummary.h" export *}\n'
    "}\n"
)

SYSROOT_TEXT = """\
  { 'version': 0,
    'roots': [
      { 'name': '/usr/include/c++/', 'type': 'directory',
        'contents': [
          { 'name': 'module.modulemap', 'type': 'file',
            'external-contents': '/builddir/include/stl.modulemap' }]},
      { 'name': '/usr/include/', 'type': 'directory',
        'contents': [
          { 'name': 'module.modulemap', 'type': 'file',
            'external-contents': '/builddir/include/libc.modulemap'
        }]}]}
"""


def guarded(name, body=""):
    macro = name.upper().replace("/", "_").replace(".", "_")
    return f"#ifndef {macro}\n#define {macro}\n{body}#endif\n"


def write_tree(root, files):
    for rel, text in files.items():
        path = os.path.join(str(root), rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w") as f:
            f.write(text)


class Project:
    """A fixture codebase on disk plus its manifest."""

    def __init__(self, root, files, manifest):
        self.root = str(root)
        write_tree(root, files)
        self.manifest_data = manifest
        self.manifest_path = os.path.join(self.root, "manifest.json")
        with open(self.manifest_path, "w") as f:
            json.dump(manifest, f)

    def path(self, rel):
        return os.path.join(self.root, rel)

    @property
    def manifest(self):
        return manifest_from_dict(self.manifest_data, self.root)


@pytest.fixture
def project(tmp_path):
    made = []

    def make(files, libraries, search_paths=("src",), tu_roots=(), overrides=None):
        data = {
            "libraries": libraries,
            "search_paths": list(search_paths),
            "tu_roots": list(tu_roots),
        }
        if overrides is not None:
            data["overrides"] = overrides
        made.append(None)
        root = tmp_path / ("proj" if len(made) == 1 else f"proj{len(made)}")
        return Project(root, files, data)

    return make


def tracker_files():
    iface = "src/DataFormats/TrackerCommon/interface/"
    files = {iface + f"{h}.h": guarded(h, f"class {h} {{}};\n") for h in TRACKER_HEADERS}
    files["src/DataFormats/TrackerCommon/src/classes.h"] = "".join(
        f'#include "DataFormats/TrackerCommon/interface/{h}.h"\n' for h in TRACKER_HEADERS
    )
    files["src/DataFormats/TrackerCommon/src/classes.cc"] = '#include "classes.h"\nint x;\n'
    return files


TRACKER_LIBRARY = {
    "name": "DataFormats/TrackerCommon",
    "interface_dir": "src/DataFormats/TrackerCommon/interface",
}
TRACKER_TU = "src/DataFormats/TrackerCommon/src/classes.cc"


@pytest.fixture
def tracker(project):
    return project(tracker_files(), [TRACKER_LIBRARY], tu_roots=[TRACKER_TU])


# -- acceptance reporting -----------------------------------------------------

_criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    _criteria.append((number, title, report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome, duration in sorted(_criteria):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"AC{number} {status}  {title}  ({duration:.2f}s)")


@pytest.fixture
def stopwatch():
    class Watch:
        def __enter__(self):
            self.start = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.elapsed = time.perf_counter() - self.start

    return Watch()
