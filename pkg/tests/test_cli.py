import json
import os
import sys

import pytest

from modmig.cli import main
from conftest import TRACKER_TEXT, SYSROOT_TEXT, guarded

MOCK_CC = """\
import re, sys
text = open(sys.argv[1]).read()
missing = re.findall(r"// mock-missing: (\\S+)", text)
for name in missing:
    sys.stderr.write(f"{sys.argv[1]}:1:10: fatal error: '{name}' file not found\\n")
sys.exit(1 if missing else 0)
"""


@pytest.fixture
def mock_cc(tmp_path):
    path = tmp_path / "mockcc.py"
    path.write_text(MOCK_CC)
    return f"{sys.executable} {path} {{header}}"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read(path):
    with open(path) as f:
        return f.read()


def single_lib(project, files, tus=("src/m.cc",)):
    return project(files, [{"name": "lib", "interface_dir": "src/lib"}], tu_roots=list(tus))


class TestScan:
    def test_writes_sorted_graph(self, project, tmp_path, capsys):
        p = single_lib(project, {"src/lib/B.h": "int b;\n", "src/lib/A.h": '#include "B.h"\n',
                                 "src/m.cc": '#include "lib/A.h"\n#include "nowhere.h"\n'})
        out = tmp_path / "out"
        code, text, _ = run(capsys, "scan", "--manifest", p.manifest_path, "--out", out)
        assert code == 0
        graph = json.loads(read(out / "graph.json"))
        paths = [n["path"] for n in graph["nodes"]]
        assert paths == sorted(paths) == ["src/lib/A.h", "src/lib/B.h", "src/m.cc"]
        assert [(e["from"], e["to"]) for e in graph["edges"]] == [("src/lib/A.h", "src/lib/B.h"), ("src/m.cc", "src/lib/A.h")]
        assert "1 unresolved" in text

    def test_missing_interface_dir(self, project, tmp_path, capsys):
        p = project({"src/m.cc": ""}, [{"name": "lib", "interface_dir": "src/gone"}])
        code, _, err = run(capsys, "scan", "--manifest", p.manifest_path, "--out", tmp_path / "out")
        assert code == 2 and "src/gone" in err

    def test_missing_manifest(self, tmp_path, capsys):
        code, _, err = run(capsys, "scan", "--manifest", tmp_path / "nope.json", "--out", tmp_path / "out")
        assert code == 2 and "nope.json" in err

    def test_bad_usage(self, capsys):
        assert run(capsys, "frobnicate")[0] == 2
        assert run(capsys, "scan", "--jobs", "0")[0] == 2

    def test_rerun_is_byte_identical(self, tracker, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        run(capsys, "scan", "--manifest", tracker.manifest_path, "--out", a)
        run(capsys, "scan", "--manifest", tracker.manifest_path, "--out", b, "--jobs", "4")
        assert read(a / "graph.json") == read(b / "graph.json")


class TestCheck:
    def test_all_standalone(self, tracker, tmp_path, capsys, mock_cc):
        code, text, _ = run(capsys, "check", "--manifest", tracker.manifest_path, "--out", tmp_path / "o",
                            "--check-cmd", mock_cc)
        assert code == 0
        headers = json.loads(read(tmp_path / "o/headers.json"))
        assert {h["classification"] for h in headers} == {"Standalone"}
        assert "Standalone: 3" in text

    def test_two_header_cycle(self, project, tmp_path, capsys, mock_cc):
        p = single_lib(project, {"src/lib/A.h": '#include "B.h"\n', "src/lib/B.h": '#include "A.h"\n',
                                 "src/m.cc": '#include "lib/A.h"\n'})
        code, text, _ = run(capsys, "check", "--manifest", p.manifest_path, "--out", tmp_path / "o", "--check-cmd", mock_cc)
        assert code == 1
        cycles = json.loads(read(tmp_path / "o/cycles.json"))
        assert cycles[0]["members"] == ["src/lib/A.h", "src/lib/B.h"]
        assert cycles[0]["suggested_breaks"] == [
            {"from": "src/lib/A.h", "to": "src/lib/B.h", "rationale": "replace include with forward declaration"}
        ]
        assert "cycle: src/lib/A.h <-> src/lib/B.h" in text

    def test_never_included_header_is_broken(self, project, tmp_path, capsys):
        p = single_lib(project, {"src/lib/A.h": "int a;\n", "src/lib/Lost.h": "int l;\n", "src/m.cc": '#include "lib/A.h"\n'})
        code, _, _ = run(capsys, "check", "--manifest", p.manifest_path, "--out", tmp_path / "o", "--no-compile-checks")
        assert code == 1
        by_path = {h["path"]: h for h in json.loads(read(tmp_path / "o/headers.json"))}
        assert by_path["src/lib/Lost.h"]["classification"] == "Broken"
        assert by_path["src/lib/A.h"]["unchecked"] is True

    def test_incomplete_reports_missing_include(self, project, tmp_path, capsys, mock_cc):
        p = single_lib(project, {"src/lib/A.h": "// mock-missing: X.h\nint a;\n", "src/m.cc": '#include "lib/A.h"\n'})
        code, _, _ = run(capsys, "check", "--manifest", p.manifest_path, "--out", tmp_path / "o", "--check-cmd", mock_cc)
        assert code == 1
        (h,) = json.loads(read(tmp_path / "o/headers.json"))
        assert h["classification"] == "Incomplete" and h["missing_includes"] == ["X.h"]

    def test_requires_check_command(self, tracker, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("MODMIG_CHECK_CMD", raising=False)
        code, _, err = run(capsys, "check", "--manifest", tracker.manifest_path, "--out", tmp_path / "o")
        assert code == 2 and "--check-cmd" in err

    def test_check_command_from_environment(self, tracker, tmp_path, capsys, monkeypatch, mock_cc):
        monkeypatch.setenv("MODMIG_CHECK_CMD", mock_cc)
        assert run(capsys, "check", "--manifest", tracker.manifest_path, "--out", tmp_path / "o")[0] == 0

    def test_unavailable_executor(self, tracker, tmp_path, capsys):
        code, _, err = run(capsys, "check", "--manifest", tracker.manifest_path, "--out", tmp_path / "o",
                           "--check-cmd", "/definitely/not/a/compiler {header}")
        assert code == 2 and "cannot run check command" in err

    def test_cache_reused_until_inputs_change(self, project, tmp_path, capsys, mock_cc):
        p = single_lib(project, {"src/lib/A.h": "int a;\n", "src/m.cc": '#include "lib/A.h"\n'})
        out = tmp_path / "o"
        args = ["check", "--manifest", p.manifest_path, "--out", out, "--check-cmd", mock_cc]
        assert run(capsys, *args)[0] == 0
        cache = out / ".modmig-cache/check.json"
        # poison the cache: a reused cache shows up in the output
        data = json.loads(read(cache))
        data["headers"][0]["classification"] = "Broken"
        cache.write_text(json.dumps(data))
        assert run(capsys, *args)[0] == 1
        assert run(capsys, *args, "--no-cache")[0] == 0
        cache.write_text(json.dumps(data))
        with open(p.path("src/lib/A.h"), "a") as f:
            f.write("int more;\n")
        assert run(capsys, *args)[0] == 0


class TestGenmap:
    def test_tracker_golden(self, tracker, tmp_path, capsys):
        code, _, _ = run(capsys, "genmap", "--manifest", tracker.manifest_path, "--out", tmp_path / "o")
        assert code == 0
        text = read(tmp_path / "o/module.modulemap")
        assert sorted(text.splitlines()) == sorted(TRACKER_TEXT.splitlines())
        assert json.loads(read(tmp_path / "o/omitted.json")) == []

    def test_no_libraries_gives_empty_file(self, project, tmp_path, capsys):
        p = project({"src/m.cc": ""}, [], tu_roots=["src/m.cc"])
        assert run(capsys, "genmap", "--manifest", p.manifest_path, "--out", tmp_path / "o")[0] == 0
        assert read(tmp_path / "o/module.modulemap") == ""

    def test_cross_library_cycle(self, project, tmp_path, capsys):
        files = {"src/one/A.h": '#include "two/B.h"\n', "src/two/B.h": '#include "one/A.h"\n', "src/m.cc": '#include "one/A.h"\n'}
        libs = [{"name": "one", "interface_dir": "src/one"}, {"name": "two", "interface_dir": "src/two"}]
        p = project(files, libs, tu_roots=["src/m.cc"])
        code, _, err = run(capsys, "genmap", "--manifest", p.manifest_path, "--out", tmp_path / "o")
        assert code == 1 and "layering violation" in err

    def test_only_libs(self, project, tmp_path, capsys):
        files = {"src/one/A.h": "int a;\n", "src/two/B.h": "int b;\n", "src/m.cc": '#include "one/A.h"\n#include "two/B.h"\n'}
        libs = [{"name": "one", "interface_dir": "src/one"}, {"name": "two", "interface_dir": "src/two"}]
        p = project(files, libs, tu_roots=["src/m.cc"])
        run(capsys, "genmap", "--manifest", p.manifest_path, "--out", tmp_path / "o", "--only-libs", "two")
        assert read(tmp_path / "o/module.modulemap").startswith("module two_xr {")
        assert "one_xr" not in read(tmp_path / "o/module.modulemap")


class TestOverlay:
    MOUNTS = ["--mount", "/usr/include/c++/module.modulemap=/builddir/include/stl.modulemap",
              "--mount", "/usr/include/module.modulemap=/builddir/include/libc.modulemap"]

    def test_sysroot_golden(self, tmp_path, capsys):
        code, _, _ = run(capsys, "overlay", "--out", tmp_path / "o", *self.MOUNTS)
        assert code == 0
        assert json.loads(read(tmp_path / "o/overlay.json")) == json.loads(SYSROOT_TEXT.replace("'", '"'))

    def test_single_mount(self, tmp_path, capsys):
        run(capsys, "overlay", "--out", tmp_path / "o", *self.MOUNTS[:2])
        assert len(json.loads(read(tmp_path / "o/overlay.json"))["roots"]) == 1

    def test_relocate(self, tmp_path, capsys):
        run(capsys, "overlay", "--out", tmp_path / "o", *self.MOUNTS, "--relocate", "/builddir=/opt/release")
        text = read(tmp_path / "o/overlay.json")
        assert "/opt/release/include/stl.modulemap" in text and "/builddir" not in text

    def test_duplicate_target(self, tmp_path, capsys):
        code, _, err = run(capsys, "overlay", "--out", tmp_path / "o", *self.MOUNTS,
                           "--mount", "/usr/include/module.modulemap=/other/libc.modulemap")
        assert code == 2 and "/other/libc.modulemap" in err


def duplication_project(project):
    files = {
        "ext/stl/vector": "template <class T> class vector;\n",
        "src/alpha/A.h": guarded("A", '#include "shared/C.h"\nint a;\n'),
        "src/beta/B.h": guarded("B", '#include "shared/C.h"\n#include "alpha/A.h"\n#include <vector>\n'),
        "src/shared/C.h": guarded("C", "int c;\n"),
        "src/a.cc": '#include "alpha/A.h"\n',
        "src/b.cc": '#include "beta/B.h"\n',
    }
    libs = [{"name": "alpha", "interface_dir": "src/alpha"}, {"name": "beta", "interface_dir": "src/beta"}]
    return project(files, libs, search_paths=["src", "ext/stl"], tu_roots=["src/a.cc", "src/b.cc"])


class TestPlan:
    def test_externals_first_and_offenders(self, project, tmp_path, capsys):
        p = duplication_project(project)
        code, text, _ = run(capsys, "plan", "--manifest", p.manifest_path, "--out", tmp_path / "o")
        assert code == 0
        plan = json.loads(read(tmp_path / "o/plan.json"))
        assert plan["order"] == ["external:ext/stl", "external:src", "alpha_xr", "beta_xr"]
        assert plan["external_first"] is True
        assert plan["duplication_report"]["offenders"] == ["src/shared/C.h"]
        first = plan["duplication_report"]["entries"][0]
        assert (first["path"], first["duplication_count"]) == ("src/shared/C.h", 2)
        table = text.split("duplicated headers:")[1].splitlines()
        assert table[2].split() == ["2", str(first["duplicated_lines"]), "src/shared/C.h"]
        assert plan["steps"][2]["driver"][:2] == ["rootcling", "--cxxmodule"]

    def test_single_library(self, tracker, tmp_path, capsys):
        assert run(capsys, "plan", "--manifest", tracker.manifest_path, "--out", tmp_path / "o")[0] == 0
        plan = json.loads(read(tmp_path / "o/plan.json"))
        assert plan["order"] == ["DataFormatsTrackerCommon_xr"]
        assert plan["duplication_report"]["offenders"] == []

    def test_explicit_assignment(self, project, tmp_path, capsys):
        p = duplication_project(project)
        assignment = tmp_path / "assign.json"
        assignment.write_text(json.dumps({"src/alpha/A.h": "Alpha", "src/beta/B.h": "Beta", "src/shared/C.h": "Gamma"}))
        run(capsys, "plan", "--manifest", p.manifest_path, "--out", tmp_path / "o", "--assignment", assignment)
        plan = json.loads(read(tmp_path / "o/plan.json"))
        assert plan["order"] == ["external:ext/stl", "Gamma", "Alpha", "Beta"]
        assert plan["duplication_report"]["offenders"] == []

    def test_assignment_from_modulemap(self, tracker, tmp_path, capsys):
        run(capsys, "genmap", "--manifest", tracker.manifest_path, "--out", tmp_path / "o")
        code, _, _ = run(capsys, "plan", "--manifest", tracker.manifest_path, "--out", tmp_path / "p",
                         "--assignment", tmp_path / "o/module.modulemap")
        assert code == 0
        plan = json.loads(read(tmp_path / "p/plan.json"))
        assert len(plan["steps"][0]["headers"]) == 3
