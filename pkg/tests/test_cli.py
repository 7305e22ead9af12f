import json

import pytest

from drhwsim.cli import main


def run_cli(args):
    return main(list(args))


@pytest.fixture
def workload_file(tmp_path):
    path = str(tmp_path / "w.json")
    assert run_cli(["gen", "--preset", "table1", "--out", path]) == 0
    return path


@pytest.fixture
def store_file(tmp_path, workload_file):
    path = str(tmp_path / "store.json")
    assert run_cli(["analyze", workload_file, "--latency-ms", "4",
                    "--out", path]) == 0
    return path


def test_gen_random_workload(tmp_path, capsys):
    path = str(tmp_path / "w.json")
    rc = run_cli(["gen", "--tasks", "2", "--subtasks", "3..5",
                  "--seed", "1", "--out", path])
    assert rc == 0
    doc = json.load(open(path))
    assert doc["schema"] == "drhw-workload/1"
    assert len(doc["tasks"]) == 2
    assert "wrote" in capsys.readouterr().out


def test_gen_preset(workload_file):
    doc = json.load(open(workload_file))
    assert {t["id"] for t in doc["tasks"]} == {
        "pattern_rec", "jpeg_dec", "parallel_jpeg", "mpeg_enc"}


def test_analyze_prints_table(store_file, capsys, workload_file):
    run_cli(["analyze", workload_file, "--out", store_file])
    out = capsys.readouterr().out
    assert "critical subtask fraction" in out
    assert "pattern_rec" in out
    doc = json.load(open(store_file))
    assert doc["schema"] == "drhw-store/1"


def test_simulate_writes_report(tmp_path, workload_file, store_file, capsys):
    report = str(tmp_path / "report.json")
    rc = run_cli(["simulate", workload_file, store_file,
                  "--tiles", "4..5", "--iterations", "20", "--seed", "2",
                  "--out", report])
    assert rc == 0
    doc = json.load(open(report))
    assert doc["schema"] == "drhw-report/1"
    assert doc["manifest"]["seed"] == 2
    assert doc["manifest"]["tiles"] == [4, 5]
    assert len(doc["cells"]) == 2 * 5       # two tile counts, five modes
    out = capsys.readouterr().out
    assert "NoPrefetch" in out and "Hybrid" in out


def test_simulate_mode_filter(tmp_path, workload_file, store_file):
    report = str(tmp_path / "report.json")
    rc = run_cli(["simulate", workload_file, store_file, "--tiles", "4",
                  "--iterations", "5", "--modes", "NoPrefetch,Hybrid",
                  "--out", report])
    assert rc == 0
    doc = json.load(open(report))
    assert {c["mode"] for c in doc["cells"]} == {"NoPrefetch", "Hybrid"}


def test_simulate_reports_are_byte_identical(tmp_path, workload_file,
                                             store_file):
    args = ["simulate", workload_file, store_file, "--tiles", "4",
            "--iterations", "30", "--seed", "7"]
    r1, r2 = str(tmp_path / "r1.json"), str(tmp_path / "r2.json")
    t1, t2 = str(tmp_path / "t.csv"), str(tmp_path / "sub" / "t.csv")
    (tmp_path / "sub").mkdir()
    assert run_cli(args + ["--out", r1, "--trace", t1]) == 0
    assert run_cli(args + ["--out", r2, "--trace", t2]) == 0
    assert open(t1, "rb").read() == open(t2, "rb").read()
    d1, d2 = json.load(open(r1)), json.load(open(r2))
    d1["manifest"].pop("trace"), d2["manifest"].pop("trace")
    assert d1 == d2


def test_trace_render_gantt(tmp_path, workload_file, store_file, capsys):
    trace = str(tmp_path / "trace.csv")
    run_cli(["simulate", workload_file, store_file, "--tiles", "4",
             "--iterations", "2", "--modes", "Hybrid", "--trace", trace])
    capsys.readouterr()
    assert run_cli(["trace", trace, "--width", "60"]) == 0
    out = capsys.readouterr().out
    assert "#" in out and "|" in out
    assert run_cli(["trace", trace, "--format", "table"]) == 0
    assert "exec" in capsys.readouterr().out


def test_cli_errors_exit_2(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert run_cli(["analyze", missing, "--out", str(tmp_path / "s.json")]) == 2
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run_cli(["analyze", str(bad), "--out", str(tmp_path / "s.json")]) == 2


def test_cli_latency_mismatch_exit_2(tmp_path, workload_file, store_file,
                                     capsys):
    rc = run_cli(["simulate", workload_file, store_file,
                  "--latency-ms", "2", "--iterations", "1"])
    assert rc == 2
    assert "latency" in capsys.readouterr().err


def test_cli_rejects_unknown_mode(workload_file, store_file, capsys):
    rc = run_cli(["simulate", workload_file, store_file, "--modes", "Bogus"])
    assert rc == 2
    assert "unknown modes" in capsys.readouterr().err
