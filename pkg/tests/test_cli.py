import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from polyfit.cli import REPORT_FIELDS, main
from polyfit.workload import make_dataset, make_points

GOLDEN_HEADER = ("deg,delta,eps,mode,segment_count,index_bytes,build_ms,median_query_ns,"
                 "p99_query_ns,refinement_rate,max_abs_err,max_rel_err")


@pytest.fixture
def line_csv(tmp_path):
    p = tmp_path / "line.csv"
    p.write_text("key,measure\n1,5\n2,5\n3,5\n4,5\n")
    return p


@pytest.fixture
def data_csv(tmp_path):
    d = make_dataset("gaussian", 3000, seed=2)
    p = tmp_path / "data.csv"
    np.savetxt(p, np.column_stack([d.keys, d.measures]), delimiter=",", fmt="%.17g")
    return p


@pytest.fixture
def points_csv(tmp_path):
    u, v, w = make_points("uniform", 800, seed=1)
    p = tmp_path / "points.csv"
    np.savetxt(p, np.column_stack([u, v, w]), delimiter=",", fmt="%.17g")
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def build(capsys, csv_path, out, *extra):
    code, text, _ = run(capsys, "build", "--input", csv_path, "--out", out, *extra)
    assert code == 0
    return text


def test_build_linear_single_segment(capsys, line_csv, tmp_path):
    text = build(capsys, line_csv, tmp_path / "i.pfix", "--agg", "sum", "--deg", 1, "--delta", 1)
    assert "segments: 1" in text.splitlines()


def test_query_and_verify(capsys, data_csv, tmp_path):
    idx = tmp_path / "i.pfix"
    build(capsys, data_csv, idx, "--deg", 2, "--delta", 20)
    code, text, _ = run(capsys, "query", "--index", idx, "--range=-1:1", "--mode", "abs",
                        "--eps", 40, "--verify", data_csv)
    assert code == 0
    fields = dict(line.split(": ", 1) for line in text.splitlines())
    assert fields["refined"] == "false"
    assert float(fields["abs_error"]) <= 40
    code, text, _ = run(capsys, "query", "--index", idx, "--range", "0:0.01", "--mode", "rel",
                        "--eps", 0.01, "--verify", data_csv)
    fields = dict(line.split(": ", 1) for line in text.splitlines())
    assert fields["refined"] == "true" and float(fields["abs_error"]) == 0.0


def test_exit_codes(capsys, data_csv, tmp_path):
    idx = tmp_path / "i.pfix"
    build(capsys, data_csv, idx, "--deg", 1, "--delta", 20)
    code, _, err = run(capsys, "query", "--index", idx, "--range", "0:1", "--mode", "abs", "--eps", 10)
    assert code == 3 and "GuaranteeMismatch" in err
    code, _, _ = run(capsys, "query", "--index", tmp_path / "nope.pfix", "--range", "0:1", "--eps", 40)
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        main(["query", "--index", str(idx)])
    assert exc.value.code == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n2,x\n")
    code, _, err = run(capsys, "build", "--input", bad, "--delta", 1, "--out", tmp_path / "b.pfix")
    assert code == 4 and "line 2" in err
    junk = tmp_path / "junk.pfix"
    junk.write_bytes(b"not an index")
    code, _, err = run(capsys, "inspect", "--index", junk)
    assert code == 2 and "BadMagic" in err


def read_report(path):
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        fh.seek(0)
        return header, list(csv.DictReader(fh))


def test_bench_report(capsys, data_csv, tmp_path, monkeypatch):
    idx = tmp_path / "i.pfix"
    build(capsys, data_csv, idx, "--deg", 2, "--delta", 10)
    report = tmp_path / "bench.csv"
    monkeypatch.setenv("POLYFIT_THREADS", "2")
    code, _, _ = run(capsys, "bench", "--index", idx, "--queries", 300, "--report", report)
    assert code == 0
    header, rows = read_report(report)
    assert header == GOLDEN_HEADER == ",".join(REPORT_FIELDS)
    assert [r["mode"] for r in rows] == ["abs", "rel"]
    assert float(rows[0]["max_abs_err"]) <= 20.0
    assert float(rows[0]["refinement_rate"]) == 0.0
    assert float(rows[1]["max_rel_err"]) <= 0.01
    assert 0.0 <= float(rows[1]["refinement_rate"]) <= 1.0


def test_sweep_rows(capsys, data_csv, tmp_path):
    report = tmp_path / "sweep.csv"
    code, text, _ = run(capsys, "sweep", "--input", data_csv, "--degs", "1,2", "--deltas", "25,100,400",
                        "--queries", 100, "--report", report)
    assert code == 0 and "rows: 6" in text
    header, rows = read_report(report)
    assert header == GOLDEN_HEADER
    assert len(rows) == 6
    assert [(int(r["deg"]), float(r["delta"])) for r in rows] == [
        (d, x) for d in (1, 2) for x in (25.0, 100.0, 400.0)]


def test_two_key_build_query_inspect(capsys, points_csv, tmp_path):
    idx = tmp_path / "q.pfix"
    text = build(capsys, points_csv, idx, "--agg", "count", "--dim", 2, "--deg", 1, "--delta", 10)
    assert text.startswith("segments: ")
    code, text, _ = run(capsys, "query", "--index", idx, "--range", "100:600", "--range2", "200:900",
                        "--eps", 40, "--verify", points_csv)
    assert code == 0
    fields = dict(line.split(": ", 1) for line in text.splitlines())
    assert float(fields["abs_error"]) <= 40
    code, _, err = run(capsys, "query", "--index", idx, "--range", "0:1", "--eps", 40)
    assert code == 1 and "--range2" in err
    code, text, _ = run(capsys, "inspect", "--index", idx, "--json")
    info = json.loads(text)
    assert info["dim"] == 2 and info["leaves"] >= 1
    assert info["max_certified_error"] <= 10
    assert sum(b["count"] for b in info["error_histogram"]) == info["leaves"]


def test_inspect_text(capsys, data_csv, tmp_path):
    idx = tmp_path / "i.pfix"
    build(capsys, data_csv, idx, "--agg", "max", "--deg", 2, "--delta", 5)
    code, text, _ = run(capsys, "inspect", "--index", idx)
    assert code == 0
    assert "magic: PFIX" in text and "agg: max" in text and "error_histogram:" in text


def test_module_entry_point(line_csv, tmp_path):
    out = tmp_path / "m.pfix"
    proc = subprocess.run([sys.executable, "-m", "polyfit", "build", "--input", str(line_csv),
                           "--deg", "1", "--delta", "1", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "segments: 1" in proc.stdout
