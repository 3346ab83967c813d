import json
import subprocess
import sys
from pathlib import Path

import pytest

from prisample.cli import main
from prisample.estimate import format_estimate
from prisample.model import read_records
from prisample.playout import load_sample
from prisample.sampler import sidecar_path
from prisample.synth import true_mass


@pytest.fixture
def nodes_csv(tmp_path):
    path = tmp_path / "nodes.csv"
    assert main(["synth", "--seed", "3", "--n-nodes", "400", "--n-links", "300",
                 "--out", str(path), "--links-out", str(tmp_path / "links.csv")]) == 0
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_build_is_deterministic(tmp_path, nodes_csv):
    for name in ("a.csv", "b.csv"):
        assert run("build", "--input", nodes_csv, "--weight", "feature:fo", "--seed", 7, "--out", tmp_path / name) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert Path(sidecar_path(tmp_path / "a.csv")).read_bytes() == Path(sidecar_path(tmp_path / "b.csv")).read_bytes()


def test_duplicate_id_error(tmp_path, capsys):
    path = tmp_path / "dup.csv"
    path.write_text("id,fo,fr,ac\na,1,2,3\na,4,5,6\n")
    assert run("build", "--input", path, "--weight", "uniform", "--seed", 1, "--out", tmp_path / "m.csv") != 0
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and err.startswith("error: DuplicateId") and "'a'" in err
    assert not (tmp_path / "m.csv").exists()


def test_kmax_sets_capped(tmp_path, nodes_csv):
    out = tmp_path / "m.csv"
    assert run("build", "--input", nodes_csv, "--weight", "uniform", "--seed", 1, "--kmax", 2, "--out", out) == 0
    meta = json.loads(Path(sidecar_path(out)).read_text())
    assert meta["capped"] is True and meta["length"] == 2
    assert len(out.read_text().splitlines()) == 3


def test_sample_extend_estimate(tmp_path, nodes_csv, capsys):
    m, s1, s2 = tmp_path / "m.csv", tmp_path / "s1.json", tmp_path / "s2.json"
    assert run("build", "--input", nodes_csv, "--weight", "feature:fr", "--seed", 2, "--out", m) == 0
    assert run("sample", "--master", m, "--input", nodes_csv, "--predicate", "ac>=2", "--k", 10, "--out", s1) == 0
    assert run("extend", "--master", m, "--input", nodes_csv, "--sample", s1, "--j", 15, "--out", s2) == 0
    first, second = load_sample(s1), load_sample(s2)
    assert len(set(second.ids)) == len(second.ids) == 25
    assert second.ids[:10] == first.ids
    assert second.z <= first.z

    capsys.readouterr()
    assert run("estimate", "--sample", s2, "--count") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["type"] == "count" and out["estimate"] > 25


def test_extend_with_other_predicate_fails(tmp_path, nodes_csv, capsys):
    m, s1 = tmp_path / "m.csv", tmp_path / "s1.json"
    run("build", "--input", nodes_csv, "--weight", "uniform", "--seed", 2, "--out", m)
    run("sample", "--master", m, "--input", nodes_csv, "--k", 5, "--out", s1)
    code = run("extend", "--master", m, "--input", nodes_csv, "--sample", s1, "--j", 5,
               "--predicate", "fo>1", "--out", tmp_path / "s2.json")
    assert code == 1 and "MasterMismatch" in capsys.readouterr().err


def test_exhaustive_mass_equals_truth(tmp_path, nodes_csv, capsys):
    m, s = tmp_path / "m.csv", tmp_path / "s.json"
    run("build", "--input", nodes_csv, "--weight", "feature:ac", "--seed", 4, "--out", m)
    assert run("sample", "--master", m, "--input", nodes_csv, "--k", 400, "--out", s) == 0
    capsys.readouterr()
    assert run("estimate", "--sample", s, "--mass", "fo", "--by", "fr", "--format", "rows") == 0
    est = capsys.readouterr().out
    assert run("truth", "--input", nodes_csv, "--mass", "fo", "--by", "fr", "--format", "rows") == 0
    truth = capsys.readouterr().out
    expect = format_estimate(true_mass(read_records(nodes_csv), "fo", "fr"), 0.0, "rows")
    assert truth == expect
    # identical curves, up to the last bit of the float sums
    for a, b in zip(est.splitlines()[1:], truth.splitlines()[1:], strict=True):
        assert [float(v) for v in a.split("\t")] == pytest.approx([float(v) for v in b.split("\t")], abs=1e-12)


def test_qq_and_cdf(tmp_path, nodes_csv, capsys):
    m, s = tmp_path / "m.csv", tmp_path / "s.json"
    run("build", "--input", nodes_csv, "--weight", "feature:fo", "--seed", 4, "--out", m)
    run("sample", "--master", m, "--input", nodes_csv, "--k", 50, "--out", s)
    capsys.readouterr()
    assert run("qq", "--input", nodes_csv, "--sample", s, "--mass", "fo", "--by", "fo") == 0
    pts = [tuple(map(float, l.split())) for l in capsys.readouterr().out.splitlines()]
    assert pts and all(0 <= a <= 1 and 0 <= b <= 1 for a, b in pts)
    assert run("estimate", "--sample", s, "--cdf", "fr") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["columns"] == ["y", "q"] and doc["points"][-1][1] == 1.0


def test_eval_table(tmp_path, nodes_csv, capsys):
    assert run("eval", "--input", nodes_csv, "--seed", 0, "--runs", 3, "--k", 50,
               "--weights", "uniform,feature:fo", "--targets", "fo,fr:fo", "--raw-out", tmp_path / "raw.csv") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["w", "X'", "X=fo", "X=fr"]
    # both targets share X'=fo, so one row per weighting
    assert [l.split()[:2] for l in lines[1:-1]] == [["uni", "fo"], ["fo", "fo"]]
    assert lines[-1] == "# median KS over 3 runs"
    raw = (tmp_path / "raw.csv").read_text().splitlines()
    assert raw[0] == "w,X,X',run,ks" and len(raw) == 1 + 2 * 2 * 3


def test_eval_links(tmp_path, nodes_csv, capsys):
    assert run("eval", "--input", tmp_path / "links.csv", "--seed", 0, "--runs", 2, "--k", 30,
               "--format", "rows") == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "w,X,X',median_ks,runs" and len(rows) == 1 + 4 * 3
    assert {r.split(",")[0] for r in rows[1:]} == {"uniform", "feature:fo1", "feature:fo2", "ratio:fo2/fo1"}


def test_inputs_not_mutated(tmp_path, nodes_csv):
    before = nodes_csv.read_bytes()
    m, s = tmp_path / "m.csv", tmp_path / "s.json"
    run("build", "--input", nodes_csv, "--weight", "uniform", "--seed", 1, "--out", m)
    master_bytes = m.read_bytes()
    run("sample", "--master", m, "--input", nodes_csv, "--k", 5, "--out", s)
    sample_bytes = s.read_bytes()
    run("extend", "--master", m, "--input", nodes_csv, "--sample", s, "--j", 5, "--out", tmp_path / "s2.json")
    run("estimate", "--sample", s, "--sum", "fo", "--out", tmp_path / "e.json")
    assert nodes_csv.read_bytes() == before
    assert m.read_bytes() == master_bytes and s.read_bytes() == sample_bytes


def test_bad_predicate_reports_error(tmp_path, nodes_csv, capsys):
    m = tmp_path / "m.csv"
    run("build", "--input", nodes_csv, "--weight", "uniform", "--seed", 1, "--out", m)
    code = run("sample", "--master", m, "--input", nodes_csv, "--predicate", "fo>>", "--k", 5, "--out", tmp_path / "s")
    err = capsys.readouterr().err
    assert code == 1 and err.startswith("error: ParseError") and err.count("\n") == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "prisample", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "synth" in proc.stdout
