import json

import pytest

from magicsimplex import cli
from magicsimplex import pipeline as pl


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_unknown_subcommand(capsys):
    code, _, err = run(capsys, "bogus")
    assert code == 2 and "usage" in err


def test_no_subcommand(capsys):
    assert run(capsys)[0] == 2


def test_dry_run_counts(capsys):
    code, out, _ = run(capsys, "grid-classify", "--delta", "1/6", "--dry-run")
    assert code == 0
    assert "candidates 6561" in out and "in-polytope 1554" in out


@pytest.mark.parametrize("delta", ["1/7", "abc", "0", "-1/3"])
def test_bad_delta(capsys, delta):
    assert run(capsys, "grid-classify", "--delta", delta, "--dry-run")[0] == 2


def test_basis_dump(capsys, tmp_path):
    out = tmp_path / "basis.json"
    assert run(capsys, "basis-dump", "--out", str(out))[0] == 0
    d = json.loads(out.read_text())
    assert len(d["bell_projectors"]) == 9 and d["header"]["version"]


def test_geometry(capsys):
    code, out, _ = run(capsys, "geometry", "lines")
    assert code == 0 and out.count("\nL") == 12
    code, out, _ = run(capsys, "geometry", "vertices")
    assert out.count(",kernel,") == 12 and out.count(",enclosure,") == 72


def test_grid_classify_byte_deterministic(capsys, tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    common = ["grid-classify", "--delta", "1/9", "--checkpoint-every", "500"]
    assert run(capsys, *common, "--out", str(a), "--workers", "1")[0] == 0
    b_args = [*common, "--out", str(a), "--workers", "2"]
    # same output path so the echoed config matches; move the first result away
    a.rename(b)
    assert run(capsys, *b_args)[0] == 0
    a.rename(c)
    assert b.read_bytes() == c.read_bytes()
    ds = pl.dataset_read(c)
    assert ds.header["run"]["delta"] == "1/9"
    assert not (tmp_path / "a.csv.ckpt").exists()


def test_stats_and_pca(capsys, tmp_path):
    ds = tmp_path / "g.csv"
    run(capsys, "grid-classify", "--delta", "1/6", "--out", str(ds), "--workers", "1")
    code, out, _ = run(capsys, "stats", "--in", str(ds))
    assert code == 0 and "polytope" in out and "simplex" in out
    proj = tmp_path / "p.csv"
    code, out, _ = run(capsys, "pca", "--in", str(ds), "--subset", "SEP", "--out", str(proj))
    assert code == 0 and "unique-2d" in out
    text = proj.read_text()
    assert text.startswith("# ")
    assert text.count("\nkernel,") == 12 and text.count("\nbell,") == 9 and text.count("\nvertex,") == 72
    code, out, _ = run(capsys, "pca", "--in", str(ds), "--subset", "BOUND")
    assert code == 3  # empty subset


def test_knn_and_scenarios(capsys, tmp_path):
    ds = tmp_path / "g.csv"
    run(capsys, "grid-classify", "--delta", "1/9", "--out", str(ds), "--workers", "1")
    code, out, _ = run(capsys, "knn", "--in", str(ds), "--k", "3")
    assert code == 0 and "accuracy" in out
    code, out, _ = run(capsys, "knn", "--in", str(ds), "--coeffs", ",".join(["1/9"] * 9))
    assert code == 0 and out.strip() in {"FREE", "BOUND", "SEP", "UNKNOWN"}
    code, out, _ = run(capsys, "scenarios", "--in", str(ds), "--k", "3")
    assert code == 0 and "UNKNOWN->BOUND" in out
    assert run(capsys, "knn", "--in", str(ds), "--k", "4")[0] == 2


def test_mine_and_witness_commands(capsys, tmp_path):
    ds = tmp_path / "g.csv"
    store = tmp_path / "ws.jsonl"
    run(capsys, "grid-classify", "--delta", "1/9", "--out", str(ds), "--workers", "1")
    code, out, _ = run(capsys, "mine", "--in", str(ds), "--out", str(tmp_path / "m.csv"), "--budget", "3",
                       "--seed", "1", "--restarts", "10", "--store", str(store))
    assert code == 0 and "drawn 3" in out
    hdr = pl.read_header(tmp_path / "m.csv")
    assert hdr["mining"]["budget"] == 3 and hdr["mine_run"]["run"]["seed"] == 1
    code, out, _ = run(capsys, "witness-gen", "--store", str(store), "--count", "2", "--restarts", "10")
    assert code == 0 and out.count("witness") == 2
    code, out, _ = run(capsys, "witness-apply", "--store", str(store), "--coeffs", ",".join(["1/9"] * 9))
    assert code == 0 and "entangled" not in out.replace("inconclusive", "")
    code, out, _ = run(capsys, "witness-apply", "--store", str(store), "--in", str(ds), "--out", str(tmp_path / "w.csv"))
    assert code == 0 and "relabeled" in out


def test_data_errors(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("garbage\n")
    assert run(capsys, "stats", "--in", str(bad))[0] == 3
    assert run(capsys, "stats", "--in", str(tmp_path / "missing.csv"))[0] == 3
    store = tmp_path / "s.jsonl"
    store.write_text("{broken\n")
    code, _, err = run(capsys, "witness-apply", "--store", str(store), "--coeffs", ",".join(["1/9"] * 9))
    assert code == 3 and ":1:" in err


def test_bad_coeffs(capsys):
    assert run(capsys, "extremal", "--x", "1/2")[0] == 2
    code, _, _ = run(capsys, "witness-apply", "--store", "x", "--coeffs", "1,0")
    assert code == 2


def test_extremal(capsys):
    code, out, _ = run(capsys, "extremal", "--x", "1/18")
    assert code == 0
    assert "ppt True" in out and "label BOUND" in out and "violation 0.0555555" in out


def test_repro_witnesses(capsys):
    code, out, _ = run(capsys, "repro", "witnesses")
    assert code == 0 and out.count("PASS") == 2


def test_family_scan_b1(capsys, tmp_path):
    out_path = tmp_path / "b1.csv"
    code, out, _ = run(capsys, "family-scan", "--family", "B1", "--delta", "1/25", "--out", str(out_path))
    assert code == 0
    hdr = pl.read_header(out_path)
    assert hdr["family"] == "B1" and "ranges" in hdr
