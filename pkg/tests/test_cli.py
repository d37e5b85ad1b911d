from __future__ import annotations

import csv
import io
import json
import math

import pytest

from hexsphere.cli import main
from hexsphere.moduli import in_Y

PI = math.pi


@pytest.fixture
def files(tmp_path):
    def build(n, phi, alpha, name):
        path = tmp_path / name
        assert main(["build", "--n", str(n), "--phi", repr(phi), "--alpha", repr(alpha), "--out", str(path)]) == 0
        return path

    return tmp_path, build


def test_build_writes_polygon(files):
    tmp, build = files
    path = build(4, 1.0471976, 0.7853982, "p.json")
    assert json.loads(path.read_text())["n"] == 4


def test_build_rejects_bad_parameters(capsys):
    assert main(["build", "--n", "3", "--phi", "0.5", "--alpha", "0.1"]) == 2
    assert "n=3 requires" in capsys.readouterr().err
    assert main(["build", "--n", "3", "--phi", "1.0", "--alpha", "0.1"]) == 2
    assert "alpha = phi - pi/6" in capsys.readouterr().err
    # alpha just above pi/3
    assert main(["build", "--n", "2", "--phi", "0", "--alpha", "1.0471976"]) == 2


def test_build_in_degrees(files, capsys):
    assert main(["build", "--n", "4", "--phi", "60", "--alpha", "45", "--degrees"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["phi"] == pytest.approx(PI / 3) and doc["alpha"] == pytest.approx(PI / 4)


def test_bad_tolerances_exit_two():
    assert main(["build", "--n", "4", "--phi", "1", "--alpha", "0.8", "--tol-geom", "1e-3", "--tol-metric", "1e-6"]) == 2


def test_missing_input_is_io_error(tmp_path):
    assert main(["audit", "--in", str(tmp_path / "nope.json")]) == 1


def test_glue_audit_distances(files, capsys):
    tmp, build = files
    p = build(2, 0.0, 0.4, "p.json")
    hexf = tmp / "hex.json"
    assert main(["glue", "--in", str(p), "--out", str(hexf)]) == 0
    capsys.readouterr()
    assert main(["audit", "--in", str(hexf)]) == 0
    audit = json.loads(capsys.readouterr().out)
    assert audit["euler_characteristic"] == 2
    assert audit["gauss_bonnet_residual"] < 1e-9
    assert main(["distances", "--in", str(hexf)]) == 0
    D = json.loads(capsys.readouterr().out)
    assert D


def test_embed_exact_writes_obj(files):
    tmp, build = files
    p = build(2, 0.0, 0.4, "p.json")
    obj = tmp / "t.obj"
    assert main(["embed", "--in", str(p), "--method", "exact", "--obj", str(obj), "--out", str(tmp / "t.json")]) == 0
    lines = obj.read_text().splitlines()
    assert sum(l.startswith("f ") for l in lines) == 4
    assert sum(l.startswith("v ") for l in lines) == 4


def test_embed_flat_case_exits_three(files):
    tmp, build = files
    p = build(4, 1.0, 0.5 + PI / 6, "p.json")
    obj = tmp / "flat.obj"
    assert main(["embed", "--in", str(p), "--obj", str(obj), "--out", str(tmp / "t.json")]) == 3
    assert obj.exists()


def test_voronoi_roundtrip(files, capsys):
    tmp, build = files
    p = build(4, 1.0, 0.8, "p.json")
    assert main(["voronoi", "--in", str(p), "--roundtrip", "--out", str(tmp / "v.json")]) == 0
    err = capsys.readouterr().err
    assert "max angle deviation" in err
    dev = float(err.split(":")[-1])
    assert dev < 1e-5


def test_annulus_command(files, capsys):
    tmp, build = files
    p = build(3, 1.0, 1.0 - PI / 6, "p.json")
    assert main(["annulus", "--in", str(p)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["embedded"] and doc["width"] > 0


def test_twist_to_parallelogram(files, capsys):
    tmp, build = files
    p = build(2, 0.0, 0.3, "p.json")
    assert main(["twist", "--in", str(p), "--to-parallelogram", "--out", str(tmp / "tw.json")]) == 0
    err = capsys.readouterr().err
    assert err.startswith("t = ")
    defect = float(err.rsplit("=", 1)[1])
    assert abs(defect) < 1e-6


def test_export_svg(files):
    tmp, build = files
    p = build(4, 1.0, 0.8, "p.json")
    assert main(["export-svg", "--in", str(p), "--out", str(tmp / "p.svg")]) == 0
    hexf = tmp / "hex.json"
    main(["glue", "--in", str(p), "--out", str(hexf)])
    assert main(["export-svg", "--in", str(hexf), "--out", str(tmp / "z.svg")]) == 0
    assert (tmp / "z.svg").read_text().count("<polygon") == 2


def read_scan(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_scan(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["scan", "--grid", "8", "--out", str(out)]) == 0
    rows = read_scan(out)
    assert rows
    for r in rows:
        assert int(r["stratum"]) in (2, 3, 4)
        phi, alpha = float(r["phi"]), float(r["alpha"])
        # printed values are rounded, so the lower edge alpha = phi - pi/6 may be missed by ~1e-12
        assert in_Y(phi, max(alpha, phi - PI / 6))
        if r["stratum"] == "2":
            assert abs(float(r["d_ac"]) - float(r["d_bc"])) < 1e-6
    # twelve significant digits
    assert all(len(r["d_ab"].replace(".", "").lstrip("0")) <= 12 for r in rows)
    again = tmp_path / "t.csv"
    main(["scan", "--grid", "8", "--out", str(again)])
    assert again.read_bytes() == out.read_bytes()


def scan_columns(tmp_path):
    out = tmp_path / "s.csv"
    # N = 12 puts grid points on alpha = phi/2 + pi/6 whenever 3 divides i
    assert main(["scan", "--grid", "12", "--sheets", "+", "--out", str(out)]) == 0
    cols: dict[float, list] = {}
    for r in read_scan(out):
        if r["stratum"] == "4":
            cols.setdefault(float(r["phi"]), []).append({k: float(v) for k, v in r.items() if k != "sheet"})
    return cols


def on_locus(phi, col):
    return [r for r in col if abs(r["alpha"] - (phi / 2 + PI / 6)) < 1e-9]


def test_scan_parallelogram_rows_minimise_gap(tmp_path):
    checked = 0
    for phi, col in scan_columns(tmp_path).items():
        on = on_locus(phi, col)
        if not on or len(col) < 2:
            continue
        gap = lambda r: abs(r["d_ac"] - r["d_ad"])
        assert gap(on[0]) <= min(gap(r) for r in col) + 1e-9
        checked += 1
    assert checked >= 2


def test_scan_columns_symmetric_about_parallelogram_rows(tmp_path):
    checked = 0
    for phi, col in scan_columns(tmp_path).items():
        on = on_locus(phi, col)
        if not on:
            continue
        by_alpha = {round(r["alpha"], 9): r for r in col}
        for r in col:
            mirror = by_alpha.get(round(phi + PI / 3 - r["alpha"], 9))
            if mirror is not None:
                for k in ("d_ab", "d_ac", "d_ad", "d_cd"):
                    assert r[k] == pytest.approx(mirror[k], abs=1e-9)
        assert on[0]["d_ac"] <= min(r["d_ac"] for r in col) + 1e-9
        checked += 1
    assert checked >= 2


def test_identical_runs_are_byte_identical(files):
    tmp, build = files
    p = build(4, 1.0, 0.8, "p.json")
    for name in ("a.json", "b.json"):
        assert main(["voronoi", "--in", str(p), "--bisector", "5", "--out", str(tmp / name)]) == 0
    assert (tmp / "a.json").read_bytes() == (tmp / "b.json").read_bytes()
