from __future__ import annotations

import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import hex_of, random_point
from hexsphere.geodesics import (
    SurfacePoint,
    annulus,
    distance_matrix,
    save_path,
    unfold_distance,
    vertex_point,
    voronoi_bisector,
    voronoi_cell_polygon,
)
from hexsphere.geometry import LabeledPolygon, polygon_area
from hexsphere.oracle import graph_distance
from hexsphere.special import build_special, classify_special, similar
from hexsphere.surface import double_polygon

PI = math.pi


def test_same_face_distance_is_planar():
    M = hex_of(4, 1.0, 0.8)
    x, y = SurfacePoint(0, 0.3, 0.2), SurfacePoint(0, 0.35, 0.25)
    d, path = unfold_distance(M, x, y)
    assert d == pytest.approx(math.hypot(0.05, 0.05), abs=1e-12)
    assert path.crossings == ()


def test_double_equilateral_triangle_cone_distance():
    Q = LabeledPolygon(((0, 0), (1, 0), (0.5, math.sqrt(3) / 2)))
    M = double_polygon(Q)
    D = distance_matrix(M, ("c", "d", "e"))
    for x, y in (("c", "d"), ("c", "e"), ("d", "e")):
        assert D(x, y) == pytest.approx(1.0, abs=1e-12)


def test_distance_matrix_shape(stratum_sample):
    n, _, _, M = stratum_sample
    A = distance_matrix(M).as_array()
    assert (A == A.T).all()
    assert (A.diagonal() == 0).all()
    off = A[~(A == 0)]
    assert (off > 0).all() and off.size == 12
    for i in range(4):
        for j in range(4):
            for k in range(4):
                assert A[i, k] <= A[i, j] + A[j, k] + 1e-6


def test_stratum_two_equidistance():
    for alpha in (0.1, 0.4, PI / 6, 0.9):
        D = distance_matrix(hex_of(2, 0.0, alpha))
        assert abs(D("a", "c") - D("b", "c")) < 1e-9


def test_parallelogram_double_matches_oracle():
    s, t = 1.0, 1.4
    u = (0.5 * t, 0.5 * math.sqrt(3) * t)
    M = double_polygon(LabeledPolygon(((0, 0), (s, 0), (s + u[0], u[1]), u)))
    D = distance_matrix(M)
    ref = graph_distance(M, vertex_point(M, "a"), vertex_point(M, "b"))
    assert D("a", "b") <= ref + 1e-9
    assert D("a", "b") >= ref * (1 - 1e-3)


def test_engine_against_oracle_few_pairs():
    rng = random.Random(3)
    M = hex_of(4, 1.0, 0.8)
    for _ in range(5):
        x, y = random_point(M, rng), random_point(M, rng)
        d, _ = unfold_distance(M, x, y)
        ref = graph_distance(M, x, y)
        assert d <= ref + 1e-9
        assert d >= ref * (1 - 1e-3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_distance_symmetry(seed):
    rng = random.Random(seed)
    M = hex_of(3, 1.0, 1.0 - PI / 6)
    x, y = random_point(M, rng), random_point(M, rng)
    assert unfold_distance(M, x, y)[0] == pytest.approx(unfold_distance(M, y, x)[0], abs=1e-9)


def test_path_json(tmp_path):
    M = hex_of(4, 1.0, 0.8)
    d, path = unfold_distance(M, vertex_point(M, "a"), vertex_point(M, "c"))
    assert path.length == pytest.approx(d)
    save_path(path, tmp_path / "g.json")
    doc = json.loads((tmp_path / "g.json").read_text())
    assert doc["length"] == path.length and doc["crossings"] == [list(c) for c in path.crossings]


def test_bisector_zero_samples():
    assert voronoi_bisector(hex_of(4, 1.0, 0.8), 0) == []


def test_bisector_lies_on_seam_graph(stratum_sample):
    _, _, _, M = stratum_sample
    pts = voronoi_bisector(M, 40, seed=1)
    assert len(pts) == 40
    assert all(abs(s.gap) < 1e-6 for s in pts)
    assert max(s.seam_distance for s in pts) < 1e-6
    assert all(s.seam is not None and s.seam not in M.cut_seams for s in pts)


def test_parallelogram_bisector_on_doubled_segments():
    s, t = 1.0, 1.4
    u = (0.5 * t, 0.5 * math.sqrt(3) * t)
    Q = LabeledPolygon(((0, 0), (s, 0), (s + u[0], u[1]), u))
    M = double_polygon(Q)
    A, B = vertex_point(M, "a"), vertex_point(M, "b")
    for smp in voronoi_bisector(M, 12, seed=2):
        p = smp.point
        da = graph_distance(M, p, A, m=32, n_routes=8)
        db = graph_distance(M, p, B, m=32, n_routes=8)
        assert abs(da - db) < 1e-3


@pytest.mark.parametrize(
    "n,phi,alpha", [(2, 0.0, 0.3), (2, 0.0, 0.9), (3, 0.8, 0.8 - PI / 6), (3, 1.8, 1.8 - PI / 6), (4, 1.0, 0.8), (4, 0.4, 1.2)]
)
def test_voronoi_cell_round_trip(n, phi, alpha):
    P = build_special(n, phi, alpha)
    M = hex_of(n, phi, alpha)
    Q = voronoi_cell_polygon(M, "a")
    got = classify_special(Q)
    assert got[0] == n
    assert got[1] == pytest.approx(phi, abs=1e-5) and got[2] == pytest.approx(alpha, abs=1e-5)
    assert polygon_area(Q.shape) == pytest.approx(M.area / 2, rel=1e-6)
    assert similar(Q, voronoi_cell_polygon(M, "b"), 1e-6)
    assert similar(Q, P, 1e-6)


def test_annulus_report(stratum_sample):
    _, _, _, M = stratum_sample
    rep = annulus(M)
    assert rep.embedded and rep.width > 0
    assert rep.clearance >= rep.width / 2 - 1e-9
    assert abs(rep.rotation) < 1e-9
    assert rep.core.length == pytest.approx(rep.length)
