from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexsphere.errors import DegeneratePolygon
from hexsphere.geometry import (
    LabeledPolygon,
    TolerancePolicy,
    corner_angle,
    corner_angles,
    line_intersection,
    polygon_area,
    wrap_angle,
)
from hexsphere.special import build_special

SQUARE = LabeledPolygon(((0, 0), (1, 0), (1, 1), (0, 1)))


def shoelace(pts):
    return 0.5 * sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]))


def test_unit_square_area_and_angles():
    assert polygon_area(SQUARE) == pytest.approx(1.0, abs=1e-12)
    for i in range(4):
        assert corner_angle(SQUARE, i) == pytest.approx(math.pi / 2, abs=1e-12)


def test_symmetric_four_special_area_matches_fan_oracle():
    phi = alpha = math.pi / 3
    beta = phi + math.pi / 3 - alpha
    subs = [phi, math.pi - 2 * alpha, math.pi - 2 * beta, phi]
    rc = math.sin(2 * math.pi / 3 - phi) / math.sin(math.pi / 3)
    radii = [rc, 1.0, 1.0, 1.0, rc]
    # independent oracle: lay the fan out and take the shoelace area
    pts = [(0.0, 0.0)]
    theta = 0.0
    for k, r in enumerate(radii):
        pts.append((r * math.cos(theta), r * math.sin(theta)))
        if k < len(subs):
            theta += subs[k]
    if shoelace(pts) < 0:
        pts = pts[::-1]
    oracle = shoelace(pts)
    P = build_special(4, phi, alpha, 1.0)
    assert oracle == pytest.approx(math.sqrt(3), abs=1e-12)
    assert polygon_area(P.shape) == pytest.approx(oracle, abs=1e-9)


def test_reflex_corner_of_special_polygons():
    for n, phi, alpha in ((2, 0.0, 0.4), (3, 1.0, 1.0 - math.pi / 6), (4, 1.0, 0.8)):
        P = build_special(n, phi, alpha)
        assert corner_angle(P.shape, 0) == pytest.approx(4 * math.pi / 3, abs=1e-9)


def test_clockwise_polygon_rejected():
    with pytest.raises(DegeneratePolygon):
        LabeledPolygon(((0, 0), (0, 1), (1, 1), (1, 0)))


def test_self_intersecting_polygon_rejected():
    with pytest.raises(DegeneratePolygon):
        LabeledPolygon(((0, 0), (1, 1), (1, 0), (0, 1), (-1, 0.5)))


def test_repeated_vertex_rejected():
    with pytest.raises(DegeneratePolygon):
        LabeledPolygon(((0, 0), (0, 0), (1, 0), (0, 1)))


def test_non_finite_coordinate_rejected():
    with pytest.raises(DegeneratePolygon):
        LabeledPolygon(((0, 0), (1, math.nan), (0, 1)))


def test_tolerance_policy_ordering():
    TolerancePolicy(1e-9, 1e-6)
    for bad in ((1e-6, 1e-9), (0.0, 1e-6), (1e-9, 1.0)):
        with pytest.raises(ValueError):
            TolerancePolicy(*bad)


def test_line_intersection():
    x = line_intersection((0, 0), (1, 1), (1, 0), (0, 1))
    assert x[0] == pytest.approx(1.0) and x[1] == pytest.approx(1.0)


@given(st.floats(-50, 50, allow_nan=False))
def test_wrap_angle_range(theta):
    w = wrap_angle(theta)
    assert 0.0 <= w < 2 * math.pi
    assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-9)


convex_radii = st.lists(st.floats(0.3, 3.0), min_size=3, max_size=9)


@settings(max_examples=60, deadline=None)
@given(
    convex_radii,
    st.floats(0.1, 5.0),
    st.floats(-math.pi, math.pi),
    st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
)
def test_area_and_angles_under_similarity(radii, k, theta, shift):
    m = len(radii)
    # star-shaped about the origin with evenly spaced rays, hence simple
    pts = tuple((r * math.cos(2 * math.pi * i / m), r * math.sin(2 * math.pi * i / m)) for i, r in enumerate(radii))
    P = LabeledPolygon(pts)
    Q = P.transformed(k, theta, shift)
    assert polygon_area(Q) == pytest.approx(k * k * polygon_area(P), rel=1e-9)
    assert math.fsum(corner_angles(P)) == pytest.approx((m - 2) * math.pi, abs=1e-9)
    for a, b in zip(corner_angles(P), corner_angles(Q)):
        assert a == pytest.approx(b, abs=1e-9)
