from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexsphere.errors import InvalidParams, NotSpecial
from hexsphere.geometry import LabeledPolygon, corner_angle, dist, polygon_area
from hexsphere.special import (
    LABELS,
    build_special,
    c_radius,
    classify_special,
    load_special,
    normalize_unit_area,
    save_special,
    similar,
    validate_params,
)

PI = math.pi


def valid_grid(n: int, N: int):
    if n == 2:
        return [(0.0, (PI / 3) * j / N) for j in range(1, N)]
    if n == 3:
        return [(phi, phi - PI / 6) for phi in (PI / 6 + (PI / 2) * i / N for i in range(1, N))]
    pts = []
    for i in range(1, N):
        for j in range(1, N):
            phi, alpha = (2 * PI / 3) * i / N, (PI / 2) * j / N
            if validate_params(4, phi, alpha):
                pts.append((phi, alpha))
    return pts


four_special = st.tuples(st.floats(0.01, 2 * PI / 3 - 0.01), st.floats(0.0, 1.0)).map(
    lambda u: (u[0], max(u[0] - PI / 6, 0.0) + 0.005 + u[1] * (min(u[0] + PI / 3, PI / 2) - max(u[0] - PI / 6, 0.0) - 0.01))
)


def test_validate_params_examples():
    assert validate_params(4, PI / 3, PI / 3)
    assert not validate_params(3, PI / 6, 0.0)
    assert not validate_params(2, 0.0, PI / 3)
    assert validate_params(2, 0.0, PI / 6)
    assert not validate_params(4, 0.0, 0.3)
    assert not validate_params(5, 1.0, 1.0)


def test_build_rejects_invalid():
    with pytest.raises(InvalidParams):
        build_special(3, 0.5, 0.1)
    with pytest.raises(InvalidParams):
        build_special(4, 1.0, 0.8, R=-1.0)


def test_two_special_base_length():
    P = build_special(2, 0.0, PI / 6, 1.0)
    assert dist(P.vertex("c'"), P.vertex("d")) == pytest.approx(math.sqrt(3), abs=1e-9)
    assert dist(P.vertex("c'"), P.vertex("d")) == pytest.approx(2 * math.cos(PI / 6), abs=1e-12)
    assert corner_angle(P.shape, P.shape.index("d")) == pytest.approx(PI / 3, abs=1e-9)


def test_four_special_law_of_sines_radius():
    P = build_special(4, PI / 3, PI / 3, 1.0)
    a = P.vertex("a")
    assert dist(a, P.vertex("c'")) == pytest.approx(1.0, abs=1e-9)
    assert c_radius(PI / 3, 1.0) == pytest.approx(math.sin(PI / 3) / math.sin(PI / 3))
    u = np.subtract(P.vertex("e'"), P.vertex("c'"))
    v = np.subtract(P.vertex("e''"), P.vertex("c''"))
    u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
    assert abs(abs(float(u @ v)) - 1.0) < 1e-9


@pytest.mark.parametrize("n", [2, 3, 4])
def test_labels_and_corner_conditions(n):
    phi, alpha = {2: (0.0, 0.5), 3: (1.2, 1.2 - PI / 6), 4: (1.0, 0.9)}[n]
    P = build_special(n, phi, alpha, 2.0)
    assert P.shape.labels == LABELS[n]
    angles = [corner_angle(P.shape, i) for i in range(len(P.shape))]
    assert angles[0] == pytest.approx(4 * PI / 3, abs=1e-9)
    assert all(t < PI for t in angles[1:])
    assert math.fsum(angles) == pytest.approx((len(angles) - 2) * PI, abs=1e-9)
    if n == 3:
        for lab in ("c'", "c''"):
            assert corner_angle(P.shape, P.shape.index(lab)) == pytest.approx(PI / 3, abs=1e-9)
        for lab in ("e'", "e''"):
            assert corner_angle(P.shape, P.shape.index(lab)) == pytest.approx(PI / 2, abs=1e-9)


def test_three_special_returns_alpha_phi_minus_pi_over_six():
    n, phi, alpha, beta = classify_special(build_special(3, 1.1, 1.1 - PI / 6))
    assert n == 3 and alpha == pytest.approx(phi - PI / 6, abs=1e-9) and beta == pytest.approx(alpha, abs=1e-9)


def test_unit_square_not_special():
    with pytest.raises(NotSpecial):
        classify_special(LabeledPolygon(((0, 0), (1, 0), (1, 1), (0, 1))))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_round_trip_grid(n):
    pts = valid_grid(n, 40)
    assert pts
    worst = 0.0
    for phi, alpha in pts:
        got = classify_special(build_special(n, phi, alpha))
        assert got[0] == n
        worst = max(worst, abs(got[1] - phi), abs(got[2] - alpha))
    assert worst < 1e-9


@settings(max_examples=80, deadline=None)
@given(four_special, st.floats(0.05, 20.0))
def test_four_special_invariants(pa, R):
    phi, alpha = pa
    P = build_special(4, phi, alpha, R)
    a = P.vertex("a")
    for lab in ("e'", "f'", "e''"):
        assert dist(a, P.vertex(lab)) == pytest.approx(R, rel=1e-9)
    assert dist(a, P.vertex("c'")) == pytest.approx(dist(a, P.vertex("c''")), rel=1e-9)
    assert dist(P.vertex("c'"), P.vertex("e'")) == pytest.approx(dist(P.vertex("c''"), P.vertex("e''")), rel=1e-9)
    assert P.alpha + P.beta - P.phi - PI / 3 == pytest.approx(0.0, abs=1e-9)
    n, phi2, alpha2, _ = classify_special(P)
    assert (n, phi2, alpha2) == (4, pytest.approx(phi, abs=1e-9), pytest.approx(alpha, abs=1e-9))


@settings(max_examples=40, deadline=None)
@given(four_special, st.floats(0.01, 100.0))
def test_normalize_unit_area(pa, target):
    P = build_special(4, *pa)
    Q = normalize_unit_area(P, target)
    assert polygon_area(Q.shape) == pytest.approx(target, rel=1e-9)
    assert Q.shape.vertices[0] == (0.0, 0.0)
    assert classify_special(Q)[1:3] == pytest.approx(classify_special(P)[1:3], abs=1e-9)


def test_normalize_to_current_area_is_identity():
    P = build_special(4, 1.0, 0.9)
    Q = normalize_unit_area(P, polygon_area(P.shape))
    assert np.allclose(Q.shape.vertices, P.shape.vertices, atol=1e-12)


def test_similar():
    P = build_special(4, 1.0, 0.8)
    moved = classify_special(P.shape.transformed(3.0, 1.0, (2.0, -1.0)))
    assert moved[1:3] == pytest.approx((1.0, 0.8), abs=1e-9)
    assert similar(P, build_special(4, 1.0, 0.8, 5.0))
    assert not similar(P, build_special(4, 1.0, 0.9))
    assert not similar(build_special(2, 0.0, 0.5), build_special(3, 1.0, 1.0 - PI / 6))


def test_json_round_trip(tmp_path):
    P = build_special(4, 1.0, 0.8, 1.5)
    path = tmp_path / "p.json"
    save_special(P, path)
    Q = load_special(path)
    assert Q.shape.vertices == P.shape.vertices and Q.params == P.params
    save_special(Q, tmp_path / "q.json")
    assert (tmp_path / "q.json").read_bytes() == path.read_bytes()
