"""Construction and classification of 2-, 3- and 4-special polygons.

A special polygon has one reflex vertex ``a`` with corner angle 4*pi/3.  All
three families are built as a fan of triangles around ``a`` placed at the
origin, with the first boundary vertex ``c'`` on the positive x-axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConstructionInconsistent, DegeneratePolygon, InvalidParams, NotSpecial
from .geometry import (
    DEFAULT_TOL,
    LabeledPolygon,
    PlanarPoint,
    corner_angle,
    cross,
    dist,
    polygon_area,
)

PI = math.pi
A_ANGLE = 4.0 * PI / 3.0

LABELS = {
    2: ("a", "c'", "d", "c''"),
    3: ("a", "c'", "e'", "e''", "c''"),
    4: ("a", "c'", "e'", "f'", "e''", "c''"),
}


@dataclass(frozen=True)
class SpecialPolygon:
    shape: LabeledPolygon
    n: int
    phi: float
    alpha: float
    beta: float
    R: float

    @property
    def params(self) -> tuple[int, float, float, float]:
        return (self.n, self.phi, self.alpha, self.beta)

    def vertex(self, label: str) -> PlanarPoint:
        return self.shape.vertices[self.shape.index(label)]


def beta_of(n: int, phi: float, alpha: float) -> float:
    if n == 3:
        return alpha
    return phi + PI / 3.0 - alpha


def param_violation(n: int, phi: float, alpha: float, tol: float = DEFAULT_TOL.tol_geom) -> str | None:
    """Name of the first violated parameter inequality, or None if valid."""
    try:
        n = int(n)
        phi = float(phi)
        alpha = float(alpha)
    except (TypeError, ValueError):
        return "parameters must be numbers"
    if not (math.isfinite(phi) and math.isfinite(alpha)):
        return "parameters must be finite"
    # strict inequalities hold with margin tol, so near-boundary input counts as the boundary
    if n == 4:
        if not tol < phi < 2.0 * PI / 3.0 - tol:
            return "n=4 requires 0 < phi < 2*pi/3"
        if not tol < alpha < PI / 2.0 - tol:
            return "n=4 requires 0 < alpha < pi/2"
        if not phi - PI / 6.0 + tol < alpha:
            return "n=4 requires alpha > phi - pi/6"
        if not alpha < phi + PI / 3.0 - tol:
            return "n=4 requires alpha < phi + pi/3"
        return None
    if n == 3:
        if not PI / 6.0 + tol < phi < 2.0 * PI / 3.0 - tol:
            return "n=3 requires pi/6 < phi < 2*pi/3"
        if abs(alpha - (phi - PI / 6.0)) > tol:
            return "n=3 requires alpha = phi - pi/6"
        return None
    if n == 2:
        if abs(phi) > tol:
            return "n=2 requires phi = 0"
        if not tol < alpha < PI / 3.0 - tol:
            return "n=2 requires 0 < alpha < pi/3"
        return None
    return f"n must be 2, 3 or 4, got {n}"


def validate_params(n: int, phi: float, alpha: float, tol: float = DEFAULT_TOL.tol_geom) -> bool:
    return param_violation(n, phi, alpha, tol) is None


def _sub_angles(n: int, phi: float, alpha: float, beta: float) -> list[float]:
    if n == 2:
        return [PI - 2.0 * alpha, PI - 2.0 * beta]
    if n == 3:
        return [phi, PI - 2.0 * alpha, phi]
    return [phi, PI - 2.0 * alpha, PI - 2.0 * beta, phi]


def c_radius(phi: float, R: float) -> float:
    """|ac'| from the law of sines in the triangle a c' e' with angles (phi, pi/3, 2pi/3 - phi)."""
    return R * math.sin(2.0 * PI / 3.0 - phi) / math.sin(PI / 3.0)


def build_special(
    n: int, phi: float, alpha: float, R: float = 1.0, tol: float = DEFAULT_TOL.tol_geom
) -> SpecialPolygon:
    bad = param_violation(n, phi, alpha, tol)
    if bad is not None:
        raise InvalidParams(bad)
    if not (math.isfinite(R) and R > 0.0):
        raise InvalidParams(f"R must be positive, got {R}")
    n = int(n)
    if n == 2:
        phi = 0.0
    if n == 3:
        alpha = phi - PI / 6.0
    beta = beta_of(n, phi, alpha)
    subs = _sub_angles(n, phi, alpha, beta)
    if n == 2:
        radii = [R] * 3
    else:
        rc = c_radius(phi, R)
        radii = [rc] + [R] * (n - 1) + [rc]
    angles = [0.0]
    for s in subs:
        angles.append(angles[-1] + s)
    verts = [PlanarPoint(0.0, 0.0)]
    verts += [PlanarPoint(r * math.cos(t), r * math.sin(t)) for r, t in zip(radii, angles)]
    try:
        shape = LabeledPolygon(tuple(verts), LABELS[n], tol)
    except DegeneratePolygon as exc:
        # only reachable when the parameters sit within rounding of an excluded boundary
        raise InvalidParams(f"parameters too close to the boundary of their range: {exc}") from exc
    P = SpecialPolygon(shape, n, phi, alpha, beta, R)
    scale_tol = tol * max(1.0, R)
    problem = _def_violation(shape, n, tol, scale_tol)
    if problem is not None:
        raise ConstructionInconsistent(f"built polygon fails: {problem}")
    got = _angles_of(shape, n)
    if abs(got[0] - phi) > tol or abs(got[1] - alpha) > tol or abs(got[2] - beta) > tol:
        raise ConstructionInconsistent(f"angle bookkeeping mismatch: built {got}, asked {(phi, alpha, beta)}")
    return P


def _angle_at(p, q, r) -> float:
    """Unsigned angle at q in the triangle p q r."""
    ux, uy = p[0] - q[0], p[1] - q[1]
    wx, wy = r[0] - q[0], r[1] - q[1]
    return abs(math.atan2(cross(ux, uy, wx, wy), ux * wx + uy * wy))


def _def_violation(P: LabeledPolygon, n: int, tol: float, len_tol: float) -> str | None:
    """Check the defining conditions on a polygon already rolled so that a is vertex 0."""
    V = P.vertices
    a = V[0]
    angs = [corner_angle(P, i) for i in range(len(V))]
    if abs(angs[0] - A_ANGLE) > tol:
        return f"corner angle at a is {angs[0]!r}, not 4*pi/3"
    for i in range(1, len(V)):
        if angs[i] >= PI - tol:
            return f"corner angle at vertex {i} is not less than pi"
    if n == 2:
        r = [dist(a, V[i]) for i in (1, 2, 3)]
        if max(r) - min(r) > len_tol:
            return "vertices other than a are not equidistant from a"
        if abs(angs[2] - PI / 3.0) > tol:
            return "corner angle at d is not pi/3"
        return None
    c1, e1, e2, c2 = V[1], V[2], V[-2], V[-1]
    if abs(angs[1] - PI / 3.0) > tol or abs(angs[-1] - PI / 3.0) > tol:
        return "corner angles at c', c'' are not pi/3"
    if abs(dist(a, c1) - dist(a, c2)) > len_tol:
        return "|ac'| differs from |ac''|"
    u = (e1[0] - c1[0], e1[1] - c1[1])
    w = (e2[0] - c2[0], e2[1] - c2[1])
    lu, lw = math.hypot(*u), math.hypot(*w)
    if abs(lu - lw) > len_tol:
        return "sides c'e' and c''e'' have different lengths"
    if abs(cross(u[0], u[1], w[0], w[1])) > len_tol * max(lu, 1.0) or u[0] * w[0] + u[1] * w[1] <= 0.0:
        return "sides c'e' and c''e'' are not parallel"
    if n == 3:
        if abs(angs[2] - PI / 2.0) > tol or abs(angs[3] - PI / 2.0) > tol:
            return "corner angles at e', e'' are not pi/2"
        return None
    r = [dist(a, V[i]) for i in (2, 3, 4)]
    if max(r) - min(r) > len_tol:
        return "vertices e', f', e'' are not equidistant from a"
    return None


def _angles_of(P: LabeledPolygon, n: int) -> tuple[float, float, float]:
    V = P.vertices
    a = V[0]
    if n == 2:
        return (0.0, _angle_at(a, V[1], V[2]), _angle_at(a, V[3], V[2]))
    phi = _angle_at(V[1], a, V[2])
    if n == 3:
        return (phi, _angle_at(a, V[2], V[3]), _angle_at(a, V[3], V[2]))
    return (phi, _angle_at(a, V[2], V[3]), _angle_at(a, V[4], V[3]))


def _locate_a(P: LabeledPolygon, tol: float) -> int:
    reflex = [i for i in range(len(P.vertices)) if corner_angle(P, i) > PI + tol]
    if len(reflex) != 1:
        raise NotSpecial(f"expected exactly one reflex vertex, found {len(reflex)}")
    return reflex[0]


def as_special(P: LabeledPolygon, tol: float = DEFAULT_TOL.tol_geom) -> SpecialPolygon:
    """Relabel P by counterclockwise traversal from its reflex vertex and classify it."""
    V = len(P.vertices)
    if V not in (4, 5, 6):
        raise NotSpecial(f"a special polygon has 4, 5 or 6 vertices, got {V}")
    n = V - 2
    k = _locate_a(P, tol)
    Q = P.rolled(k).relabeled(LABELS[n])
    size = max(dist(Q.vertices[0], v) for v in Q.vertices)
    problem = _def_violation(Q, n, tol, tol * max(1.0, size))
    if problem is not None:
        raise NotSpecial(problem)
    phi, alpha, beta = _angles_of(Q, n)
    if n in (2, 4) and abs(alpha + beta - phi - PI / 3.0) > 4 * tol:
        raise NotSpecial("alpha + beta differs from phi + pi/3")
    if n == 3 and (abs(alpha - beta) > 4 * tol or abs(alpha - phi + PI / 6.0) > 4 * tol):
        raise NotSpecial("alpha, beta differ from phi - pi/6")
    a = Q.vertices[0]
    R = dist(a, Q.vertices[1]) if n == 2 else dist(a, Q.vertices[2])
    return SpecialPolygon(Q, n, phi, alpha, beta, R)


def classify_special(
    P: LabeledPolygon | SpecialPolygon, tol: float = DEFAULT_TOL.tol_geom
) -> tuple[int, float, float, float]:
    """(n, phi, alpha, beta) of a polygon, re-derived from its vertices."""
    if isinstance(P, SpecialPolygon):
        P = P.shape
    return as_special(P, tol).params


def normalize_unit_area(P: SpecialPolygon, target: float = 1.0) -> SpecialPolygon:
    if not (math.isfinite(target) and target > 0.0):
        raise DegeneratePolygon(f"target area must be positive, got {target}")
    k = math.sqrt(target / polygon_area(P.shape))
    a = P.shape.vertices[0]
    verts = tuple(PlanarPoint(k * (v.x - a.x), k * (v.y - a.y)) for v in P.shape.vertices)
    shape = LabeledPolygon(verts, P.shape.labels, P.shape.tol_geom)
    return SpecialPolygon(shape, P.n, P.phi, P.alpha, P.beta, k * P.R)


def similar(P: SpecialPolygon, Q: SpecialPolygon, tol: float = DEFAULT_TOL.tol_geom) -> bool:
    return P.n == Q.n and abs(P.phi - Q.phi) <= tol and abs(P.alpha - Q.alpha) <= tol


def special_to_dict(P: SpecialPolygon) -> dict:
    return {
        "n": P.n,
        "phi": P.phi,
        "alpha": P.alpha,
        "R": P.R,
        "labels": list(P.shape.labels),
        "vertices": [[v.x, v.y] for v in P.shape.vertices],
    }


def special_from_dict(doc: dict, tol: float = DEFAULT_TOL.tol_geom) -> SpecialPolygon:
    try:
        n = int(doc["n"])
        phi = float(doc["phi"])
        alpha = float(doc["alpha"])
        R = float(doc["R"])
        labels = tuple(str(s) for s in doc["labels"])
        verts = tuple((float(x), float(y)) for x, y in doc["vertices"])
    except (KeyError, TypeError, ValueError) as exc:
        raise NotSpecial(f"malformed polygon document: {exc}") from exc
    shape = LabeledPolygon(verts, labels, tol)
    P = as_special(shape, tol)
    if P.shape.labels != labels:
        raise NotSpecial("labels do not follow counterclockwise order from a")
    len_tol = tol * max(1.0, R)
    if P.n != n or abs(P.phi - phi) > tol or abs(P.alpha - alpha) > tol or abs(P.R - R) > len_tol:
        raise NotSpecial("stored parameters disagree with the vertex coordinates")
    return SpecialPolygon(shape, n, phi, alpha, beta_of(n, phi, alpha), R)


def save_special(P: SpecialPolygon, path: str | Path) -> None:
    Path(path).write_text(json.dumps(special_to_dict(P), indent=2) + "\n")


def load_special(path: str | Path, tol: float = DEFAULT_TOL.tol_geom) -> SpecialPolygon:
    return special_from_dict(json.loads(Path(path).read_text()), tol)
