"""Planar primitives and the package-wide tolerance policy.

Everything here is pure and immutable.  Polygons are stored counterclockwise;
loaders reject clockwise input instead of flipping it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import DegeneratePolygon

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TolerancePolicy:
    """Two absolute tolerances: algebraic identities and sampled metric checks."""

    tol_geom: float = 1e-9
    tol_metric: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.tol_geom < self.tol_metric < 1.0):
            raise ValueError(
                f"need 0 < tol_geom < tol_metric < 1, got {self.tol_geom}, {self.tol_metric}"
            )


DEFAULT_TOL = TolerancePolicy()


class PlanarPoint(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return PlanarPoint(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return PlanarPoint(self.x - other[0], self.y - other[1])

    def scaled(self, k: float) -> "PlanarPoint":
        return PlanarPoint(self.x * k, self.y * k)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


def as_point(p: Sequence[float]) -> PlanarPoint:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise DegeneratePolygon(f"non-finite coordinate {p!r}")
    return PlanarPoint(x, y)


def cross(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


def dist(p: Sequence[float], q: Sequence[float]) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def wrap_angle(theta: float) -> float:
    """Reduce an angle to [0, 2*pi)."""
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:
        t -= TWO_PI
    return t


def rotate(p: Sequence[float], theta: float, about: Sequence[float] = (0.0, 0.0)) -> PlanarPoint:
    c, s = math.cos(theta), math.sin(theta)
    x, y = p[0] - about[0], p[1] - about[1]
    return PlanarPoint(about[0] + c * x - s * y, about[1] + s * x + c * y)


def signed_area(vertices: Sequence[Sequence[float]]) -> float:
    n = len(vertices)
    acc = 0.0
    for i in range(n):
        x0, y0 = vertices[i][0], vertices[i][1]
        x1, y1 = vertices[(i + 1) % n][0], vertices[(i + 1) % n][1]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def _segments_cross(p1, p2, q1, q2, eps: float) -> bool:
    """Closed segment intersection test with an absolute slack."""

    def orient(a, b, c):
        return cross(b[0] - a[0], b[1] - a[1], c[0] - a[0], c[1] - a[1])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True

    def on_seg(a, b, c):
        return (
            abs(orient(a, b, c)) <= eps
            and min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps
            and min(a[1], b[1]) - eps <= c[1] <= max(a[1], b[1]) + eps
        )

    return on_seg(q1, q2, p1) or on_seg(q1, q2, p2) or on_seg(p1, p2, q1) or on_seg(p1, p2, q2)


def is_simple(vertices: Sequence[Sequence[float]], eps: float = 1e-12) -> bool:
    n = len(vertices)
    for i in range(n):
        a1, a2 = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b1, b2 = vertices[j], vertices[(j + 1) % n]
            if _segments_cross(a1, a2, b1, b2, eps):
                return False
    return True


@dataclass(frozen=True)
class LabeledPolygon:
    """A simple counterclockwise polygon whose vertices carry names."""

    vertices: tuple[PlanarPoint, ...]
    labels: tuple[str, ...] = field(default=())
    tol_geom: float = field(default=DEFAULT_TOL.tol_geom, compare=False, repr=False)

    def __post_init__(self):
        verts = tuple(as_point(v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        labels = tuple(self.labels) if self.labels else tuple(f"v{i}" for i in range(len(verts)))
        object.__setattr__(self, "labels", labels)
        n = len(verts)
        if n < 3:
            raise DegeneratePolygon(f"polygon needs at least 3 vertices, got {n}")
        if len(labels) != n:
            raise DegeneratePolygon(f"{n} vertices but {len(labels)} labels")
        for i in range(n):
            if dist(verts[i], verts[(i + 1) % n]) <= self.tol_geom:
                raise DegeneratePolygon(f"vertices {i} and {(i + 1) % n} coincide")
        area = signed_area(verts)
        if area <= self.tol_geom:
            if area < -self.tol_geom:
                raise DegeneratePolygon("polygon is clockwise; counterclockwise order is required")
            raise DegeneratePolygon(f"signed area {area} is not positive")
        if not is_simple(verts, eps=1e-12 * max(1.0, _diameter(verts))):
            raise DegeneratePolygon("polygon boundary self-intersects")

    def __len__(self) -> int:
        return len(self.vertices)

    def edge(self, i: int) -> tuple[PlanarPoint, PlanarPoint]:
        n = len(self.vertices)
        return self.vertices[i % n], self.vertices[(i + 1) % n]

    def edge_length(self, i: int) -> float:
        p, q = self.edge(i)
        return dist(p, q)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def transformed(self, scale: float = 1.0, theta: float = 0.0, shift=(0.0, 0.0)) -> "LabeledPolygon":
        """Apply x -> scale * R(theta) x + shift (an orientation-preserving similarity)."""
        c, s = math.cos(theta), math.sin(theta)
        verts = [
            (scale * (c * p.x - s * p.y) + shift[0], scale * (s * p.x + c * p.y) + shift[1])
            for p in self.vertices
        ]
        return LabeledPolygon(tuple(verts), self.labels, self.tol_geom)

    def relabeled(self, labels: Iterable[str]) -> "LabeledPolygon":
        return LabeledPolygon(self.vertices, tuple(labels), self.tol_geom)

    def rolled(self, k: int) -> "LabeledPolygon":
        """Same polygon with vertex k moved to position 0."""
        n = len(self.vertices)
        k %= n
        return LabeledPolygon(
            self.vertices[k:] + self.vertices[:k], self.labels[k:] + self.labels[:k], self.tol_geom
        )


def _diameter(verts) -> float:
    xs = [v[0] for v in verts]
    ys = [v[1] for v in verts]
    return max(max(xs) - min(xs), max(ys) - min(ys))


def polygon_area(P: LabeledPolygon) -> float:
    a = signed_area(P.vertices)
    if a <= P.tol_geom:
        raise DegeneratePolygon(f"signed area {a} is not positive")
    return a


def corner_angle(P: LabeledPolygon, i: int) -> float:
    """Interior angle at vertex i, in (0, 2*pi); reflex corners exceed pi."""
    n = len(P.vertices)
    v = P.vertices[i % n]
    nxt = P.vertices[(i + 1) % n]
    prv = P.vertices[(i - 1) % n]
    ux, uy = nxt.x - v.x, nxt.y - v.y
    wx, wy = prv.x - v.x, prv.y - v.y
    ang = math.atan2(cross(ux, uy, wx, wy), ux * wx + uy * wy)
    if ang <= 0.0:
        ang += TWO_PI
    return ang


def corner_angles(P: LabeledPolygon) -> list[float]:
    return [corner_angle(P, i) for i in range(len(P.vertices))]


def point_segment_distance(p, a, b) -> float:
    ax, ay = b[0] - a[0], b[1] - a[1]
    L2 = ax * ax + ay * ay
    if L2 == 0.0:
        return dist(p, a)
    t = ((p[0] - a[0]) * ax + (p[1] - a[1]) * ay) / L2
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - a[0] - t * ax, p[1] - a[1] - t * ay)


def line_intersection(p1, d1, p2, d2):
    """Intersection of lines p1 + s d1 and p2 + t d2, or None when parallel."""
    den = cross(d1[0], d1[1], d2[0], d2[1])
    if abs(den) < 1e-300:
        return None
    s = cross(p2[0] - p1[0], p2[1] - p1[1], d2[0], d2[1]) / den
    return PlanarPoint(p1[0] + s * d1[0], p1[1] + s * d1[1])
