"""Exact geodesic distances on flat cone surfaces by window unfolding.

A window is a wedge of straight rays from the source, clipped by a triangle
edge.  Windows are expanded best-first through the triangle mesh of the
surface; each expansion applies the chart change across the crossed edge.
Rays never pass through a vertex inside a window, but windows are closed,
so paths grazing a regular vertex are still found.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BudgetExhausted, HexSphereError, NoAnnulusFound, NotOnSurface
from .geometry import DEFAULT_TOL, TWO_PI, PlanarPoint
from .surface import (
    IDENTITY,
    ConeSurface,
    TriMesh,
    Xform,
    xf_apply,
    xf_compose,
    xf_inverse,
)

PI = math.pi
DEFAULT_CROSSINGS = 16
MAX_CROSSINGS = 64


@dataclass(frozen=True)
class SurfacePoint:
    """A point given by a face id and coordinates in that face's chart."""

    face: int
    x: float
    y: float

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


def vertex_point(M: ConeSurface, label: str) -> SurfacePoint:
    for lab, (f, i) in M.cone_labels:
        if lab == label:
            v = M.faces[f].vertices[i]
            return SurfacePoint(f, v.x, v.y)
    raise KeyError(label)


@dataclass(frozen=True)
class GeodesicPath:
    crossings: tuple[tuple[int, int], ...]
    start: SurfacePoint
    end: SurfacePoint
    unfolded_start: PlanarPoint
    unfolded_end: PlanarPoint
    length: float
    triangles: tuple[int, ...] = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {"crossings": [list(c) for c in self.crossings], "length": self.length}


def save_path(path: GeodesicPath, filename: str | Path) -> None:
    Path(filename).write_text(json.dumps(path.to_dict(), indent=2) + "\n")


# --- locating points ------------------------------------------------------


def _mesh_scale(mesh: TriMesh) -> float:
    s = 0.0
    for p in mesh.pts:
        for q in p:
            s = max(s, abs(q[0]), abs(q[1]))
    return max(s, 1e-300)


def _bary_inside(p, tri, eps) -> bool:
    a, b, c = tri
    d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
    d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
    return d1 >= -eps and d2 >= -eps and d3 >= -eps


def _seg_dist(p, a, b) -> float:
    ax, ay = b[0] - a[0], b[1] - a[1]
    L2 = ax * ax + ay * ay
    if L2 == 0.0:
        return math.hypot(p[0] - a[0], p[1] - a[1])
    t = ((p[0] - a[0]) * ax + (p[1] - a[1]) * ay) / L2
    t = 0.0 if t < 0.0 else 1.0 if t > 1.0 else t
    return math.hypot(p[0] - a[0] - t * ax, p[1] - a[1] - t * ay)


def vertex_corners(mesh: TriMesh, t: int, k: int, T: Xform = IDENTITY) -> list[tuple[int, int, Xform]]:
    """Triangle corners around the vertex at corner k of triangle t, counterclockwise.

    Each corner comes with the chart transform developing it next to its
    predecessor, starting from transform T for (t, k).
    """
    out = [(t, k, T)]
    ct, ck, CT = t, k, T
    for _ in range(4 * len(mesh.pts) + 4):
        e = (ck + 2) % 3
        t2, k2 = mesh.twin[ct][e]
        CT = xf_compose(CT, mesh.xform[ct][e])
        ct, ck = t2, k2
        if (ct, ck) == (t, k):
            return out
        out.append((ct, ck, CT))
    raise HexSphereError("vertex link does not close up")


@dataclass(frozen=True)
class _Source:
    S: tuple[float, float]
    regions: tuple[tuple[int, Xform], ...]
    vertex_class: int | None
    corners: tuple[tuple[int, int, Xform], ...] = ()


def _locate(M: ConeSurface, p: SurfacePoint, base: Xform = IDENTITY, t_hint: int | None = None) -> _Source:
    """Triangles containing p, all expressed in one plane (p's face chart mapped by base)."""
    mesh = M.mesh
    if not (0 <= p.face < len(M.faces)):
        raise NotOnSurface(f"no face {p.face}")
    scale = _mesh_scale(mesh)
    eps = 1e-9 * scale
    xy = p.xy
    cands = [t_hint] if t_hint is not None else mesh.by_face[p.face]
    inside = [t for t in cands if _bary_inside(xy, mesh.pts[t], eps * scale)]
    if not inside and t_hint is not None:
        inside = [t for t in mesh.by_face[p.face] if _bary_inside(xy, mesh.pts[t], eps * scale)]
    if not inside:
        raise NotOnSurface(f"point {xy} is outside face {p.face}")
    t0 = inside[0]
    for k in range(3):
        q = mesh.pts[t0][k]
        if math.hypot(q[0] - xy[0], q[1] - xy[1]) <= eps:
            corners = vertex_corners(mesh, t0, k, base)
            S = xf_apply(base, q)
            regions = tuple((ct, CT) for ct, _, CT in corners)
            return _Source(S, regions, mesh.vclass[t0][k], tuple(corners))
    S = xf_apply(base, xy)
    regions = [(t0, base)]
    for k in range(3):
        a, b = mesh.pts[t0][k], mesh.pts[t0][(k + 1) % 3]
        if _seg_dist(xy, a, b) <= eps:
            t2, _ = mesh.twin[t0][k]
            regions.append((t2, xf_compose(base, mesh.xform[t0][k])))
    return _Source(S, tuple(regions), None)


# --- propagation ----------------------------------------------------------


@dataclass(frozen=True)
class Hit:
    target: object
    distance: float
    image: tuple[float, float]
    node: int
    tri: int


@dataclass
class Propagation:
    source: _Source
    hits: list[Hit]
    nodes: list[tuple[int, int, int]]  # (triangle, parent node, crossed face edge or -1)
    cut_bound: float  # smallest lower bound among windows dropped by the crossing budget
    windows: int

    @property
    def exhausted(self) -> bool:
        return self.cut_bound < math.inf

    def best(self, target) -> Hit | None:
        cand = [h for h in self.hits if h.target == target]
        return min(cand, key=lambda h: h.distance) if cand else None


def _wedge_interval(S, uL, uR, X0, X1, eps):
    """Parameter range [s0, s1] of X0 + s (X1 - X0) inside the closed wedge, or None."""
    dx, dy = X1[0] - X0[0], X1[1] - X0[1]
    ox, oy = X0[0] - S[0], X0[1] - S[1]
    lo, hi = 0.0, 1.0
    # cross(uL, p - S) <= eps
    a = uL[0] * oy - uL[1] * ox
    b = uL[0] * dy - uL[1] * dx
    if abs(b) < 1e-300:
        if a > eps:
            return None
    elif b > 0:
        hi = min(hi, (eps - a) / b)
    else:
        lo = max(lo, (eps - a) / b)
    # cross(p - S, uR) <= eps
    a = ox * uR[1] - oy * uR[0]
    b = dx * uR[1] - dy * uR[0]
    if abs(b) < 1e-300:
        if a > eps:
            return None
    elif b > 0:
        hi = min(hi, (eps - a) / b)
    else:
        lo = max(lo, (eps - a) / b)
    if lo > hi:
        return None
    return lo, hi


def _in_wedge(S, uL, uR, P, eps) -> bool:
    px, py = P[0] - S[0], P[1] - S[1]
    return uL[0] * py - uL[1] * px <= eps and px * uR[1] - py * uR[0] <= eps


def _unit(S, P):
    dx, dy = P[0] - S[0], P[1] - S[1]
    n = math.hypot(dx, dy)
    return (dx / n, dy / n) if n > 0 else (0.0, 0.0)


def propagate(
    M: ConeSurface,
    source: _Source,
    vertex_targets: Iterable[int] = (),
    point_targets: Sequence[tuple[object, SurfacePoint]] = (),
    radius: float = math.inf,
    max_crossings: int = DEFAULT_CROSSINGS,
    collect_all: bool = False,
) -> Propagation:
    """Expand windows from a source until no window can improve the answer.

    With ``collect_all`` every image of every target within ``radius`` is
    reported; otherwise only the best hit per target is kept and the search
    stops once all targets are settled.
    """
    mesh = M.mesh
    scale = _mesh_scale(mesh)
    eps = 1e-11 * scale
    S = source.S
    vt = set(vertex_targets)
    # target images per triangle: (name, local xy)
    tri_targets: dict[int, list[tuple[object, tuple[float, float]]]] = {}
    for name, q in point_targets:
        src = _locate(M, q)
        if src.vertex_class is not None:
            raise HexSphereError("use vertex_targets for targets at mesh vertices")
        for t, T in src.regions:
            # region transforms map into q's face chart; bring q back into triangle t's own chart
            c, s, tx, ty = T
            lx = q.x - tx
            ly = q.y - ty
            tri_targets.setdefault(t, []).append((name, (c * lx + s * ly, -s * lx + c * ly)))

    best: dict[object, float] = {}
    hits: list[Hit] = []
    nodes: list[tuple[int, int, int]] = []
    n_targets = len(vt) + len({n for n, _ in point_targets})

    def bound() -> float:
        if collect_all or len(best) < n_targets:
            return radius
        return min(radius, max(best.values()))

    def record(name, P, node, t):
        d = math.hypot(P[0] - S[0], P[1] - S[1])
        if d > radius + eps:
            return
        if collect_all:
            hits.append(Hit(name, d, P, node, t))
            if d < best.get(name, math.inf):
                best[name] = d
        elif d < best.get(name, math.inf):
            best[name] = d
            hits.append(Hit(name, d, P, node, t))

    heap: list = []
    counter = 0
    for t, T in source.regions:
        node = len(nodes)
        nodes.append((t, -1, -1))
        pts = [xf_apply(T, q) for q in mesh.pts[t]]
        for k in range(3):
            d = math.hypot(pts[k][0] - S[0], pts[k][1] - S[1])
            if d > eps and mesh.vclass[t][k] in vt:
                record(mesh.vclass[t][k], pts[k], node, t)
        for name, q in tri_targets.get(t, ()):
            record(name, xf_apply(T, q), node, t)
        for k in range(3):
            a, b = pts[k], pts[(k + 1) % 3]
            if _seg_dist(S, a, b) <= eps:
                continue
            t2, k2 = mesh.twin[t][k]
            T2 = xf_compose(T, mesh.xform[t][k])
            fe = mesh.face_edge[t][k]
            depth = 0 if fe is None else 1
            child = len(nodes)
            nodes.append((t2, node, -1 if fe is None else fe))
            lb = _seg_dist(S, a, b)
            heapq.heappush(heap, (lb, counter, t2, k2, T2, b, a, depth, child))
            counter += 1

    cut_bound = math.inf
    windows = 0
    while heap:
        lb, _, t, k, T, L, R, depth, node = heapq.heappop(heap)
        if lb > bound() + eps:
            break
        windows += 1
        P = mesh.pts[t]
        O = xf_apply(T, P[(k + 2) % 3])
        E0 = xf_apply(T, P[k])
        E1 = xf_apply(T, P[(k + 1) % 3])
        uL = _unit(S, L)
        uR = _unit(S, R)
        if mesh.vclass[t][(k + 2) % 3] in vt and _in_wedge(S, uL, uR, O, eps):
            record(mesh.vclass[t][(k + 2) % 3], O, node, t)
        for name, q in tri_targets.get(t, ()):
            Q = xf_apply(T, q)
            if _in_wedge(S, uL, uR, Q, eps):
                record(name, Q, node, t)
        for e, X0, X1 in (((k + 1) % 3, E1, O), ((k + 2) % 3, O, E0)):
            iv = _wedge_interval(S, uL, uR, X0, X1, 0.0)
            if iv is None:
                continue
            s0, s1 = iv
            dx, dy = X1[0] - X0[0], X1[1] - X0[1]
            if (s1 - s0) * math.hypot(dx, dy) <= eps:
                continue
            A = (X0[0] + s0 * dx, X0[1] + s0 * dy)
            B = (X0[0] + s1 * dx, X0[1] + s1 * dy)
            nlb = _seg_dist(S, A, B)
            if nlb > bound() + eps:
                continue
            fe = mesh.face_edge[t][e]
            nd = depth + (0 if fe is None else 1)
            if nd > max_crossings:
                cut_bound = min(cut_bound, nlb)
                continue
            t2, k2 = mesh.twin[t][e]
            T2 = xf_compose(T, mesh.xform[t][e])
            child = len(nodes)
            nodes.append((t2, node, -1 if fe is None else fe))
            heapq.heappush(heap, (nlb, counter, t2, k2, T2, B, A, nd, child))
            counter += 1
    return Propagation(source, hits, nodes, cut_bound, windows)


def _crossings_of(M: ConeSurface, prop: Propagation, node: int) -> tuple[tuple[tuple[int, int], ...], tuple[int, ...]]:
    mesh = M.mesh
    cross_list = []
    tris = []
    while node >= 0:
        t, parent, fe = prop.nodes[node]
        tris.append(t)
        if fe >= 0 and parent >= 0:
            pt = prop.nodes[parent][0]
            cross_list.append((mesh.face[pt], fe))
        node = parent
    return tuple(reversed(cross_list)), tuple(reversed(tris))


def path_of(M: ConeSurface, prop: Propagation, hit: Hit, start: SurfacePoint, end: SurfacePoint) -> GeodesicPath:
    crossings, tris = _crossings_of(M, prop, hit.node)
    S = prop.source.S
    return GeodesicPath(
        crossings, start, end, PlanarPoint(*S), PlanarPoint(*hit.image), hit.distance, tris
    )


def _source_for(M: ConeSurface, p: SurfacePoint) -> _Source:
    return _locate(M, p)


def _target_spec(M: ConeSurface, q: SurfacePoint):
    src = _locate(M, q)
    if src.vertex_class is not None:
        return ("v", src.vertex_class)
    return ("p", q)


def unfold_distance(
    M: ConeSurface,
    x: SurfacePoint,
    y: SurfacePoint,
    max_crossings: int = DEFAULT_CROSSINGS,
    auto_double: bool = True,
) -> tuple[float, GeodesicPath]:
    """Shortest geodesic distance between two surface points and a realizing path.

    The crossing budget doubles (up to 64) while a window dropped by the
    budget could still beat the incumbent.
    """
    src = _source_for(M, x)
    kind, tgt = _target_spec(M, y)
    if kind == "v" and src.vertex_class == tgt:
        return 0.0, GeodesicPath((), x, y, PlanarPoint(*src.S), PlanarPoint(*src.S), 0.0)
    budget = max_crossings
    while True:
        if kind == "v":
            prop = propagate(M, src, vertex_targets=(tgt,), max_crossings=budget)
            hit = prop.best(tgt)
        else:
            prop = propagate(M, src, point_targets=(("y", tgt),), max_crossings=budget)
            hit = prop.best("y")
        settled = hit is not None and hit.distance <= prop.cut_bound
        if settled or not auto_double or budget >= MAX_CROSSINGS:
            if hit is None:
                raise BudgetExhausted(f"no path within {budget} crossings", lower_bound=prop.cut_bound)
            return hit.distance, path_of(M, prop, hit, x, y)
        budget = min(2 * budget, MAX_CROSSINGS)


LABELS4 = ("a", "b", "c", "d")


@dataclass(frozen=True)
class ConeDistanceMatrix:
    labels: tuple[str, ...]
    entries: tuple[tuple[float, ...], ...]

    def __call__(self, x: str, y: str) -> float:
        return self.entries[self.labels.index(x)][self.labels.index(y)]

    def as_array(self):
        import numpy as np

        return np.array(self.entries)


def cone_distances(M: ConeSurface, label: str, targets: Iterable[str], max_crossings: int = DEFAULT_CROSSINGS):
    """Distances from one labeled cone point to several others, with realizing hits."""
    src = _locate(M, vertex_point(M, label))
    cls = {M.class_of(t): t for t in targets}
    budget = max_crossings
    while True:
        prop = propagate(M, src, vertex_targets=cls.keys(), max_crossings=budget)
        best: dict[str, Hit] = {}
        for h in prop.hits:
            lab = cls[h.target]
            if lab not in best or h.distance < best[lab].distance:
                best[lab] = h
        complete = len(best) == len(cls)
        if complete and all(h.distance <= prop.cut_bound for h in best.values()):
            break
        if budget >= MAX_CROSSINGS:
            if not complete:
                raise BudgetExhausted(f"cone points unreachable within {budget} crossings", lower_bound=prop.cut_bound)
            break
        budget = min(2 * budget, MAX_CROSSINGS)
    return {k: v.distance for k, v in best.items()}, prop, best


def distance_matrix(M: ConeSurface, labels: Sequence[str] = LABELS4) -> ConeDistanceMatrix:
    labels = tuple(labels)
    m = len(labels)
    D = [[0.0] * m for _ in range(m)]
    for i in range(m - 1):
        d, _, _ = cone_distances(M, labels[i], labels[i + 1 :])
        for j in range(i + 1, m):
            D[i][j] = D[j][i] = d[labels[j]]
    return ConeDistanceMatrix(labels, tuple(tuple(r) for r in D))


# --- cone charts and straight-line flow ------------------------------------


@dataclass(frozen=True)
class ConeChart:
    """Development of the cone at a mesh vertex, cut along one ray.

    The vertex sits at the origin, the cut ray points along angle 0, and a ray
    at chart angle theta in [0, total) leaves through triangle ``tri`` whose
    chart maps into the plane by ``xform``.
    """

    vclass: int
    total: float
    segments: tuple[tuple[float, float, int, Xform], ...]  # (theta0, theta1, triangle, xform)

    def segment(self, theta: float) -> tuple[int, Xform]:
        for th0, th1, t, T in self.segments:
            if th0 - 1e-15 <= theta <= th1 + 1e-15:
                return t, T
        raise HexSphereError(f"angle {theta} outside the chart [0, {self.total}]")

    def regions(self) -> tuple[tuple[int, Xform], ...]:
        seen = []
        for _, _, t, T in self.segments:
            if (t, T) not in seen:
                seen.append((t, T))
        return tuple(seen)

    def angle_of(self, P) -> float:
        """Chart angle of a plane point, in [0, 2*pi)."""
        th = math.atan2(P[1], P[0])
        return th + TWO_PI if th < 0 else th


def _rot(theta: float) -> Xform:
    return (math.cos(theta), math.sin(theta), 0.0, 0.0)


def cone_chart(M: ConeSurface, vclass: int, cut: float = 0.0) -> ConeChart:
    """Chart at a vertex class with the cut at cone angle ``cut`` from the reference corner.

    The reference corner is the first triangle corner of the class (mesh order);
    cone angles are measured counterclockwise from its first edge.
    """
    mesh = M.mesh
    ref = None
    for t in range(len(mesh.pts)):
        for k in range(3):
            if mesh.vclass[t][k] == vclass:
                ref = (t, k)
                break
        if ref:
            break
    if ref is None:
        raise KeyError(vclass)
    t0, k0 = ref
    v = mesh.pts[t0][k0]
    w = mesh.pts[t0][(k0 + 1) % 3]
    g = math.atan2(w[1] - v[1], w[0] - v[0])
    c, s = math.cos(-g), math.sin(-g)
    T0 = (c, s, -(c * v[0] - s * v[1]), -(s * v[0] + c * v[1]))
    ring = vertex_corners(mesh, t0, k0, T0)
    total = math.fsum(mesh.angle[t][k] for t, k, _ in ring)
    cut = cut % total
    # the second lap is the first one rotated by the cone angle about the vertex
    segs = []
    psi = 0.0
    for turn in range(2):
        for t, k, T in ring:
            w_ang = mesh.angle[t][k]
            lo, hi = max(psi, cut), min(psi + w_ang, cut + total)
            if hi > lo:
                TT = xf_compose(_rot(turn * total - cut), T)
                segs.append((lo - cut, hi - cut, t, TT))
            psi += w_ang
    return ConeChart(vclass, total, tuple(segs))


@dataclass(frozen=True)
class TraceResult:
    tri: int
    xform: Xform
    end: tuple[float, float]
    length: float
    crossings: tuple[tuple[int, int], ...]
    steps: tuple[tuple[int, Xform], ...]
    cone_hit: int | None = None  # vertex class where the flow stopped early


def _trace(
    M: ConeSurface,
    t: int,
    T: Xform,
    P: tuple[float, float],
    u: tuple[float, float],
    length: float,
    max_steps: int = 100000,
) -> TraceResult:
    """Follow the straight ray P + s u (plane coordinates) for the given length."""
    mesh = M.mesh
    scale = _mesh_scale(mesh)
    eps = 1e-10 * scale
    travelled = 0.0
    crossings = []
    steps = [(t, T)]
    px, py = P
    for _ in range(max_steps):
        V = [xf_apply(T, q) for q in mesh.pts[t]]
        best_lam, best_k = math.inf, -1
        for k in range(3):
            A, B = V[k], V[(k + 1) % 3]
            ex, ey = B[0] - A[0], B[1] - A[1]
            den = ex * u[1] - ey * u[0]
            if den >= -1e-14 * math.hypot(ex, ey):
                continue
            lam = -(ex * (py - A[1]) - ey * (px - A[0])) / den
            if lam < best_lam:
                best_lam, best_k = lam, k
        remaining = length - travelled
        if best_k < 0:
            raise HexSphereError("ray has no exit from the current triangle")
        best_lam = max(best_lam, 0.0)
        if best_lam >= remaining - eps:
            end = (px + remaining * u[0], py + remaining * u[1])
            return TraceResult(t, T, end, length, tuple(crossings), tuple(steps))
        X = (px + best_lam * u[0], py + best_lam * u[1])
        travelled += best_lam
        k = best_k
        hit_v = None
        for j in (k, (k + 1) % 3):
            if math.hypot(V[j][0] - X[0], V[j][1] - X[1]) <= eps:
                hit_v = j
        if hit_v is not None:
            cls = mesh.vclass[t][hit_v]
            if mesh.singular[cls]:
                return TraceResult(t, T, V[hit_v], travelled, tuple(crossings), tuple(steps), cls)
            # outgoing corner: the one whose wedge holds u most centrally (u may run along an edge)
            nxt, score = None, -1e-9
            for ct, ck, CT in vertex_corners(mesh, t, hit_v, T):
                W0 = xf_apply(CT, mesh.pts[ct][ck])
                W1 = xf_apply(CT, mesh.pts[ct][(ck + 1) % 3])
                W2 = xf_apply(CT, mesh.pts[ct][(ck + 2) % 3])
                e1 = math.hypot(W1[0] - W0[0], W1[1] - W0[1])
                e2 = math.hypot(W2[0] - W0[0], W2[1] - W0[1])
                c1 = ((W1[0] - W0[0]) * u[1] - (W1[1] - W0[1]) * u[0]) / e1
                c2 = (u[0] * (W2[1] - W0[1]) - u[1] * (W2[0] - W0[0])) / e2
                d1 = ((W1[0] - W0[0]) * u[0] + (W1[1] - W0[1]) * u[1]) / e1
                d2 = ((W2[0] - W0[0]) * u[0] + (W2[1] - W0[1]) * u[1]) / e2
                if max(d1, d2) <= 0.0:
                    continue  # wedge faces backwards
                if min(c1, c2) > score:
                    nxt, score = (ct, CT), min(c1, c2)
            if nxt is None:
                raise HexSphereError("ray through a regular vertex found no outgoing corner")
            t, T = nxt
            px, py = V[hit_v]
            crossings.append((mesh.face[t], -1))
            steps.append((t, T))
            continue
        fe = mesh.face_edge[t][k]
        if fe is not None:
            crossings.append((mesh.face[t], fe))
        T = xf_compose(T, mesh.xform[t][k])
        t = mesh.twin[t][k][0]
        px, py = X
        steps.append((t, T))
    raise HexSphereError("trace did not terminate")


def trace(
    M: ConeSurface, start: SurfacePoint, direction: tuple[float, float], length: float
) -> tuple[SurfacePoint, TraceResult]:
    """Straight-line flow from a non-vertex point; direction is given in the start face's chart."""
    src = _locate(M, start)
    if src.vertex_class is not None:
        raise HexSphereError("start is a vertex; use trace_from_vertex")
    n = math.hypot(*direction)
    u = (direction[0] / n, direction[1] / n)
    t, T = src.regions[0]
    res = _trace(M, t, T, start.xy, u, length)
    return _to_surface(M, res), res


def _to_surface(M: ConeSurface, res: TraceResult) -> SurfacePoint:
    c, s, tx, ty = res.xform
    lx, ly = res.end[0] - tx, res.end[1] - ty
    return SurfacePoint(M.mesh.face[res.tri], c * lx + s * ly, -s * lx + c * ly)


def trace_from_vertex(M: ConeSurface, chart: ConeChart, theta: float, length: float) -> TraceResult:
    t, T = chart.segment(theta)
    return _trace(M, t, T, (0.0, 0.0), (math.cos(theta), math.sin(theta)), length)


# --- Voronoi cells ----------------------------------------------------------


@dataclass(frozen=True)
class BoundaryHit:
    theta: float
    r: float
    q: tuple[float, float] | None  # binding image in the chart; None when a cone point ends the ray
    target: int | None


def _images_at(M: ConeSurface, res: TraceResult, classes, radius: float) -> list[Hit]:
    p = _to_surface(M, res)
    src = _locate(M, p, base=res.xform, t_hint=res.tri)
    if src.vertex_class is not None and M.mesh.singular[src.vertex_class]:
        return []
    prop = propagate(M, src, vertex_targets=classes, radius=radius, collect_all=True)
    return prop.hits


RHO = 1.3


def _diameter_bound(M: ConeSurface) -> float:
    # any two points are joined by a path along at most half of every face boundary
    return 0.5 * sum(F.edge_length(i) for F in M.faces for i in range(len(F)))


def _binding(hits, center, u, scale):
    best_r, best_q, best_t = math.inf, None, None
    for h in hits:
        q = h.image
        if h.target == center and math.hypot(q[0], q[1]) <= 1e-9 * scale:
            continue  # the straight path back along the ray itself
        dot = q[0] * u[0] + q[1] * u[1]
        if dot <= 1e-15 * scale:
            continue
        rq = (q[0] * q[0] + q[1] * q[1]) / (2.0 * dot)
        if rq < best_r:
            best_r, best_q, best_t = rq, q, h.target
    return best_r, best_q, best_t


def boundary_along(
    M: ConeSurface,
    chart: ConeChart,
    theta: float,
    other: int,
    r0: float,
    include_self: bool = True,
    tol: float = 1e-13,
) -> BoundaryHit:
    """Distance along the chart ray at angle theta to the boundary of the center's cell.

    The boundary is where the straight distance back to the center is first
    matched by a path to ``other`` or, with ``include_self``, by a second path
    to the center.  Each step jumps to the bisector of the current binding
    image, which converges once the binding image stops changing.
    """
    u = (math.cos(theta), math.sin(theta))
    center = chart.vclass
    classes = (center, other) if include_self else (other,)
    scale = _mesh_scale(M.mesh)
    r = min(r0, _diameter_bound(M))
    for _ in range(80):
        res = trace_from_vertex(M, chart, theta, r)
        blocked = res.cone_hit is not None
        r_cone = res.length if blocked else math.inf
        if blocked:
            r = r_cone * (1.0 - 1e-7)
            res = trace_from_vertex(M, chart, theta, r)
        # images farther than rho * r cannot bind before (1 + rho) r / 2 along the ray
        hits = _images_at(M, res, classes, RHO * r)
        best_r, best_q, best_t = _binding(hits, center, u, scale)
        if blocked and best_r >= r_cone - 1e-9 * scale:
            return BoundaryHit(theta, r_cone, best_q, res.cone_hit if res.cone_hit is not None else -1)
        if best_q is None or best_r > 0.5 * (1.0 + RHO) * r:
            r = min(best_r, 0.5 * (1.0 + RHO) * r)
            continue
        if abs(best_r - r) <= tol * scale:
            return BoundaryHit(theta, best_r, best_q, best_t)
        r = best_r
    raise HexSphereError(f"boundary search along angle {theta} did not converge")


PARTNER = {"a": "c", "b": "d"}


def _vertex_source_from_chart(chart: ConeChart) -> _Source:
    return _Source((0.0, 0.0), chart.regions(), chart.vclass)


def _small_classes(M: ConeSurface) -> list[int]:
    return [k for k in range(M.n_vertices) if M.mesh.singular[k] and M.class_angles[k] < PI]


def cut_direction(M: ConeSurface, center: str = "a", tol: float = DEFAULT_TOL.tol_metric):
    """Cone angle of the planarizing cut at ``center`` and the cut endpoint.

    The cut runs along a shortest geodesic to the nearest 2*pi/3 point X with
    d(center, X) <= d(other, X).  Distance ties prefer c for center a and d for
    center b; ties between geodesics prefer the smallest polar angle.
    """
    other = "b" if center == "a" else "a"
    cc, oc = M.class_of(center), M.class_of(other)
    small = _small_classes(M)
    chart = cone_chart(M, cc, 0.0)
    src = _vertex_source_from_chart(chart)
    first = propagate(M, src, vertex_targets=small)
    d_center = {k: min((h.distance for h in first.hits if h.target == k), default=math.inf) for k in small}
    reach = min(d_center.values()) + 2 * tol
    prop = propagate(M, src, vertex_targets=small, collect_all=True, radius=reach)
    d_other, _, _ = cone_distances(M, other, [M.label_of_class.get(k, f"v{k}") for k in small if k in M.label_of_class])
    d_other = {M.class_of(lab): d for lab, d in d_other.items()}
    cands = [k for k in small if d_center[k] <= d_other.get(k, math.inf) + tol]
    if not cands:
        raise HexSphereError("no 2*pi/3 point lies in the closed cell")
    dmin = min(d_center[k] for k in cands)
    near = [k for k in cands if d_center[k] <= dmin + tol]
    pref = M.class_of(PARTNER[center]) if PARTNER[center] in dict(M.cone_labels) else None
    X = pref if pref in near else min(near, key=lambda k: (d_center[k], k))
    angles = []
    for h in prop.hits:
        if h.target == X and h.distance <= d_center[X] + tol:
            th = math.fmod(chart.angle_of(h.image), chart.total)  # images on the second lap repeat
            if th >= chart.total - 1e-9:
                th = 0.0
            angles.append((round(th, 9), th))
    psi = min(angles)[1]
    return psi, X, d_center[X]


def _line_point_gap(q, P) -> float:
    """Signed distance of P from the bisector of the origin and q (positive beyond it)."""
    nq = math.hypot(q[0], q[1])
    return (P[0] * q[0] + P[1] * q[1]) / nq - nq / 2.0


def _intersect(q1, q2):
    # lines x . q = |q|^2 / 2
    det = q1[0] * q2[1] - q1[1] * q2[0]
    if abs(det) < 1e-300:
        return None
    b1 = (q1[0] ** 2 + q1[1] ** 2) / 2.0
    b2 = (q2[0] ** 2 + q2[1] ** 2) / 2.0
    return ((b1 * q2[1] - b2 * q1[1]) / det, (q1[0] * b2 - q2[0] * b1) / det)


@dataclass(frozen=True)
class CellBoundary:
    chart: ConeChart
    vertices: tuple[tuple[float, float], ...]
    samples: tuple[BoundaryHit, ...]
    cut_class: int
    cut_length: float


def cell_boundary(M: ConeSurface, center: str = "a", n_samples: int = 6, tol: float = 1e-9) -> CellBoundary:
    """Vertices of the developed cell of a 4*pi/3 cone point, cut toward its nearest c/d point."""
    other = "b" if center == "a" else "a"
    oc = M.class_of(other)
    psi, X, dX = cut_direction(M, center)
    chart = cone_chart(M, M.class_of(center), psi)
    Th = chart.total
    scale = _mesh_scale(M.mesh)
    ltol = tol * scale
    start = (dX, 0.0)
    end = (dX * math.cos(Th), dX * math.sin(Th))
    samples: list[BoundaryHit] = []

    def sample(theta, r0):
        h = boundary_along(M, chart, theta, oc, r0)
        samples.append(h)
        samples.sort(key=lambda s: s.theta)
        return h

    r0 = 0.5 * dX
    for i in range(n_samples):
        h = sample((i + 0.5) * Th / n_samples, r0)
        r0 = h.r
    for _ in range(200):
        lines = []  # (theta, q) with consecutive duplicates merged
        for h in samples:
            if h.q is None:
                continue
            if lines and math.hypot(lines[-1][1][0] - h.q[0], lines[-1][1][1] - h.q[1]) <= 1e-7 * scale:
                lines[-1] = (lines[-1][0], lines[-1][1], h.theta)
                continue
            lines.append((h.theta, h.q, h.theta))
        # the first and last lines must pass through the cut endpoints
        if abs(_line_point_gap(lines[0][1], start)) > ltol:
            sample(lines[0][0] / 2.0, samples[0].r)
            continue
        if abs(_line_point_gap(lines[-1][1], end)) > ltol:
            sample((lines[-1][2] + Th) / 2.0, samples[-1].r)
            continue
        verts = [start]
        ok = True
        for (th1, q1, th1b), (th2, q2, _) in zip(lines, lines[1:]):
            v = _intersect(q1, q2)
            tv = None if v is None else chart.angle_of(v)
            if v is None or not (th1b - 1e-12 <= tv <= th2 + 1e-12):
                sample((th1b + th2) / 2.0, samples[0].r)
                ok = False
                break
            if any(abs(s.theta - tv) < 1e-12 for s in samples):
                verts.append(v)
                continue
            h = sample(tv, math.hypot(*v))
            if h.r < math.hypot(*v) - ltol:
                ok = False
                break
            verts.append(v)
        if not ok:
            continue
        verts.append(end)
        return CellBoundary(chart, tuple(verts), tuple(samples), X, dX)
    raise HexSphereError("cell boundary assembly did not converge")


def voronoi_cell_polygon(M: ConeSurface, center: str = "a", tol: float = DEFAULT_TOL.tol_metric):
    """Planar polygon of the Voronoi cell of a 4*pi/3 cone point, classified as a special polygon."""
    from .geometry import LabeledPolygon
    from .special import as_special

    cb = cell_boundary(M, center)
    pts = [(0.0, 0.0)]
    scale = _mesh_scale(M.mesh)
    for v in cb.vertices:
        if math.hypot(v[0] - pts[-1][0], v[1] - pts[-1][1]) > 1e-7 * scale:
            pts.append(v)
    P = LabeledPolygon(tuple(pts), (), 1e-12)
    return as_special(P, tol)


# --- Voronoi bisector --------------------------------------------------------


def point_cone_distances(
    M: ConeSurface, p: SurfacePoint, classes: Iterable[int], max_crossings: int = DEFAULT_CROSSINGS
) -> dict[int, float]:
    """Distances from a surface point to several vertex classes."""
    classes = tuple(classes)
    src = _locate(M, p)
    budget = max_crossings
    while True:
        prop = propagate(M, src, vertex_targets=classes, max_crossings=budget)
        best: dict[int, float] = {}
        for h in prop.hits:
            best[h.target] = min(best.get(h.target, math.inf), h.distance)
        if src.vertex_class in classes:
            best[src.vertex_class] = 0.0
        complete = len(best) == len(classes)
        if complete and all(v <= prop.cut_bound for v in best.values()):
            return best
        if budget >= MAX_CROSSINGS:
            if not complete:
                raise BudgetExhausted(f"cone points unreachable within {budget} crossings", lower_bound=prop.cut_bound)
            return best
        budget = min(2 * budget, MAX_CROSSINGS)


def nearest_seam(M: ConeSurface, p: SurfacePoint):
    """Closest glued edge to p in its face chart, as (canonical edge pair, distance)."""
    from .geometry import point_segment_distance

    F = M.faces[p.face]
    best = (math.inf, None)
    for e in range(len(F)):
        a, b = F.edge(e)
        d = point_segment_distance(p.xy, a, b)
        if d < best[0]:
            best = (d, e)
    ref = (p.face, best[1])
    return tuple(sorted((ref, M.pairing.mate[ref]))), best[0]


@dataclass(frozen=True)
class BisectorSample:
    point: SurfacePoint
    gap: float  # d(x, a) - d(x, b)
    seam: tuple[tuple[int, int], tuple[int, int]] | None
    seam_distance: float


def voronoi_bisector(
    M: ConeSurface, samples: int, seed: int = 0, tol: float = DEFAULT_TOL.tol_metric
) -> list[BisectorSample]:
    """Points equidistant from a and b, found along random geodesic rays from a.

    Each ray is followed to where a path to b first matches its length.  Rays
    that first meet a second path back to a (or a cone point) are discarded.
    Samples are tagged with the glued edge they lie on, or None when no edge
    is within ``tol``.
    """
    import numpy as np

    if samples < 0:
        raise ValueError("samples must be non-negative")
    if samples == 0:
        return []
    ca, cb = M.class_of("a"), M.class_of("b")
    chart = cone_chart(M, ca, 0.0)
    d_ab = point_cone_distances(M, vertex_point(M, "a"), (cb,))[cb]
    rng = np.random.default_rng(seed)
    out: list[BisectorSample] = []
    for _ in range(50 * samples + 100):
        if len(out) >= samples:
            break
        theta = float(rng.uniform(0.0, chart.total))
        h = boundary_along(M, chart, theta, cb, 0.5 * d_ab)
        if h.q is None or h.target != cb:
            continue
        p = _to_surface(M, trace_from_vertex(M, chart, theta, h.r))
        d = point_cone_distances(M, p, (ca, cb))
        gap = d[ca] - d[cb]
        if abs(gap) >= tol:
            continue
        seam, sd = nearest_seam(M, p)
        out.append(BisectorSample(p, gap, seam if sd < tol else None, sd))
    else:
        raise HexSphereError(f"only {len(out)} of {samples} bisector samples found")
    out.sort(key=lambda s: (s.point.face, s.point.x, s.point.y))
    return out


# --- the embedded annulus ------------------------------------------------------


@dataclass(frozen=True)
class Corridor:
    """One period of the straight line y = s, developed so the flow runs along +x."""

    offset: float
    period: float
    rotation: float  # rotation part of the return map, radians
    shift: float  # transverse part of the return map
    steps: tuple[tuple[int, Xform], ...]
    crossings: tuple[tuple[int, int], ...]
    start_x: float = 0.0

    @property
    def start_tri(self) -> int:
        return self.steps[0][0]

    def vertices(self, mesh: TriMesh):
        """Developed (x, y, vertex class) of every corner met in one period."""
        out = []
        for t, T in self.steps:
            for k in range(3):
                x, y = xf_apply(T, mesh.pts[t][k])
                out.append((x, y, mesh.vclass[t][k]))
        return out


@dataclass(frozen=True)
class AnnulusReport:
    core: GeodesicPath
    width: float
    embedded: bool
    length: float
    offsets: tuple[float, float]  # strip bounds in the developed frame; the core runs at their mean
    rotation: float
    clearance: float  # distance from the core to the nearest cone point
    direction: tuple[float, float]  # flow direction in the chart of face 0
    frame: Xform  # face 0 chart -> developed frame
    cones: tuple[tuple[str, float, float], ...] = ()  # (label, x mod length, y) of cone points on the strip edges
    corridor: Corridor | None = field(default=None, compare=False, repr=False)


def _annulus_frame(M: ConeSurface):
    """Developed frame at a: origin at a, flow parallel to the segment joining a's face neighbors."""
    f, i = dict(M.cone_labels)["a"]
    F = M.faces[f]
    A, nxt, prv = F.vertices[i], F.vertices[(i + 1) % len(F)], F.vertices[i - 1]
    ux, uy = nxt[0] - prv[0], nxt[1] - prv[1]
    n = math.hypot(ux, uy)
    ux, uy = ux / n, uy / n
    # the offset direction (left normal) must point into the face at a
    nx, ny = -uy, ux
    ang_n = math.atan2(ny, nx) - math.atan2(nxt[1] - A[1], nxt[0] - A[0])
    if ang_n % TWO_PI >= M.corner_angles[(f, i)]:
        ux, uy, nx, ny = -ux, -uy, uy, -ux
    c, s = ux, -uy  # rotation by minus the flow angle
    frame = (c, s, -(c * A[0] - s * A[1]), -(s * A[0] + c * A[1]))
    return f, (ux, uy), (nx, ny), frame


def _corridor(M: ConeSurface, t0: int, T0: Xform, x0: float, s: float, max_length: float) -> Corridor | None:
    """Follow y = s from (x0, s) in triangle t0 (developed by T0) until it closes up with no rotation."""
    mesh = M.mesh
    scale = _mesh_scale(mesh)
    res = _trace(M, t0, T0, (x0, s), (1.0, 0.0), max_length)
    if res.cone_hit is not None:
        return None
    p = xf_apply(xf_inverse(T0), (x0, s))
    for t, T in res.steps[1:]:
        if t != t0:
            continue
        rot = (math.atan2(T[1], T[0]) - math.atan2(T0[1], T0[0]) + PI) % TWO_PI - PI
        if abs(rot) > 1e-6:
            continue
        x1, y1 = xf_apply(T, p)
        if abs(y1 - s) > 1e-7 * scale or x1 - x0 <= 1e-9 * scale:
            continue
        # one period exactly, which ends back at the start
        per = _trace(M, t0, T0, (x0, s), (1.0, 0.0), x1 - x0)
        if per.cone_hit is not None:
            return None
        return Corridor(s, x1 - x0, rot, y1 - s, per.steps, per.crossings, x0)
    return None


def _shifted(M: ConeSurface, cor: Corridor, s: float, max_length: float) -> Corridor | None:
    """Corridor of the parallel line y = s, started inside a triangle of ``cor`` that it crosses."""
    mesh = M.mesh
    best = None
    for t, T in cor.steps:
        V = [xf_apply(T, q) for q in mesh.pts[t]]
        xs = []
        for k in range(3):
            (ax, ay), (bx, by) = V[k], V[(k + 1) % 3]
            if (ay - s) * (by - s) < 0.0:
                xs.append(ax + (s - ay) * (bx - ax) / (by - ay))
        if len(xs) == 2:
            chord = abs(xs[1] - xs[0])
            if best is None or chord > best[0]:
                best = (chord, t, T, 0.5 * (xs[0] + xs[1]))
    if best is None:
        return None
    _, t, T, x = best
    return _corridor(M, t, T, x, s, max_length)


def _past_vertex(M: ConeSurface, cor: Corridor, k: int, y: float, s: float, max_length: float):
    """Corridor at offset s, started in the corner fan of a regular vertex at height y."""
    mesh = M.mesh
    scale = _mesh_scale(mesh)
    for t, T in cor.steps:
        for j in range(3):
            if mesh.vclass[t][j] != k:
                continue
            vx, vy = xf_apply(T, mesh.pts[t][j])
            if abs(vy - y) > 1e-9 * scale:
                continue
            for ct, _, CT in vertex_corners(mesh, t, j, T):
                tri = [xf_apply(CT, q) for q in mesh.pts[ct]]
                if _bary_inside((vx, s), tri, 0.0):
                    return _corridor(M, ct, CT, vx, s, max_length)
    return None


def _strip_edge(M: ConeSurface, start: Corridor, up: bool, max_length: float):
    """Offset of the first cone point met while sliding the line away from ``start``.

    Also returns every corner met on the way and the corridors used.
    """
    mesh = M.mesh
    scale = _mesh_scale(mesh)
    eps = 1e-9 * scale
    sign = 1.0 if up else -1.0
    cor = start
    seen, used = [], [start]
    for _ in range(200):
        s = cor.offset
        verts = cor.vertices(mesh)
        seen.extend(verts)
        ahead = sorted((sign * (y - s), k, y) for _, y, k in verts if sign * (y - s) > eps)
        if not ahead:
            raise NoAnnulusFound("the strip is not bounded by any vertex")
        h = ahead[0][0]
        level = [(k, y) for dh, k, y in ahead if dh <= h + eps]
        if any(mesh.singular[k] for k, _ in level):
            return s + sign * h, seen, used
        # regular vertices only: restart just beyond them
        later = [dh for dh, _, _ in ahead if dh > h + eps]
        delta = 1e-6 * scale if not later else min(1e-6 * scale, 0.5 * (later[0] - h))
        k, y = level[0]
        nxt = _past_vertex(M, cor, k, y, y + sign * delta, max_length)
        if nxt is None or abs(nxt.period - cor.period) > 1e-7 * scale:
            raise NoAnnulusFound("parallel lines stopped closing up before reaching a cone point")
        cor = nxt
        used.append(cor)
    raise NoAnnulusFound("strip sweep did not terminate")


def annulus(M: ConeSurface, tol: float = DEFAULT_TOL.tol_metric) -> AnnulusReport:
    """Maximal flat cylinder of closed geodesics parallel to the side joining c' and c'' at a.

    One side of the strip is the line through a.  The core is the closed
    geodesic halfway across.
    """
    if "a" not in dict(M.cone_labels):
        raise NoAnnulusFound("surface has no cone point labelled a")
    scale = _mesh_scale(M.mesh)
    f, u, normal, frame = _annulus_frame(M)
    s0 = 1e-6 * scale
    A = xf_apply(xf_inverse(frame), (0.0, 0.0))
    t0 = _locate(M, SurfacePoint(f, A[0] + s0 * normal[0], A[1] + s0 * normal[1])).regions[0][0]
    return _sweep(M, t0, frame, s0, u, tol)


def annulus_through(
    M: ConeSurface, p: SurfacePoint, direction: tuple[float, float], tol: float = DEFAULT_TOL.tol_metric
) -> AnnulusReport:
    """Maximal flat cylinder whose closed geodesics run through p in the given direction (p's face chart)."""
    n = math.hypot(*direction)
    ux, uy = direction[0] / n, direction[1] / n
    c, s = ux, -uy
    frame = (c, s, -(c * p.x - s * p.y), -(s * p.x + c * p.y))
    src = _locate(M, p)
    if src.vertex_class is not None:
        raise NoAnnulusFound("the starting point is a vertex")
    t0, T = src.regions[0]
    return _sweep(M, t0, xf_compose(frame, T), 0.0, (ux, uy), tol)


def _sweep(M: ConeSurface, t0: int, T0: Xform, s0: float, u, tol: float) -> AnnulusReport:
    """Slide the closed line through (0, s0) of the developed frame T0 both ways until it meets cone points."""
    mesh = M.mesh
    scale = _mesh_scale(mesh)
    max_length = 40.0 * scale
    start = _corridor(M, t0, T0, 0.0, s0, max_length)
    if start is None:
        raise NoAnnulusFound("lines in the flow direction do not close up")
    lo, seen_lo, used_lo = _strip_edge(M, start, False, max_length)
    hi, seen_hi, used_hi = _strip_edge(M, start, True, max_length)
    width = hi - lo
    mid = 0.5 * (lo + hi)
    core = None
    # halfway if possible; a line that runs along mesh edges is nudged aside
    for nudge in (0.0, 1e-10, -1e-10, 1e-7, -1e-7, 1e-4, -1e-4, 1e-3, -1e-3):
        for cor in sorted(used_lo + used_hi, key=lambda c: abs(c.offset - mid)):
            core = _shifted(M, cor, mid + nudge * width, max_length)
            if core is not None:
                break
        if core is not None:
            break
    if core is None:
        raise NoAnnulusFound("the core line does not close up")
    mid = core.offset
    # cone points met anywhere in the sweep, measured across the flow
    eps = 1e-9 * scale
    cones = [(y, k) for _, y, k in seen_lo + seen_hi + core.vertices(mesh) if mesh.singular[k]]
    clearance = min(abs(y - mid) for y, _ in cones)
    inside = [k for y, k in cones if lo + eps < y < hi - eps]
    embedded = (
        width > 0.0
        and not inside
        and clearance >= 0.5 * width - tol
        and abs(core.rotation) < 1e-9
        and abs(core.shift) < tol
        and core.period * width <= M.area + tol
    )
    names = M.label_of_class
    on_edge = {}
    for y, k in cones:
        if min(abs(y - lo), abs(y - hi)) <= 1e-7 * scale and k not in on_edge:
            on_edge[k] = y
    placed = {}
    for x, y, k in seen_lo + seen_hi + core.vertices(mesh):
        if k in on_edge and k not in placed and abs(y - on_edge[k]) <= 1e-7 * scale:
            placed[k] = (names.get(k, str(k)), (x - core.start_x) % core.period, y)
    p = _to_surface(M, TraceResult(core.start_tri, core.steps[0][1], (core.start_x, mid), 0.0, (), ()))
    path = GeodesicPath(
        core.crossings,
        p,
        p,
        PlanarPoint(core.start_x, mid),
        PlanarPoint(core.start_x + core.period, mid),
        core.period,
        tuple(t for t, _ in core.steps),
    )
    return AnnulusReport(
        path,
        width,
        embedded,
        core.period,
        (lo, hi),
        core.rotation,
        clearance,
        tuple(u),
        T0,
        tuple(sorted(placed.values())),
        core,
    )
