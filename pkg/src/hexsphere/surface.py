"""Cone surfaces built by isometric edge gluing of planar faces.

Edge ``(f, e)`` of face ``f`` runs from corner ``e`` to corner ``e + 1``.  Two
paired edges are always glued with reversed orientation, so edge
``(v_i -> v_{i+1})`` paired with ``(w_j -> w_{j+1})`` identifies ``v_i`` with
``w_{j+1}`` and ``v_{i+1}`` with ``w_j``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

from .errors import AmbiguousGluing, DegeneratePolygon, HexSphereError, NoValidGluing
from .geometry import (
    DEFAULT_TOL,
    TWO_PI,
    LabeledPolygon,
    PlanarPoint,
    corner_angle,
    cross,
    dist,
    polygon_area,
)
from .special import SpecialPolygon

PI = math.pi
HEX_ANGLES = (4 * PI / 3, 4 * PI / 3, 2 * PI / 3, 2 * PI / 3)

EdgeRef = tuple[int, int]
Corner = tuple[int, int]


def _canon_pair(p: EdgeRef, q: EdgeRef) -> tuple[EdgeRef, EdgeRef]:
    return (p, q) if p <= q else (q, p)


@dataclass(frozen=True)
class EdgePairing:
    """A fixed-point-free involution on face edges, stored as sorted unordered pairs."""

    pairs: tuple[tuple[EdgeRef, EdgeRef], ...]

    def __post_init__(self):
        canon = []
        for p, q in self.pairs:
            p = (int(p[0]), int(p[1]))
            q = (int(q[0]), int(q[1]))
            if p == q:
                raise HexSphereError(f"edge {p} paired with itself")
            canon.append(_canon_pair(p, q))
        canon.sort()
        object.__setattr__(self, "pairs", tuple(canon))
        seen: set[EdgeRef] = set()
        for p, q in canon:
            for r in (p, q):
                if r in seen:
                    raise HexSphereError(f"edge {r} appears in two pairs")
                seen.add(r)

    @cached_property
    def mate(self) -> dict[EdgeRef, EdgeRef]:
        m = {}
        for p, q in self.pairs:
            m[p] = q
            m[q] = p
        return m

    def __len__(self) -> int:
        return len(self.pairs)


class _UnionFind:
    def __init__(self, items: Iterable):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            if ry < rx:
                rx, ry = ry, rx
            self.parent[ry] = rx


def corner_classes(sizes: list[int], pairs: Iterable[tuple[EdgeRef, EdgeRef]]) -> list[tuple[Corner, ...]]:
    """Orbits of face corners under the identifications induced by the pairing."""
    corners = [(f, i) for f, m in enumerate(sizes) for i in range(m)]
    uf = _UnionFind(corners)
    for (f, e), (g, h) in pairs:
        mf, mg = sizes[f], sizes[g]
        uf.union((f, e), (g, (h + 1) % mg))
        uf.union((f, (e + 1) % mf), (g, h))
    groups: dict[Corner, list[Corner]] = {}
    for c in corners:
        groups.setdefault(uf.find(c), []).append(c)
    return sorted(tuple(sorted(g)) for g in groups.values())


@dataclass(frozen=True)
class ConeSurface:
    """Planar faces glued along an edge pairing.

    ``cone_labels`` maps a label to one representative corner of the labeled
    vertex class.  When omitted, singular classes are labeled automatically:
    4*pi/3 classes as a, b and 2*pi/3 classes as c, d, e, ...
    """

    faces: tuple[LabeledPolygon, ...]
    pairing: EdgePairing
    cone_labels: tuple[tuple[str, Corner], ...] = ()
    tol_geom: float = field(default=DEFAULT_TOL.tol_geom, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "faces", tuple(self.faces))
        if not isinstance(self.pairing, EdgePairing):
            object.__setattr__(self, "pairing", EdgePairing(tuple(self.pairing)))
        sizes = [len(P) for P in self.faces]
        all_edges = {(f, e) for f, m in enumerate(sizes) for e in range(m)}
        used = set(self.pairing.mate)
        if used != all_edges:
            missing = sorted(all_edges - used)
            extra = sorted(used - all_edges)
            raise HexSphereError(f"pairing is not a perfect matching (unpaired {missing}, unknown {extra})")
        for p, q in self.pairing.pairs:
            lp = self.faces[p[0]].edge_length(p[1])
            lq = self.faces[q[0]].edge_length(q[1])
            if abs(lp - lq) > self.tol_geom * max(1.0, lp):
                raise HexSphereError(f"paired edges {p} and {q} differ in length ({lp} vs {lq})")
        labels = dict(self.cone_labels) if self.cone_labels else self._auto_labels()
        for lab, c in labels.items():
            if c not in self.corner_class:
                raise HexSphereError(f"label {lab!r} refers to unknown corner {c}")
        object.__setattr__(self, "cone_labels", tuple(sorted((k, tuple(v)) for k, v in labels.items())))

    # combinatorics -------------------------------------------------------

    @cached_property
    def classes(self) -> list[tuple[Corner, ...]]:
        return corner_classes([len(P) for P in self.faces], self.pairing.pairs)

    @cached_property
    def corner_class(self) -> dict[Corner, int]:
        return {c: k for k, cl in enumerate(self.classes) for c in cl}

    @cached_property
    def corner_angles(self) -> dict[Corner, float]:
        return {(f, i): corner_angle(P, i) for f, P in enumerate(self.faces) for i in range(len(P))}

    @cached_property
    def class_angles(self) -> list[float]:
        ang = self.corner_angles
        return [math.fsum(ang[c] for c in cl) for cl in self.classes]

    def is_singular(self, k: int, tol: float | None = None) -> bool:
        tol = self.tol_geom if tol is None else tol
        return abs(self.class_angles[k] - TWO_PI) > max(tol, 1e-7)

    @cached_property
    def label_of_class(self) -> dict[int, str]:
        return {self.corner_class[c]: lab for lab, c in self.cone_labels}

    def class_of(self, label: str) -> int:
        for lab, c in self.cone_labels:
            if lab == label:
                return self.corner_class[c]
        raise KeyError(label)

    def labels(self) -> dict[str, int]:
        return {lab: self.corner_class[c] for lab, c in self.cone_labels}

    def _auto_labels(self) -> dict[str, Corner]:
        names = {"big": iter("ab"), "small": iter("cdefgh")}
        out: dict[str, Corner] = {}
        extra = 0
        for k, cl in enumerate(self.classes):
            if not self.is_singular(k):
                continue
            th = self.class_angles[k]
            key = "big" if abs(th - 4 * PI / 3) < 1e-6 else "small" if abs(th - 2 * PI / 3) < 1e-6 else None
            lab = next(names[key], None) if key else None
            if lab is None:
                lab = f"p{extra}"
                extra += 1
            out[lab] = cl[0]
        return out

    @property
    def n_vertices(self) -> int:
        return len(self.classes)

    @property
    def n_edges(self) -> int:
        return len(self.pairing)

    @property
    def area(self) -> float:
        return math.fsum(polygon_area(P) for P in self.faces)

    @cached_property
    def cut_seams(self) -> frozenset[tuple[EdgeRef, EdgeRef]]:
        """Pairs folding two consecutive edges of one face onto each other."""
        out = set()
        for p, q in self.pairing.pairs:
            if p[0] == q[0]:
                m = len(self.faces[p[0]])
                if (p[1] + 1) % m == q[1] or (q[1] + 1) % m == p[1]:
                    out.add((p, q))
        return frozenset(out)

    @cached_property
    def mesh(self) -> "TriMesh":
        return TriMesh.build(self)

    def point_of(self, corner: Corner) -> PlanarPoint:
        return self.faces[corner[0]].vertices[corner[1]]

    def with_labels(self, labels: Mapping[str, Corner]) -> "ConeSurface":
        return ConeSurface(self.faces, self.pairing, tuple(labels.items()), self.tol_geom)

    def swapped(self, x: str = "a", y: str = "b") -> "ConeSurface":
        lab = dict(self.cone_labels)
        lab[x], lab[y] = lab[y], lab[x]
        return self.with_labels(lab)


# audits -------------------------------------------------------------------


def euler_characteristic(M: ConeSurface) -> int:
    return M.n_vertices - M.n_edges + len(M.faces)


def check_gauss_bonnet(M: ConeSurface, corner_offsets: Mapping[Corner, float] | None = None) -> float:
    """|sum over classes of (2pi - theta) - 2pi chi|.

    Coordinates alone cannot violate the identity, since face angle sums are
    fixed by the vertex count; ``corner_offsets`` lets an audit inject a
    corrupted angle table.
    """
    ang = dict(M.corner_angles)
    for c, dv in (corner_offsets or {}).items():
        ang[c] += dv
    total = math.fsum(TWO_PI - math.fsum(ang[c] for c in cl) for cl in M.classes)
    return abs(total - TWO_PI * euler_characteristic(M))


def cone_points(M: ConeSurface) -> list[tuple[str, float, float]]:
    out = []
    lab = M.label_of_class
    for k in range(M.n_vertices):
        if M.is_singular(k):
            th = M.class_angles[k]
            out.append((lab.get(k, f"v{k}"), th, TWO_PI - th))
    return sorted(out)


def is_hex_sphere(M: ConeSurface, tol: float = 1e-9) -> bool:
    if euler_characteristic(M) != 2:
        return False
    angs = sorted(th for _, th, _ in cone_points(M))
    want = sorted(HEX_ANGLES)
    return len(angs) == 4 and all(abs(x - y) <= tol for x, y in zip(angs, want))


@dataclass(frozen=True)
class SeamGraph:
    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    degree: dict[int, int]
    connected: bool


def seam_graph(M: ConeSurface) -> SeamGraph:
    """Quotient 1-complex of glued edges, excluding cut seams."""
    edges = []
    for p, q in M.pairing.pairs:
        if (p, q) in M.cut_seams:
            continue
        f, e = p
        m = len(M.faces[f])
        u = M.corner_class[(f, e)]
        v = M.corner_class[(f, (e + 1) % m)]
        edges.append((u, v))
    verts = sorted({x for e in edges for x in e})
    deg = {v: 0 for v in verts}
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    uf = _UnionFind(verts)
    for u, v in edges:
        uf.union(u, v)
    connected = len({uf.find(v) for v in verts}) <= 1
    return SeamGraph(tuple(verts), tuple(edges), deg, connected)


# gluing -------------------------------------------------------------------


def _copy_labels(P: SpecialPolygon) -> tuple[tuple[str, ...], tuple[str, ...]]:
    la = P.shape.labels
    lb = ("b",) + tuple(s + "_B" for s in la[1:])
    return la, lb


def hex_faces(P: SpecialPolygon) -> tuple[LabeledPolygon, LabeledPolygon]:
    la, lb = _copy_labels(P)
    A = P.shape.relabeled(la)
    B = P.shape.relabeled(lb)
    return A, B


# Frozen pairings found by ``search_gluing`` (face 0 = P_A, face 1 = P_B).
GOLDEN_PAIRINGS: dict[int, tuple[tuple[EdgeRef, EdgeRef], ...]] = {
    2: (((0, 0), (0, 3)), ((0, 1), (1, 1)), ((0, 2), (1, 2)), ((1, 0), (1, 3))),
    3: (((0, 0), (0, 4)), ((0, 1), (0, 3)), ((0, 2), (1, 2)), ((1, 0), (1, 4)), ((1, 1), (1, 3))),
    4: (
        ((0, 0), (0, 5)),
        ((0, 1), (0, 4)),
        ((0, 2), (1, 2)),
        ((0, 3), (1, 3)),
        ((1, 0), (1, 5)),
        ((1, 1), (1, 4)),
    ),
}


def _hex_labels(n: int) -> dict[str, Corner]:
    # c is the class of c' in the first copy, d the class of c' in the second
    return {"a": (0, 0), "b": (1, 0), "c": (0, 1), "d": (1, 1)}


def glue_hex(P: SpecialPolygon, tol: float = DEFAULT_TOL.tol_geom) -> ConeSurface:
    A, B = hex_faces(P)
    try:
        M = ConeSurface((A, B), EdgePairing(GOLDEN_PAIRINGS[P.n]), tuple(_hex_labels(P.n).items()), tol)
    except HexSphereError as exc:
        raise NoValidGluing(f"golden pattern for n={P.n} does not apply: {exc}") from exc
    if not is_hex_sphere(M, 1e-9):
        raise NoValidGluing(f"golden pattern for n={P.n} does not produce a hex sphere")
    return M


def _matchings(edges: list[EdgeRef], compatible) -> Iterable[list[tuple[EdgeRef, EdgeRef]]]:
    if not edges:
        yield []
        return
    first, rest = edges[0], edges[1:]
    for j, other in enumerate(rest):
        if not compatible(first, other):
            continue
        remaining = rest[:j] + rest[j + 1 :]
        for tail in _matchings(remaining, compatible):
            yield [(first, other)] + tail


def enumerate_gluings(P: SpecialPolygon, tol: float = DEFAULT_TOL.tol_geom) -> list[EdgePairing]:
    """All length-compatible orientation-reversing pairings of two copies of P giving a hex sphere."""
    A, B = hex_faces(P)
    faces = (A, B)
    sizes = [len(A), len(B)]
    edges = [(f, e) for f in range(2) for e in range(sizes[f])]
    lengths = {(f, e): faces[f].edge_length(e) for f, e in edges}
    scale = max(lengths.values())

    def compatible(p, q):
        return abs(lengths[p] - lengths[q]) <= tol * max(1.0, scale)

    angles = {(f, i): corner_angle(faces[f], i) for f in range(2) for i in range(sizes[f])}
    found = []
    want = sorted(HEX_ANGLES)
    for match in _matchings(edges, compatible):
        classes = corner_classes(sizes, match)
        if len(classes) - len(match) + 2 != 2:
            continue
        thetas = [math.fsum(angles[c] for c in cl) for cl in classes]
        sing = sorted(t for t in thetas if abs(t - TWO_PI) > 1e-7)
        if len(sing) == 4 and all(abs(x - y) <= 1e-7 for x, y in zip(sing, want)):
            found.append(EdgePairing(tuple(match)))
    return found


def search_gluing(P: SpecialPolygon, tol: float = DEFAULT_TOL.tol_geom) -> EdgePairing:
    found = enumerate_gluings(P, tol)
    if not found:
        raise NoValidGluing(f"no pairing of two copies of the n={P.n} polygon gives a hex sphere")
    if len(found) > 1:
        raise AmbiguousGluing(f"{len(found)} valid pairings", candidates=found)
    return found[0]


def double_polygon(Q: LabeledPolygon) -> ConeSurface:
    """Glue Q to its mirror image along corresponding edges."""
    m = len(Q)
    if m < 3:
        raise DegeneratePolygon("need at least 3 vertices")
    mirror_idx = [(-j) % m for j in range(m)]
    verts = tuple(PlanarPoint(-Q.vertices[i].x, Q.vertices[i].y) for i in mirror_idx)
    labels = tuple(Q.labels[i] + "*" for i in mirror_idx)
    Qm = LabeledPolygon(verts, labels, Q.tol_geom)
    pairs = tuple(((0, i), (1, (-i - 1) % m)) for i in range(m))
    return ConeSurface((Q, Qm), EdgePairing(pairs), (), Q.tol_geom)


# triangle mesh used by the geodesic engine --------------------------------


def _in_triangle_closed(p, a, b, c, eps) -> bool:
    d1 = cross(b[0] - a[0], b[1] - a[1], p[0] - a[0], p[1] - a[1])
    d2 = cross(c[0] - b[0], c[1] - b[1], p[0] - b[0], p[1] - b[1])
    d3 = cross(a[0] - c[0], a[1] - c[1], p[0] - c[0], p[1] - c[1])
    return d1 >= -eps and d2 >= -eps and d3 >= -eps


def triangulate(P: LabeledPolygon) -> list[tuple[int, int, int]]:
    """Ear clipping that prefers well-shaped ears and never clips a straight corner."""
    idx = list(range(len(P)))
    V = P.vertices
    scale = max(dist(V[0], v) for v in V) or 1.0
    eps = 1e-12 * scale * scale
    tris = []
    while len(idx) > 3:
        best, best_q = None, -1.0
        m = len(idx)
        for j in range(m):
            i0, i1, i2 = idx[j - 1], idx[j], idx[(j + 1) % m]
            a, b, c = V[i0], V[i1], V[i2]
            turn = cross(b[0] - a[0], b[1] - a[1], c[0] - b[0], c[1] - b[1])
            if turn <= eps:
                continue
            if any(_in_triangle_closed(V[k], a, b, c, eps) for k in idx if k not in (i0, i1, i2)):
                continue
            q = _min_angle(a, b, c)
            if q > best_q:
                best, best_q = j, q
        if best is None:
            raise DegeneratePolygon("ear clipping failed")
        m = len(idx)
        tris.append((idx[best - 1], idx[best], idx[(best + 1) % m]))
        del idx[best]
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def _min_angle(a, b, c) -> float:
    def ang(p, q, r):
        ux, uy = p[0] - q[0], p[1] - q[1]
        wx, wy = r[0] - q[0], r[1] - q[1]
        return abs(math.atan2(cross(ux, uy, wx, wy), ux * wx + uy * wy))

    return min(ang(b, a, c), ang(a, b, c), ang(a, c, b))


Xform = tuple[float, float, float, float]  # p -> R(c, s) p + (tx, ty)

IDENTITY: Xform = (1.0, 0.0, 0.0, 0.0)


def xf_apply(T: Xform, p) -> tuple[float, float]:
    c, s, tx, ty = T
    return (c * p[0] - s * p[1] + tx, s * p[0] + c * p[1] + ty)


def xf_compose(T: Xform, U: Xform) -> Xform:
    """T after U."""
    c1, s1, x1, y1 = T
    c2, s2, x2, y2 = U
    return (c1 * c2 - s1 * s2, s1 * c2 + c1 * s2, c1 * x2 - s1 * y2 + x1, s1 * x2 + c1 * y2 + y1)


def xf_inverse(T: Xform) -> Xform:
    c, s, tx, ty = T
    return (c, -s, -(c * tx + s * ty), s * tx - c * ty)


def xf_segment(p0, p1, q0, q1) -> Xform:
    """Rotation + translation taking segment p0->p1 onto q0->q1 (midpoints matched)."""
    a = math.atan2(q1[1] - q0[1], q1[0] - q0[0]) - math.atan2(p1[1] - p0[1], p1[0] - p0[0])
    c, s = math.cos(a), math.sin(a)
    mp = ((p0[0] + p1[0]) / 2, (p0[1] + p1[1]) / 2)
    mq = ((q0[0] + q1[0]) / 2, (q0[1] + q1[1]) / 2)
    return (c, s, mq[0] - (c * mp[0] - s * mp[1]), mq[1] - (s * mp[0] + c * mp[1]))


def xf_rotation_about(theta: float, center) -> Xform:
    c, s = math.cos(theta), math.sin(theta)
    return (c, s, center[0] - (c * center[0] - s * center[1]), center[1] - (s * center[0] + c * center[1]))


@dataclass
class TriMesh:
    """Triangles of all faces with twin links and chart-change transforms."""

    pts: list[tuple[tuple[float, float], ...]]
    face: list[int]
    corner: list[tuple[Corner, Corner, Corner]]
    vclass: list[tuple[int, int, int]]
    twin: list[list[tuple[int, int]]]
    xform: list[list[Xform]]  # maps twin chart -> own chart
    face_edge: list[list[int | None]]
    angle: list[tuple[float, float, float]]
    class_angle: list[float]
    singular: list[bool]
    by_face: dict[int, list[int]]

    @classmethod
    def build(cls, M: ConeSurface) -> "TriMesh":
        pts, face, corner, vclass, fedge, angle = [], [], [], [], [], []
        by_face: dict[int, list[int]] = {}
        edge_owner: dict[tuple[int, int, int], tuple[int, int]] = {}
        for f, P in enumerate(M.faces):
            m = len(P)
            for tri in triangulate(P):
                t = len(pts)
                by_face.setdefault(f, []).append(t)
                pts.append(tuple((P.vertices[i].x, P.vertices[i].y) for i in tri))
                face.append(f)
                corner.append(tuple((f, i) for i in tri))
                vclass.append(tuple(M.corner_class[(f, i)] for i in tri))
                fe = []
                for k in range(3):
                    i, j = tri[k], tri[(k + 1) % 3]
                    edge_owner[(f, i, j)] = (t, k)
                    fe.append(i if (i + 1) % m == j else None)
                fedge.append(fe)
                angle.append(tuple(_tri_angle(pts[t], k) for k in range(3)))
        twin = [[(-1, -1)] * 3 for _ in pts]
        xform = [[IDENTITY] * 3 for _ in pts]
        for (f, i, j), (t, k) in edge_owner.items():
            P = M.faces[f]
            if fedge[t][k] is None:
                t2, k2 = edge_owner[(f, j, i)]
                twin[t][k] = (t2, k2)
                continue
            g, h = M.pairing.mate[(f, i)]
            Q = M.faces[g]
            hq = (h + 1) % len(Q)
            t2, k2 = edge_owner[(g, h, hq)]
            twin[t][k] = (t2, k2)
            # other copy runs w_h -> w_{h+1}; it lands on v_j -> v_i
            xform[t][k] = xf_segment(Q.vertices[h], Q.vertices[hq], P.vertices[j], P.vertices[i])
        sing = [M.is_singular(k) for k in range(M.n_vertices)]
        return cls(pts, face, corner, vclass, twin, xform, fedge, angle, list(M.class_angles), sing, by_face)

    def __len__(self) -> int:
        return len(self.pts)


def _tri_angle(p, k) -> float:
    a, b, c = p[k], p[(k + 1) % 3], p[(k + 2) % 3]
    ux, uy = b[0] - a[0], b[1] - a[1]
    wx, wy = c[0] - a[0], c[1] - a[1]
    return abs(math.atan2(cross(ux, uy, wx, wy), ux * wx + uy * wy))


# serialization ------------------------------------------------------------


def surface_to_dict(M: ConeSurface) -> dict:
    return {
        "faces": [
            {"id": f, "vertices": [[v.x, v.y] for v in P.vertices], "labels": list(P.labels)}
            for f, P in enumerate(M.faces)
        ],
        "pairing": [[list(p), list(q)] for p, q in M.pairing.pairs],
        "cone_labels": {lab: list(c) for lab, c in M.cone_labels},
    }


def surface_from_dict(doc: dict, tol: float = DEFAULT_TOL.tol_geom) -> ConeSurface:
    try:
        faces_doc = sorted(doc["faces"], key=lambda d: int(d["id"]))
        if [int(d["id"]) for d in faces_doc] != list(range(len(faces_doc))):
            raise HexSphereError("face ids must be 0..F-1")
        faces = tuple(
            LabeledPolygon(tuple((float(x), float(y)) for x, y in d["vertices"]), tuple(d["labels"]), tol)
            for d in faces_doc
        )
        pairs = tuple(((int(p[0]), int(p[1])), (int(q[0]), int(q[1]))) for p, q in doc["pairing"])
        labels = tuple((str(k), (int(v[0]), int(v[1]))) for k, v in doc.get("cone_labels", {}).items())
    except (KeyError, TypeError, ValueError) as exc:
        raise HexSphereError(f"malformed surface document: {exc}") from exc
    return ConeSurface(faces, EdgePairing(pairs), labels, tol)


def save_surface(M: ConeSurface, path: str | Path) -> None:
    Path(path).write_text(json.dumps(surface_to_dict(M), indent=2) + "\n")


def load_surface(path: str | Path, tol: float = DEFAULT_TOL.tol_geom) -> ConeSurface:
    return surface_from_dict(json.loads(Path(path).read_text()), tol)
