"""Tetrahedra realizing hex spheres, fractional Dehn twists, and planar developments."""

from __future__ import annotations

import math
from itertools import product
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import DegenerateEmbedding, HexSphereError, SolverDiverged, VerificationFailed, WrongStratum
from .geodesics import (
    LABELS4,
    AnnulusReport,
    GeodesicPath,
    SurfacePoint,
    _mesh_scale,
    _shifted,
    _to_surface,
    _vertex_source_from_chart,
    annulus,
    annulus_through,
    cone_chart,
    distance_matrix,
    propagate,
    trace_from_vertex,
    unfold_distance,
)
from .geometry import DEFAULT_TOL, TWO_PI, LabeledPolygon, PlanarPoint
from .moduli import par
from .surface import ConeSurface, EdgePairing, check_gauss_bonnet, xf_apply, xf_inverse

PI = math.pi
EDGES = (("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d"))

# --- tetrahedra --------------------------------------------------------------


@dataclass(frozen=True)
class Tetrahedron:
    vertices: tuple[tuple[float, float, float], ...]
    vertex_labels: tuple[str, ...] = LABELS4
    residual: float = 0.0

    def point(self, label: str) -> np.ndarray:
        return np.asarray(self.vertices[self.vertex_labels.index(label)], dtype=float)

    def edge(self, x: str, y: str) -> float:
        return float(np.linalg.norm(self.point(x) - self.point(y)))

    def edge_lengths(self) -> dict[tuple[str, str], float]:
        return {e: self.edge(*e) for e in EDGES}

    @property
    def volume(self) -> float:
        a, b, c, d = (self.point(x) for x in LABELS4)
        return abs(float(np.dot(b - a, np.cross(c - a, d - a)))) / 6.0

    def angle_sums(self) -> dict[str, float]:
        return _angle_sums(np.array([self.edge(*e) for e in EDGES]))


def _edge_index(x: str, y: str) -> int:
    return EDGES.index(tuple(sorted((x, y))))


def _face_angle(e: np.ndarray, apex: str, p: str, q: str) -> float:
    u, v, w = e[_edge_index(apex, p)], e[_edge_index(apex, q)], e[_edge_index(p, q)]
    c = (u * u + v * v - w * w) / (2.0 * u * v)
    return math.acos(min(1.0, max(-1.0, c)))


def _angle_sums(e: np.ndarray) -> dict[str, float]:
    out = {}
    for x in LABELS4:
        p, q, r = (y for y in LABELS4 if y != x)
        out[x] = _face_angle(e, x, p, q) + _face_angle(e, x, q, r) + _face_angle(e, x, p, r)
    return out


def squared_volume(e: Sequence[float]) -> float:
    """Cayley-Menger squared volume for edges ordered ab, ac, ad, bc, bd, cd."""
    ab, ac, ad, bc, bd, cd = (float(x) ** 2 for x in e)
    cm = np.array(
        [
            [0.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, ab, ac, ad],
            [1.0, ab, 0.0, bc, bd],
            [1.0, ac, bc, 0.0, cd],
            [1.0, ad, bd, cd, 0.0],
        ]
    )
    return float(np.linalg.det(cm)) / 288.0


def _place(e: np.ndarray, order: Sequence[str]) -> dict[str, np.ndarray]:
    """Coordinates from edge lengths: order[0] at the origin, order[1] on +x, order[2] in the xy-plane."""

    def L(x, y):
        return float(e[_edge_index(x, y)])

    p, q, r, s = order
    x_r = (L(p, q) ** 2 + L(p, r) ** 2 - L(q, r) ** 2) / (2.0 * L(p, q))
    y_r = math.sqrt(max(L(p, r) ** 2 - x_r**2, 0.0))
    x_s = (L(p, q) ** 2 + L(p, s) ** 2 - L(q, s) ** 2) / (2.0 * L(p, q))
    y_s = (L(p, r) ** 2 + L(p, s) ** 2 - L(r, s) ** 2 - 2.0 * x_r * x_s) / (2.0 * y_r)
    z_s = math.sqrt(max(L(p, s) ** 2 - x_s**2 - y_s**2, 0.0))
    return {
        p: np.zeros(3),
        q: np.array([L(p, q), 0.0, 0.0]),
        r: np.array([x_r, y_r, 0.0]),
        s: np.array([x_s, y_s, z_s]),
    }


def realize(e: Sequence[float], order=("a", "c", "d", "b"), residual: float = 0.0, tol: float = DEFAULT_TOL.tol_geom):
    """Tetrahedron with the given edge lengths (ab, ac, ad, bc, bd, cd).

    Squared volumes in [-tol, tol) are treated as flat and reported through
    DegenerateEmbedding, which carries the flattened solid.
    """
    e = np.asarray(e, dtype=float)
    v2 = squared_volume(e)
    if v2 < -tol:
        raise SolverDiverged(f"edge lengths violate the tetrahedron inequalities (squared volume {v2:.3e})")
    pts = _place(e, order)
    T = Tetrahedron(tuple(tuple(float(c) for c in pts[x]) for x in LABELS4), LABELS4, residual)
    if v2 < tol:
        raise DegenerateEmbedding(f"flat tetrahedron (squared volume {v2:.3e})", tetrahedron=T)
    return T


def _targets(M: ConeSurface) -> dict[str, float]:
    return {x: M.class_angles[M.class_of(x)] for x in LABELS4}


def tetrahedron_p2(M: ConeSurface, tol: float = DEFAULT_TOL.tol_geom) -> Tetrahedron:
    """Tetrahedron of a stratum-2 hex sphere from its four isosceles triangles."""
    from .geodesics import voronoi_cell_polygon

    P = voronoi_cell_polygon(M, "a")
    if P.n != 2:
        raise WrongStratum(f"the Voronoi cell of a is {P.n}-special, not 2-special")
    R, alpha, beta = P.R, P.alpha, P.beta
    if alpha >= PI / 6.0:
        cd, ab = 2.0 * R * math.cos(alpha), 2.0 * R * math.sin(beta)
    else:
        cd, ab = 2.0 * R * math.cos(beta), 2.0 * R * math.sin(alpha)
    e = np.array([ab, R, R, R, R, cd])
    # face acd lies in the plane; bcd is hinged on cd until b sits at distance ab from a
    return realize(e, ("a", "c", "d", "b"), 0.0, tol)


def _residuals(e: np.ndarray, D: np.ndarray, target: dict[str, float]) -> np.ndarray:
    sums = _angle_sums(e)
    ang = [sums[x] - target[x] for x in ("a", "b", "c")]
    return np.concatenate([ang, e - D])


def tetrahedron_solve(M: ConeSurface, tol: float = DEFAULT_TOL.tol_geom, max_nfev: int = 200) -> Tetrahedron:
    """Edge lengths fitted by Levenberg-Marquardt to the cone angles and cone-point distances."""
    Dm = distance_matrix(M)
    D = np.array([Dm(x, y) for x, y in EDGES])
    target = _targets(M)
    r0 = float(np.mean(D[1:5]))
    e0 = np.array([D[0], r0, r0, r0, r0, D[5]])
    # the symmetric guess fails when the four mixed distances are far apart; then restart from D
    for start in (e0, D):
        fit = least_squares(
            _residuals, start, args=(D, target), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev
        )
        res = float(np.max(np.abs(_residuals(fit.x, D, target))))
        if np.isfinite(res) and res <= 1e-7:
            return realize(fit.x, ("a", "c", "d", "b"), res, tol)
    raise SolverDiverged(f"residual {res:.3e} after {fit.nfev} evaluations")


def edge_agreement(S: Tetrahedron, T: Tetrahedron) -> float:
    """Largest gap between the sorted edge lengths of two tetrahedra."""
    u = sorted(S.edge_lengths().values())
    v = sorted(T.edge_lengths().values())
    return max(abs(x - y) for x, y in zip(u, v))


# boundary surface and its isometry to M


def _geodesic_angles(M: ConeSurface, v: str) -> dict[str, list[float]]:
    """Directions, in the cone chart of v, of the shortest geodesics from v to each other cone point."""
    D = distance_matrix(M)
    chart = cone_chart(M, M.class_of(v), 0.0)
    others = [x for x in LABELS4 if x != v]
    prop = propagate(
        M,
        _vertex_source_from_chart(chart),
        vertex_targets=[M.class_of(x) for x in others],
        collect_all=True,
        radius=max(D(v, x) for x in others) + 1e-6,
    )
    out: dict[str, list[float]] = {x: [] for x in others}
    for h in prop.hits:
        x = M.label_of_class.get(h.target)
        if x in others and h.distance <= D(v, x) + 1e-9:
            th = math.fmod(chart.angle_of(h.image), chart.total)
            th = 0.0 if th >= chart.total - 1e-9 else th
            if all(abs(th - u) > 1e-9 for u in out[x]):
                out[x].append(th)
    missing = [x for x in others if not out[x]]
    if missing:
        raise HexSphereError(f"no geodesic found from {v} to {missing}")
    return out


@dataclass(frozen=True)
class BoundaryMap:
    """The four faces of a tetrahedron as a cone surface, each face tied to a cone chart of M."""

    surface: ConeSurface
    faces: tuple[tuple[str, str, str], ...]
    apex_angle: tuple[float, ...]  # chart direction at faces[i][0] of the edge towards faces[i][1]


def boundary_surface(M: ConeSurface, T: Tetrahedron, tol: float = 1e-6) -> BoundaryMap:
    """Faces ordered to match the orientation of M, with their apex directions at a or b.

    Cone points joined by several shortest geodesics are resolved by picking
    the directions whose angular gaps reproduce the face angles of T.
    """
    e = np.array([T.edge(*x) for x in EDGES])
    at_a = _geodesic_angles(M, "a")
    at_b = _geodesic_angles(M, "b")
    ta = M.class_angles[M.class_of("a")]
    tb = M.class_angles[M.class_of("b")]

    def gap(u, v, total):
        return (v - u) % total

    others = ("b", "c", "d")
    chosen = None
    for combo in product(*(at_a[x] for x in others)):
        ang = dict(zip(others, combo))
        X, Y, Z = sorted(others, key=lambda x: ang[x])
        faces = [("a", X, Y), ("a", Y, Z), ("a", Z, X)]
        if all(abs(gap(ang[f[1]], ang[f[2]], ta) - _face_angle(e, *f)) <= tol for f in faces):
            chosen = (faces, [ang[f[1]] for f in faces], (X, Z, Y))
            break
    if chosen is None:
        raise VerificationFailed("no choice of geodesics at a reproduces the face angles")
    faces, apex, last = chosen
    k = last.index("b")
    fb = last[k:] + last[:k]
    for u in at_b[fb[1]]:
        if any(abs(gap(u, v, tb) - _face_angle(e, *fb)) <= tol for v in at_b[fb[2]]):
            faces.append(fb)
            apex.append(u)
            break
    else:
        raise VerificationFailed(f"face {''.join(fb)} does not match the angle between its edges on M")
    polys = []
    for f in faces:
        u, v = e[_edge_index(f[0], f[1])], e[_edge_index(f[0], f[2])]
        w = _face_angle(e, *f)
        polys.append(LabeledPolygon(((0.0, 0.0), (u, 0.0), (v * math.cos(w), v * math.sin(w))), f))
    pairs = []
    for i, f in enumerate(faces):
        for j in range(3):
            p, q = f[j], f[(j + 1) % 3]
            for i2, g in enumerate(faces):
                for j2 in range(3):
                    if (g[j2], g[(j2 + 1) % 3]) == (q, p) and (i, j) < (i2, j2):
                        pairs.append(((i, j), (i2, j2)))
    labels = []
    for x in LABELS4:
        i = next(i for i, f in enumerate(faces) if x in f)
        labels.append((x, (i, faces[i].index(x))))
    S = ConeSurface(tuple(polys), EdgePairing(tuple(pairs)), tuple(labels))
    return BoundaryMap(S, tuple(faces), tuple(apex))


def map_to_surface(M: ConeSurface, B: BoundaryMap, p: SurfacePoint) -> SurfacePoint:
    """Image in M of a point on the tetrahedron boundary, via the exponential map at the face apex."""
    rho = math.hypot(p.x, p.y)
    if rho == 0.0:
        from .geodesics import vertex_point

        return vertex_point(M, B.faces[p.face][0])
    chart = cone_chart(M, M.class_of(B.faces[p.face][0]), 0.0)
    theta = (B.apex_angle[p.face] + math.atan2(p.y, p.x)) % chart.total
    return _to_surface(M, trace_from_vertex(M, chart, theta, rho))


def _random_face_point(rng: np.random.Generator, B: BoundaryMap) -> SurfacePoint:
    f = int(rng.integers(4))
    V = B.surface.faces[f].vertices
    r1, r2 = rng.random(2)
    s = math.sqrt(r1)
    w = (1.0 - s, s * (1.0 - r2), s * r2)
    x = sum(wi * v.x for wi, v in zip(w, V))
    y = sum(wi * v.y for wi, v in zip(w, V))
    return SurfacePoint(f, x, y)


def intrinsic_check(M: ConeSurface, T: Tetrahedron, pairs: int = 20, seed: int = 0) -> float:
    """Largest gap between boundary distances on T and the distances between the image points on M."""
    B = boundary_surface(M, T)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        p, q = _random_face_point(rng, B), _random_face_point(rng, B)
        dT, _ = unfold_distance(B.surface, p, q)
        dM, _ = unfold_distance(M, map_to_surface(M, B, p), map_to_surface(M, B, q))
        worst = max(worst, abs(dT - dM))
    return worst


def audit_tetrahedron(M: ConeSurface, T: Tetrahedron, pairs: int = 20, seed: int = 0) -> dict[str, float]:
    B = boundary_surface(M, T)
    target = _targets(M)
    sums = T.angle_sums()
    return {
        "gauss_bonnet": check_gauss_bonnet(B.surface),
        "angle_error": max(abs(sums[x] - target[x]) for x in LABELS4),
        "distance_error": intrinsic_check(M, T, pairs, seed),
        "volume": T.volume,
    }


def obj_text(T: Tetrahedron) -> str:
    """Wavefront OBJ with faces wound counterclockwise seen from outside."""
    P = [np.asarray(v, dtype=float) for v in T.vertices]
    lines = [f"# {' '.join(T.vertex_labels)}"]
    lines += [f"v {v[0]!r} {v[1]!r} {v[2]!r}" for v in T.vertices]
    for m in range(4):
        i, j, k = (x for x in range(4) if x != m)
        n = np.cross(P[j] - P[i], P[k] - P[i])
        if np.dot(n, P[m] - P[i]) > 0.0:
            j, k = k, j
        lines.append(f"f {i + 1} {j + 1} {k + 1}")
    return "\n".join(lines) + "\n"


def write_obj(T: Tetrahedron, path: str | Path) -> None:
    Path(path).write_text(obj_text(T))


# --- fractional Dehn twist ----------------------------------------------------


@dataclass(frozen=True)
class TwistResult:
    t: float
    result: ConeSurface
    gamma: GeodesicPath
    shift: float = 0.0  # t times the core length
    report: AnnulusReport | None = None  # the annulus of the result along the same core


@dataclass
class _Piece:
    tri: int
    pts: list[tuple[float, float]]
    tags: list[tuple]  # tag of the edge leaving each vertex: ("E", k) or ("C", chord, side)
    names: list[str]


@dataclass(frozen=True)
class _Chord:
    tri: int
    T: tuple
    x0: float  # developed x where the line enters the triangle, reduced to one period
    x1: float
    p0: tuple[float, float]  # the same points in the triangle chart
    p1: tuple[float, float]


def _chords(M: ConeSurface, cor, s: float, base: float) -> list[_Chord]:
    mesh = M.mesh
    out: list[_Chord] = []
    seen: set[tuple] = set()
    L = cor.period
    for t, T in cor.steps:
        V = [xf_apply(T, q) for q in mesh.pts[t]]
        cuts = []
        for k in range(3):
            (ax, ay), (bx, by) = V[k], V[(k + 1) % 3]
            if (ay - s) * (by - s) < 0.0:
                lam = (s - ay) / (by - ay)
                P, Q = mesh.pts[t][k], mesh.pts[t][(k + 1) % 3]
                cuts.append((ax + lam * (bx - ax), (P[0] + lam * (Q[0] - P[0]), P[1] + lam * (Q[1] - P[1]))))
        if len(cuts) != 2:
            continue
        (xa, pa), (xb, pb) = sorted(cuts)
        key = (t, round(pa[0], 9), round(pa[1], 9))
        if key in seen:
            continue
        seen.add(key)
        shift = math.floor((xa - base) / L + 1e-9) * L
        out.append(_Chord(t, T, xa - shift, xb - shift, pa, pb))
    out.sort(key=lambda c: c.x0)
    return out


def _inside(poly, p, eps) -> bool:
    n = len(poly)
    for i in range(n):
        (ax, ay), (bx, by) = poly[i], poly[(i + 1) % n]
        if (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) < -eps:
            return False
    return True


def _insert_on_edge(pc: _Piece, p, eps) -> int:
    n = len(pc.pts)
    for i in range(n):
        a, b = pc.pts[i], pc.pts[(i + 1) % n]
        if math.hypot(p[0] - a[0], p[1] - a[1]) <= eps:
            return i
        ux, uy = b[0] - a[0], b[1] - a[1]
        L2 = ux * ux + uy * uy
        lam = ((p[0] - a[0]) * ux + (p[1] - a[1]) * uy) / L2
        off = abs(ux * (p[1] - a[1]) - uy * (p[0] - a[0])) / math.sqrt(L2)
        if 0.0 < lam < 1.0 and off <= eps and pc.tags[i][0] == "E":
            pc.pts.insert(i + 1, p)
            pc.tags.insert(i + 1, pc.tags[i])
            pc.names.insert(i + 1, "g")
            return i + 1
    raise HexSphereError("cut point is not on the boundary of its piece")


def _split(pieces: list[_Piece], ch: _Chord, j: int, eps: float) -> None:
    mid = (0.5 * (ch.p0[0] + ch.p1[0]), 0.5 * (ch.p0[1] + ch.p1[1]))
    for n, pc in enumerate(pieces):
        if pc.tri == ch.tri and _inside(pc.pts, mid, eps):
            break
    else:
        raise HexSphereError("chord does not lie in any piece of its triangle")
    _insert_on_edge(pc, ch.p0, eps)
    _insert_on_edge(pc, ch.p1, eps)
    ip, iq = (min(range(len(pc.pts)), key=lambda i: math.dist(pc.pts[i], q)) for q in (ch.p0, ch.p1))
    m = len(pc.pts)

    def run(i, k):
        idx = [i]
        while idx[-1] != k:
            idx.append((idx[-1] + 1) % m)
        return idx

    lower = run(ip, iq)  # p0 .. p1 along the boundary, closed by the chord p1 -> p0
    upper = run(iq, ip)
    lo = _Piece(pc.tri, [pc.pts[i] for i in lower], [pc.tags[i] for i in lower], [pc.names[i] for i in lower])
    up = _Piece(pc.tri, [pc.pts[i] for i in upper], [pc.tags[i] for i in upper], [pc.names[i] for i in upper])
    lo.tags[-1] = ("C", j, "lo")
    up.tags[-1] = ("C", j, "up")
    pieces[n : n + 1] = [lo, up]


def _bank_points(xs: list[float], base: float, L: float, tau: float, eps: float) -> list[float]:
    """Breakpoints of the lower bank: chord ends, plus chord ends of the upper bank moved back by tau."""
    pts = sorted({(x - base) % L for x in xs} | {(x - base - tau) % L for x in xs})
    out = []
    for u in pts:
        if u > L - eps:
            continue
        if not out or u - out[-1] > eps:
            out.append(u)
    return out


def _snap_shift(xs: list[float], L: float, tau: float, eps: float) -> float:
    """Nudge tau so that near-coincident breakpoints coincide exactly."""
    best = None
    for x in xs:
        for y in xs:
            d = (x - tau - y + 0.5 * L) % L - 0.5 * L
            if abs(d) < eps and (best is None or abs(d) < abs(best)):
                best = d
    return tau if best is None else tau + best


def _cut_line(M: ConeSurface, rep: AnnulusReport):
    """A closed line inside the strip passing no mesh vertex closely, with its corridor."""
    mesh = M.mesh
    lo, hi = rep.offsets
    W = hi - lo
    scale = _mesh_scale(mesh)
    cor = rep.corridor
    for frac in (0.45, 0.55, 0.4, 0.6, 0.35, 0.65, 0.3, 0.7, 0.25, 0.75):
        s = lo + frac * W
        c = cor if abs(s - cor.offset) < 1e-15 * scale else _shifted(M, cor, s, 40.0 * scale)
        if c is None or abs(c.period - rep.length) > 1e-7 * scale:
            continue
        if all(abs(y - s) > 1e-6 * W for _, y, _ in c.vertices(mesh)):
            return s, c
    raise HexSphereError("no clean cutting line inside the annulus")


def _reglue(M: ConeSurface, rep: AnnulusReport, tau: float) -> ConeSurface:
    mesh = M.mesh
    scale = _mesh_scale(mesh)
    eps = 1e-10 * scale
    L = rep.length
    lab_y = {lab: y for lab, _, y in rep.cones}
    if "a" in lab_y and abs(lab_y["a"] - rep.offsets[1]) < abs(lab_y["a"] - rep.offsets[0]):
        tau = -tau  # the a-side is above the cut
    s, cor = _cut_line(M, rep)
    chords = _chords(M, cor, s, cor.start_x)
    base = chords[0].x0
    if abs(sum(c.x1 - c.x0 for c in chords) - L) > 1e-7 * scale:
        raise HexSphereError("cut chords do not cover one period of the core")
    xs = [c.x0 for c in chords]
    tau = _snap_shift(xs, L, tau % L, 1e-8 * scale)
    low_pts = _bank_points(xs, base, L, tau, 1e-9 * scale)

    pieces = [
        _Piece(
            t,
            [tuple(p) for p in mesh.pts[t]],
            [("E", k) for k in range(3)],
            [M.faces[f].labels[i] for f, i in mesh.corner[t]],
        )
        for t in range(len(mesh.pts))
    ]
    for j, ch in enumerate(chords):
        _split(pieces, ch, j, eps)
    anchor = next(n for n, pc in enumerate(pieces) if ("C", 0, "lo") in pc.tags)

    # subdivide the banks; each sub-edge is tagged by its start on the lower bank
    for pc in pieces:
        pts, tags, names = [], [], []
        for i, tag in enumerate(pc.tags):
            pts.append(pc.pts[i])
            names.append(pc.names[i])
            if tag[0] != "C":
                tags.append(tag)
                continue
            ch = chords[tag[1]]
            Tinv = xf_inverse(ch.T)
            shift = ch.x0 - xf_apply(ch.T, ch.p0)[0]
            u0, u1 = ch.x0 - base, ch.x1 - base
            if tag[2] == "lo":
                inner = [u for u in low_pts if u0 + eps < u < u1 - eps]
                marks = [u0] + inner + [u1]
                seq = list(reversed(marks))  # the lower piece runs from x1 back to x0
                for a, b in zip(seq, seq[1:]):
                    tags.append(("L", b))
                    if b != seq[-1]:
                        pts.append(xf_apply(Tinv, (base + b - shift, s)))
                        names.append("g")
            else:
                ups = sorted({(u + tau) % L for u in low_pts})
                inner = [u for u in ups if u0 + eps < u < u1 - eps]
                marks = [u0] + inner + [u1]
                for a, b in zip(marks, marks[1:]):
                    tags.append(("U", a))
                    if b != marks[-1]:
                        pts.append(xf_apply(Tinv, (base + b - shift, s)))
                        names.append("g")
        pc.pts, pc.tags, pc.names = pts, tags, names

    faces = [LabeledPolygon(tuple(pc.pts), tuple(pc.names)) for pc in pieces]
    pairs = []
    # mesh edges: pieces of twin triangles meet along the same sub-segments
    by_edge: dict[tuple[int, int], list] = {}
    for f, pc in enumerate(pieces):
        for i, tag in enumerate(pc.tags):
            if tag[0] != "E":
                continue
            k = tag[1]
            P, Q = mesh.pts[pc.tri][k], mesh.pts[pc.tri][(k + 1) % 3]
            ux, uy = Q[0] - P[0], Q[1] - P[1]
            L2 = ux * ux + uy * uy
            a = pc.pts[i]
            lam = ((a[0] - P[0]) * ux + (a[1] - P[1]) * uy) / L2
            by_edge.setdefault((pc.tri, k), []).append((lam, (f, i)))
    for (t, k), segs in by_edge.items():
        t2, k2 = mesh.twin[t][k]
        if (t2, k2) < (t, k):
            continue
        mine = sorted(segs)
        theirs = sorted(by_edge[(t2, k2)], reverse=True)
        if len(mine) != len(theirs):
            raise HexSphereError("twin edges were cut differently")
        pairs.extend((a, b) for (_, a), (_, b) in zip(mine, theirs))
    # the two banks, matched with the shift
    lows = {}
    ups = []
    for f, pc in enumerate(pieces):
        for i, tag in enumerate(pc.tags):
            if tag[0] == "L":
                lows[tag[1]] = (f, i)
            elif tag[0] == "U":
                ups.append((tag[1] % L, (f, i)))
    for u, ref in lows.items():
        want = (u + tau) % L
        d, other = min((abs((v - want + 0.5 * L) % L - 0.5 * L), r) for v, r in ups)
        if d > 1e-7 * scale:
            raise HexSphereError("bank segments do not line up after the shift")
        pairs.append((ref, other))

    labels = []
    for lab, (f, i) in M.cone_labels:
        t, k = next((t, k) for t in range(len(mesh.pts)) for k in range(3) if mesh.corner[t][k] == (f, i))
        P = mesh.pts[t][k]
        ref = next(
            (n, j)
            for n, pc in enumerate(pieces)
            if pc.tri == t
            for j, q in enumerate(pc.pts)
            if math.hypot(q[0] - P[0], q[1] - P[1]) <= eps
        )
        labels.append((lab, ref))
    R = ConeSurface(tuple(faces), EdgePairing(tuple(pairs)), tuple(labels), M.tol_geom)
    # the strip survives the twist; trace it again from just below the cut
    ch = chords[0]
    c, sn = ch.T[0], ch.T[1]
    m = (0.5 * (ch.p0[0] + ch.p1[0]), 0.5 * (ch.p0[1] + ch.p1[1]))
    delta = 0.25 * (s - rep.offsets[0])
    while True:
        q = (m[0] - delta * sn, m[1] - delta * c)
        if _inside(pieces[anchor].pts, q, -eps):
            break
        delta *= 0.5
        if delta < 1e-6 * scale:
            raise HexSphereError("no interior point below the cut")
    return R, annulus_through(R, SurfacePoint(anchor, q[0], q[1]), (c, -sn))


def fractional_dehn_twist(M: ConeSurface, t: float, report: AnnulusReport | None = None) -> TwistResult:
    """Cut M along the core of its annulus and reglue with the a-side moved by t core lengths."""
    rep = annulus(M) if report is None else report
    t = float(t) % 1.0
    if t >= 1.0:
        t = 0.0
    tau = t * rep.length
    R, new_rep = _reglue(M, rep, tau)
    return TwistResult(t, R, rep.core, tau, new_rep)


def parallelogram_twist(rep: AnnulusReport) -> float:
    """Twist fraction that places a half a period away from b along the core."""
    pos = {lab: x for lab, x, _ in rep.cones}
    if "a" not in pos or "b" not in pos:
        raise HexSphereError("a and b must both lie on the edges of the annulus")
    t = ((pos["b"] - pos["a"]) / rep.length + 0.5) % 1.0
    return 0.0 if t >= 1.0 - 1e-12 else t


def parallelogram_defect(z) -> float:
    return z.alpha - (z.phi / 2.0 + PI / 6.0)


def twist_to_parallelogram(M: ConeSurface, tol: float = 1e-6) -> TwistResult:
    rep = annulus(M)
    t = parallelogram_twist(rep)
    if min(t, 1.0 - t) < 1e-12:
        res = TwistResult(0.0, M, rep.core, 0.0, rep)
    else:
        res = fractional_dehn_twist(M, t, rep)
    z = par(res.result).z
    if abs(parallelogram_defect(z)) > tol:
        raise VerificationFailed(
            f"twisted surface has (phi, alpha) = ({z.phi:.9f}, {z.alpha:.9f}), off alpha = phi/2 + pi/6",
            achieved=(z.phi, z.alpha),
        )
    return res


# --- planar developments ------------------------------------------------------


def unfold_pair(M: ConeSurface, seam: tuple) -> list[LabeledPolygon]:
    """Faces 0 and 1 of M laid out in the plane, face 1 attached to face 0 along the given glued edge pair."""
    from .surface import xf_segment

    (f, e), (g, h) = seam
    if f != 0:
        (f, e), (g, h) = (g, h), (f, e)
    P, Q = M.faces[f], M.faces[g]
    T = xf_segment(Q.vertices[h], Q.vertices[(h + 1) % len(Q)], P.vertices[(e + 1) % len(P)], P.vertices[e])
    Qm = LabeledPolygon(tuple(xf_apply(T, v) for v in Q.vertices), Q.labels, Q.tol_geom)
    return [P, Qm]


def developments(M: ConeSurface) -> dict[str, list[LabeledPolygon]]:
    """The faces of M joined across each seam that runs between the two faces."""
    out = {}
    for p, q in M.pairing.pairs:
        if {p[0], q[0]} == {0, 1}:
            out[f"{p[0]}.{p[1]}-{q[0]}.{q[1]}"] = unfold_pair(M, (p, q))
    return out


def svg_text(polygons: Sequence[LabeledPolygon], width: int = 480, margin: int = 24) -> str:
    """SVG drawing of polygons with their vertex labels."""
    xs = [v.x for P in polygons for v in P.vertices]
    ys = [v.y for P in polygons for v in P.vertices]
    span = max(max(xs) - min(xs), max(ys) - min(ys)) or 1.0
    k = (width - 2 * margin) / span
    height = int(math.ceil((max(ys) - min(ys)) * k)) + 2 * margin

    def sx(x):
        return margin + (x - min(xs)) * k

    def sy(y):
        return height - margin - (y - min(ys)) * k

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">'
    ]
    colors = ("#dbe8f5", "#f5e6d3", "#e0f0dc", "#efdcef")
    for n, P in enumerate(polygons):
        pts = " ".join(f"{sx(v.x):.3f},{sy(v.y):.3f}" for v in P.vertices)
        out.append(f'<polygon points="{pts}" fill="{colors[n % len(colors)]}" stroke="#222" stroke-width="1"/>')
    for P in polygons:
        cx = sum(v.x for v in P.vertices) / len(P)
        cy = sum(v.y for v in P.vertices) / len(P)
        for v, lab in zip(P.vertices, P.labels):
            dx, dy = v.x - cx, v.y - cy
            r = math.hypot(dx, dy) or 1.0
            x, y = sx(v.x) + 10 * dx / r, sy(v.y) - 10 * dy / r
            out.append(f'<text x="{x:.3f}" y="{y:.3f}" font-size="11" text-anchor="middle">{lab}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(polygons: Sequence[LabeledPolygon], path: str | Path) -> None:
    Path(path).write_text(svg_text(polygons))
