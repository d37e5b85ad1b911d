"""One test per acceptance criterion, each printing a PASS/FAIL line at the stated tolerance."""

from __future__ import annotations

import math
import random

import numpy as np

from conftest import random_point
from hexsphere.constructions import (
    intrinsic_check,
    parallelogram_defect,
    tetrahedron_p2,
    tetrahedron_solve,
    twist_to_parallelogram,
)
from hexsphere.errors import DegenerateEmbedding
from hexsphere.geodesics import annulus, distance_matrix, unfold_distance, voronoi_bisector, voronoi_cell_polygon
from hexsphere.geometry import dist
from hexsphere.moduli import (
    YPoint,
    ZHatPoint,
    ZPoint,
    degeneration_probe,
    grid,
    in_Y,
    lambda_,
    par,
    par_inverse,
    project_Z,
    stratum,
    z_distance,
)
from hexsphere.oracle import graph_distance
from hexsphere.special import build_special, classify_special, normalize_unit_area, validate_params
from hexsphere.surface import (
    GOLDEN_PAIRINGS,
    EdgePairing,
    check_gauss_bonnet,
    cone_points,
    euler_characteristic,
    glue_hex,
    search_gluing,
)

PI = math.pi
HEX = sorted([4 * PI / 3, 4 * PI / 3, 2 * PI / 3, 2 * PI / 3])


def stratum_params(n: int, N: int) -> list[tuple[float, float]]:
    """Valid (phi, alpha) for stratum n: an N x N grid for n = 4, N * N points along the line otherwise."""
    if n == 4:
        pts = [((2 * PI / 3) * i / N, (PI / 2) * j / N) for i in range(1, N) for j in range(1, N)]
        return [p for p in pts if validate_params(4, *p)]
    m = N * N
    if n == 2:
        return [(0.0, (PI / 3) * (k + 0.5) / m) for k in range(m)]
    return [(phi, phi - PI / 6) for phi in (PI / 6 + (PI / 2) * (k + 0.5) / m for k in range(m))]


def random_params(n: int, rng: random.Random) -> tuple[float, float]:
    if n == 2:
        return 0.0, rng.uniform(0.01, PI / 3 - 0.01)
    if n == 3:
        phi = rng.uniform(PI / 6 + 0.01, 2 * PI / 3 - 0.01)
        return phi, phi - PI / 6
    while True:
        phi, alpha = rng.uniform(0.01, 2 * PI / 3 - 0.01), rng.uniform(0.01, PI / 2 - 0.01)
        if validate_params(4, phi, alpha) and min(alpha - (phi - PI / 6), phi + PI / 3 - alpha) > 0.01:
            return phi, alpha


def test_criterion_01_parametrization_round_trip(verdict):
    pts = grid(30)
    worst = 0.0
    mismatched = 0
    for p in pts:
        q = par(par_inverse(p))
        worst = max(worst, abs(q.z.phi - p.z.phi), abs(q.z.alpha - p.z.alpha))
        if q.sheet != p.sheet or stratum(q.z) != stratum(p.z):
            mismatched += 1
    keys = {(p.sheet, round(p.z.phi, 12), round(p.z.alpha, 12)) for p in pts}
    ok = worst < 1e-5 and mismatched == 0 and len(keys) == len(pts)
    verdict(1, ok, f"{len(pts)} points, max |dphi|,|dalpha| = {worst:.2e}, sheet/stratum mismatches = {mismatched}")


def test_criterion_02_voronoi_round_trip(verdict):
    worst = 0.0
    count = 0
    wrong_n = 0
    for n in (2, 3, 4):
        for phi, alpha in stratum_params(n, 20):
            got = classify_special(voronoi_cell_polygon(glue_hex(build_special(n, phi, alpha)), "a"))
            wrong_n += got[0] != n
            worst = max(worst, abs(got[1] - phi), abs(got[2] - alpha))
            count += 1
    rng = random.Random(2)
    seam = 0.0
    samples = 0
    for n in (2, 3, 4):
        for k in range(4):
            M = glue_hex(build_special(n, *random_params(n, rng)))
            for s in voronoi_bisector(M, 25, seed=k):
                seam = max(seam, s.seam_distance if s.seam is not None and s.seam not in M.cut_seams else math.inf)
                samples += 1
    ok = worst < 1e-5 and wrong_n == 0 and seam < 1e-6
    verdict(
        2,
        ok,
        f"{count} polygons, max angle error = {worst:.2e}, wrong stratum = {wrong_n}; "
        f"{samples} bisector samples, max distance to seam graph = {seam:.2e}",
    )


def test_criterion_03_gluing_oracle(verdict):
    rng = random.Random(3)
    failures = []
    gb = 0.0
    for n in (2, 3, 4):
        for _ in range(50):
            P = build_special(n, *random_params(n, rng))
            found = search_gluing(P)
            M = glue_hex(P)
            angles = sorted(th for _, th, _ in cone_points(M))
            gb = max(gb, check_gauss_bonnet(M))
            if (
                found != EdgePairing(GOLDEN_PAIRINGS[n])
                or euler_characteristic(M) != 2
                or not np.allclose(angles, HEX, atol=1e-9)
            ):
                failures.append((n, P.phi, P.alpha))
    verdict(3, not failures and gb < 1e-9, f"150 draws, failures = {len(failures)}, max Gauss-Bonnet residual = {gb:.1e}")


def test_criterion_04_equidistance_iff_stratum_two(verdict):
    rng = random.Random(4)
    s2 = max(
        abs(D("a", "c") - D("b", "c"))
        for D in (distance_matrix(glue_hex(build_special(2, 0.0, rng.uniform(0.01, PI / 3 - 0.01)))) for _ in range(50))
    )
    gaps = []
    for _ in range(100):
        n = rng.choice((3, 4))
        D = distance_matrix(glue_hex(build_special(n, *random_params(n, rng))))
        gaps.append(abs(D("a", "c") - D("b", "c")))
    ok = s2 < 1e-9 and min(gaps) > 1e-4
    verdict(4, ok, f"stratum 2 max |d(a,c)-d(b,c)| = {s2:.1e}; strata 3,4 min = {min(gaps):.2e}")


def test_criterion_05_tetrahedron(verdict):
    iso = 0.0
    intrinsic = 0.0
    for j in range(1, 10):
        M = par_inverse(ZHatPoint("+", ZPoint(0.0, (PI / 3) * j / 10)))
        try:
            T = tetrahedron_p2(M)
        except DegenerateEmbedding as exc:
            # alpha = pi/6 doubles a perfect parallelogram; its tetrahedron is flat
            T = exc.tetrahedron
        for y in "abcd":
            sides = sorted(T.edge(p, q) for p, q in ((u, v) for u in "abcd" for v in "abcd" if u < v and y not in (u, v)))
            iso = max(iso, min(sides[1] - sides[0], sides[2] - sides[1]))
        intrinsic = max(intrinsic, intrinsic_check(M, T, pairs=20, seed=j))
    residual = 0.0
    flat_off_locus = []
    flat = 0
    diverged = []
    total = 0
    for p in grid(10):
        if stratum(p.z) != 4:
            continue
        total += 1
        try:
            T = tetrahedron_solve(par_inverse(p))
            residual = max(residual, T.residual)
        except DegenerateEmbedding:
            flat += 1
            if abs(parallelogram_defect(p.z)) > 1e-9:
                flat_off_locus.append(p)
        except Exception:
            diverged.append(p)
    ok = iso < 1e-9 and intrinsic < 1e-6 and residual < 1e-7 and not flat_off_locus and not diverged
    verdict(
        5,
        ok,
        f"isosceles gap = {iso:.1e}, intrinsic error = {intrinsic:.1e}; "
        f"solver on {total} grid points: max residual = {residual:.1e}, flat = {flat} "
        f"(off locus {len(flat_off_locus)}), diverged = {len(diverged)}",
    )


def test_criterion_06_annulus(verdict):
    bad = []
    rot = 0.0
    narrow = math.inf
    pts = grid(12)
    for p in pts:
        rep = annulus(par_inverse(p))
        rot = max(rot, abs(rep.rotation))
        narrow = min(narrow, rep.width)
        if not (rep.embedded and rep.width > 0 and rep.clearance >= rep.width / 2 - 1e-9):
            bad.append(p)
    ok = not bad and rot < 1e-9
    verdict(6, ok, f"{len(pts)} surfaces, failures = {len(bad)}, min width = {narrow:.3e}, max rotation = {rot:.1e}")


def test_criterion_07_twist(verdict):
    defect = 0.0
    failures = 0
    for j in range(1, 20):
        try:
            res = twist_to_parallelogram(par_inverse(ZHatPoint("+", ZPoint(0.0, (PI / 3) * j / 20))))
            defect = max(defect, abs(parallelogram_defect(par(res.result).z)))
        except Exception:
            failures += 1
    t_max = 0.0
    for phi in (0.0, 0.3, 0.7, 1.1, 1.5, 1.9):
        for sheet in ("+", "-"):
            res = twist_to_parallelogram(par_inverse(ZHatPoint(sheet, ZPoint(phi, phi / 2 + PI / 6))))
            t_max = max(t_max, min(res.t, 1.0 - res.t))
    ok = failures == 0 and defect < 1e-6 and t_max < 1e-6
    verdict(7, ok, f"19 stratum-2 inputs, failures = {failures}, max defect = {defect:.1e}; locus inputs max |t| = {t_max:.1e}")


def test_criterion_08_degenerations(verdict):
    # small parameter: a and b approach each other
    ns = list(range(1, 65))
    rep = degeneration_probe([ZHatPoint("+", ZPoint(0.0, (PI / 3) / n)) for n in ns[1:]])
    d_ab = rep.series["d_ab"]
    part1 = rep.trends["d_ab"] == "decreasing" and d_ab[-1] < 0.05
    # corner (2pi/3, pi/2): d(a,d)/d(a,c) blows up
    first = None
    for k in range(2, 20):
        delta = 10 ** (-k / 2)
        p = ZHatPoint("+", ZPoint(2 * PI / 3 - delta, PI / 2 - delta / 2))
        D = distance_matrix(par_inverse(p))
        if D("a", "d") / D("a", "c") > 1e3:
            first = math.hypot(delta, delta / 2)
            break
    part2 = first is not None and first > 1e-4
    # big hole: merging a and b gives the unit-area double equilateral triangle
    side = math.sqrt(2 / math.sqrt(3))
    D = distance_matrix(par_inverse(ZHatPoint("+", ZPoint(0.0, (PI / 3) / 128))))
    merged = [0.5 * (D("a", "c") + D("b", "c")), 0.5 * (D("a", "d") + D("b", "d")), D("c", "d")]
    err = max(abs(x - side) for x in merged)
    part3 = err < 1e-3
    verdict(
        8,
        part1 and part2 and part3,
        f"d(a,b) decreasing to {d_ab[-1]:.4f} at n=64 [{'ok' if part1 else 'no'}]; "
        f"ratio > 1e3 at parameter distance {first if first is None else f'{first:.1e}'} [{'ok' if part2 else 'no'}]; "
        f"merged matrix error at n=128 = {err:.2e} [{'ok' if part3 else 'no'}]",
    )


def pentagon(P, drop: str):
    Q = normalize_unit_area(P, 1.0)
    return np.array([v for lab, v in zip(Q.shape.labels, Q.shape.vertices) if lab != drop])


def test_criterion_09_quotient_consistency(verdict):
    worst = 0.0
    zgap = 0.0
    limits_agree = True
    lam_gap = math.inf
    for phi in (0.7, 1.0, 1.3, 1.8):
        eps = 1e-6
        top = build_special(4, phi, PI / 2 - eps)  # e' and f' merge
        bottom = build_special(4, phi, phi - PI / 6 + eps)  # f' and e'' merge
        worst = max(worst, float(np.abs(pentagon(top, "f'") - pentagon(bottom, "f'")).max()))
        y1, y2 = lambda_(top), lambda_(bottom)
        lam_gap = min(lam_gap, math.hypot(y1.phi - y2.phi, y1.alpha - y2.alpha))
        zgap = max(zgap, z_distance(ZHatPoint("+", project_Z(y1)), ZHatPoint("+", project_Z(y2))))
        limits_agree &= project_Z(YPoint(phi, PI / 2)) == project_Z(YPoint(phi, phi - PI / 6))
        assert in_Y(phi, PI / 2)
    ok = worst < 1e-4 and limits_agree and zgap < 1e-4 and lam_gap > 0.1
    verdict(
        9,
        ok,
        f"pentagon vertex gap = {worst:.1e}, Lambda images apart by >= {lam_gap:.2f}, "
        f"Pi-Lambda gap = {zgap:.1e}, limits identified = {limits_agree}",
    )


def test_criterion_10_engine_vs_oracle(verdict):
    rng = random.Random(10)
    surfaces = []
    for n in (2, 2, 3, 3, 4, 4, 4, 4, 4, 4):
        sheet = rng.choice("+-")
        phi, alpha = random_params(n, rng)
        surfaces.append(par_inverse(ZHatPoint(sheet if n != 2 else "+", ZPoint(phi, alpha))))
    rel = 0.0
    excess = 0.0
    for M in surfaces:
        for _ in range(20):
            x, y = random_point(M, rng), random_point(M, rng)
            d, _ = unfold_distance(M, x, y)
            ref = graph_distance(M, x, y)
            rel = max(rel, abs(d - ref) / ref)
            excess = max(excess, d - ref)
    ok = rel < 1e-3 and excess <= 1e-9
    verdict(10, ok, f"200 pairs on 10 surfaces, max relative gap = {rel:.1e}, max excess over oracle = {excess:.1e}")
