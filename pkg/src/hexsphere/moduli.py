"""Parameter spaces of hex spheres and the maps between surfaces and parameters.

Y is the region of angle pairs (phi, alpha); Z identifies (phi, pi/2) with
(phi, phi - pi/6) for pi/6 < phi < 2*pi/3; the two sheets of Z-hat are glued
along the phi = 0 line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from scipy.optimize import minimize_scalar

from .errors import OutOfY
from .geodesics import ConeDistanceMatrix, annulus, distance_matrix, voronoi_cell_polygon
from .geometry import DEFAULT_TOL
from .special import SpecialPolygon, build_special, classify_special, normalize_unit_area
from .surface import ConeSurface, glue_hex

PI = math.pi
PHI_MAX = 2.0 * PI / 3.0
ALPHA_MAX = PI / 2.0
SHEETS = ("+", "-")


@dataclass(frozen=True)
class YPoint:
    phi: float
    alpha: float


@dataclass(frozen=True)
class ZPoint:
    """A point of Z stored by its canonical representative in Y."""

    phi: float
    alpha: float

    @property
    def y(self) -> YPoint:
        return YPoint(self.phi, self.alpha)


@dataclass(frozen=True)
class ZHatPoint:
    sheet: str
    z: ZPoint

    def __post_init__(self):
        if self.sheet not in SHEETS:
            raise ValueError(f"sheet must be '+' or '-', got {self.sheet!r}")


@dataclass(frozen=True)
class SheetTag:
    value: str  # "plus", "minus" or "both"
    gap: float  # d(a, c) - d(b, c)


def in_Y(phi: float, alpha: float) -> bool:
    if not (math.isfinite(phi) and math.isfinite(alpha)):
        return False
    return 0.0 <= phi < PHI_MAX and 0.0 < alpha <= ALPHA_MAX and phi - PI / 6.0 <= alpha < phi + PI / 3.0


def _check_Y(phi: float, alpha: float) -> None:
    if not in_Y(phi, alpha):
        raise OutOfY(f"({phi}, {alpha}) is not in Y")


def project_Z(y: YPoint | tuple[float, float], tol: float = DEFAULT_TOL.tol_geom) -> ZPoint:
    phi, alpha = (y.phi, y.alpha) if isinstance(y, YPoint) else (float(y[0]), float(y[1]))
    _check_Y(phi, alpha)
    if alpha >= ALPHA_MAX - tol and phi > PI / 6.0:
        return ZPoint(phi, phi - PI / 6.0)
    return ZPoint(phi, alpha)


def stratum(z: ZPoint, tol: float = DEFAULT_TOL.tol_geom) -> int:
    if abs(z.phi) <= tol:
        return 2
    if abs(z.alpha - (z.phi - PI / 6.0)) <= tol:
        return 3
    return 4


def lambda_(P: SpecialPolygon) -> YPoint:
    n, phi, alpha, _ = classify_special(P)
    if n == 2:
        phi = 0.0
    elif n == 3:
        alpha = phi - PI / 6.0
    if not in_Y(phi, alpha):
        raise OutOfY(f"polygon parameters ({phi}, {alpha}) fall outside Y")
    return YPoint(phi, alpha)


def phi_map(z: ZPoint, area: float = 1.0) -> SpecialPolygon:
    """Special polygon with parameters z, scaled to the given area."""
    s = stratum(z)
    if s == 2:
        P = build_special(2, 0.0, z.alpha)
    elif s == 3:
        P = build_special(3, z.phi, z.phi - PI / 6.0)
    else:
        P = build_special(4, z.phi, z.alpha)
    return normalize_unit_area(P, area)


def sheet_of(M: ConeSurface, tol: float = DEFAULT_TOL.tol_metric) -> SheetTag:
    D = distance_matrix(M)
    gap = D("a", "c") - D("b", "c")
    if abs(gap) < tol:
        return SheetTag("both", gap)
    return SheetTag("plus" if gap < 0.0 else "minus", gap)


def canonical(p: ZHatPoint) -> ZHatPoint:
    """Stratum-2 points live on both sheets; they are stored on '+'."""
    return ZHatPoint("+", p.z) if stratum(p.z) == 2 else p


def par(M: ConeSurface) -> ZHatPoint:
    z = project_Z(lambda_(voronoi_cell_polygon(M, "a")))
    if stratum(z) == 2:
        return ZHatPoint("+", z)
    tag = sheet_of(M)
    return ZHatPoint("-" if tag.value == "minus" else "+", z)


def par_inverse(p: ZHatPoint) -> ConeSurface:
    """Unit-area hex sphere with the given parameters; the '-' sheet swaps the labels a and b."""
    M = glue_hex(phi_map(p.z, 0.5))
    if p.sheet == "-" and stratum(p.z) != 2:
        M = M.swapped("a", "b")
    return M


# --- quotient distance -------------------------------------------------------


def _glued_pass(p: YPoint, q: YPoint) -> float:
    """Shortest route from p to q that jumps once from (phi, pi/2) to (phi, phi - pi/6)."""
    lo, hi = PI / 6.0, PHI_MAX

    def f(t):
        return math.hypot(p.phi - t, p.alpha - ALPHA_MAX) + math.hypot(t - q.phi, t - PI / 6.0 - q.alpha)

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, f(lo), f(hi)))


def _across_sheets(p: YPoint, q: YPoint) -> float:
    """Shortest route through the phi = 0 line (reflect q across it)."""
    s = p.phi + q.phi
    t = 0.5 if s == 0.0 else p.phi / s
    a = min(max(p.alpha + t * (q.alpha - p.alpha), 0.0), PI / 3.0)
    return math.hypot(p.phi, p.alpha - a) + math.hypot(q.phi, q.alpha - a)


def z_distance(p: ZHatPoint, q: ZHatPoint) -> float:
    """Quotient distance on Z-hat, allowing one pass through an identified pair."""
    y1, y2 = p.z.y, q.z.y
    if p.sheet == q.sheet or stratum(p.z) == 2 or stratum(q.z) == 2:
        d = math.hypot(y1.phi - y2.phi, y1.alpha - y2.alpha)
        if p.sheet != q.sheet:
            d = min(d, _across_sheets(y1, y2))
        return min(d, _glued_pass(y1, y2), _glued_pass(y2, y1))
    return _across_sheets(y1, y2)


# --- grids and degenerations -------------------------------------------------


def grid(N: int, sheets: Sequence[str] = SHEETS) -> list[ZHatPoint]:
    """Distinct points of Z-hat over the grid phi = (2pi/3) i/N, alpha = (pi/2) j/N.

    Ordered by (sheet, phi, alpha).
    """
    if N < 1:
        raise ValueError("grid size must be positive")
    out: dict[tuple, ZHatPoint] = {}
    for sheet in sheets:
        for i in range(N):
            for j in range(1, N + 1):
                phi, alpha = PHI_MAX * i / N, ALPHA_MAX * j / N
                if not in_Y(phi, alpha):
                    continue
                p = canonical(ZHatPoint(sheet, project_Z(YPoint(phi, alpha))))
                if p.sheet != sheet:
                    continue
                key = (SHEETS.index(p.sheet), round(p.z.phi, 12), round(p.z.alpha, 12))
                out.setdefault(key, p)
    return [out[k] for k in sorted(out)]


@dataclass
class DegenerationReport:
    points: list[ZHatPoint]
    matrices: list[ConeDistanceMatrix]
    series: dict[str, list[float]] = field(default_factory=dict)
    trends: dict[str, str] = field(default_factory=dict)


def _trend(values: Sequence[float], tol: float) -> str:
    steps = [b - a for a, b in zip(values, values[1:])]
    if all(abs(s) <= tol for s in steps):
        return "flat"
    if all(s < 0.0 for s in steps):
        return "decreasing"
    if all(s > 0.0 for s in steps):
        return "increasing"
    return "mixed"


def degeneration_probe(path: Iterable[ZHatPoint], tol: float = DEFAULT_TOL.tol_metric) -> DegenerationReport:
    points = list(path)
    mats = [distance_matrix(par_inverse(p)) for p in points]
    series = {f"d_{x}{y}": [D(x, y) for D in mats] for x, y in (("a", "b"), ("a", "c"), ("a", "d"))}
    trends = {k: _trend(v, tol) for k, v in series.items()}
    return DegenerationReport(points, mats, series, trends)


# --- scans -------------------------------------------------------------------

SCAN_COLUMNS = (
    "phi",
    "alpha",
    "sheet",
    "stratum",
    "area",
    "d_ab",
    "d_ac",
    "d_ad",
    "d_bc",
    "d_bd",
    "d_cd",
    "annulus_width",
    "systole",
)


def scan_row(p: ZHatPoint) -> dict:
    """Measurements of the hex sphere at p; the systole is the length of the annulus core."""
    M = par_inverse(p)
    D = distance_matrix(M)
    rep = annulus(M)
    row = {"phi": p.z.phi, "alpha": p.z.alpha, "sheet": p.sheet, "stratum": stratum(p.z), "area": M.area}
    for x, y in (("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")):
        row[f"d_{x}{y}"] = D(x, y)
    row["annulus_width"] = rep.width
    row["systole"] = rep.length
    return row


def format_row(row: dict) -> list[str]:
    return [f"{v:.12g}" if isinstance(v, float) else str(v) for v in (row[k] for k in SCAN_COLUMNS)]


def scan(N: int, sheets: Sequence[str] = SHEETS) -> list[dict]:
    return [scan_row(p) for p in grid(N, sheets)]
