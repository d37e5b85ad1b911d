from __future__ import annotations

import math
from functools import lru_cache

import pytest

from hexsphere.moduli import ZHatPoint, ZPoint, par_inverse
from hexsphere.special import build_special
from hexsphere.surface import glue_hex

PI = math.pi

# one representative per stratum, used across modules
SAMPLES = {
    2: (0.0, PI / 8),
    3: (PI / 3, PI / 6),
    4: (PI / 3, PI / 4),
}


@lru_cache(maxsize=None)
def hex_of(n: int, phi: float, alpha: float, R: float = 1.0):
    return glue_hex(build_special(n, phi, alpha, R))


@lru_cache(maxsize=None)
def unit_hex(sheet: str, phi: float, alpha: float):
    return par_inverse(ZHatPoint(sheet, ZPoint(phi, alpha)))


@pytest.fixture(params=sorted(SAMPLES), ids=lambda n: f"n{n}")
def stratum_sample(request):
    n = request.param
    phi, alpha = SAMPLES[n]
    return n, phi, alpha, hex_of(n, phi, alpha)


def random_point(M, rng):
    """Uniform point of M, drawn from an area-weighted triangulation of its faces."""
    from hexsphere.geodesics import SurfacePoint
    from hexsphere.surface import triangulate

    tris = []
    for f, F in enumerate(M.faces):
        V = F.vertices
        for i, j, k in triangulate(F):
            A, B, C = V[i], V[j], V[k]
            area = 0.5 * abs((B.x - A.x) * (C.y - A.y) - (B.y - A.y) * (C.x - A.x))
            tris.append((area, f, A, B, C))
    w = [t[0] for t in tris]
    _, f, A, B, C = tris[rng.choices(range(len(tris)), weights=w)[0]]
    s, r = math.sqrt(rng.random()), rng.random()
    u, v, t = 1.0 - s, s * (1.0 - r), s * r
    return SurfacePoint(f, u * A.x + v * B.x + t * C.x, u * A.y + v * B.y + t * C.y)


VERDICTS: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def emit(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
