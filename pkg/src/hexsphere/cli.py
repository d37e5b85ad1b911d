"""Command-line entry point: hexsphere <command> [options]."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import constructions as C
from .errors import (
    BudgetExhausted,
    DegenerateEmbedding,
    HexSphereError,
    NoAnnulusFound,
    SolverDiverged,
    VerificationFailed,
)
from .geodesics import annulus, distance_matrix, voronoi_bisector, voronoi_cell_polygon
from .geometry import TolerancePolicy
from .moduli import SCAN_COLUMNS, SHEETS, format_row, grid, par, scan_row
from .special import as_special, build_special, special_from_dict, special_to_dict
from .surface import (
    check_gauss_bonnet,
    cone_points,
    euler_characteristic,
    glue_hex,
    is_hex_sphere,
    surface_from_dict,
    surface_to_dict,
)

EXIT_IO, EXIT_INVALID, EXIT_SOLVER = 1, 2, 3
SOLVER_ERRORS = (SolverDiverged, VerificationFailed, DegenerateEmbedding, NoAnnulusFound, BudgetExhausted)


class InputError(Exception):
    """Unreadable or unwritable files."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    tol: TolerancePolicy
    seed: int
    out: Path | None
    args: argparse.Namespace


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _write(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        path.write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def _surface(cfg: RunConfig):
    """The input surface; polygon documents are glued first."""
    doc = _read_json(cfg.args.input)
    if "faces" in doc:
        return surface_from_dict(doc, cfg.tol.tol_geom)
    return glue_hex(special_from_dict(doc, cfg.tol.tol_geom), cfg.tol.tol_geom)


def _angle(cfg: RunConfig, x: float) -> float:
    return math.radians(x) if cfg.args.degrees else x


# --- commands ----------------------------------------------------------------


def cmd_build(cfg: RunConfig) -> int:
    a = cfg.args
    P = build_special(a.n, _angle(cfg, a.phi), _angle(cfg, a.alpha), a.radius, cfg.tol.tol_geom)
    _write(cfg.out, _dumps(special_to_dict(P)))
    return 0


def cmd_glue(cfg: RunConfig) -> int:
    P = special_from_dict(_read_json(cfg.args.input), cfg.tol.tol_geom)
    M = glue_hex(P, cfg.tol.tol_geom)
    if cfg.args.swap:
        M = M.swapped("a", "b")
    _write(cfg.out, _dumps(surface_to_dict(M)))
    return 0


def cmd_audit(cfg: RunConfig) -> int:
    M = _surface(cfg)
    gb = check_gauss_bonnet(M)
    doc = {
        "cone_points": [{"label": lab, "angle": th, "curvature": k} for lab, th, k in cone_points(M)],
        "euler_characteristic": euler_characteristic(M),
        "gauss_bonnet_residual": gb,
        "area": M.area,
        "hex_sphere": is_hex_sphere(M),
    }
    _write(cfg.out, _dumps(doc))
    return 0 if doc["hex_sphere"] and abs(gb) < cfg.tol.tol_geom else EXIT_SOLVER


def cmd_distances(cfg: RunConfig) -> int:
    M = _surface(cfg)
    D = distance_matrix(M)
    doc = {"labels": list(D.labels), "matrix": [[D(x, y) for y in D.labels] for x in D.labels]}
    _write(cfg.out, _dumps(doc))
    return 0


def cmd_voronoi(cfg: RunConfig) -> int:
    a = cfg.args
    M = _surface(cfg)
    P = voronoi_cell_polygon(M, a.center, cfg.tol.tol_metric)
    doc = special_to_dict(P)
    if a.bisector:
        pts = voronoi_bisector(M, a.bisector, cfg.seed, cfg.tol.tol_metric)
        doc["bisector"] = [
            {"face": s.point.face, "x": s.point.x, "y": s.point.y, "gap": s.gap, "seam_distance": s.seam_distance}
            for s in pts
        ]
    code = 0
    if a.roundtrip:
        ref = special_from_dict(_read_json(a.polygon), cfg.tol.tol_geom) if a.polygon else as_special(M.faces[0])
        dev = max(abs(x - y) for x, y in zip(P.params[1:], ref.params[1:]))
        if P.n != ref.n:
            dev = math.inf
        doc["roundtrip_deviation"] = dev
        print(f"max angle deviation: {dev:.3e}", file=sys.stderr)
        code = 0 if dev < 1e-5 else EXIT_SOLVER
    _write(cfg.out, _dumps(doc))
    return code


def _annulus_doc(rep) -> dict:
    return {
        "width": rep.width,
        "length": rep.length,
        "embedded": rep.embedded,
        "offsets": list(rep.offsets),
        "rotation": rep.rotation,
        "clearance": rep.clearance,
        "direction": list(rep.direction),
        "boundary_cones": [{"label": lab, "x": x, "y": y} for lab, x, y in rep.cones],
        "core": rep.core.to_dict(),
    }


def cmd_annulus(cfg: RunConfig) -> int:
    rep = annulus(_surface(cfg), cfg.tol.tol_metric)
    _write(cfg.out, _dumps(_annulus_doc(rep)))
    return 0 if rep.embedded else EXIT_SOLVER


def _tetra_doc(M, T, cfg) -> dict:
    doc = {
        "labels": list(T.vertex_labels),
        "vertices": [list(v) for v in T.vertices],
        "edges": {x + y: v for (x, y), v in T.edge_lengths().items()},
        "volume": T.volume,
        "residual": T.residual,
    }
    if cfg.args.check:
        doc["audit"] = C.audit_tetrahedron(M, T, cfg.args.check, cfg.seed)
    return doc


def cmd_embed(cfg: RunConfig) -> int:
    a = cfg.args
    M = _surface(cfg)
    solve = C.tetrahedron_p2 if a.method == "exact" else C.tetrahedron_solve
    try:
        T = solve(M, tol=cfg.tol.tol_geom)
        code = 0
    except DegenerateEmbedding as exc:
        if exc.tetrahedron is None:
            raise
        print(f"degenerate embedding: {exc}", file=sys.stderr)
        T, code = exc.tetrahedron, EXIT_SOLVER
    if a.obj:
        _write(Path(a.obj), C.obj_text(T))
    _write(cfg.out, _dumps(_tetra_doc(M, T, cfg)))
    return code


def cmd_twist(cfg: RunConfig) -> int:
    a = cfg.args
    M = _surface(cfg)
    if a.to_parallelogram:
        res = C.twist_to_parallelogram(M, cfg.tol.tol_metric)
    elif a.t is not None:
        res = C.fractional_dehn_twist(M, a.t)
    else:
        raise HexSphereError("twist needs --t or --to-parallelogram")
    z = par(res.result)
    print(
        f"t = {res.t!r}  phi = {z.z.phi!r}  alpha = {z.z.alpha!r}  "
        f"alpha - (phi/2 + pi/6) = {C.parallelogram_defect(z.z):.3e}",
        file=sys.stderr,
    )
    _write(cfg.out, _dumps(surface_to_dict(res.result)))
    return 0


def cmd_scan(cfg: RunConfig) -> int:
    a = cfg.args
    sheets = tuple(s for s in a.sheets.split(",") if s)
    if any(s not in SHEETS for s in sheets):
        raise HexSphereError(f"sheets must be drawn from {SHEETS}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for p in grid(a.grid, sheets):
        w.writerow(format_row(scan_row(p)))
    _write(cfg.out, buf.getvalue())
    return 0


def cmd_export_svg(cfg: RunConfig) -> int:
    a = cfg.args
    doc = _read_json(a.input)
    if "faces" not in doc:
        polys = [special_from_dict(doc, cfg.tol.tol_geom).shape]
    else:
        M = surface_from_dict(doc, cfg.tol.tol_geom)
        devs = C.developments(M)
        if not devs:
            polys = list(M.faces)
        else:
            keys = sorted(devs)
            if not 0 <= a.seam < len(keys):
                raise HexSphereError(f"seam index must be below {len(keys)}")
            polys = devs[keys[a.seam]]
    _write(cfg.out, C.svg_text(polys))
    return 0


COMMANDS = {
    "build": cmd_build,
    "glue": cmd_glue,
    "audit": cmd_audit,
    "distances": cmd_distances,
    "voronoi": cmd_voronoi,
    "annulus": cmd_annulus,
    "embed": cmd_embed,
    "twist": cmd_twist,
    "scan": cmd_scan,
    "export-svg": cmd_export_svg,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-geom", type=float, default=1e-9)
    common.add_argument("--tol-metric", type=float, default=1e-6)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    common.add_argument("--degrees", action="store_true", help="read angle flags in degrees")

    p = argparse.ArgumentParser(prog="hexsphere", description="Hex spheres: construction, moduli and geometry.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build", parents=[common], help="special polygon from (n, phi, alpha)")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--phi", type=float, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--radius", type=float, default=1.0)

    s = sub.add_parser("glue", parents=[common], help="hex sphere from a polygon file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--swap", action="store_true", help="exchange the labels a and b")

    for name, text in (("audit", "cone angles and Gauss-Bonnet"), ("distances", "cone-point distance matrix")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--in", dest="input", required=True)

    s = sub.add_parser("voronoi", parents=[common], help="Voronoi cell of a big cone point")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--center", default="a", choices=("a", "b"))
    s.add_argument("--roundtrip", action="store_true")
    s.add_argument("--polygon", help="reference polygon for --roundtrip (default: face 0)")
    s.add_argument("--bisector", type=int, default=0, help="number of bisector samples")

    s = sub.add_parser("annulus", parents=[common], help="embedded annulus and its core")
    s.add_argument("--in", dest="input", required=True)

    s = sub.add_parser("embed", parents=[common], help="tetrahedron realizing the surface")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--method", choices=("exact", "solve"), default="solve")
    s.add_argument("--obj")
    s.add_argument("--check", type=int, default=0, help="random pairs for the intrinsic distance check")

    s = sub.add_parser("twist", parents=[common], help="fractional Dehn twist along the annulus core")
    s.add_argument("--in", dest="input", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--t", type=float)
    g.add_argument("--to-parallelogram", action="store_true")

    s = sub.add_parser("scan", parents=[common], help="CSV over a parameter grid")
    s.add_argument("--grid", type=int, required=True)
    s.add_argument("--sheets", default="+,-")

    s = sub.add_parser("export-svg", parents=[common], help="SVG of a polygon or a development")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--seam", type=int, default=0, help="which cross-face seam to unfold across")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        tol = TolerancePolicy(args.tol_geom, args.tol_metric)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    cfg = RunConfig(args.command, tol, args.seed, args.out, args)
    try:
        return COMMANDS[args.command](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SOLVER_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except HexSphereError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
