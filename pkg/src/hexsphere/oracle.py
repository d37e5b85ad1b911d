"""Refined-mesh graph distances, an independent upper bound for geodesic lengths.

Every triangle edge of the surface mesh carries evenly spaced Steiner points,
shared with its glued twin.  Nodes on the boundary of one triangle are joined
by straight segments, so every graph path is a real path on the surface.
The best graph path is then shortened by sliding its edge crossings along
their edges, which keeps it a real path and so an upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .geodesics import SurfacePoint, _locate
from .surface import ConeSurface


@dataclass
class SteinerGraph:
    n_nodes: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    tri_nodes: list[tuple[np.ndarray, np.ndarray]]  # per triangle: node ids and local xy
    vertex_node: dict[int, int]
    # node -> [(triangle, base, dir)]: local position base + sigma * dir for the node's edge parameter
    where: dict[int, list] = field(default_factory=dict)
    sigma: dict[int, float] = field(default_factory=dict)
    edge_of: dict[int, int] = field(default_factory=dict)


def _edge_key(mesh, t, k):
    t2, k2 = mesh.twin[t][k]
    return min((t, k), (t2, k2))


def build_graph(M: ConeSurface, m: int = 48) -> SteinerGraph:
    mesh = M.mesh
    vertex_node = {cls: cls for cls in range(M.n_vertices)}
    next_id = len(vertex_node)
    edge_nodes: dict[tuple[int, int], list[int]] = {}
    where: dict[int, list] = {}
    sigma: dict[int, float] = {}
    edge_of: dict[int, int] = {}
    tri_nodes = []
    rows, cols, wts = [], [], []
    pos = np.arange(3 * m)
    side = pos // m
    corner = pos % m == 0
    prev_side = (side - 1) % 3
    # pairs of nodes on a common side are joined only when adjacent along it
    same = side[:, None] == side[None, :]
    same |= corner[:, None] & (prev_side[:, None] == side[None, :])
    same |= corner[None, :] & (prev_side[None, :] == side[:, None])
    gap = np.abs(pos[:, None] - pos[None, :])
    keep = (~same | (gap == 1) | (gap == 3 * m - 1)) & (pos[:, None] < pos[None, :])
    ki, kj = np.nonzero(keep)
    for t in range(len(mesh.pts)):
        ids, xy = [], []
        for k in range(3):
            P = np.asarray(mesh.pts[t][k], dtype=float)
            Q = np.asarray(mesh.pts[t][(k + 1) % 3], dtype=float)
            v = vertex_node[mesh.vclass[t][k]]
            ids.append(v)
            xy.append(P)
            where.setdefault(v, []).append((t, P, np.zeros(2)))
            key = _edge_key(mesh, t, k)
            if key not in edge_nodes:
                edge_nodes[key] = list(range(next_id, next_id + m - 1))
                next_id += m - 1
            inner = edge_nodes[key]
            own = key == (t, k)
            if not own:
                inner = inner[::-1]  # the twin runs the other way
            for j in range(1, m):
                s = j / m
                node = inner[j - 1]
                ids.append(node)
                xy.append(P + s * (Q - P))
                if own:
                    sigma[node] = s
                    edge_of[node] = len(edge_nodes)
                    where.setdefault(node, []).append((t, P, Q - P))
                else:
                    where.setdefault(node, []).append((t, Q, P - Q))
        ids_a = np.array(ids)
        xy_a = np.array(xy)
        tri_nodes.append((ids_a, xy_a))
        rows.append(ids_a[ki])
        cols.append(ids_a[kj])
        wts.append(np.hypot(*(xy_a[ki] - xy_a[kj]).T))
    return SteinerGraph(
        next_id,
        np.concatenate(rows),
        np.concatenate(cols),
        np.concatenate(wts),
        tri_nodes,
        vertex_node,
        where,
        sigma,
        edge_of,
    )


@lru_cache(maxsize=16)
def _cached_graph(M: ConeSurface, m: int) -> SteinerGraph:
    return build_graph(M, m)


def _endpoint(M: ConeSurface, G: SteinerGraph, p: SurfacePoint, node: int):
    """Node id for p plus its placements [(triangle, local xy)]; vertices map to their node."""
    src = _locate(M, p)
    if src.vertex_class is not None:
        return G.vertex_node[src.vertex_class], None
    places = []
    for t, T in src.regions:
        c, s, tx, ty = T
        lx, ly = p.x - tx, p.y - ty
        places.append((t, np.array([c * lx + s * ly, -s * lx + c * ly])))
    return node, places


def _min_matrix(rows, cols, wts, N):
    """Sparse adjacency keeping the shortest of repeated edges (scipy would add them)."""
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    order = np.lexsort((wts, hi, lo))
    lo, hi, wts = lo[order], hi[order], wts[order]
    first = np.ones(len(lo), dtype=bool)
    first[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    return coo_matrix((wts[first], (lo[first], hi[first])), shape=(N, N)).tocsr()


def _path_length(legs, n_free):
    """Length of a polyline whose legs run from A + s_i B to C + s_j D, and its gradient."""
    A, B, C, D = (np.array([l[k] for l in legs]) for k in range(4))
    fi = np.array([l[4] for l in legs])
    fj = np.array([l[5] for l in legs])

    def f(s):
        se = np.append(s, 0.0)  # index -1 reads a fixed zero
        v = (C + se[fj][:, None] * D) - (A + se[fi][:, None] * B)
        L = np.hypot(v[:, 0], v[:, 1])
        u = v / np.maximum(L, 1e-300)[:, None]
        g = np.zeros(n_free + 1)
        np.add.at(g, fj, (u * D).sum(1))
        np.add.at(g, fi, -(u * B).sum(1))
        return L.sum(), g[:n_free]

    return f


def graph_distance(
    M: ConeSurface, x: SurfacePoint, y: SurfacePoint, m: int = 48, refine: bool = True, n_routes: int = 24
) -> float:
    G = _cached_graph(M, m)
    ix, px = _endpoint(M, G, x, G.n_nodes)
    iy, py = _endpoint(M, G, y, G.n_nodes + 1)
    where = dict(G.where)
    rows, cols, wts = [G.rows], [G.cols], [G.weights]
    for node, places in ((ix, px), (iy, py)):
        if places is None:
            continue
        where[node] = [(t, q, np.zeros(2)) for t, q in places]
        for t, q in places:
            ids, xy = G.tri_nodes[t]
            rows.append(np.full(len(ids), node))
            cols.append(ids)
            wts.append(np.hypot(*(xy - q).T))
    if px is not None and py is not None:
        for t, q in px:
            for t2, q2 in py:
                if t == t2:
                    rows.append(np.array([ix]))
                    cols.append(np.array([iy]))
                    wts.append(np.array([np.hypot(*(q - q2))]))
    N = G.n_nodes + 2
    A = _min_matrix(np.concatenate(rows), np.concatenate(cols), np.concatenate(wts), N)
    d, pred = dijkstra(A, directed=False, indices=[ix, iy], return_predecessors=True)
    best = float(d[0, iy])
    if not refine or ix == iy or not np.isfinite(best):
        return best
    # refine the best route through each edge that nearly carries a shortest path
    score = d[0] + d[1]
    near = np.nonzero(score <= best * (1.0 + 1e-2))[0]
    via: dict[int, int] = {}
    for v in near[np.argsort(score[near])]:
        e = G.edge_of.get(int(v))
        if e is not None and e not in via and len(via) < n_routes:
            via[e] = int(v)
    for v in via.values():
        path = _walk(pred[0], ix, v)[::-1] + _walk(pred[1], iy, v)[1:]
        best = min(best, _refined(G, where, path))
    return best


def _walk(pred, root, v):
    out = [v]
    while out[-1] != root:
        out.append(int(pred[out[-1]]))
    return out


def _refined(G: SteinerGraph, where, path) -> float:
    """Shortest length of the route with its Steiner crossings free to slide along their edges."""
    free: dict[int, int] = {}
    for node in path[1:-1]:
        if node in G.sigma and node not in free:
            free[node] = len(free)
    legs = []
    total = 0.0
    for u, v in zip(path, path[1:]):
        su, sv = G.sigma.get(u, 0.0), G.sigma.get(v, 0.0)
        choice = None
        for t, P, dP in where[u]:
            for t2, Q, dQ in where[v]:
                if t2 == t:
                    L = float(np.hypot(*((Q + sv * dQ) - (P + su * dP))))
                    if choice is None or L < choice[0]:
                        choice = (L, P, dP, Q, dQ)
        total += choice[0]
        _, P, dP, Q, dQ = choice
        legs.append((P, dP, Q, dQ, free.get(u, -1), free.get(v, -1)))
    if not free:
        return total
    s0 = np.array([G.sigma[node] for node in free])
    f = _path_length(legs, len(free))
    res = minimize(f, s0, jac=True, method="L-BFGS-B", bounds=[(0.0, 1.0)] * len(free))
    return float(min(total, res.fun))
