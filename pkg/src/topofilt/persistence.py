"""Exact 0- and 1-dimensional persistence of filtered graphs.

The fast path pairs simplices with a union-find sweep (elder rule); a
boundary-matrix reduction over F2 provides an independent oracle for
small complexes. Every diagram point carries the creating and killing
simplex so gradients can be routed back to filtration times.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .graphs import Graph, SubFiltration

# Graphs carry no 2-cells, so cycles never die; essential features are
# capped at this death time to keep diagrams inside [0, 1]^2.
ESSENTIAL_CAP = 1.0

NODE = "node"
EDGE = "edge"


@dataclass(frozen=True)
class PersistencePoint:
    birth: float
    death: float
    dim: int
    creator: tuple  # (NODE|EDGE, parent simplex id)
    killer: tuple | None  # None marks an essential feature

    @property
    def essential(self) -> bool:
        return self.killer is None


class PersistenceDiagram:
    """Multiset of persistence points with per-dimension views."""

    def __init__(self, points):
        self.points = tuple(points)

    def in_dim(self, dim: int) -> tuple[PersistencePoint, ...]:
        return tuple(p for p in self.points if p.dim == dim)

    def as_array(self, dim: int | None = None) -> np.ndarray:
        pts = self.points if dim is None else self.in_dim(dim)
        if not pts:
            return np.zeros((0, 2))
        return np.array([[p.birth, p.death] for p in pts])

    def multiset(self) -> list[tuple[float, float, int]]:
        return sorted((p.birth, p.death, p.dim) for p in self.points)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return self.multiset() == other.multiset()


def _filtration_order(sub: SubFiltration):
    """Simplices sorted by (time, dim, parent id); returns typed entries."""
    entries = []
    for lid, (nid, t) in enumerate(zip(sub.node_ids, sub.node_times)):
        entries.append((float(t), 0, int(nid), lid))
    for lid, (eid, t) in enumerate(zip(sub.edge_ids, sub.edge_times)):
        entries.append((float(t), 1, int(eid), lid))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    return entries


def _check_times(sub: SubFiltration) -> None:
    node_time = {int(n): float(t) for n, t in zip(sub.node_ids, sub.node_times)}
    for (u, v), t in zip(sub.edges, sub.edge_times):
        if u not in node_time or v not in node_time:
            raise ValueError(f"edge ({u},{v}) has a missing endpoint")
        if t < node_time[u] - 1e-12 or t < node_time[v] - 1e-12:
            raise ValueError(f"edge ({u},{v}) enters before an endpoint")


def compute_ph(sub: SubFiltration) -> PersistenceDiagram:
    """Persistence diagram of a sub-filtration via union-find.

    Dim 0: on each merge the component with the younger birth dies
    (ties: the smaller creator id survives). Dim 1: every edge that
    does not merge components creates an essential cycle capped at
    ESSENTIAL_CAP. Zero-persistence points are retained.
    """
    _check_times(sub)
    parent: dict[int, int] = {}
    birth: dict[int, float] = {}     # root -> birth time
    creator: dict[int, int] = {}     # root -> creating node id

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    points = []
    for t, dim, sid, lid in _filtration_order(sub):
        if dim == 0:
            parent[sid] = sid
            birth[sid] = t
            creator[sid] = sid
        else:
            u, v = sub.edges[lid]
            ru, rv = find(u), find(v)
            if ru == rv:
                points.append(PersistencePoint(t, ESSENTIAL_CAP, 1, (EDGE, sid), None))
                continue
            # elder rule: younger birth dies; tie -> smaller creator id survives
            if (birth[ru], creator[ru]) <= (birth[rv], creator[rv]):
                keep, die = ru, rv
            else:
                keep, die = rv, ru
            points.append(
                PersistencePoint(birth[die], t, 0, (NODE, creator[die]), (EDGE, sid))
            )
            parent[die] = keep
    roots = {find(int(n)) for n in sub.node_ids}
    for r in roots:
        points.append(PersistencePoint(birth[r], ESSENTIAL_CAP, 0, (NODE, creator[r]), None))
    return PersistenceDiagram(points)


def compute_ph_oracle(sub: SubFiltration, max_simplices: int = 64) -> PersistenceDiagram:
    """Brute-force persistence via boundary-matrix column reduction over F2."""
    order = _filtration_order(sub)
    n = len(order)
    if n > max_simplices:
        raise ValueError(f"oracle capped at {max_simplices} simplices, got {n}")
    _check_times(sub)

    pos = {}  # (dim, simplex id) -> column index
    for col, (t, dim, sid, lid) in enumerate(order):
        pos[(dim, sid)] = col

    # columns as sets of row indices (F2 sparse representation)
    cols: list[set[int]] = []
    for t, dim, sid, lid in order:
        if dim == 0:
            cols.append(set())
        else:
            u, v = sub.edges[lid]
            cols.append({pos[(0, u)], pos[(0, v)]})

    low_of: dict[int, int] = {}  # pivot row -> column owning it
    pairs = []
    for j in range(n):
        while cols[j]:
            low = max(cols[j])
            if low not in low_of:
                break
            cols[j] ^= cols[low_of[low]]
        if cols[j]:
            low_of[max(cols[j])] = j
            pairs.append((max(cols[j]), j))

    paired = {i for i, _ in pairs} | {j for _, j in pairs}
    points = []
    for i, j in pairs:
        ti, dimi, sidi, _ = order[i]
        tj, dimj, sidj, _ = order[j]
        kind_i = NODE if dimi == 0 else EDGE
        kind_j = NODE if dimj == 0 else EDGE
        points.append(PersistencePoint(ti, tj, dimi, (kind_i, sidi), (kind_j, sidj)))
    for c in range(n):
        if c not in paired:
            t, dim, sid, _ = order[c]
            kind = NODE if dim == 0 else EDGE
            points.append(PersistencePoint(t, ESSENTIAL_CAP, dim, (kind, sid), None))
    return PersistenceDiagram(points)


def betti_numbers(obj) -> tuple[int, int]:
    """(beta0, beta1) of a Graph or of a SubFiltration's end complex."""
    if isinstance(obj, Graph):
        nodes = list(range(obj.num_nodes))
        edges = obj.edges
    else:
        nodes = [int(n) for n in obj.node_ids]
        edges = obj.edges
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    beta0 = len({find(n) for n in nodes})
    beta1 = len(edges) - len(nodes) + beta0
    return beta0, beta1


def write_barcodes(path, records) -> None:
    """records: iterable of (graph_id, side, PersistenceDiagram)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["graph_id", "side", "dim", "birth", "death", "creator", "killer"])
        for gid, side, dgm in records:
            for p in dgm.points:
                killer = "ESSENTIAL" if p.killer is None else f"{p.killer[0]}:{p.killer[1]}"
                w.writerow(
                    [gid, side, p.dim, repr(p.birth), repr(p.death),
                     f"{p.creator[0]}:{p.creator[1]}", killer]
                )
