"""Distances between persistence diagrams.

Exact bottleneck distance (binary search over candidate radii with a
bipartite feasibility matching), a tiny exhaustive oracle, and the
exact empirical topological discrepancy (optimal transport over
bottleneck costs between two sets of diagrams).
"""

from __future__ import annotations

import math
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .persistence import PersistenceDiagram

# Diagonal-projection conventions. "geometric" is the standard closest
# point on the diagonal, cost (death - birth) / 2 under l_inf.
# "literal" projects p = (b, d) to (d - b, d - b).
GEOMETRIC = "geometric"
LITERAL = "literal"


def _as_points(dgm, dim=None) -> np.ndarray:
    if isinstance(dgm, PersistenceDiagram):
        return dgm.as_array(dim)
    pts = np.asarray(dgm, dtype=float)
    return pts.reshape(-1, 2)


def diagonal_costs(pts: np.ndarray, convention: str = GEOMETRIC) -> np.ndarray:
    if len(pts) == 0:
        return np.zeros(0)
    b, d = pts[:, 0], pts[:, 1]
    if convention == GEOMETRIC:
        return (d - b) / 2.0
    if convention == LITERAL:
        proj = d - b
        return np.maximum(np.abs(b - proj), np.abs(d - proj))
    raise ValueError(f"unknown diagonal convention {convention!r}")


def _pair_costs(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    if len(p) == 0 or len(q) == 0:
        return np.zeros((len(p), len(q)))
    return np.abs(p[:, None, :] - q[None, :, :]).max(axis=2)


def _feasible(cost: np.ndarray, dp: np.ndarray, dq: np.ndarray, delta: float) -> bool:
    """Perfect matching test for radius delta.

    Left side: P points plus |Q| dummies; right side: Q points plus |P|
    dummies. A point may match an opposite point within delta, or any
    dummy if its diagonal cost is within delta; dummies always match
    each other. Kuhn's augmenting-path matching.
    """
    n, m = len(dp), len(dq)
    tol = 1e-12
    ok = cost <= delta + tol
    p_diag = dp <= delta + tol
    q_diag = dq <= delta + tol

    size = n + m  # vertices per side
    match_r = [-1] * size  # right vertex -> left vertex

    def neighbors(i):
        if i < n:  # real P point
            for j in range(m):
                if ok[i, j]:
                    yield j
            if p_diag[i]:
                yield from range(m, size)  # any right dummy
        else:  # left dummy
            for j in range(m):
                if q_diag[j]:
                    yield j
            yield from range(m, size)

    def augment(i, seen):
        for j in neighbors(i):
            if seen[j]:
                continue
            seen[j] = True
            if match_r[j] < 0 or augment(match_r[j], seen):
                match_r[j] = i
                return True
        return False

    matched = 0
    for i in range(size):
        if augment(i, [False] * size):
            matched += 1
        else:
            return False
    return matched == size


def bottleneck(P, Q, dim: int | None = None, convention: str = GEOMETRIC) -> float:
    """Exact bottleneck distance between two diagrams.

    Accepts PersistenceDiagram objects (optionally restricted to one
    dimension) or raw (n, 2) arrays of (birth, death) points.
    """
    p = _as_points(P, dim)
    q = _as_points(Q, dim)
    dp = diagonal_costs(p, convention)
    dq = diagonal_costs(q, convention)
    cost = _pair_costs(p, q)

    candidates = np.unique(np.concatenate([cost.ravel(), dp, dq, [0.0]]))
    lo, hi = 0, len(candidates) - 1
    # smallest candidate radius admitting a perfect matching
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(cost, dp, dq, float(candidates[mid])):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def bottleneck_oracle(P, Q, dim: int | None = None, convention: str = GEOMETRIC,
                      max_points: int = 4) -> float:
    """Exhaustive enumeration of all partial matchings (tiny inputs only)."""
    p = _as_points(P, dim)
    q = _as_points(Q, dim)
    if len(p) > max_points or len(q) > max_points:
        raise ValueError(f"oracle capped at {max_points} points per diagram")
    dp = diagonal_costs(p, convention)
    dq = diagonal_costs(q, convention)
    cost = _pair_costs(p, q)

    best = math.inf

    def recurse(i, used, acc):
        nonlocal best
        if acc >= best:
            return
        if i == len(p):
            rest = [dq[j] for j in range(len(q)) if j not in used]
            total = max([acc] + rest)
            best = min(best, total)
            return
        recurse(i + 1, used, max(acc, dp[i]))  # p_i to the diagonal
        for j in range(len(q)):
            if j not in used:
                recurse(i + 1, used | {j}, max(acc, cost[i, j]))

    recurse(0, frozenset(), 0.0)
    return float(best)


def dtopo_exact(Ps, Qs, dim: int | None = None, convention: str = GEOMETRIC) -> float:
    """Exact 1-Wasserstein distance between two empirical distributions
    of diagrams under bottleneck ground cost (uniform weights).

    Equal-size lists reduce to an assignment problem; otherwise the
    balanced transport with uniform marginals is solved exactly.
    """
    if len(Ps) == 0 or len(Qs) == 0:
        raise ValueError("diagram lists must be non-empty")
    n, m = len(Ps), len(Qs)
    cost = np.array([[bottleneck(p, q, dim, convention) for q in Qs] for p in Ps])
    if n == m:
        r, c = linear_sum_assignment(cost)
        return float(cost[r, c].mean())
    lcm = n * m // math.gcd(n, m)
    if lcm <= 512:
        rep = np.repeat(np.repeat(cost, lcm // n, axis=0), lcm // m, axis=1)
        r, c = linear_sum_assignment(rep)
        return float(rep[r, c].mean())
    # transport LP with uniform marginals
    nm = n * m
    a_eq = np.zeros((n + m, nm))
    for i in range(n):
        a_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([np.full(n, 1.0 / n), np.full(m, 1.0 / m)])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)
