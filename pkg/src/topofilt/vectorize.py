"""Diagram vectorization and the learned discrepancy lower bound.

Each structure element maps a persistence diagram to a scalar through
a sum of rational-hat kernels; normalizing by a Lipschitz constant C
and taking absolute differences of batch means gives a lower bound on
the exact empirical discrepancy. A soft top-2 of the per-element
magnitudes (two softmax attention heads) aggregates the bank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .persistence import PersistenceDiagram

DEFAULT_K = 8
HEAD_TEMPERATURE = 0.1
DEFAULT_RADIUS = 0.25


def _points(dgm) -> np.ndarray:
    if isinstance(dgm, PersistenceDiagram):
        return dgm.as_array()
    return np.asarray(dgm, dtype=float).reshape(-1, 2)


def rational_hat(dgm, c, r: float) -> float:
    """sum over points x of 1/(1+||x-c||) - 1/(1+| |r| - ||x-c|| |)."""
    pts = _points(dgm)
    if len(pts) == 0:
        return 0.0
    d = np.linalg.norm(pts - np.asarray(c, dtype=float), axis=1)
    return float((1.0 / (1.0 + d) - 1.0 / (1.0 + np.abs(np.abs(r) - d))).sum())


def rational_hat_grad(dgm, c, r: float):
    """Analytic gradients of rational_hat.

    Returns (d_points (n,2), d_c (2,), d_r scalar); subgradient 0 at
    the kinks ||x-c|| = 0 and ||x-c|| = |r|.
    """
    pts = _points(dgm)
    c = np.asarray(c, dtype=float)
    if len(pts) == 0:
        return np.zeros((0, 2)), np.zeros(2), 0.0
    diff = pts - c
    d = np.linalg.norm(diff, axis=1)
    a = np.abs(np.abs(r) - d)
    sgn = np.sign(np.abs(r) - d)
    dg_dd = -1.0 / (1.0 + d) ** 2 - sgn / (1.0 + a) ** 2
    unit = np.where(d[:, None] > 0.0, diff / np.where(d[:, None] > 0.0, d[:, None], 1.0), 0.0)
    d_pts = dg_dd[:, None] * unit
    d_c = -d_pts.sum(axis=0)
    d_r = float((sgn * np.sign(r) / (1.0 + a) ** 2).sum())
    return d_pts, d_c, d_r


def rational_hat_t(points: Tensor, c: Tensor, r: Tensor) -> Tensor:
    """Differentiable rational hat on a (n, 2) point tensor."""
    if points.data.size == 0:
        return ad.constant(0.0)
    d = ad.norm2(points - c.reshape(1, 2), axis=1)
    return (1.0 / (d + 1.0) - 1.0 / ((r.abs() - d).abs() + 1.0)).sum()


@dataclass
class StructureElementBank:
    """k rational-hat elements per homology dimension plus attention.

    centers[d]: (k, 2) tensors, radii[d]: (k,), heads[d]: (2, k).
    c_mode "batch" sets C = 2 * n_max per batch (soundness checks);
    "fixed" uses c_const (training default, C = 2).
    """

    centers: dict
    radii: dict
    heads: dict
    lambda0: Tensor
    k: int = DEFAULT_K
    c_mode: str = "fixed"
    c_const: float = 2.0
    temperature: float = HEAD_TEMPERATURE

    @classmethod
    def init(cls, rng: np.random.Generator, k: int = DEFAULT_K, c_mode: str = "fixed",
             c_const: float = 2.0, lambda0: float = 1.0, learn_lambda0: bool = True):
        centers, radii, heads = {}, {}, {}
        for dim in (0, 1):
            centers[dim] = ad.parameter(rng.uniform(0.0, 1.0, size=(k, 2)))
            radii[dim] = ad.parameter(np.full(k, DEFAULT_RADIUS))
            heads[dim] = ad.parameter(np.zeros((2, k)))
        lam = ad.parameter(lambda0) if learn_lambda0 else ad.constant(lambda0)
        return cls(centers=centers, radii=radii, heads=heads, lambda0=lam,
                   k=k, c_mode=c_mode, c_const=c_const)

    def parameters(self) -> dict:
        out = {}
        for dim in (0, 1):
            out[f"bank.centers{dim}"] = self.centers[dim]
            out[f"bank.radii{dim}"] = self.radii[dim]
            out[f"bank.heads{dim}"] = self.heads[dim]
        if self.lambda0.requires_grad:
            out["bank.lambda0"] = self.lambda0
        return out

    def vectorize(self, points, dim: int, C: float) -> Tensor:
        """(k,) vector of psi_i = phi_i / C on one diagram."""
        pts = points if isinstance(points, Tensor) else ad.constant(_points(points))
        n = pts.data.shape[0]
        if n == 0:
            return ad.constant(np.zeros(self.k))
        d = ad.norm2(pts.reshape(n, 1, 2) - self.centers[dim].reshape(1, self.k, 2), axis=2)
        r = self.radii[dim].abs().reshape(1, self.k)
        val = 1.0 / (d + 1.0) - 1.0 / ((r - d).abs() + 1.0)
        return val.sum(axis=0) * (1.0 / C)


def _batch_c(bank: StructureElementBank, Ps, Qs) -> float:
    if bank.c_mode == "fixed":
        return bank.c_const
    n_max = max(
        [len(_points(p)) if not isinstance(p, Tensor) else len(p.data) for p in list(Ps) + list(Qs)]
        + [1]
    )
    return 2.0 * n_max


def element_magnitudes(Ps, Qs, bank: StructureElementBank, dim: int) -> Tensor:
    """m_i = | mean_P psi_i(P) - mean_Q psi_i(Q) | over one dimension."""
    if len(Ps) == 0 or len(Qs) == 0:
        raise ValueError("diagram batches must be non-empty")
    C = _batch_c(bank, Ps, Qs)
    mean_p = ad.stack([bank.vectorize(p, dim, C) for p in Ps]).mean(axis=0)
    mean_q = ad.stack([bank.vectorize(q, dim, C) for q in Qs]).mean(axis=0)
    return (mean_p - mean_q).abs()


def soft_top2(m: Tensor, heads: Tensor, temperature: float) -> Tensor:
    """Two attention heads over the element magnitudes, summed.

    Each head is a softmax over (m + offsets) / temperature giving a
    convex combination of the magnitudes; with zero offsets and a low
    temperature both heads collapse onto the hard maximum.
    """
    total = ad.constant(0.0)
    for h in range(heads.shape[0]):
        offs = heads.gather([h]).reshape(-1)
        attn = ad.softmax((m + offs) * (1.0 / temperature))
        total = total + (attn * m).sum()
    return total


def lower_bound_dim(Ps, Qs, bank: StructureElementBank, dim: int) -> Tensor:
    m = element_magnitudes(Ps, Qs, bank, dim)
    return soft_top2(m, bank.heads[dim], bank.temperature)


def lower_bound(Ps, Qs, bank: StructureElementBank) -> Tensor:
    """Differentiable discrepancy estimate over a batch.

    Ps and Qs are sequences of (dim0, dim1) diagram pairs; each entry
    is a PersistenceDiagram, an (n, 2) array, or an (n, 2) Tensor.
    Total = lambda0 * agg_dim0 + agg_dim1.
    """
    if len(Ps) == 0 or len(Qs) == 0:
        raise ValueError("diagram batches must be non-empty")
    agg0 = lower_bound_dim([p[0] for p in Ps], [q[0] for q in Qs], bank, 0)
    agg1 = lower_bound_dim([p[1] for p in Ps], [q[1] for q in Qs], bank, 1)
    return bank.lambda0 * agg0 + agg1
