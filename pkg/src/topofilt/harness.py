"""Evaluation metrics, the desk-scale optimum verification, and run
manifests shared by the CLI."""

from __future__ import annotations

import json
import math
import platform
from dataclasses import dataclass

import numpy as np

from . import __version__
from .graphs import Graph, SubFiltration
from .metrics import GEOMETRIC, LITERAL, diagonal_costs
from .model import Model, forward
from .persistence import compute_ph


def roc_auc(scores, labels) -> float:
    """Rank-based AUC: (concordant + 0.5 * ties) / (positives * negatives)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: labels contain a single class")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s))
    ranks[order] = np.arange(1, len(s) + 1)
    # midranks for tied scores
    for val in np.unique(s):
        tied = s == val
        if tied.sum() > 1:
            ranks[tied] = ranks[tied].mean()
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(model: Model, test_set, warn=None):
    """Deterministic evaluation: (accuracy, interpretation AUC, records).

    Interpretation AUC pools raw edge scores against ground-truth masks
    over all test edges; graphs without masks are skipped (with a
    warning callback), and the AUC is None if nothing remains.
    """
    records = []
    pooled_scores, pooled_labels = [], []
    correct = 0
    for i, g in enumerate(test_set):
        res = forward(g, model, training=False)
        pred = int(np.argmax(res.logits.data))
        correct += pred == g.label
        rec = {"index": i, "label": g.label, "pred": pred}
        if g.gt_edge_mask is None:
            if warn:
                warn(f"graph {i}: no ground-truth mask, excluded from AUC")
        else:
            pooled_scores.append(res.edge_scores.data)
            pooled_labels.append(np.asarray(g.gt_edge_mask, dtype=bool))
        records.append(rec)
    acc = correct / max(len(test_set), 1)
    auc = None
    if pooled_scores:
        s = np.concatenate(pooled_scores)
        y = np.concatenate(pooled_labels)
        if y.any() and not y.all():
            auc = roc_auc(s, y)
        elif warn:
            warn("ground-truth masks are single-class, AUC skipped")
    return acc, auc, records


# ---------------------------------------------------------------------------
# Desk-scale verification of the unique-optimum property
# ---------------------------------------------------------------------------

def total_persistence(dgm, dim: int, convention: str = GEOMETRIC) -> float:
    """Sum of diagonal costs over one dimension of a diagram."""
    return float(diagonal_costs(dgm.as_array(dim), convention).sum())


def make_theorem_instances(count: int = 20, seed: int = 0) -> list[Graph]:
    """Small graphs with a cycle rationale and an attached-tree complement.

    Each instance keeps |E_X*| < |E_eps*| and |E| <= 12 so the full
    2^|E| enumeration stays cheap.
    """
    out = []
    rng = np.random.default_rng(seed)
    for i in range(count):
        k = 3 if i % 2 == 0 else 4  # rationale cycle length
        edges = [(u, (u + 1) % k) for u in range(k)]
        mask = [True] * k
        # single bridge from node 0; the rest of the tree stays clear of
        # the rationale nodes so every edge flip changes a side's mass
        tree_edges = int(rng.integers(k, 12 - k))
        nodes = k + 1
        edges.append((0, k))
        mask.append(False)
        parents = [k]
        for _ in range(tree_edges):
            p = int(parents[rng.integers(len(parents))])
            edges.append((p, nodes))
            mask.append(False)
            parents.append(nodes)
            nodes += 1
        edges = [tuple(sorted(e)) for e in edges]
        order = sorted(range(len(edges)), key=lambda j: edges[j])
        g = Graph(num_nodes=nodes, edges=tuple(edges[j] for j in order),
                  node_features=np.ones((nodes, 1)), label=1,
                  gt_edge_mask=np.array([mask[j] for j in order], dtype=bool))
        out.append(g)
    return out


def _binary_sides(graph: Graph, assign: np.ndarray) -> tuple:
    """Sub-filtrations induced by a binary edge filtration.

    Edges assigned 1 enter at time 0 with their incident nodes; edges
    assigned 0 enter at time 1 with incident nodes entering at 0.5.
    """
    def side(eids, node_t, edge_t):
        nodes = sorted({w for j in eids for w in graph.edges[j]})
        return SubFiltration(
            node_ids=np.asarray(nodes, dtype=int),
            node_times=np.full(len(nodes), node_t),
            edges=tuple(graph.edges[j] for j in eids),
            edge_ids=np.asarray(eids, dtype=int),
            edge_times=np.full(len(eids), edge_t),
        )

    x_ids = [j for j in range(graph.num_edges) if assign[j]]
    e_ids = [j for j in range(graph.num_edges) if not assign[j]]
    return side(x_ids, 0.0, 0.0), side(e_ids, 0.5, 1.0)


def check_theorem(instances, lambda0: float = 16.0, alpha: float = 0.01,
                  convention: str = GEOMETRIC) -> list[dict]:
    """Exhaustively verify the unique-optimum property per instance.

    Every binary edge filtration is scored with an oracle classifier
    (cross-entropy 0 when all rationale edges score 1, log 2 otherwise)
    minus alpha * (lambda0 * d0 + d1), where d_i is the exact gap in
    total diagonal-cost persistence between the two sides in dimension
    i. The report states whether the rationale indicator is the unique
    argmin.
    """
    reports = []
    for g in instances:
        if g.num_edges > 12:
            raise ValueError("instances are capped at 12 edges")
        if g.gt_edge_mask is None:
            raise ValueError("instances need a ground-truth mask")
        mask = np.asarray(g.gt_edge_mask, dtype=bool)
        n_x = int(mask.sum())
        rep = {"num_edges": g.num_edges,
               "precondition_ok": n_x < g.num_edges - n_x}
        if not rep["precondition_ok"]:
            rep.update(unique=False, matches=False, argmin=None)
            reports.append(rep)
            continue
        best, argmins = math.inf, []
        for bits in range(2 ** g.num_edges):
            assign = np.array([(bits >> j) & 1 for j in range(g.num_edges)],
                              dtype=bool)
            ce = 0.0 if assign[mask].all() else math.log(2.0)
            x_side, e_side = _binary_sides(g, assign)
            dgm_x, dgm_e = compute_ph(x_side), compute_ph(e_side)
            d0 = abs(total_persistence(dgm_x, 0, convention)
                     - total_persistence(dgm_e, 0, convention))
            d1 = abs(total_persistence(dgm_x, 1, convention)
                     - total_persistence(dgm_e, 1, convention))
            val = ce - alpha * (lambda0 * d0 + d1)
            if val < best - 1e-12:
                best, argmins = val, [assign]
            elif val <= best + 1e-12:
                argmins.append(assign)
        rep["unique"] = len(argmins) == 1
        rep["matches"] = any(np.array_equal(a, mask) for a in argmins)
        rep["argmin"] = argmins[0] if rep["unique"] else None
        rep["num_argmin"] = len(argmins)
        reports.append(rep)
    return reports


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------

def write_manifest(path, config, metrics: dict, extra: dict | None = None) -> None:
    doc = {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": config.seed,
        "config_digest": config.digest(),
        "config": {k: v for k, v in vars(config).items()},
        "metrics": metrics,
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
