"""Synthetic benchmark generators with ground-truth rationale masks.

All variants attach canonical motifs to a preferential-attachment base
by a single bridge edge; the ground-truth mask marks exactly the
motif-internal edges. Generation is pure given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph

BA_BASE_SIZE = 20
BA_ATTACH_M = 1

MOTIF_EDGES = {
    # square body plus a roof node
    "house": ((0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4)),
    "grid3x3": tuple(
        e for r in range(3) for c in range(3)
        for e in ([(3 * r + c, 3 * r + c + 1)] if c < 2 else [])
        + ([(3 * r + c, 3 * r + c + 3)] if r < 2 else [])
    ),
    "cycle5": ((0, 1), (1, 2), (2, 3), (3, 4), (0, 4)),
    # hexagon used by the spurious-motif construction
    "cycle": ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)),
    # 7-node crane: square body, neck with head, one leg
    "crane": ((0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (4, 5), (3, 6)),
}

SPMOTIF_MOTIFS = ("cycle", "house", "crane")
SPMOTIF_BASES = ("tree", "ladder", "wheel")


@dataclass(frozen=True)
class DatasetSpec:
    variant: str                 # BA2Motifs | BAHouseGrid | BAHouseAndGrid |
                                 # BAHouseOrGrid | BAHouseOrGridNRnd | SPMotif
    num_graphs: int = 1000
    base_size: int = BA_BASE_SIZE
    ba_attach: int = BA_ATTACH_M
    n: int = 1                   # motif-count cap for the nRnd variant
    b: float = 0.5               # spurious-correlation strength (SPMotif)
    seed: int = 0

    def __post_init__(self):
        if self.variant == "SPMotif" and not (1.0 / 3.0 <= self.b <= 1.0):
            raise ValueError("b must lie in [1/3, 1]")
        if self.n < 1:
            raise ValueError("n must be >= 1")


def gen_motif(kind: str) -> Graph:
    """Canonical motif fragment with all edges marked as rationale."""
    if kind not in MOTIF_EDGES:
        raise ValueError(f"unknown motif {kind!r}")
    edges = tuple(sorted(tuple(sorted(e)) for e in MOTIF_EDGES[kind]))
    n = max(max(e) for e in edges) + 1
    return Graph(num_nodes=n, edges=edges,
                 node_features=np.ones((n, 1)),
                 gt_edge_mask=np.ones(len(edges), dtype=bool))


def _ba_tree_edges(n: int, m: int, rng: np.random.Generator) -> list:
    """Barabasi-Albert preferential attachment (repeated-node scheme)."""
    if n < m + 1:
        raise ValueError("base too small for attachment parameter")
    edges = set()
    targets = list(range(m))  # initial clique seed for m > 1, single node for m = 1
    repeated = list(range(m))
    for i in range(m, n):
        chosen = set()
        while len(chosen) < m:
            chosen.add(int(rng.choice(repeated)) if repeated else int(rng.integers(i)))
        for t in chosen:
            edges.add((min(i, t), max(i, t)))
            repeated.extend([i, t])
    return sorted(edges)


def _assemble(base_edges, base_n, motifs, rng, label, feature_dim=1,
              random_features=False) -> Graph:
    """Attach motif fragments to a base by one bridge edge each."""
    edges = list(base_edges)
    mask = [False] * len(edges)
    offset = base_n
    for kind in motifs:
        frag = gen_motif(kind)
        for u, v in frag.edges:
            edges.append((u + offset, v + offset))
            mask.append(True)
        anchor = int(rng.integers(base_n))
        port = offset + int(rng.integers(frag.num_nodes))
        edges.append((min(anchor, port), max(anchor, port)))
        mask.append(False)  # bridge edges are not rationale
        offset += frag.num_nodes
    order = sorted(range(len(edges)), key=lambda i: edges[i])
    edges = tuple(edges[i] for i in order)
    mask = np.array([mask[i] for i in order], dtype=bool)
    if random_features:
        feats = rng.uniform(0.0, 1.0, size=(offset, feature_dim))
    else:
        feats = np.ones((offset, feature_dim))
    return Graph(num_nodes=offset, edges=edges, node_features=feats,
                 label=label, gt_edge_mask=mask)


def _one_ba(spec: DatasetSpec, rng, motifs, label) -> Graph:
    base = _ba_tree_edges(spec.base_size, spec.ba_attach, rng)
    return _assemble(base, spec.base_size, motifs, rng, label)


def gen_ba_with_motifs(spec: DatasetSpec) -> list[Graph]:
    """BA-family benchmarks; labels per the variant's rule, balanced."""
    n = spec.num_graphs
    half = n // 2
    out = []

    def rng_for(i):
        return np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(i,)))

    if spec.variant == "BA2Motifs":
        for i in range(n):
            kind = "house" if i < half else "cycle5"
            out.append(_one_ba(spec, rng_for(i), [kind], int(i < half)))
    elif spec.variant == "BAHouseGrid":
        for i in range(n):
            kind = "house" if i < half else "grid3x3"
            out.append(_one_ba(spec, rng_for(i), [kind], int(i < half)))
    elif spec.variant == "BAHouseAndGrid":
        for i in range(n):
            if i < half:
                motifs, label = ["house", "grid3x3"], 1
            else:
                motifs, label = (["house"] if i % 2 else ["grid3x3"]), 0
            out.append(_one_ba(spec, rng_for(i), motifs, label))
    elif spec.variant == "BAHouseOrGrid":
        for i in range(n):
            if i < half:
                motifs, label = ([("house" if i % 2 else "grid3x3")], 1)
            else:
                motifs, label = [], 0
            out.append(_one_ba(spec, rng_for(i), motifs, label))
    elif spec.variant == "BAHouseOrGridNRnd":
        # label 1: i copies of grid, house, or both (i in 1..n), the
        # 3n manifestations generated in equal numbers
        manifests = []
        for i in range(1, spec.n + 1):
            manifests.append(["grid3x3"] * i + ["house"] * i)
            manifests.append(["grid3x3"] * i)
            manifests.append(["house"] * i)
        for i in range(n):
            if i < half:
                motifs, label = manifests[i % len(manifests)], 1
            else:
                motifs, label = [], 0
            out.append(_one_ba(spec, rng_for(i), motifs, label))
    else:
        raise ValueError(f"unknown BA variant {spec.variant!r}")
    # deterministic interleave of classes
    order = np.random.default_rng(spec.seed).permutation(len(out))
    return [out[i] for i in order]


def _base_edges(kind: str, rng) -> tuple[list, int]:
    if kind == "tree":
        size = int(rng.integers(12, 19))
        return _ba_tree_edges(size, 1, rng), size
    if kind == "ladder":
        rungs = int(rng.integers(6, 10))
        edges = []
        for i in range(rungs):
            edges.append((2 * i, 2 * i + 1))
            if i + 1 < rungs:
                edges.append((2 * i, 2 * i + 2))
                edges.append((2 * i + 1, 2 * i + 3))
        return sorted(edges), 2 * rungs
    if kind == "wheel":
        rim = int(rng.integers(8, 13))
        edges = [(0, i) for i in range(1, rim + 1)]
        edges += [(i, i + 1) for i in range(1, rim)] + [(1, rim)]
        return sorted(tuple(sorted(e)) for e in edges), rim + 1
    raise ValueError(f"unknown base {kind!r}")


def gen_spmotif(spec: DatasetSpec) -> tuple[list, list, list]:
    """Spurious-motif benchmark; returns (train, val, test) splits.

    The label is the motif class. In train/val the base equals the
    motif class with probability b (else the other two equally); the
    test split pairs base and motif independently at random.
    """
    if spec.variant != "SPMotif":
        raise ValueError("spec.variant must be SPMotif")
    n = spec.num_graphs
    n_train, n_val = int(n * 0.8), int(n * 0.1)

    def make(i, spurious):
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(i,)))
        label = int(rng.integers(3))
        if spurious:
            if rng.uniform() < spec.b:
                base_kind = SPMOTIF_BASES[label]
            else:
                others = [k for k in range(3) if k != label]
                base_kind = SPMOTIF_BASES[others[int(rng.integers(2))]]
        else:
            base_kind = SPMOTIF_BASES[int(rng.integers(3))]
        base, bn = _base_edges(base_kind, rng)
        return _assemble(base, bn, [SPMOTIF_MOTIFS[label]], rng, label,
                         random_features=True)

    train = [make(i, True) for i in range(n_train)]
    val = [make(n_train + i, True) for i in range(n_val)]
    test = [make(n_train + n_val + i, False) for i in range(n - n_train - n_val)]
    return train, val, test


def split(dataset: list, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Seeded shuffle followed by contiguous split."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    idx = np.random.default_rng(seed).permutation(len(dataset))
    n1 = int(len(dataset) * ratios[0])
    n2 = n1 + int(len(dataset) * ratios[1])
    parts = (idx[:n1], idx[n1:n2], idx[n2:])
    return tuple([dataset[i] for i in part] for part in parts)


def generate(spec: DatasetSpec):
    """(train, val, test) for any variant."""
    if spec.variant == "SPMotif":
        return gen_spmotif(spec)
    return split(gen_ba_with_motifs(spec), seed=spec.seed)
