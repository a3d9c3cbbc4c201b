"""Graph and filtration data model.

A filtration assigns each node an importance score in [0, 1]; time is
1 - score, so important simplices enter the sublevel filtration early.
Edges inherit the min of their endpoint scores (lower-star extension),
and a fixed threshold splits the filtered graph into a high-importance
side and its complement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

SCORE_CLAMP = 1e-6


@dataclass(frozen=True)
class Graph:
    """Undirected graph with optional ground-truth edge mask.

    Edges are (u, v) pairs with u < v, no self-loops, no duplicates.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    node_features: np.ndarray  # (num_nodes, d_in)
    label: int = 0
    gt_edge_mask: np.ndarray | None = None  # (num_edges,) bool

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop ({u},{v})")
            if not (0 <= u < v < self.num_nodes):
                raise ValueError(f"bad edge ({u},{v}) for {self.num_nodes} nodes")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u},{v})")
            seen.add((u, v))
        if self.gt_edge_mask is not None and len(self.gt_edge_mask) != len(self.edges):
            raise ValueError("gt_edge_mask length != number of edges")

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class FilteredGraph:
    """Graph plus per-simplex importance scores and filtration times."""

    graph: Graph
    node_scores: np.ndarray  # (V,) in [0,1]
    edge_scores: np.ndarray  # (E,) in [0,1]
    node_times: np.ndarray   # 1 - node_scores
    edge_times: np.ndarray   # 1 - edge_scores
    # index of the endpoint whose time realises each edge time (for
    # gradient routing through the lower-star max); ties -> lower index
    edge_time_arg: np.ndarray = field(default=None)


@dataclass(frozen=True)
class SubFiltration:
    """One side of a partitioned filtration, ready for persistence.

    ``node_ids``/``edge_ids`` index into the parent graph so diagram
    points can be attributed back to parent simplices.
    """

    node_ids: np.ndarray        # (V',) parent node indices
    node_times: np.ndarray      # (V',) entry times
    edges: tuple[tuple[int, int], ...]  # endpoints as parent node indices
    edge_ids: np.ndarray        # (E',) parent edge indices
    edge_times: np.ndarray      # (E',)


@dataclass(frozen=True)
class PartitionedFiltration:
    x_side: SubFiltration
    eps_side: SubFiltration
    threshold: float


def lower_star_extend(graph: Graph, node_scores: np.ndarray) -> FilteredGraph:
    """Extend node scores to edges: edge score = min over endpoints.

    Equivalently edge time = max over endpoint times. Records which
    endpoint realises the max (lower node index on ties).
    """
    node_scores = np.asarray(node_scores, dtype=float)
    if node_scores.shape != (graph.num_nodes,):
        raise ValueError("node_scores shape mismatch")
    if np.any(node_scores < 0.0) or np.any(node_scores > 1.0):
        raise ValueError("node scores must lie in [0, 1]")
    node_times = 1.0 - node_scores
    if graph.num_edges:
        uv = np.asarray(graph.edges, dtype=int)
        tu, tv = node_times[uv[:, 0]], node_times[uv[:, 1]]
        # tie -> lower node index (u < v, so prefer u when equal)
        arg = np.where(tu >= tv, uv[:, 0], uv[:, 1])
        edge_times = np.maximum(tu, tv)
    else:
        arg = np.zeros(0, dtype=int)
        edge_times = np.zeros(0)
    return FilteredGraph(
        graph=graph,
        node_scores=node_scores,
        edge_scores=1.0 - edge_times,
        node_times=node_times,
        edge_times=edge_times,
        edge_time_arg=arg,
    )


def partition(fg: FilteredGraph, t: float = 0.5) -> PartitionedFiltration:
    """Split a filtered graph at threshold t.

    X side: edges with time < t and nodes with time < t, keeping their
    global times. Complement side: edges with time >= t, with incident
    nodes entering at max(node_time, t). No rescaling on either side.
    """
    if not (0.0 < t < 1.0):
        raise ValueError("threshold must lie strictly inside (0, 1)")
    g = fg.graph
    x_edge = fg.edge_times < t

    x_nodes = np.flatnonzero(fg.node_times < t)
    x_eids = np.flatnonzero(x_edge)
    x_side = SubFiltration(
        node_ids=x_nodes,
        node_times=fg.node_times[x_nodes],
        edges=tuple(g.edges[i] for i in x_eids),
        edge_ids=x_eids,
        edge_times=fg.edge_times[x_eids],
    )

    e_eids = np.flatnonzero(~x_edge)
    incident = sorted({w for i in e_eids for w in g.edges[i]})
    e_nodes = np.asarray(incident, dtype=int)
    e_side = SubFiltration(
        node_ids=e_nodes,
        node_times=np.maximum(fg.node_times[e_nodes], t) if len(e_nodes) else np.zeros(0),
        edges=tuple(g.edges[i] for i in e_eids),
        edge_ids=e_eids,
        edge_times=fg.edge_times[e_eids],
    )
    return PartitionedFiltration(x_side=x_side, eps_side=e_side, threshold=t)


def full_subfiltration(fg: FilteredGraph) -> SubFiltration:
    """View the whole filtered graph as a single sub-filtration."""
    g = fg.graph
    return SubFiltration(
        node_ids=np.arange(g.num_nodes),
        node_times=fg.node_times,
        edges=g.edges,
        edge_ids=np.arange(g.num_edges),
        edge_times=fg.edge_times,
    )


def gumbel_gate(edge_score, temperature: float, rng: np.random.Generator):
    """Stochastic relaxed binary gate for an edge score.

    gate = sigmoid((logit(s) + g1 - g2) / tau) with g1, g2 independent
    standard Gumbel draws. Monotone in the score for fixed noise.
    """
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    s = np.clip(np.asarray(edge_score, dtype=float), SCORE_CLAMP, 1.0 - SCORE_CLAMP)
    g1, g2 = sample_gumbel_pair(np.shape(s), rng)
    logit = np.log(s) - np.log1p(-s)
    z = (logit + g1 - g2) / temperature
    return 1.0 / (1.0 + np.exp(-z))


def sample_gumbel_pair(shape, rng: np.random.Generator):
    """Two independent standard Gumbel samples of the given shape."""
    u = rng.uniform(SCORE_CLAMP, 1.0 - SCORE_CLAMP, size=(2,) + tuple(shape))
    g = -np.log(-np.log(u))
    return g[0], g[1]


# ---------------------------------------------------------------------------
# JSONL dataset format
# ---------------------------------------------------------------------------

def graph_to_record(graph: Graph) -> dict:
    rec = {
        "num_nodes": graph.num_nodes,
        "edges": [list(e) for e in sorted(graph.edges)],
        "features": np.asarray(graph.node_features, dtype=float).tolist(),
        "label": int(graph.label),
    }
    if graph.gt_edge_mask is not None:
        # re-order mask to match the sorted edge list
        idx = sorted(range(len(graph.edges)), key=lambda i: graph.edges[i])
        rec["gt_mask"] = [int(graph.gt_edge_mask[i]) for i in idx]
    return rec


def graph_from_record(rec: dict) -> Graph:
    edges = tuple(tuple(e) for e in rec["edges"])
    mask = rec.get("gt_mask")
    return Graph(
        num_nodes=int(rec["num_nodes"]),
        edges=edges,
        node_features=np.asarray(rec["features"], dtype=float),
        label=int(rec["label"]),
        gt_edge_mask=None if mask is None else np.asarray(mask, dtype=bool),
    )


def write_jsonl(path, graphs) -> None:
    with open(path, "w") as fh:
        for g in graphs:
            fh.write(json.dumps(graph_to_record(g)) + "\n")


def read_jsonl(path) -> list[Graph]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(graph_from_record(json.loads(line)))
    return out
