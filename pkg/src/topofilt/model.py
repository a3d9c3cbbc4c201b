"""The filtration learner: message-passing encoder, filtration head,
prediction head, mixture prior, loss, and the training loop.

Two encoder passes share parameters: the first (unit edge weights)
produces per-node importance scores, which induce an edge filtration
whose persistence diagrams are vectorized; the second weights messages
by sampled edge gates and feeds the pooled embedding, concatenated
with the topological features, to the classifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import RunConfig
from .graphs import (FilteredGraph, Graph, SCORE_CLAMP, lower_star_extend,
                     partition, sample_gumbel_pair)
from .persistence import EDGE, ESSENTIAL_CAP, NODE, PersistenceDiagram, compute_ph
from .vectorize import StructureElementBank, lower_bound

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass
class MixturePrior:
    """Two-mixture Gaussian prior on edge scores; widths are learnable."""

    r1: Tensor
    r2: Tensor
    w: float = 0.5
    mu1: float = 0.25
    mu2: float = 0.75

    @classmethod
    def init(cls, r0: float = 0.25):
        return cls(r1=ad.parameter(r0), r2=ad.parameter(r0))

    def parameters(self) -> dict:
        return {"prior.r1": self.r1, "prior.r2": self.r2}


def _gaussian(s: Tensor, mu: float, r: Tensor) -> Tensor:
    z = (s - mu) / r
    return (z * z * -0.5).exp() / (r * SQRT_2PI)


def _mixture_nll(scores, prior: MixturePrior) -> Tensor:
    """Summed negative log-likelihood of edge scores under the prior."""
    if float(prior.r1.data) <= 0.0 or float(prior.r2.data) <= 0.0:
        raise ValueError("prior widths must be positive")
    if isinstance(scores, FilteredGraph):
        scores = ad.constant(scores.edge_scores)
    scores = ad.as_tensor(scores)
    dens = prior.w * _gaussian(scores, prior.mu1, prior.r1) \
        + (1.0 - prior.w) * _gaussian(scores, prior.mu2, prior.r2)
    return -(dens.log().sum())


def prior_loss(scores, prior: MixturePrior, gamma: float) -> Tensor:
    """Negative log-likelihood of edge scores under the mixture prior,
    plus an anti-collapse penalty on the component widths."""
    return _mixture_nll(scores, prior) \
        + gamma * (prior.r1 ** -2.0 + prior.r2 ** -2.0)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

class Model:
    """Parameter container: encoder, heads, prior, structure-element bank."""

    def __init__(self, params: dict, bank: StructureElementBank,
                 prior: MixturePrior, config: RunConfig,
                 d_in: int, n_classes: int):
        self.params = params
        self.bank = bank
        self.prior = prior
        self.config = config
        self.d_in = d_in
        self.n_classes = n_classes

    @classmethod
    def init(cls, rng: np.random.Generator, d_in: int, n_classes: int,
             config: RunConfig) -> "Model":
        H = config.hidden

        def dense(n_in, n_out, scale=None):
            # output layers start small so logits begin near zero and
            # filtration scores near 0.5 (sum pooling otherwise blows up)
            scale = math.sqrt(2.0 / n_in) if scale is None else scale
            return ad.parameter(rng.normal(0.0, scale, size=(n_in, n_out)))

        p = {"enc.in_w": dense(d_in, H), "enc.in_b": ad.parameter(np.zeros(H))}
        for l in range(config.layers):
            p[f"enc.l{l}.eps"] = ad.parameter(0.0)
            p[f"enc.l{l}.w1"] = dense(H, H)
            p[f"enc.l{l}.b1"] = ad.parameter(np.zeros(H))
            p[f"enc.l{l}.w2"] = dense(H, H)
            p[f"enc.l{l}.b2"] = ad.parameter(np.zeros(H))
            p[f"enc.l{l}.gain"] = ad.parameter(np.ones(H))
            p[f"enc.l{l}.bias"] = ad.parameter(np.zeros(H))
        p["filt.w1"] = dense(H, H)
        p["filt.b1"] = ad.parameter(np.zeros(H))
        p["filt.w2"] = dense(H, 1)
        p["filt.b2"] = ad.parameter(np.zeros(1))
        head_in = H + 4 * config.k
        p["head.w"] = ad.parameter(np.zeros((head_in, n_classes)))
        p["head.b"] = ad.parameter(np.zeros(n_classes))

        bank = StructureElementBank.init(rng, k=config.k, c_mode=config.c_mode,
                                         c_const=config.c_const,
                                         lambda0=config.lambda0)
        prior = MixturePrior.init()
        p.update(bank.parameters())
        p.update(prior.parameters())
        return cls(p, bank, prior, config, d_in, n_classes)

    def named_parameters(self) -> dict:
        return dict(self.params)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.params[k].data.ravel()
                               for k in sorted(self.params)])

    def unflatten(self, theta: np.ndarray) -> None:
        off = 0
        for k in sorted(self.params):
            t = self.params[k]
            n = t.data.size
            t.data = np.asarray(theta[off:off + n], dtype=np.float64).reshape(t.data.shape)
            off += n

    def flat_grad(self) -> np.ndarray:
        out = []
        for k in sorted(self.params):
            g = self.params[k].grad
            out.append((np.zeros_like(self.params[k].data) if g is None else g).ravel())
        return np.concatenate(out)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

@dataclass
class ForwardResult:
    logits: Tensor
    fg: FilteredGraph
    edge_scores: Tensor                 # (E,) differentiable
    diagrams_x: tuple                   # (PersistenceDiagram dim view irrelevant,) raw diagrams
    diagrams_eps: tuple
    points_x: tuple                     # (Tensor (n,2) dim0, Tensor dim1)
    points_eps: tuple
    extra: dict = field(default_factory=dict)


def _graphnorm(h: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    """Per-graph feature normalization with learnable affine.

    Standardizes each feature over the graph's nodes. Plays the role
    batch normalization usually has in message-passing stacks: without
    it the shared per-graph component dominates the pooled embedding
    and the class signal is badly conditioned.
    """
    n = h.shape[0]
    mu = h.sum(axis=0, keepdims=True) * (1.0 / n)
    hc = h - mu
    var = (hc * hc).sum(axis=0, keepdims=True) * (1.0 / n)
    return hc * ((var + 1e-6) ** -0.5) * gain + bias


def _encode(model: Model, graph: Graph, edge_w, dropout_masks) -> Tensor:
    """Shared GIN-style encoder; edge_w is a (E,) Tensor or None (unit)."""
    p = model.params
    uv = np.asarray(graph.edges, dtype=int).reshape(-1, 2)
    u, v = uv[:, 0], uv[:, 1]
    h = (ad.constant(graph.node_features) @ p["enc.in_w"] + p["enc.in_b"]).relu()
    for l in range(model.config.layers):
        if graph.num_edges:
            mu, mv = h.gather(u), h.gather(v)
            if edge_w is not None:
                w = edge_w.reshape(-1, 1)
                mu, mv = mu * w, mv * w
            agg = ad.scatter_sum(mv, u, graph.num_nodes) \
                + ad.scatter_sum(mu, v, graph.num_nodes)
        else:
            agg = ad.constant(np.zeros(h.shape))
        pre = (1.0 + p[f"enc.l{l}.eps"]) * h + agg
        z = (pre @ p[f"enc.l{l}.w1"] + p[f"enc.l{l}.b1"]).relu()
        raw = z @ p[f"enc.l{l}.w2"] + p[f"enc.l{l}.b2"]
        h = _graphnorm(raw, p[f"enc.l{l}.gain"], p[f"enc.l{l}.bias"]).relu()
        if dropout_masks is not None:
            h = h * ad.constant(dropout_masks[l])
    return h


def _diagram_points(dgm: PersistenceDiagram, dim: int, node_entry: Tensor,
                    edge_times: Tensor) -> Tensor:
    """Differentiable (n, 2) tensor of one diagram's points.

    Births and deaths are gathered from the simplex-time tensors at the
    creator/killer indices recorded by the persistence computation;
    essential deaths are constants at the cap. Point order is grouped
    by attribution kind (diagrams are multisets, order is irrelevant).
    """
    pts = dgm.in_dim(dim)
    if not pts:
        return ad.constant(np.zeros((0, 2)))
    groups = []
    for ckind in (NODE, EDGE):
        for killed in (True, False):
            sel = [p for p in pts
                   if p.creator[0] == ckind and (p.killer is not None) == killed]
            if not sel:
                continue
            src = node_entry if ckind == NODE else edge_times
            births = src.gather([p.creator[1] for p in sel]).reshape(-1, 1)
            if killed:
                deaths = edge_times.gather([p.killer[1] for p in sel]).reshape(-1, 1)
            else:
                deaths = ad.constant(np.full((len(sel), 1), ESSENTIAL_CAP))
            groups.append(ad.concat([births, deaths], axis=1))
    return ad.concat(groups) if len(groups) > 1 else groups[0]


def forward(graph: Graph, model: Model, rng: np.random.Generator | None = None,
            training: bool = False) -> ForwardResult:
    """Full two-pass forward on one graph."""
    if graph.num_nodes == 0:
        raise ValueError("empty graph")
    cfg = model.config
    p = model.params
    uv = np.asarray(graph.edges, dtype=int).reshape(-1, 2)

    masks = None
    if training and cfg.dropout > 0.0:
        if rng is None:
            raise ValueError("training mode requires an rng")
        keep = 1.0 - cfg.dropout
        masks = [
            rng.binomial(1, keep, size=(graph.num_nodes, cfg.hidden)) / keep
            for _ in range(cfg.layers)
        ]

    # pass 1: unit weights -> node importance scores
    h1 = _encode(model, graph, None, masks)
    z = (h1 @ p["filt.w1"] + p["filt.b1"]).relu()
    node_scores = (z @ p["filt.w2"] + p["filt.b2"]).reshape(-1).sigmoid()

    node_times = 1.0 - node_scores
    if graph.num_edges:
        edge_times = ad.maximum(node_times.gather(uv[:, 0]), node_times.gather(uv[:, 1]))
    else:
        edge_times = ad.constant(np.zeros(0))
    edge_scores = 1.0 - edge_times

    fg = lower_star_extend(graph, node_scores.data)
    part = partition(fg, cfg.threshold)
    dgm_x = compute_ph(part.x_side)
    dgm_eps = compute_ph(part.eps_side)

    eps_entry = ad.maximum(node_times, ad.constant(np.full(graph.num_nodes, cfg.threshold)))
    pts_x = tuple(_diagram_points(dgm_x, d, node_times, edge_times) for d in (0, 1))
    pts_eps = tuple(_diagram_points(dgm_eps, d, eps_entry, edge_times) for d in (0, 1))

    # topological features for the prediction head (training-mode C)
    C = model.bank.c_const
    topo = ad.concat([model.bank.vectorize(pts, d, C)
                      for pts, d in ((pts_x[0], 0), (pts_x[1], 1),
                                     (pts_eps[0], 0), (pts_eps[1], 1))])

    # pass 2: gated message passing on the same encoder
    if graph.num_edges:
        if training:
            s = edge_scores.clip(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
            g1, g2 = sample_gumbel_pair((graph.num_edges,), rng)
            logit = s.log() - (1.0 - s).log()
            gates = ((logit + ad.constant(g1 - g2)) * (1.0 / cfg.tau)).sigmoid()
        else:
            gates = edge_scores
    else:
        gates = None
    h2 = _encode(model, graph, gates, masks)
    pooled = h2.sum(axis=0)

    inp = ad.concat([pooled, topo])
    logits = inp @ p["head.w"] + p["head.b"]

    return ForwardResult(logits=logits, fg=fg, edge_scores=edge_scores,
                         diagrams_x=(dgm_x,), diagrams_eps=(dgm_eps,),
                         points_x=pts_x, points_eps=pts_eps)


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    logp = ad.log_softmax(logits)
    return -logp.gather([label]).reshape(())


def loss(batch, model: Model, rng: np.random.Generator | None = None,
         training: bool = False):
    """Batch objective: mean cross-entropy minus alpha times the
    discrepancy lower bound plus beta times the mean prior loss.

    Returns (loss Tensor, stats dict).
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    cfg = model.config
    ces, nlls, Ps, Qs = [], [], [], []
    n_edges = 0
    correct = 0
    for g in batch:
        res = forward(g, model, rng=rng, training=training)
        ces.append(cross_entropy(res.logits, g.label))
        if g.num_edges:
            nlls.append(_mixture_nll(res.edge_scores, model.prior))
            n_edges += g.num_edges
        Ps.append(res.points_x)
        Qs.append(res.points_eps)
        if int(np.argmax(res.logits.data)) == g.label:
            correct += 1
    ce = ad.stack(ces).mean()
    total = ce
    stats = {"ce": ce.item(), "acc": correct / len(batch)}
    if cfg.alpha != 0.0:
        lb = lower_bound(Ps, Qs, model.bank)
        total = total - cfg.alpha * lb
        stats["lb"] = lb.item()
    if cfg.beta != 0.0 and nlls:
        # normalized per edge, mirroring the per-sample mean of the CE
        # term, so the prior gradient does not scale with graph size
        pr = ad.stack(nlls).sum() * (1.0 / n_edges) \
            + cfg.gamma * (model.prior.r1 ** -2.0 + model.prior.r2 ** -2.0)
        total = total + cfg.beta * pr
        stats["prior"] = pr.item()
    stats["loss"] = total.item()
    return total, stats


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

class Adam:
    def __init__(self, params: dict, lr: float, betas=(0.8, 0.99), eps=1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mhat = self.m[k] / (1 - self.b1 ** self.t)
            vhat = self.v[k] / (1 - self.b2 ** self.t)
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _positive_widths(model: Model, floor: float = 1e-3) -> None:
    for t in (model.prior.r1, model.prior.r2):
        if t.data < floor:
            t.data = np.asarray(floor)


def evaluate_split(model: Model, graphs) -> tuple[float, float]:
    """(accuracy, mean CE loss) in deterministic evaluation mode."""
    correct, tot_ce = 0, 0.0
    for g in graphs:
        res = forward(g, model, training=False)
        if int(np.argmax(res.logits.data)) == g.label:
            correct += 1
        tot_ce += cross_entropy(res.logits, g.label).item()
    n = max(len(graphs), 1)
    return correct / n, tot_ce / n


def train(train_set, val_set, model: Model, config: RunConfig | None = None,
          log=None):
    """Minibatch Adam training with best-validation checkpoint selection.

    The checkpoint is the epoch with the highest validation accuracy,
    ties broken by the lowest validation loss. Deterministic given the
    config seed. Returns (best_param_arrays, history).
    """
    cfg = config or model.config
    if len(train_set) == 0:
        raise ValueError("empty training split")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    opt = Adam(model.named_parameters(), lr=cfg.lr)
    history = []
    best = None  # (val_acc, -val_loss, epoch, params snapshot)
    snapshot = {k: p.data.copy() for k, p in model.params.items()}
    if cfg.epochs == 0:
        return snapshot, history
    idx = np.arange(len(train_set))
    for epoch in range(cfg.epochs):
        rng.shuffle(idx)
        ep_loss = 0.0
        nb = 0
        for start in range(0, len(idx), cfg.batch):
            batch = [train_set[i] for i in idx[start:start + cfg.batch]]
            for p in model.params.values():
                p.grad = None  # unreachable params must not reuse stale grads
            total, stats = loss(batch, model, rng=rng, training=True)
            total.backward()
            opt.step()
            _positive_widths(model)
            ep_loss += stats["loss"]
            nb += 1
        val_acc, val_loss = evaluate_split(model, val_set) if val_set else (0.0, 0.0)
        rec = {"epoch": epoch, "train_loss": ep_loss / max(nb, 1),
               "val_acc": val_acc, "val_loss": val_loss}
        history.append(rec)
        if log:
            log(rec)
        key = (val_acc, -val_loss)
        if best is None or key > best[0]:
            best = (key, {k: p.data.copy() for k, p in model.params.items()})
    final = best[1] if best is not None else snapshot
    return final, history


def load_params(model: Model, arrays: dict) -> None:
    for k, p in model.params.items():
        p.data = np.asarray(arrays[k], dtype=np.float64).reshape(p.data.shape)
