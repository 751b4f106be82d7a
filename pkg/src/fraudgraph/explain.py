"""Mask-optimization explainer: learn sigmoid edge and node-feature masks on
a target txn's full computation subgraph so that the frozen predictor keeps
its prediction while the masks shrink (size + entropy penalties). Exports the
surviving weighted subgraph for analyst review."""

from __future__ import annotations

import contextlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .graph import EDGE_TYPE_ORDER, GraphError, HeteroGraph
from .model import PredictorParams, TrainingDiverged, forward_probs, predictor_loss
from .optim import Adam
from .sampling import SampledSubgraph, sample_khop
from .tensor import Tape, Tensor


@dataclass(frozen=True)
class ExplainerConfig:
    epochs: int = 100
    lr: float = 0.01
    beta_edge_size: float = 0.005
    beta_node_feat_size: float = 1.0
    beta_edge_entropy: float = 1.0
    beta_node_feat_entropy: float = 0.1
    log_eps: float = 1e-12
    init_scale: float = 0.1
    explain_label: str = "predicted"      # or "truth"
    ce_scope: str = "target"              # or "subgraph"
    threshold: float = 0.15
    seed: int = 0


@dataclass
class ExplainerMasks:
    """Raw mask parameters plus their sigmoid squashings and the loss trace."""

    edge_raw: Tensor                      # (E,)
    feat_raw: Tensor                      # (n_nodes, F)
    config: ExplainerConfig
    loss_trace: list[float] = field(default_factory=list)
    explained_class: int = 1

    @property
    def edge_mask(self) -> np.ndarray:
        return _sigmoid_np(self.edge_raw.data)

    @property
    def feat_mask(self) -> np.ndarray:
        return _sigmoid_np(self.feat_raw.data)


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    out = 1.0 / (1.0 + np.exp(-np.abs(x)))
    return np.where(x >= 0, out, 1.0 - out)


def extract_subgraph(g: HeteroGraph, target: int, n_layers: int) -> SampledSubgraph:
    """The exact receptive field of an L-layer model at ``target``: the
    uncapped L-hop ball with all induced edges."""
    if not g.is_txn(target):
        raise GraphError(f"node {target} is not a txn node")
    return sample_khop(g, [target], k=n_layers, fanout=None,
                       rng=np.random.default_rng(0))


@contextlib.contextmanager
def _frozen(params: PredictorParams):
    flags = [(t, t.requires_grad) for t in params.tensors.values()]
    for t, _ in flags:
        t.requires_grad = False
    try:
        yield
    finally:
        for t, was in flags:
            t.requires_grad = was


def masked_forward(sub: SampledSubgraph, params: PredictorParams,
                   edge_raw: Tensor, feat_raw: Tensor,
                   output_txns: np.ndarray | None = None) -> Tensor:
    """Eval-mode forward with masks applied; differentiable w.r.t. masks only.

    Edge masks scale each edge's message (both directions); feature masks
    scale txn input features elementwise.
    """
    if edge_raw.data.shape != (sub.num_edges,):
        raise GraphError(
            f"edge mask shape {edge_raw.data.shape} != ({sub.num_edges},)")
    if feat_raw.data.shape != (sub.num_nodes, sub.graph.feature_width):
        raise GraphError(
            f"feature mask shape {feat_raw.data.shape} != "
            f"({sub.num_nodes}, {sub.graph.feature_width})")
    edge_mask = T.sigmoid(edge_raw)
    feat_mask = T.sigmoid(feat_raw)
    probs, _ = forward_probs(params, sub, train=False,
                             edge_mask=edge_mask, feat_mask=feat_mask,
                             output_txns=output_txns)
    return probs


def _bernoulli_entropy(m: Tensor, eps: float) -> Tensor:
    one_minus = T.sub(1.0, m)
    return T.neg(T.add(T.mul(m, T.log(T.add(m, eps))),
                       T.mul(one_minus, T.log(T.add(one_minus, eps)))))


def explainer_loss(probs: Tensor, labels: np.ndarray, edge_raw: Tensor,
                   feat_raw: Tensor, config: ExplainerConfig) -> Tensor:
    """Cross entropy of the explained class + mask size and entropy penalties."""
    loss = predictor_loss(probs, labels, eps=config.log_eps)
    feat_mask = T.sigmoid(feat_raw)
    n_rows = feat_raw.data.shape[0]
    loss = T.add(loss, T.mul(config.beta_node_feat_size,
                             T.div(T.tensor_sum(feat_mask), float(n_rows))))
    loss = T.add(loss, T.mul(config.beta_node_feat_entropy,
                             T.tensor_mean(_bernoulli_entropy(feat_mask, config.log_eps))))
    if edge_raw.data.size > 0:
        edge_mask = T.sigmoid(edge_raw)
        loss = T.add(loss, T.mul(config.beta_edge_size, T.tensor_sum(edge_mask)))
        loss = T.add(loss, T.mul(config.beta_edge_entropy,
                                 T.tensor_mean(_bernoulli_entropy(edge_mask, config.log_eps))))
    return loss


def optimize_masks(sub: SampledSubgraph, params: PredictorParams, target: int,
                   config: ExplainerConfig | None = None) -> ExplainerMasks:
    """Adam on raw masks for ``config.epochs`` steps; the predictor stays
    frozen in eval mode throughout."""
    config = config or ExplainerConfig()
    g = sub.graph
    if int(sub.seeds[0]) != target:
        raise GraphError("subgraph was not extracted for this target")
    rng = np.random.default_rng(config.seed)
    edge_raw = Tensor(rng.uniform(-config.init_scale, config.init_scale,
                                  sub.num_edges), requires_grad=True)
    feat_raw = Tensor(rng.uniform(-config.init_scale, config.init_scale,
                                  (sub.num_nodes, g.feature_width)), requires_grad=True)

    with _frozen(params):
        base_probs, _ = forward_probs(params, sub, train=False)
        if config.explain_label == "truth":
            target_label = int(g.txn_labels[target])
        else:
            target_label = int(np.argmax(base_probs.data[0]))
        if config.ce_scope == "subgraph":
            out_locals = np.nonzero(sub.nodes < g.n_txn)[0]
            labels = g.txn_labels[sub.nodes[out_locals]].copy()
            labels[out_locals == sub.seed_locals()[0]] = target_label
        else:
            out_locals = None
            labels = np.asarray([target_label])

        opt = Adam([edge_raw, feat_raw], lr=config.lr)
        trace: list[float] = []
        for epoch in range(config.epochs):
            with Tape() as tape:
                probs = masked_forward(sub, params, edge_raw, feat_raw,
                                       output_txns=out_locals)
                loss = explainer_loss(probs, labels, edge_raw, feat_raw, config)
            lv = loss.item()
            if not np.isfinite(lv):
                raise TrainingDiverged(f"explainer loss non-finite at epoch {epoch}")
            trace.append(lv)
            opt.zero_grad()
            tape.backward(loss)
            opt.step()
    return ExplainerMasks(edge_raw=edge_raw, feat_raw=feat_raw, config=config,
                          loss_trace=trace, explained_class=target_label)


# -- export ------------------------------------------------------------------

@dataclass
class ExplanationNode:
    id: str
    type: str
    label: int | None
    feat_importance: list[float]


@dataclass
class ExplanationEdge:
    src: str
    dst: str
    etype: str
    weight: float


@dataclass
class Explanation:
    target: str
    nodes: list[ExplanationNode]
    edges: list[ExplanationEdge]
    threshold: float

    def to_json_dict(self) -> dict:
        return {
            "v": 1,
            "target": self.target,
            "nodes": [
                {"id": n.id, "type": n.type,
                 **({"label": n.label} if n.label is not None else {}),
                 "feat_importance": n.feat_importance}
                for n in self.nodes
            ],
            "edges": [{"src": e.src, "dst": e.dst, "etype": e.etype, "weight": e.weight}
                      for e in self.edges],
            "threshold": self.threshold,
        }

    def save_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def export_explanation(masks: ExplainerMasks, sub: SampledSubgraph,
                       threshold: float = 0.15) -> Explanation:
    """Keep edges whose mask weight clears the threshold; attach per-node
    feature importances and ground-truth labels for txn nodes."""
    g = sub.graph
    weights = masks.edge_mask
    feat = masks.feat_mask
    nodes = []
    for local, global_id in enumerate(sub.nodes):
        v = int(global_id)
        nodes.append(ExplanationNode(
            id=g.key_of(v),
            type=g.node_type(v).value,
            label=int(g.txn_labels[v]) if g.is_txn(v) else None,
            feat_importance=[float(x) for x in feat[local]],
        ))
    edges = []
    for e in range(sub.num_edges):
        w = float(weights[e])
        if w >= threshold:
            edges.append(ExplanationEdge(
                src=g.key_of(int(sub.nodes[sub.edge_src[e]])),
                dst=g.key_of(int(sub.nodes[sub.edge_dst[e]])),
                etype=EDGE_TYPE_ORDER[sub.edge_type_codes[e]].value,
                weight=w,
            ))
    target_key = g.key_of(int(sub.seeds[0]))
    return Explanation(target=target_key, nodes=nodes, edges=edges, threshold=threshold)


_NODE_SHAPE = {"txn": "box", "pmt": "diamond", "email": "ellipse",
               "addr": "house", "buyer": "hexagon"}


def explanation_to_dot(exp: Explanation) -> str:
    """Graphviz export: shape by node type, fraud txns filled, edge penwidth
    proportional to mask weight (weight attr carries the exact value)."""
    lines = ["graph explanation {"]
    for n in exp.nodes:
        attrs = [f"shape={_NODE_SHAPE[n.type]}"]
        if n.type == "txn" and n.label == 1:
            attrs.append("style=filled")
            attrs.append("fillcolor=lightcoral")
        if n.id == exp.target:
            attrs.append("penwidth=2.0")
        lines.append(f'  "{n.id}" [{" ".join(attrs)}];')
    for e in exp.edges:
        pen = 0.5 + 6.0 * e.weight
        lines.append(f'  "{e.src}" -- "{e.dst}" [penwidth={pen:.3f} weight="{e.weight!r}" '
                     f'etype="{e.etype}"];')
    lines.append("}")
    return "\n".join(lines)


_DOT_EDGE_RE = re.compile(
    r'"(?P<src>[^"]+)"\s*--\s*"(?P<dst>[^"]+)"\s*\[[^\]]*weight="(?P<w>[^"]+)"')


def parse_dot_edges(text: str) -> set[tuple[str, str, float]]:
    """Recover the weighted edge set from a DOT export (round-trip check)."""
    out = set()
    for m in _DOT_EDGE_RE.finditer(text):
        out.add((m.group("src"), m.group("dst"), float(m.group("w"))))
    return out


def project_features_2d(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """PCA to 2 components with a deterministic sign convention (the
    largest-magnitude loading of each component is positive).

    Returns (coords (n, 2), explained variance of the two components).
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ValueError(f"need at least 2 feature rows, got shape {rows.shape}")
    centered = rows - rows.mean(axis=0, keepdims=True)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    comps = np.zeros((2, rows.shape[1]))
    var = np.zeros(2)
    k = min(2, vt.shape[0])
    comps[:k] = vt[:k]
    var[:k] = (s[:k] ** 2) / rows.shape[0]
    for i in range(k):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    return centered @ comps.T, var
