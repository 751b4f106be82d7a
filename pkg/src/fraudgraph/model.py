"""Fraud-risk predictor: stacked heterogeneous attention layers + DNN head.

Each layer computes per-edge multi-head mutual attention between a target
node's query and its neighbors' keys, where source/target node types select
the attention vectors and (at the first layer only) edge-type embeddings are
added to the key/value inputs. Q/K/V projections are shared across node
types. Messages are attention-weighted value vectors, summed per target,
passed through a shared output map, a residual add, layer norm and ReLU.

The forward pass optionally applies an edge mask (scaling per-edge messages)
and a node-feature mask (scaling txn input features); these hooks are what
the explainer optimizes.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

from . import nn
from . import tensor as T
from .graph import (EDGE_TYPE_ORDER, NODE_TYPE_ORDER, GraphError, HeteroGraph,
                    NodeType)
from .sampling import SampledSubgraph, sample_khop
from .tensor import Tensor

N_NODE_TYPES = len(NODE_TYPE_ORDER)
N_EDGE_TYPES = len(EDGE_TYPE_ORDER)
N_CLASSES = 2


class TrainingDiverged(RuntimeError):
    """Loss became non-finite."""


@dataclass(frozen=True)
class PredictorConfig:
    """Architecture plus optimization settings.

    Defaults are the desk-scale configuration; ``full_config`` returns the
    full-size row (6 layers, width 400, 8 heads, batch 32).
    """

    n_hid: int = 64
    n_layers: int = 2
    n_heads: int = 4
    dropout: float = 0.2
    residual: bool = True
    fanout: int | None = 32
    n_batch: int = 256
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.01
    grad_clip: float = 0.25
    max_epochs: int = 30
    patience: int = 5
    log_eps: float = 1e-12
    class_weighted: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_hid % self.n_heads != 0:
            raise ValueError(f"n_hid={self.n_hid} not divisible by n_heads={self.n_heads}")

    @property
    def d_k(self) -> int:
        return self.n_hid // self.n_heads


def full_config(**overrides) -> PredictorConfig:
    base = dict(n_hid=400, n_layers=6, n_heads=8, dropout=0.2, n_batch=32,
                lr=1e-3, weight_decay=0.01, grad_clip=0.25,
                max_epochs=128, patience=32, fanout=32)
    base.update(overrides)
    return PredictorConfig(**base)


class PredictorParams:
    """All learnable weights, keyed by name in a fixed (checkpoint) order."""

    def __init__(self, config: PredictorConfig, feature_width: int,
                 tensors: dict[str, Tensor]):
        self.config = config
        self.feature_width = feature_width
        self.tensors = tensors

    @classmethod
    def init(cls, config: PredictorConfig, feature_width: int,
             rng: np.random.Generator) -> "PredictorParams":
        d, h, dk = config.n_hid, config.n_heads, config.d_k
        p: dict[str, Tensor] = {}
        p["w_in_txn"] = nn.glorot_uniform(rng, (feature_width, d))
        p["w_in_type"] = nn.glorot_uniform(rng, (N_NODE_TYPES, d))
        # type/edge embeddings start at zero; everything else uniform
        p["tau_emb"] = nn.zeros_param((N_NODE_TYPES, d))
        p["phi_emb"] = nn.zeros_param((N_EDGE_TYPES, d))
        for l in range(config.n_layers):
            p[f"layer{l}.w_q"] = nn.glorot_uniform(rng, (d, d))
            p[f"layer{l}.w_k"] = nn.glorot_uniform(rng, (d, d))
            p[f"layer{l}.w_v"] = nn.glorot_uniform(rng, (d, d))
            p[f"layer{l}.w_out"] = nn.glorot_uniform(rng, (d, d))
            p[f"layer{l}.att_src"] = nn.glorot_uniform(rng, (N_NODE_TYPES, h, dk))
            p[f"layer{l}.att_tgt"] = nn.glorot_uniform(rng, (N_NODE_TYPES, h, dk))
            p[f"layer{l}.ln_gain"] = nn.ones_param((d,))
            p[f"layer{l}.ln_bias"] = nn.zeros_param((d,))
        p["head.w_ff"] = nn.glorot_uniform(rng, (d + feature_width, d))
        p["head.b_ff"] = nn.zeros_param((d,))
        p["head.ln_gain"] = nn.ones_param((d,))
        p["head.ln_bias"] = nn.zeros_param((d,))
        p["head.w_cls"] = nn.glorot_uniform(rng, (d, N_CLASSES))
        p["head.b_cls"] = nn.zeros_param((N_CLASSES,))
        return cls(config, feature_width, p)

    def parameters(self) -> list[Tensor]:
        return list(self.tensors.values())

    def q_weight(self, layer: int, node_type: NodeType | None = None) -> Tensor:
        """Q projection for a layer. The same object for every node type:
        projections are shared, so the ``node_type`` argument is only there
        to make the sharing contract explicit."""
        return self.tensors[f"layer{layer}.w_q"]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.tensors.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in self.tensors.items():
            v.data = snap[k].copy()

    def copy(self) -> "PredictorParams":
        return PredictorParams(self.config, self.feature_width,
                               {k: Tensor(v.data.copy(), requires_grad=True)
                                for k, v in self.tensors.items()})


@dataclass
class ForwardState:
    """Intermediate per-layer values for inspection and oracles."""

    dir_src: np.ndarray
    dir_dst: np.ndarray
    h: list[np.ndarray] = field(default_factory=list)          # H^0..H^L
    alpha: list[np.ndarray] = field(default_factory=list)      # (E2, h) per layer
    messages: list[np.ndarray] = field(default_factory=list)   # (E2, d) per layer
    qkv: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=list)


@dataclass
class RiskScore:
    txn_id: str
    fraud_probability: float
    predicted_label: int


def _directed_edges(sub: SampledSubgraph):
    e = sub.num_edges
    dir_src = np.concatenate([sub.edge_src, sub.edge_dst])
    dir_dst = np.concatenate([sub.edge_dst, sub.edge_src])
    dir_et = np.concatenate([sub.edge_type_codes, sub.edge_type_codes]).astype(np.int64)
    dir_undir = np.concatenate([np.arange(e), np.arange(e)])
    # sorting by target keeps every segment op on the fast contiguous path
    order = np.argsort(dir_dst, kind="stable")
    return dir_src[order], dir_dst[order], dir_et[order], dir_undir[order]


def input_embedding(params: PredictorParams, sub: SampledSubgraph,
                    feat_mask: Tensor | None = None) -> tuple[Tensor, Tensor]:
    """H^0 for every subgraph node, plus the (possibly masked) txn features.

    txn nodes: projected features + type embedding. Entity nodes: projected
    one-hot type + type embedding (their only input signal is the type).
    """
    g = sub.graph
    if g.feature_width != params.feature_width:
        raise GraphError(
            f"graph feature width {g.feature_width} != model width {params.feature_width}")
    n = sub.num_nodes
    codes = g.node_type_codes[sub.nodes].astype(np.int64)
    txn_local = np.nonzero(sub.nodes < g.n_txn)[0]
    ent_local = np.nonzero(sub.nodes >= g.n_txn)[0]

    feats = Tensor(g.txn_features[sub.nodes[txn_local]])
    if feat_mask is not None:
        feats = T.mul(feats, T.gather_rows(feat_mask, txn_local))
    txn_part = T.add(T.matmul(feats, params.tensors["w_in_txn"]),
                     T.gather_rows(params.tensors["tau_emb"], codes[txn_local]))
    parts = [txn_part]
    locals_ = [txn_local]
    if len(ent_local):
        ent_part = T.add(T.gather_rows(params.tensors["w_in_type"], codes[ent_local]),
                         T.gather_rows(params.tensors["tau_emb"], codes[ent_local]))
        parts.append(ent_part)
        locals_.append(ent_local)
    h0 = T.segment_sum(T.concat(parts, axis=0), np.concatenate(locals_), n)
    return h0, feats


def _segment_softmax(raw: Tensor, seg: np.ndarray, n: int) -> Tensor:
    """Softmax of per-edge scores grouped by target node, max-shifted."""
    maxes = np.full((n,) + raw.data.shape[1:], -np.inf)
    if len(seg) and np.all(seg[1:] >= seg[:-1]):
        starts = np.concatenate([[0], np.flatnonzero(seg[1:] != seg[:-1]) + 1])
        maxes[seg[starts]] = np.maximum.reduceat(raw.data, starts, axis=0)
    else:
        np.maximum.at(maxes, seg, raw.data)
    shifted = T.sub(raw, Tensor(maxes[seg]))
    e = T.exp(shifted)
    denom = T.segment_sum(e, seg, n)
    return T.div(e, T.gather_rows(denom, seg))


def dnn_head(params: PredictorParams, h_final: Tensor, x_txn: Tensor,
             train: bool, rng: np.random.Generator | None) -> Tensor:
    """tanh(H^L) ++ X -> FF -> dropout -> layernorm -> ReLU -> linear -> softmax."""
    z = T.concat([T.tanh(h_final), x_txn], axis=1)
    t = params.tensors
    return nn.ff_head(z, t["head.w_ff"], t["head.b_ff"], t["head.ln_gain"],
                      t["head.ln_bias"], t["head.w_cls"], t["head.b_cls"],
                      params.config.dropout, train, rng)


def forward_probs(params: PredictorParams, sub: SampledSubgraph, *,
                  train: bool = False, rng: np.random.Generator | None = None,
                  edge_mask: Tensor | None = None,
                  feat_mask: Tensor | None = None,
                  output_txns: np.ndarray | None = None,
                  collect: bool = False) -> tuple[Tensor, ForwardState | None]:
    """Class probabilities for the subgraph's seed txns.

    ``edge_mask`` has one entry per subgraph edge and scales both directed
    message copies of that edge; ``feat_mask`` is (num_nodes, F) and scales
    txn features wherever the model reads them. ``output_txns`` overrides
    which local txn nodes are scored (defaults to the seeds).
    """
    cfg = params.config
    g = sub.graph
    n = sub.num_nodes
    codes = g.node_type_codes[sub.nodes].astype(np.int64)
    dir_src, dir_dst, dir_et, dir_undir = _directed_edges(sub)
    state = ForwardState(dir_src=dir_src, dir_dst=dir_dst) if collect else None

    h, feats = input_embedding(params, sub, feat_mask)
    # map txn-local rows of `feats` back to subgraph-local positions
    txn_local = np.nonzero(sub.nodes < g.n_txn)[0]
    row_of_local = {int(v): i for i, v in enumerate(txn_local)}
    if state is not None:
        state.h.append(h.data.copy())

    sqrt_dk = float(np.sqrt(cfg.d_k))
    have_edges = len(dir_src) > 0
    for l in range(cfg.n_layers):
        if have_edges:
            q_all = T.matmul(h, params.tensors[f"layer{l}.w_q"])
            q_e = T.reshape(T.gather_rows(q_all, dir_dst), (len(dir_dst), cfg.n_heads, cfg.d_k))
            if l == 0:
                kv_in = T.add(T.gather_rows(h, dir_src),
                              T.gather_rows(params.tensors["phi_emb"], dir_et))
                k_e = T.matmul(kv_in, params.tensors[f"layer{l}.w_k"])
                v_e = T.matmul(kv_in, params.tensors[f"layer{l}.w_v"])
            else:
                k_e = T.gather_rows(T.matmul(h, params.tensors[f"layer{l}.w_k"]), dir_src)
                v_e = T.gather_rows(T.matmul(h, params.tensors[f"layer{l}.w_v"]), dir_src)
            k_e = T.reshape(k_e, (len(dir_src), cfg.n_heads, cfg.d_k))
            v_e = T.reshape(v_e, (len(dir_src), cfg.n_heads, cfg.d_k))

            a_src = T.gather_rows(params.tensors[f"layer{l}.att_src"], codes[dir_src])
            a_tgt = T.gather_rows(params.tensors[f"layer{l}.att_tgt"], codes[dir_dst])
            raw = T.div(T.add(T.tensor_sum(T.mul(k_e, a_src), axis=2),
                              T.tensor_sum(T.mul(q_e, a_tgt), axis=2)), sqrt_dk)
            alpha = _segment_softmax(raw, dir_dst, n)
            if state is not None:
                state.qkv.append((q_e.data.copy(), k_e.data.copy(), v_e.data.copy()))
                state.alpha.append(alpha.data.copy())
            alpha_d = T.dropout(alpha, cfg.dropout, train, rng)
            msg = T.reshape(T.mul(v_e, T.reshape(alpha_d, (len(dir_src), cfg.n_heads, 1))),
                            (len(dir_src), cfg.n_hid))
            if edge_mask is not None:
                msg = T.mul(msg, T.reshape(T.gather_rows(edge_mask, dir_undir),
                                           (len(dir_src), 1)))
            if state is not None:
                state.messages.append(msg.data.copy())
            agg = T.segment_sum(msg, dir_dst, n)
            out = T.matmul(agg, params.tensors[f"layer{l}.w_out"])
        else:
            out = T.mul(h, 0.0)
        pre = T.add(h, out) if cfg.residual else out
        h = T.relu(nn.affine_layernorm(pre, params.tensors[f"layer{l}.ln_gain"],
                                       params.tensors[f"layer{l}.ln_bias"]))
        if state is not None:
            state.h.append(h.data.copy())

    out_locals = sub.seed_locals() if output_txns is None else np.asarray(output_txns)
    h_seed = T.gather_rows(h, out_locals)
    feat_rows = np.asarray([row_of_local[int(s)] for s in out_locals], dtype=np.int64)
    x_seed = T.gather_rows(feats, feat_rows)
    probs = dnn_head(params, h_seed, x_seed, train, rng)
    return probs, state


def predictor_loss(probs: Tensor, labels: np.ndarray,
                   eps: float = 1e-12, class_weights: np.ndarray | None = None) -> Tensor:
    """Mean cross entropy of the true class; ``eps`` keeps log finite."""
    if probs.data.shape[0] == 0:
        raise ValueError("empty batch")
    hot = nn.one_hot(labels, probs.data.shape[1])
    picked = T.tensor_sum(T.mul(probs, hot), axis=1)
    nll = T.neg(T.log(T.add(picked, eps)))
    if class_weights is not None:
        w = class_weights[np.asarray(labels, dtype=np.int64)]
        return T.div(T.tensor_sum(T.mul(nll, Tensor(w))), float(w.sum()))
    return T.tensor_mean(nll)


def predict_scores(g: HeteroGraph, params: PredictorParams, txn_ids,
                   fanout: int | None = None, chunk: int = 512) -> np.ndarray:
    """Deterministic eval-mode fraud probabilities (full neighborhoods)."""
    txn_ids = np.asarray(txn_ids, dtype=np.int64)
    rng = np.random.default_rng(0)  # unused when fanout is None
    out = np.empty(len(txn_ids), dtype=np.float64)
    for start in range(0, len(txn_ids), chunk):
        ids = txn_ids[start:start + chunk]
        sub = sample_khop(g, ids, k=params.config.n_layers, fanout=fanout, rng=rng)
        probs, _ = forward_probs(params, sub, train=False)
        out[start:start + len(ids)] = probs.data[:, 1]
    return out


def predict(g: HeteroGraph, params: PredictorParams, txn_ids) -> list[RiskScore]:
    scores = predict_scores(g, params, txn_ids)
    return [RiskScore(txn_id=g.key_of(int(v)), fraud_probability=float(s),
                      predicted_label=int(s >= 0.5))
            for v, s in zip(np.asarray(txn_ids), scores)]


# -- checkpoint container ----------------------------------------------------

CHECKPOINT_KIND = "fraudgraph-predictor"


def save_checkpoint(params: PredictorParams, path: str | Path,
                    extras: dict | None = None) -> None:
    """JSON header line + raw little-endian float64 blocks in header order."""
    cfg = dataclasses.asdict(params.config)
    header = {
        "v": 1,
        "kind": CHECKPOINT_KIND,
        "feature_width": params.feature_width,
        "config": cfg,
        "params": [[name, list(t.data.shape)] for name, t in params.tensors.items()],
        "extras": extras or {},
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        for t in params.tensors.values():
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[PredictorParams, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("kind") != CHECKPOINT_KIND or header.get("v") != 1:
            raise GraphError(f"{path}: not a v1 predictor checkpoint")
        cfg_dict = dict(header["config"])
        cfg_dict["betas"] = tuple(cfg_dict["betas"])
        config = PredictorConfig(**cfg_dict)
        tensors: dict[str, Tensor] = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise GraphError(f"{path}: truncated parameter block {name}")
            arr = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
            tensors[name] = Tensor(arr.copy(), requires_grad=True)
    return PredictorParams(config, header["feature_width"], tensors), header.get("extras", {})
