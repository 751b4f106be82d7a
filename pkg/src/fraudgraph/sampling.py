"""Capped-fanout k-hop neighbor sampling and chronological splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import GraphError, HeteroGraph

MISSING_TS = np.iinfo(np.int64).min

PARTS = ("train", "val", "test")

# dataset-construction defaults: 3-hop neighborhoods, at most 32 per hop
DEFAULT_K = 3
DEFAULT_FANOUT = 32


@dataclass
class SampledSubgraph:
    """Nodes reached by capped BFS from the seeds, plus all induced edges.

    ``nodes`` holds global graph ids; position in the array is the local id.
    Edge arrays are in local ids; ``edge_global`` maps back to graph edges.
    """

    graph: HeteroGraph
    seeds: np.ndarray            # global txn ids
    nodes: np.ndarray            # global ids, seeds first
    hops: np.ndarray             # hop distance per local node
    local_of: dict[int, int]
    edge_src: np.ndarray         # local txn-side endpoint
    edge_dst: np.ndarray         # local entity-side endpoint
    edge_type_codes: np.ndarray
    edge_global: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edge_src)

    def seed_locals(self) -> np.ndarray:
        return np.asarray([self.local_of[int(s)] for s in self.seeds], dtype=np.int64)


def sample_khop(g: HeteroGraph, seeds, k: int, fanout: int | None,
                rng: np.random.Generator) -> SampledSubgraph:
    """Breadth-first expansion from txn seeds.

    At each frontier node, min(degree, fanout) neighbors are drawn uniformly
    without replacement (all of them when ``fanout`` is None). A node enters
    at its smallest sampled hop distance. Edges are the graph edges induced
    by the sampled node set, so with ``fanout=None`` the result is the exact
    k-hop BFS ball.
    """
    if k < 1:
        raise GraphError(f"k must be >= 1, got {k}")
    if fanout is not None and fanout < 1:
        raise GraphError(f"fanout must be >= 1, got {fanout}")
    seeds = np.asarray(seeds, dtype=np.int64)
    for s in seeds:
        if not 0 <= s < g.num_nodes:
            raise GraphError(f"unknown seed node {int(s)}")
        if not g.is_txn(int(s)):
            raise GraphError(f"seed {int(s)} is not a txn node")

    hop_of: dict[int, int] = {}
    order: list[int] = []
    for s in seeds.tolist():
        if s not in hop_of:
            hop_of[s] = 0
            order.append(s)
    frontier = list(order)
    for hop in range(1, k + 1):
        nxt: list[int] = []
        for v in frontier:
            nbrs, _ = g.neighbor_slice(v)
            if fanout is not None and len(nbrs) > fanout:
                chosen = rng.choice(nbrs, size=fanout, replace=False)
                chosen = np.sort(chosen)
            else:
                chosen = nbrs
            for u in chosen.tolist():
                if u not in hop_of:
                    hop_of[u] = hop
                    order.append(u)
                    nxt.append(u)
        frontier = nxt

    nodes = np.asarray(order, dtype=np.int64)
    local_of = {v: i for i, v in enumerate(order)}
    in_set = np.zeros(g.num_nodes, dtype=bool)
    in_set[nodes] = True
    emask = in_set[g.edge_src] & in_set[g.edge_dst]
    eids = np.nonzero(emask)[0]
    src_l = np.asarray([local_of[v] for v in g.edge_src[eids].tolist()], dtype=np.int64)
    dst_l = np.asarray([local_of[v] for v in g.edge_dst[eids].tolist()], dtype=np.int64)
    return SampledSubgraph(
        graph=g,
        seeds=seeds,
        nodes=nodes,
        hops=np.asarray([hop_of[v] for v in order], dtype=np.int64),
        local_of=local_of,
        edge_src=src_l,
        edge_dst=dst_l,
        edge_type_codes=g.edge_type_codes[eids],
        edge_global=eids.astype(np.int64),
    )


@dataclass
class SplitAssignment:
    """Per-txn partition tags: 0=train, 1=val, 2=test."""

    tags: np.ndarray

    def ids(self, part: str) -> np.ndarray:
        try:
            code = PARTS.index(part)
        except ValueError:
            raise GraphError(f"unknown partition {part!r}") from None
        return np.nonzero(self.tags == code)[0].astype(np.int64)


def chronological_split(g: HeteroGraph,
                        ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)) -> SplitAssignment:
    """Sort txns by (timestamp, id) and cut at the ratio boundaries."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise GraphError(f"split ratios must sum to 1, got {ratios}")
    n = g.n_txn
    if n == 0:
        raise GraphError("graph has no transactions to split")
    if np.any(g.txn_timestamps == MISSING_TS):
        raise GraphError("cannot split chronologically: some txns have no timestamp")
    order = np.lexsort((np.arange(n), g.txn_timestamps))
    n_train = int(round(n * ratios[0]))
    n_val = int(round(n * ratios[1]))
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)
    tags = np.empty(n, dtype=np.int8)
    tags[order[:n_train]] = 0
    tags[order[n_train:n_train + n_val]] = 1
    tags[order[n_train + n_val:]] = 2
    return SplitAssignment(tags=tags)


def minibatches(split: SplitAssignment, part: str, n_batch: int,
                rng: np.random.Generator):
    """One epoch of seed-id batches: shuffle the partition, then yield
    consecutive chunks of ``n_batch`` (last chunk may be smaller)."""
    if n_batch < 1:
        raise GraphError(f"n_batch must be >= 1, got {n_batch}")
    ids = split.ids(part)
    if len(ids) == 0:
        raise GraphError(f"partition {part!r} is empty")
    perm = rng.permutation(len(ids))
    shuffled = ids[perm]
    for start in range(0, len(shuffled), n_batch):
        yield shuffled[start:start + n_batch]
