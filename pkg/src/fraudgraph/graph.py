"""Typed transaction-graph data model and construction from transaction logs.

Transactions and the entities they touch (payment token, email, shipping
address, buyer) are all nodes; an edge links a transaction to each entity it
used. Only transaction nodes carry features, labels and timestamps. The graph
is immutable after construction and indexed bidirectionally in CSR form.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np


class GraphError(ValueError):
    """Malformed records, logs or graph lookups."""


class NodeType(str, Enum):
    TXN = "txn"
    PMT = "pmt"
    EMAIL = "email"
    ADDR = "addr"
    BUYER = "buyer"


ENTITY_TYPES = (NodeType.PMT, NodeType.EMAIL, NodeType.ADDR, NodeType.BUYER)
NODE_TYPE_ORDER = (NodeType.TXN,) + ENTITY_TYPES
NODE_TYPE_CODE = {t: i for i, t in enumerate(NODE_TYPE_ORDER)}


class EdgeType(str, Enum):
    TXN_PMT = "txn_pmt"
    TXN_EMAIL = "txn_email"
    TXN_ADDR = "txn_addr"
    TXN_BUYER = "txn_buyer"


EDGE_TYPE_ORDER = (EdgeType.TXN_PMT, EdgeType.TXN_EMAIL, EdgeType.TXN_ADDR, EdgeType.TXN_BUYER)
EDGE_TYPE_CODE = {t: i for i, t in enumerate(EDGE_TYPE_ORDER)}
EDGE_FOR_ENTITY = {
    NodeType.PMT: EdgeType.TXN_PMT,
    NodeType.EMAIL: EdgeType.TXN_EMAIL,
    NodeType.ADDR: EdgeType.TXN_ADDR,
    NodeType.BUYER: EdgeType.TXN_BUYER,
}

LEGIT, FRAUD = 0, 1


@dataclass
class TransactionRecord:
    """One row of the transaction log. Empty entity ids mean "no link"
    (guest checkout, missing billing email, ...)."""

    txn_id: str
    timestamp: int
    buyer_id: str
    pmt_id: str
    email_id: str
    addr_id: str
    label: int
    features: list[float]

    def entity_fields(self) -> list[tuple[NodeType, str]]:
        pairs = [
            (NodeType.PMT, self.pmt_id),
            (NodeType.EMAIL, self.email_id),
            (NodeType.ADDR, self.addr_id),
            (NodeType.BUYER, self.buyer_id),
        ]
        return [(t, v) for t, v in pairs if v]


def entity_key(ntype: NodeType, raw_id: str) -> str:
    return f"{ntype.value}:{raw_id}"


@dataclass
class HeteroGraph:
    """Immutable typed graph. Transaction nodes come first (ids 0..n_txn-1,
    in record order), then entity nodes grouped by type and sorted by key."""

    node_keys: list[str]
    node_type_codes: np.ndarray          # int8, index into NODE_TYPE_ORDER
    n_txn: int
    txn_features: np.ndarray             # (n_txn, F) float64
    txn_labels: np.ndarray               # (n_txn,) int64
    txn_timestamps: np.ndarray           # (n_txn,) int64
    edge_src: np.ndarray                 # (E,) txn node ids
    edge_dst: np.ndarray                 # (E,) entity node ids
    edge_type_codes: np.ndarray          # (E,) int8, index into EDGE_TYPE_ORDER
    key_to_id: dict[str, int] = field(repr=False, default_factory=dict)
    adj_offsets: np.ndarray = field(repr=False, default=None)
    adj_nbrs: np.ndarray = field(repr=False, default=None)
    adj_edges: np.ndarray = field(repr=False, default=None)

    def __post_init__(self) -> None:
        if not self.key_to_id:
            self.key_to_id = {k: i for i, k in enumerate(self.node_keys)}
        if self.adj_offsets is None:
            self._build_adjacency()

    def _build_adjacency(self) -> None:
        n = self.num_nodes
        e = len(self.edge_src)
        ends_a = np.concatenate([self.edge_src, self.edge_dst])
        ends_b = np.concatenate([self.edge_dst, self.edge_src])
        eids = np.concatenate([np.arange(e), np.arange(e)])
        order = np.lexsort((ends_b, ends_a))
        self.adj_nbrs = ends_b[order]
        self.adj_edges = eids[order]
        counts = np.bincount(ends_a, minlength=n)
        self.adj_offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    # -- basic accessors ---------------------------------------------------
    @property
    def num_nodes(self) -> int:
        return len(self.node_keys)

    @property
    def num_edges(self) -> int:
        return len(self.edge_src)

    @property
    def feature_width(self) -> int:
        return self.txn_features.shape[1]

    def node_type(self, v: int) -> NodeType:
        self._check_node(v)
        return NODE_TYPE_ORDER[self.node_type_codes[v]]

    def is_txn(self, v: int) -> bool:
        return 0 <= v < self.n_txn

    def key_of(self, v: int) -> str:
        self._check_node(v)
        return self.node_keys[v]

    def id_of(self, key: str) -> int:
        try:
            return self.key_to_id[key]
        except KeyError:
            raise GraphError(f"unknown node key {key!r}") from None

    def degree(self, v: int) -> int:
        self._check_node(v)
        return int(self.adj_offsets[v + 1] - self.adj_offsets[v])

    def neighbors(self, v: int) -> list[tuple[int, EdgeType, int]]:
        """(neighbor id, edge type, edge id) triples, ascending neighbor id."""
        self._check_node(v)
        lo, hi = self.adj_offsets[v], self.adj_offsets[v + 1]
        return [
            (int(n), EDGE_TYPE_ORDER[self.edge_type_codes[e]], int(e))
            for n, e in zip(self.adj_nbrs[lo:hi], self.adj_edges[lo:hi])
        ]

    def neighbor_slice(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """Raw CSR views (neighbor ids, edge ids) for hot paths."""
        lo, hi = self.adj_offsets[v], self.adj_offsets[v + 1]
        return self.adj_nbrs[lo:hi], self.adj_edges[lo:hi]

    def _check_node(self, v: int) -> None:
        if not 0 <= v < self.num_nodes:
            raise GraphError(f"unknown node id {v}")


def build_graph(records: Sequence[TransactionRecord]) -> HeteroGraph:
    """Assemble the typed graph: one txn node per record, one entity node per
    distinct (type, id), one edge per present entity field."""
    seen_txn: set[str] = set()
    width: int | None = None
    for r in records:
        if r.txn_id in seen_txn:
            raise GraphError(f"duplicate txn_id {r.txn_id!r}")
        seen_txn.add(r.txn_id)
        if width is None:
            width = len(r.features)
        elif len(r.features) != width:
            raise GraphError(
                f"feature width mismatch: txn {r.txn_id!r} has {len(r.features)}, expected {width}")
    width = width or 0

    entity_ids: dict[NodeType, set[str]] = {t: set() for t in ENTITY_TYPES}
    for r in records:
        for t, raw in r.entity_fields():
            entity_ids[t].add(raw)

    node_keys = [r.txn_id for r in records]
    type_codes = [NODE_TYPE_CODE[NodeType.TXN]] * len(records)
    for t in ENTITY_TYPES:
        for raw in sorted(entity_ids[t]):
            node_keys.append(entity_key(t, raw))
            type_codes.append(NODE_TYPE_CODE[t])
    key_to_id = {k: i for i, k in enumerate(node_keys)}

    src, dst, et = [], [], []
    for i, r in enumerate(records):
        for t, raw in r.entity_fields():
            src.append(i)
            dst.append(key_to_id[entity_key(t, raw)])
            et.append(EDGE_TYPE_CODE[EDGE_FOR_ENTITY[t]])

    return HeteroGraph(
        node_keys=node_keys,
        node_type_codes=np.asarray(type_codes, dtype=np.int8),
        n_txn=len(records),
        txn_features=np.asarray([r.features for r in records], dtype=np.float64).reshape(len(records), width),
        txn_labels=np.asarray([r.label for r in records], dtype=np.int64),
        txn_timestamps=np.asarray([r.timestamp for r in records], dtype=np.int64),
        edge_src=np.asarray(src, dtype=np.int64),
        edge_dst=np.asarray(dst, dtype=np.int64),
        edge_type_codes=np.asarray(et, dtype=np.int8),
    )


def filter_low_degree(g: HeteroGraph, min_txn_count: int) -> HeteroGraph:
    """Drop entity nodes referenced by fewer than ``min_txn_count`` txns
    (with their edges). Transaction nodes are always retained."""
    if min_txn_count < 1:
        raise GraphError(f"min_txn_count must be >= 1, got {min_txn_count}")
    deg = np.bincount(g.edge_dst, minlength=g.num_nodes)
    keep_edge = deg[g.edge_dst] >= min_txn_count
    kept_entities = sorted(set(g.edge_dst[keep_edge].tolist()))

    node_keys = list(g.node_keys[:g.n_txn])
    type_codes = list(g.node_type_codes[:g.n_txn])
    remap: dict[int, int] = {}
    # preserve canonical grouping: entities ordered by (type, key)
    kept_sorted = sorted(kept_entities, key=lambda v: (int(g.node_type_codes[v]), g.node_keys[v]))
    for v in kept_sorted:
        remap[v] = len(node_keys)
        node_keys.append(g.node_keys[v])
        type_codes.append(int(g.node_type_codes[v]))

    src = g.edge_src[keep_edge]
    dst = np.asarray([remap[v] for v in g.edge_dst[keep_edge]], dtype=np.int64)
    return HeteroGraph(
        node_keys=node_keys,
        node_type_codes=np.asarray(type_codes, dtype=np.int8),
        n_txn=g.n_txn,
        txn_features=g.txn_features,
        txn_labels=g.txn_labels,
        txn_timestamps=g.txn_timestamps,
        edge_src=src.astype(np.int64),
        edge_dst=dst,
        edge_type_codes=g.edge_type_codes[keep_edge],
    )


@dataclass
class HomogeneousView:
    """Txn-only projection: u and v are adjacent iff they share an entity."""

    n_txn: int
    edge_u: np.ndarray
    edge_v: np.ndarray


def build_homogeneous_view(g: HeteroGraph) -> HomogeneousView:
    pairs: set[tuple[int, int]] = set()
    for ent in range(g.n_txn, g.num_nodes):
        nbrs, _ = g.neighbor_slice(ent)
        txns = nbrs.tolist()
        for i in range(len(txns)):
            for j in range(i + 1, len(txns)):
                a, b = txns[i], txns[j]
                pairs.add((a, b) if a < b else (b, a))
    if pairs:
        arr = np.asarray(sorted(pairs), dtype=np.int64)
        return HomogeneousView(g.n_txn, arr[:, 0], arr[:, 1])
    empty = np.zeros(0, dtype=np.int64)
    return HomogeneousView(g.n_txn, empty, empty)


# -- transaction-log CSV ---------------------------------------------------

LOG_FIXED_COLUMNS = ["txn_id", "timestamp", "buyer_id", "pmt_id", "email_id", "addr_id", "label"]


def write_log(records: Sequence[TransactionRecord], path: str | Path) -> None:
    """CSV log; floats are serialized as shortest round-trip decimals."""
    width = len(records[0].features) if records else 0
    header = LOG_FIXED_COLUMNS + [f"f_{i}" for i in range(width)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in records:
            writer.writerow(
                [r.txn_id, r.timestamp, r.buyer_id, r.pmt_id, r.email_id, r.addr_id, r.label]
                + [repr(float(x)) for x in r.features])


def read_log(path: str | Path) -> list[TransactionRecord]:
    records: list[TransactionRecord] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GraphError(f"{path}: empty log file") from None
        if header[: len(LOG_FIXED_COLUMNS)] != LOG_FIXED_COLUMNS:
            raise GraphError(f"{path}: unexpected header {header[:7]}")
        width = len(header) - len(LOG_FIXED_COLUMNS)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise GraphError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            try:
                ts = int(row[1])
                label = int(row[6])
                feats = [float(x) for x in row[7:]]
            except ValueError as exc:
                raise GraphError(f"{path}:{lineno}: {exc}") from None
            if label not in (LEGIT, FRAUD):
                raise GraphError(f"{path}:{lineno}: label must be 0 or 1, got {row[6]!r}")
            records.append(TransactionRecord(
                txn_id=row[0], timestamp=ts, buyer_id=row[2], pmt_id=row[3],
                email_id=row[4], addr_id=row[5], label=label, features=feats))
            if len(feats) != width:  # unreachable given the column check; keep the invariant explicit
                raise GraphError(f"{path}:{lineno}: feature width {len(feats)} != {width}")
    return records


# -- graph JSON-lines container ---------------------------------------------

def write_graph_jsonl(g: HeteroGraph, path: str | Path) -> None:
    """One node object per line, then one edge object per line."""
    with open(path, "w") as fh:
        for v in range(g.num_nodes):
            obj: dict = {"id": g.node_keys[v], "type": NODE_TYPE_ORDER[g.node_type_codes[v]].value}
            if g.is_txn(v):
                obj["feat"] = list(g.txn_features[v])
                obj["label"] = int(g.txn_labels[v])
                obj["ts"] = int(g.txn_timestamps[v])
            fh.write(json.dumps(obj) + "\n")
        for e in range(g.num_edges):
            fh.write(json.dumps({
                "src": g.node_keys[g.edge_src[e]],
                "dst": g.node_keys[g.edge_dst[e]],
                "etype": EDGE_TYPE_ORDER[g.edge_type_codes[e]].value,
            }) + "\n")


def read_graph_jsonl(path: str | Path) -> HeteroGraph:
    node_keys: list[str] = []
    type_codes: list[int] = []
    feats: list[list[float]] = []
    labels: list[int] = []
    stamps: list[int] = []
    edges: list[tuple[str, str, str]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "id" in obj:
                ntype = NodeType(obj["type"])
                node_keys.append(obj["id"])
                type_codes.append(NODE_TYPE_CODE[ntype])
                if ntype is NodeType.TXN:
                    feats.append([float(x) for x in obj.get("feat", [])])
                    labels.append(int(obj.get("label", 0)))
                    stamps.append(int(obj.get("ts", 0)))
            elif "src" in obj:
                edges.append((obj["src"], obj["dst"], obj["etype"]))
            else:
                raise GraphError(f"{path}:{lineno}: neither a node nor an edge object")
    n_txn = len(feats)
    key_to_id = {k: i for i, k in enumerate(node_keys)}
    src = np.asarray([key_to_id[s] for s, _, _ in edges], dtype=np.int64)
    dst = np.asarray([key_to_id[d] for _, d, _ in edges], dtype=np.int64)
    et = np.asarray([EDGE_TYPE_CODE[EdgeType(t)] for _, _, t in edges], dtype=np.int8)
    width = len(feats[0]) if feats else 0
    return HeteroGraph(
        node_keys=node_keys,
        node_type_codes=np.asarray(type_codes, dtype=np.int8),
        n_txn=n_txn,
        txn_features=np.asarray(feats, dtype=np.float64).reshape(n_txn, width),
        txn_labels=np.asarray(labels, dtype=np.int64),
        txn_timestamps=np.asarray(stamps, dtype=np.int64),
        edge_src=src,
        edge_dst=dst,
        edge_type_codes=et,
        key_to_id=key_to_id,
    )
