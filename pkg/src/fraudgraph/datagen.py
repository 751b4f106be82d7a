"""Synthetic transaction logs with planted fraud patterns.

Two patterns are planted on top of a background of stable buyers:

* stolen_financial: one payment token is hit by a burst of fraud txns from
  throwaway identities (guest checkout, single-use email/address), then the
  legitimate owner reclaims it and keeps transacting with their own entities.
* ato (account takeover): one buyer account emits normal txns, then later
  fraud txns whose behavior features shift and whose address/payment are
  fresh drops.

Feature vectors are class-conditional Gaussians on a signal block plus pure
noise dims; ``ring_feature_frac`` controls how much of the fraud shift ring
txns get (0 = ring signal lives only in the graph structure).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .graph import (NodeType, TransactionRecord, entity_key, read_log,
                    write_log)

__all__ = [
    "GenConfig",
    "GroundTruth",
    "PatternInfo",
    "GenError",
    "generate",
    "topology_only",
    "write_log",
    "read_log",
]

EPOCH_START = 1_700_000_000
SPAN = 90 * 86_400


class GenError(ValueError):
    """Infeasible generation configuration."""


@dataclass(frozen=True)
class GenConfig:
    n_txn: int = 10_000
    fraud_rate: float = 0.043
    n_features: int = 16
    signal_dims: int = 6
    feature_noise: float = 1.0
    fraud_feature_shift: float = 1.6
    ring_feature_frac: float = 0.5
    n_buyers: int | None = None
    n_pmts: int | None = None      # shared background pool; None = per-buyer
    n_emails: int | None = None
    n_addrs: int | None = None
    ring_count: int | None = None
    ring_size: int = 8
    ato_count: int | None = None
    reclaim_count: int = 6
    guest_rate: float = 0.12
    minimal_rate: float = 0.05
    min_group_size: int = 5
    seed: int = 7

    def __post_init__(self):
        if not 0.0 < self.fraud_rate < 0.5:
            raise GenError(f"fraud_rate must be in (0, 0.5), got {self.fraud_rate}")
        if self.ring_size < 3:
            raise GenError(f"ring_size must be >= 3, got {self.ring_size}")
        if self.reclaim_count < 1:
            raise GenError("reclaim_count must be >= 1")
        if self.signal_dims > self.n_features:
            raise GenError("signal_dims cannot exceed n_features")


def topology_only(cfg: GenConfig) -> GenConfig:
    """Variant whose fraud features are indistinguishable from background:
    the only fraud signal is the planted ring structure."""
    return replace(cfg, fraud_feature_shift=0.0, ring_feature_frac=0.0, ato_count=0)


@dataclass
class PatternInfo:
    kind: str                              # "stolen_financial" | "ato"
    hub_key: str                           # shared entity at the pattern core
    fraud_txns: list[str]
    context_txns: list[str]                # post-reclaim / pre-takeover legits
    edges: list[tuple[str, str]]           # (txn_id, entity key) ground truth


@dataclass
class GroundTruth:
    tags: dict[str, str]                   # txn_id -> none|stolen_financial|ato
    patterns: list[PatternInfo] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "v": 1,
            "tags": self.tags,
            "patterns": [
                {"kind": p.kind, "hub_key": p.hub_key, "fraud_txns": p.fraud_txns,
                 "context_txns": p.context_txns,
                 "edges": [list(e) for e in p.edges]}
                for p in self.patterns
            ],
        }

    def save_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load_json(cls, path: str | Path) -> "GroundTruth":
        with open(path) as fh:
            obj = json.load(fh)
        return cls(
            tags=obj["tags"],
            patterns=[PatternInfo(kind=p["kind"], hub_key=p["hub_key"],
                                  fraud_txns=p["fraud_txns"],
                                  context_txns=p["context_txns"],
                                  edges=[tuple(e) for e in p["edges"]])
                      for p in obj["patterns"]],
        )


class _IdPool:
    def __init__(self):
        self.counters = {"t": 0, "b": 0, "p": 0, "e": 0, "a": 0}

    def next(self, prefix: str) -> str:
        n = self.counters[prefix]
        self.counters[prefix] = n + 1
        return f"{prefix}{n:06d}"


def _split_budget(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def generate(config: GenConfig) -> tuple[list[TransactionRecord], GroundTruth]:
    """Emit records (sorted by timestamp) and the planted-pattern ground truth."""
    rng = np.random.default_rng(config.seed)
    ids = _IdPool()
    n_fraud = int(round(config.n_txn * config.fraud_rate))

    # -- pattern budgets ---------------------------------------------------
    if config.ato_count == 0:
        ring_count = config.ring_count
        if ring_count is None:
            ring_count = n_fraud // config.ring_size
        if ring_count < 1:
            raise GenError(
                f"fraud budget {n_fraud} cannot host a ring of size {config.ring_size}")
        ato_sizes: list[int] = []
        ring_budget = n_fraud
    else:
        ring_count = config.ring_count
        if ring_count is None:
            ring_count = int(0.75 * n_fraud) // config.ring_size
            if ring_count == 0 and n_fraud >= config.ring_size:
                ring_count = 1
        ring_budget = ring_count * config.ring_size
        ato_total = n_fraud - ring_budget
        if ato_total < 0:
            raise GenError(
                f"ring_count={ring_count} x ring_size={config.ring_size} exceeds "
                f"the fraud budget of {n_fraud}")
        ato_count = config.ato_count
        if ato_count is None:
            ato_count = max(1, int(round(ato_total / 5))) if ato_total > 0 else 0
        if ato_count > 0 and ato_total < 2 * ato_count:
            raise GenError(f"not enough fraud budget for {ato_count} takeover buyers")
        ato_sizes = _split_budget(ato_total, ato_count) if ato_count else []
        ring_budget = n_fraud - ato_total
    ring_sizes = [config.ring_size] * ring_count
    if ring_count:
        for i in range(ring_budget - config.ring_size * ring_count):
            ring_sizes[i % ring_count] += 1
    elif ring_budget:
        raise GenError(
            f"fraud budget {n_fraud} cannot be allocated (no rings fit and "
            f"account takeovers are disabled or insufficient)")

    ato_legit_sizes = [int(rng.integers(3, 6)) for _ in ato_sizes]
    n_pattern_legit = ring_count * config.reclaim_count + sum(ato_legit_sizes)
    n_bg = config.n_txn - n_fraud - n_pattern_legit
    if n_bg < config.min_group_size:
        raise GenError(
            f"n_txn={config.n_txn} leaves no room for background traffic "
            f"({n_fraud} fraud + {n_pattern_legit} pattern-legit txns)")

    # -- feature model -------------------------------------------------------
    def legit_feats() -> list[float]:
        return list(rng.normal(0.0, config.feature_noise, config.n_features))

    def fraud_feats(frac: float) -> list[float]:
        x = rng.normal(0.0, config.feature_noise, config.n_features)
        x[: config.signal_dims] += config.fraud_feature_shift * frac
        return list(x)

    def ts_at(frac: float) -> int:
        return int(EPOCH_START + frac * SPAN)

    records: list[TransactionRecord] = []
    tags: dict[str, str] = {}
    patterns: list[PatternInfo] = []

    def emit(ts, buyer, pmt, email, addr, label, feats, tag="none"):
        tid = ids.next("t")
        records.append(TransactionRecord(
            txn_id=tid, timestamp=int(ts), buyer_id=buyer, pmt_id=pmt,
            email_id=email, addr_id=addr, label=label, features=feats))
        tags[tid] = tag
        return tid

    # -- background buyers ---------------------------------------------------
    if config.n_buyers is not None:
        if n_bg // config.n_buyers < config.min_group_size:
            raise GenError(
                f"n_buyers={config.n_buyers} gives groups below min_group_size")
        buyer_sizes = _split_budget(n_bg, config.n_buyers)
    else:
        buyer_sizes = []
        remaining = n_bg
        while remaining > 0:
            size = int(rng.integers(config.min_group_size, 13))
            size = min(size, remaining)
            if size < config.min_group_size:
                buyer_sizes[-1] += size  # fold the tail into the last group
                break
            buyer_sizes.append(size)
            remaining -= size

    # optional shared entity pools: buyers then draw their personal entities
    # from a fixed pool, which adds benign cross-buyer linkage
    pool_pmts = [ids.next("p") for _ in range(config.n_pmts)] if config.n_pmts else None
    pool_emails = [ids.next("e") for _ in range(config.n_emails)] if config.n_emails else None
    pool_addrs = [ids.next("a") for _ in range(config.n_addrs)] if config.n_addrs else None

    def draw(pool: list[str] | None, prefix: str, count: int) -> list[str]:
        if pool is None:
            return [ids.next(prefix) for _ in range(count)]
        return [pool[int(rng.integers(0, len(pool)))] for _ in range(count)]

    for size in buyer_sizes:
        buyer = ids.next("b")
        pmts = draw(pool_pmts, "p", int(rng.integers(1, 3)))
        email = draw(pool_emails, "e", 1)[0]
        addrs = draw(pool_addrs, "a", int(rng.integers(1, 3)))
        for _ in range(size):
            ts = ts_at(rng.uniform(0.0, 1.0))
            pmt = pmts[int(rng.integers(0, len(pmts)))]
            addr = addrs[int(rng.integers(0, len(addrs)))]
            u = rng.random()
            if u < config.minimal_rate:
                # guest checkout with throwaway contact details: after entity
                # filtering only the (reused) payment edge survives
                emit(ts, "", pmt, ids.next("e"), ids.next("a"), 0, legit_feats())
            elif u < config.minimal_rate + config.guest_rate:
                emit(ts, "", pmt, email, addr, 0, legit_feats())
            else:
                emit(ts, buyer, pmt, email, addr, 0, legit_feats())

    # -- stolen-financial rings ------------------------------------------------
    for size in ring_sizes:
        pmt = ids.next("p")
        pmt_key = entity_key(NodeType.PMT, pmt)
        window = rng.uniform(0.05, 0.95)
        fraud_txns: list[str] = []
        edges: list[tuple[str, str]] = []
        t = window
        for _ in range(size):
            t += rng.uniform(60, 1800) / SPAN  # minutes apart
            tid = emit(ts_at(min(t, 0.999)), "", pmt, ids.next("e"), ids.next("a"),
                       1, fraud_feats(config.ring_feature_frac), tag="stolen_financial")
            fraud_txns.append(tid)
            edges.append((tid, pmt_key))
        owner_buyer = ids.next("b")
        owner_email = ids.next("e")
        owner_addr = ids.next("a")
        context: list[str] = []
        for _ in range(config.reclaim_count):
            rt = min(window + rng.uniform(0.08, 0.2), 0.999)
            tid = emit(ts_at(rt), owner_buyer, pmt, owner_email, owner_addr,
                       0, legit_feats(), tag="stolen_financial")
            context.append(tid)
        patterns.append(PatternInfo(kind="stolen_financial", hub_key=pmt_key,
                                    fraud_txns=fraud_txns, context_txns=context,
                                    edges=edges))

    # -- account takeovers -------------------------------------------------------
    for n_fraud_txns, n_legit_txns in zip(ato_sizes, ato_legit_sizes):
        buyer = ids.next("b")
        buyer_key = entity_key(NodeType.BUYER, buyer)
        email = ids.next("e")
        pmt = ids.next("p")
        addr = ids.next("a")
        takeover = rng.uniform(0.3, 0.85)
        context = []
        for _ in range(n_legit_txns):
            ts = ts_at(rng.uniform(0.02, max(takeover - 0.02, 0.05)))
            context.append(emit(ts, buyer, pmt, email, addr, 0, legit_feats()))
        fraud_txns = []
        edges = []
        for _ in range(n_fraud_txns):
            ts = ts_at(min(takeover + rng.uniform(0.0, 0.1), 0.999))
            tid = emit(ts, buyer, ids.next("p"), email, ids.next("a"),
                       1, fraud_feats(1.0), tag="ato")
            fraud_txns.append(tid)
            edges.append((tid, buyer_key))
        patterns.append(PatternInfo(kind="ato", hub_key=buyer_key,
                                    fraud_txns=fraud_txns, context_txns=context,
                                    edges=edges))

    records.sort(key=lambda r: (r.timestamp, r.txn_id))
    return records, GroundTruth(tags=tags, patterns=patterns)
