import numpy as np
import pytest

from fraudgraph import datagen
from fraudgraph.baselines import BaselineConfig, train_dnn
from fraudgraph.datagen import GenConfig, GenError, GroundTruth, generate, topology_only
from fraudgraph.graph import build_graph, read_log, write_log
from fraudgraph.metrics import auc
from fraudgraph.sampling import chronological_split


def test_fraud_rate_hits_target_at_scale():
    cfg = GenConfig(n_txn=10_000, seed=0)
    records, _ = generate(cfg)
    frac = sum(r.label for r in records) / len(records)
    assert abs(frac - cfg.fraud_rate) <= 0.005
    assert len(records) == 10_000


def test_ring_pmt_degree_exceeds_ring_size():
    cfg = GenConfig(n_txn=2000, seed=1)
    records, gt = generate(cfg)
    g = build_graph(records)
    for p in gt.patterns:
        if p.kind != "stolen_financial":
            continue
        hub = g.id_of(p.hub_key)
        assert g.degree(hub) >= cfg.ring_size + 1


def test_ground_truth_edges_exist_in_graph():
    records, gt = generate(GenConfig(n_txn=1500, seed=2))
    g = build_graph(records)
    graph_edges = {(g.key_of(int(s)), g.key_of(int(d)))
                   for s, d in zip(g.edge_src, g.edge_dst)}
    for p in gt.patterns:
        for edge in p.edges:
            assert tuple(edge) in graph_edges


def test_pattern_labels_fraud_except_reclaim_context():
    records, gt = generate(GenConfig(n_txn=1500, seed=3))
    labels = {r.txn_id: r.label for r in records}
    for p in gt.patterns:
        for t in p.fraud_txns:
            assert labels[t] == 1
            assert gt.tags[t] == p.kind
        for t in p.context_txns:
            assert labels[t] == 0


def test_generation_deterministic_per_seed(tmp_path):
    a, _ = generate(GenConfig(n_txn=800, seed=42))
    b, _ = generate(GenConfig(n_txn=800, seed=42))
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_log(a, pa)
    write_log(b, pb)
    assert pa.read_bytes() == pb.read_bytes()
    c, _ = generate(GenConfig(n_txn=800, seed=43))
    assert [r.txn_id for r in a] != [r.txn_id for r in c] or a != c


def test_topology_only_variant_removes_feature_signal():
    cfg = topology_only(GenConfig(n_txn=3000, seed=4))
    records, gt = generate(cfg)
    feats = np.asarray([r.features for r in records])
    labels = np.asarray([r.label for r in records])
    assert labels.sum() > 0
    # both classes draw from the same feature distribution
    mean_gap = np.abs(feats[labels == 1].mean(axis=0) - feats[labels == 0].mean(axis=0))
    assert mean_gap.max() < 0.25
    assert all(p.kind == "stolen_financial" for p in gt.patterns)


def test_strong_feature_signal_is_learnable_by_dnn():
    # zero-overlap configuration: features alone should separate the classes
    cfg = GenConfig(n_txn=1200, fraud_rate=0.15, fraud_feature_shift=6.0,
                    ring_feature_frac=1.0, seed=5)
    records, _ = generate(cfg)
    g = build_graph(records)
    split = chronological_split(g)
    scores = train_dnn(g.txn_features, g.txn_labels, split,
                       BaselineConfig(n_hid=32, lr=0.005, max_epochs=15,
                                      patience=15, n_batch=128, seed=0))
    test_ids = split.ids("test")
    assert auc(scores[test_ids], g.txn_labels[test_ids]) > 0.95


def test_infeasible_configs_error():
    with pytest.raises(GenError):
        GenConfig(fraud_rate=0.9)
    with pytest.raises(GenError):
        GenConfig(ring_size=2)
    with pytest.raises(GenError):
        generate(GenConfig(n_txn=100, fraud_rate=0.04, ato_count=0))  # 4 fraud < ring
    with pytest.raises(GenError):
        generate(GenConfig(n_txn=200, ring_count=50, seed=0))  # over budget
    with pytest.raises(GenError):
        generate(GenConfig(n_txn=300, n_buyers=500, seed=0))  # groups too small


def test_shared_entity_pools_bound_background_entities():
    cfg = GenConfig(n_txn=600, fraud_rate=0.1, ring_size=4,
                    n_pmts=20, n_emails=15, n_addrs=10, seed=8)
    records, gt = generate(cfg)
    background = [r for r in records if gt.tags[r.txn_id] == "none"
                  and not any(r.txn_id in p.context_txns for p in gt.patterns)]
    assert background
    # every background txn pays with a pool token (pools are allocated first)
    assert len({r.pmt_id for r in background}) <= 20
    assert all(int(r.pmt_id[1:]) < 20 for r in background)


def test_ground_truth_json_roundtrip(tmp_path):
    _, gt = generate(GenConfig(n_txn=900, seed=6))
    path = tmp_path / "gt.json"
    gt.save_json(path)
    loaded = GroundTruth.load_json(path)
    assert loaded.tags == gt.tags
    assert loaded.patterns == gt.patterns


def test_empty_record_list_writes_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    write_log([], path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("txn_id,timestamp,")


def test_thousand_record_roundtrip(tmp_path):
    records, _ = generate(GenConfig(n_txn=1000, seed=7))
    path = tmp_path / "log.csv"
    write_log(records, path)
    assert read_log(path) == records


def test_datagen_reexports_log_io():
    assert datagen.write_log is write_log
    assert datagen.read_log is read_log
