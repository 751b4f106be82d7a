import inspect
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraudgraph import datagen
from fraudgraph.baselines import (BaselineConfig, _GCNModel, run_experiment,
                                  train_dnn, train_gcn_homogeneous, train_lr)
from fraudgraph.graph import (TransactionRecord, build_graph,
                              build_homogeneous_view, filter_low_degree)
from fraudgraph.metrics import ExperimentReport, ModelReport, auc
from fraudgraph.model import PredictorConfig
from fraudgraph.sampling import SplitAssignment, chronological_split


# -- AUC ----------------------------------------------------------------------

def test_perfect_ranking_gives_one():
    assert auc([0.9, 0.1], [1, 0]) == 1.0


def test_all_ties_give_half():
    assert auc([0.3, 0.3, 0.3, 0.3], [1, 0, 1, 0]) == 0.5


def test_single_class_errors():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


def brute_force_auc(scores, labels):
    scores = np.asarray(scores)
    pos = scores[np.asarray(labels) == 1]
    neg = scores[np.asarray(labels) == 0]
    wins = sum(1 for p in pos for n in neg if p > n)
    ties = sum(1 for p in pos for n in neg if p == n)
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
@settings(max_examples=30, deadline=None)
def test_auc_matches_pairwise_oracle_exactly(seed):
    rng = np.random.default_rng(seed)
    n = 50
    # quantized scores force plenty of exact ties
    scores = np.round(rng.uniform(0, 1, n), 1)
    labels = rng.integers(0, 2, n)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    assert auc(scores, labels) == brute_force_auc(scores, labels)


@given(st.integers(min_value=0, max_value=2 ** 31 - 1),
       st.floats(min_value=0.1, max_value=5.0))
@settings(max_examples=20, deadline=None)
def test_auc_invariant_under_monotone_transforms(seed, scale):
    rng = np.random.default_rng(seed)
    scores = rng.normal(size=30)
    labels = rng.integers(0, 2, 30)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    base = auc(scores, labels)
    assert auc(scale * scores + 3.0, labels) == base
    assert auc(np.tanh(scores), labels) == base


# -- feature-only baselines ---------------------------------------------------

def _even_split(n):
    tags = np.zeros(n, dtype=np.int8)
    tags[int(0.7 * n):int(0.8 * n)] = 1
    tags[int(0.8 * n):] = 2
    return SplitAssignment(tags=tags)


def test_lr_reaches_perfect_auc_on_separable_features():
    rng = np.random.default_rng(0)
    n = 300
    labels = rng.integers(0, 2, n)
    feats = np.stack([labels * 2.0 - 1.0 + 0.05 * rng.normal(size=n),
                      0.3 * rng.normal(size=n)], axis=1)
    cfg = BaselineConfig(lr=0.01, max_epochs=60, patience=60, n_batch=32, seed=1)
    scores = train_lr(feats, labels, _even_split(n), cfg)
    test_ids = _even_split(n).ids("test")
    assert auc(scores[test_ids], labels[test_ids]) == 1.0


def test_dnn_on_constant_features_is_chance():
    rng = np.random.default_rng(1)
    n = 400
    labels = rng.integers(0, 2, n)
    feats = np.ones((n, 3))
    cfg = BaselineConfig(n_hid=16, max_epochs=5, patience=5, n_batch=128, seed=0)
    scores = train_dnn(feats, labels, _even_split(n), cfg)
    test_ids = _even_split(n).ids("test")
    assert abs(auc(scores[test_ids], labels[test_ids]) - 0.5) <= 0.05


def test_dnn_beats_lr_on_nonlinear_interactions():
    rng = np.random.default_rng(2)
    n = 600
    x = rng.normal(size=(n, 2))
    labels = (x[:, 0] * x[:, 1] > 0).astype(int)  # XOR-style parity
    split = _even_split(n)
    cfg = BaselineConfig(n_hid=32, max_epochs=40, patience=40, n_batch=64, seed=3)
    dnn_scores = train_dnn(x, labels, split, cfg)
    lr_scores = train_lr(x, labels, split, cfg)
    test_ids = split.ids("test")
    a_dnn = auc(dnn_scores[test_ids], labels[test_ids])
    a_lr = auc(lr_scores[test_ids], labels[test_ids])
    assert a_dnn >= a_lr


def test_feature_baselines_cannot_see_the_graph():
    # access control: LR and DNN signatures accept features only, no graph
    for fn in (train_lr, train_dnn):
        names = list(inspect.signature(fn).parameters)
        assert names[0] == "features"
        assert "g" not in names and "graph" not in names


# -- homogeneous GCN -----------------------------------------------------------

def _tiny_planted(n=200, seed=5):
    records, _ = datagen.generate(datagen.GenConfig(n_txn=n, fraud_rate=0.12, seed=seed))
    g = filter_low_degree(build_graph(records), 2)
    return g, chronological_split(g)


def test_gcn_forward_matches_dense_normalized_adjacency_oracle():
    records = [
        TransactionRecord(f"t{i}", i, buyer_id=("b0" if i < 3 else "b1"),
                          pmt_id="", email_id="", addr_id="", label=i % 2,
                          features=[float(i), 1.0]) for i in range(5)
    ]
    g = build_graph(records)
    view = build_homogeneous_view(g)
    model = _GCNModel(view, g.txn_features, n_hid=6, n_layers=2, dropout=0.0,
                      rng=np.random.default_rng(7))
    probs = model.full_forward(False, None).data

    # dense oracle
    n = g.n_txn
    a = np.eye(n)
    for u, v in zip(view.edge_u, view.edge_v):
        a[u, v] = a[v, u] = 1.0
    d = a.sum(axis=1)
    a_hat = a / np.sqrt(np.outer(d, d))
    h = g.txn_features.copy()
    for w in model.layers:
        h = np.maximum(a_hat @ h @ w.data, 0.0)
    z = np.concatenate([np.tanh(h), g.txn_features], axis=1)
    t = {k: v.data for k, v in model.t.items()}
    ff = z @ t["w_ff"] + t["b_ff"]
    mu = ff.mean(axis=1, keepdims=True)
    var = ((ff - mu) ** 2).mean(axis=1, keepdims=True)
    ff = ((ff - mu) / np.sqrt(var + 1e-5)) * t["ln_gain"] + t["ln_bias"]
    ff = np.maximum(ff, 0.0)
    logits = ff @ t["w_cls"] + t["b_cls"]
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    expected = e / e.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(probs, expected, atol=1e-9)


def test_gcn_on_edgeless_graph_degenerates_to_feature_model():
    rng = np.random.default_rng(4)
    n = 300
    labels = rng.integers(0, 2, n)
    records = [
        TransactionRecord(f"t{i}", i, "", "", "", "", int(labels[i]),
                          [labels[i] * 2.0 - 1.0 + 0.3 * rng.normal(), rng.normal()])
        for i in range(n)
    ]
    g = build_graph(records)  # no entities at all -> no homogeneous edges
    split = chronological_split(g)
    cfg = BaselineConfig(n_hid=16, lr=0.005, max_epochs=40, patience=40, n_batch=64, seed=2)
    gcn_scores = train_gcn_homogeneous(g, split, cfg)
    dnn_scores = train_dnn(g.txn_features, g.txn_labels, split, cfg)
    test_ids = split.ids("test")
    a_gcn = auc(gcn_scores[test_ids], g.txn_labels[test_ids])
    a_dnn = auc(dnn_scores[test_ids], g.txn_labels[test_ids])
    assert abs(a_gcn - a_dnn) < 0.15
    assert a_gcn > 0.8


def test_gcn_deterministic_per_seed():
    g, split = _tiny_planted()
    cfg = BaselineConfig(n_hid=16, max_epochs=4, patience=4, seed=9)
    s1 = train_gcn_homogeneous(g, split, cfg)
    s2 = train_gcn_homogeneous(g, split, cfg)
    assert np.array_equal(s1, s2)


# -- experiment runner ----------------------------------------------------------

def test_run_experiment_rows_and_stats(tmp_path):
    g, split = _tiny_planted()
    pc = PredictorConfig(n_hid=16, n_layers=2, n_heads=2, n_batch=64,
                         max_epochs=2, patience=2)
    bc = BaselineConfig(n_hid=16, max_epochs=2, patience=2)
    report = run_experiment(["lr", "lr", "dnn"], g, split, seeds=(0, 1),
                            predictor_config=pc, baseline_config=bc,
                            dataset_name="tiny")
    lr_rows = [r for r in report.rows if r.model == "lr"]
    assert len(lr_rows) == 2
    assert lr_rows[0].seed_aucs == lr_rows[1].seed_aucs  # identical model, identical rows
    for row in report.rows:
        if row.seed_aucs:
            mean = sum(row.seed_aucs) / len(row.seed_aucs)
            var = sum((a - mean) ** 2 for a in row.seed_aucs) / len(row.seed_aucs)
            assert abs(row.mean_auc - mean) < 1e-15
            assert abs(row.std_auc - var ** 0.5) < 1e-15
    # omitted baselines appear as labeled gaps
    models = [r.model for r in report.rows]
    for name in ("node2vec", "gat", "hgt"):
        assert name in models
    # JSON + table renderings
    path = tmp_path / "report.json"
    report.save_json(path)
    obj = json.loads(path.read_text())
    assert obj["v"] == 1 and obj["dataset"] == "tiny"
    table = report.render_table()
    assert "lr" in table and "out of scope" in table


def test_identical_seeds_give_zero_std():
    g, split = _tiny_planted()
    bc = BaselineConfig(n_hid=16, max_epochs=2, patience=2)
    report = run_experiment(["dnn"], g, split, seeds=(3, 3),
                            baseline_config=bc, dataset_name="tiny")
    row = next(r for r in report.rows if r.model == "dnn")
    assert row.std_auc == 0.0
