import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraudgraph.graph import (EDGE_FOR_ENTITY, ENTITY_TYPES, GraphError,
                              HeteroGraph, NodeType, TransactionRecord,
                              build_graph, build_homogeneous_view, entity_key,
                              filter_low_degree, read_graph_jsonl, read_log,
                              write_graph_jsonl, write_log)


def rec(txn_id, ts=0, buyer="", pmt="", email="", addr="", label=0, feats=(1.0, 2.0)):
    return TransactionRecord(txn_id=txn_id, timestamp=ts, buyer_id=buyer,
                             pmt_id=pmt, email_id=email, addr_id=addr,
                             label=label, features=list(feats))


def two_record_shared_pmt():
    return [
        rec("t0", ts=1, buyer="b0", pmt="p0", email="e0", addr="a0"),
        rec("t1", ts=2, buyer="b1", pmt="p0", email="e1", addr="a1", label=1),
    ]


# -- construction ------------------------------------------------------------

def test_shared_pmt_decouples_into_typed_nodes():
    g = build_graph(two_record_shared_pmt())
    counts = {t: 0 for t in NodeType}
    for v in range(g.num_nodes):
        counts[g.node_type(v)] += 1
    assert counts[NodeType.TXN] == 2
    assert counts[NodeType.PMT] == 1
    assert counts[NodeType.BUYER] == 2
    assert counts[NodeType.EMAIL] == 2
    assert counts[NodeType.ADDR] == 2
    pmt = g.id_of(entity_key(NodeType.PMT, "p0"))
    assert g.degree(pmt) == 2


def test_single_record_with_all_entities():
    g = build_graph([rec("t0", buyer="b", pmt="p", email="e", addr="a")])
    assert g.num_nodes == 5
    assert g.num_edges == 4


def test_missing_entity_fields_omit_edges():
    g = build_graph([rec("t0", pmt="p")])  # guest checkout: no buyer link
    assert g.num_nodes == 2
    assert g.num_edges == 1


def test_duplicate_txn_id_rejected():
    with pytest.raises(GraphError, match="duplicate"):
        build_graph([rec("t0"), rec("t0")])


def test_feature_width_mismatch_rejected():
    with pytest.raises(GraphError, match="width"):
        build_graph([rec("t0"), rec("t1", feats=(1.0,))])


def test_node_type_histogram_matches_record_recount():
    rng = np.random.default_rng(5)
    records = []
    for i in range(1000):
        records.append(rec(
            f"t{i}", ts=i,
            buyer=f"b{rng.integers(0, 80)}" if rng.random() > 0.1 else "",
            pmt=f"p{rng.integers(0, 120)}",
            email=f"e{rng.integers(0, 100)}",
            addr=f"a{rng.integers(0, 60)}" if rng.random() > 0.2 else ""))
    g = build_graph(records)
    expected = {t: set() for t in ENTITY_TYPES}
    for r in records:
        for t, raw in r.entity_fields():
            expected[t].add(raw)
    for t in ENTITY_TYPES:
        got = sum(1 for v in range(g.num_nodes) if g.node_type(v) is t)
        assert got == len(expected[t])
    assert g.n_txn == 1000


def test_entity_degree_equals_referencing_records():
    records = two_record_shared_pmt() + [rec("t2", ts=3, pmt="p0")]
    g = build_graph(records)
    pmt = g.id_of(entity_key(NodeType.PMT, "p0"))
    assert g.degree(pmt) == 3


def test_edge_types_consistent_with_endpoint_types():
    g = build_graph(two_record_shared_pmt())
    for v in range(g.num_nodes):
        for nbr, etype, _ in g.neighbors(v):
            a, b = g.node_type(v), g.node_type(nbr)
            assert (a is NodeType.TXN) != (b is NodeType.TXN)
            entity = b if a is NodeType.TXN else a
            assert EDGE_FOR_ENTITY[entity] is etype


def test_permutation_invariance_after_canonical_sort():
    rng = np.random.default_rng(11)
    records = []
    for i in range(60):
        records.append(rec(f"t{i}", ts=int(rng.integers(0, 50)),
                           buyer=f"b{rng.integers(0, 9)}", pmt=f"p{rng.integers(0, 7)}",
                           email=f"e{rng.integers(0, 11)}", addr=f"a{rng.integers(0, 5)}",
                           feats=(float(i), float(i) / 2)))
    g1 = build_graph(records)
    shuffled = list(records)
    rng.shuffle(shuffled)
    g2 = build_graph(shuffled)

    def canon(g: HeteroGraph):
        edges = set()
        for e in range(g.num_edges):
            edges.add((g.key_of(int(g.edge_src[e])), g.key_of(int(g.edge_dst[e])),
                       int(g.edge_type_codes[e])))
        nodes = {g.key_of(v): g.node_type(v) for v in range(g.num_nodes)}
        txn = {g.key_of(v): (tuple(g.txn_features[v]), int(g.txn_labels[v]),
                             int(g.txn_timestamps[v])) for v in range(g.n_txn)}
        return nodes, edges, txn

    assert canon(g1) == canon(g2)


# -- neighbors ---------------------------------------------------------------

def test_isolated_txn_has_no_neighbors():
    g = build_graph([rec("t0")])
    assert g.neighbors(0) == []


def test_shared_pmt_neighbors_are_its_txns():
    g = build_graph(two_record_shared_pmt())
    pmt = g.id_of(entity_key(NodeType.PMT, "p0"))
    nbrs = [n for n, _, _ in g.neighbors(pmt)]
    assert nbrs == [0, 1]


def test_neighbors_unknown_id_errors():
    g = build_graph([rec("t0")])
    with pytest.raises(GraphError):
        g.neighbors(99)


@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_neighbor_symmetry_exhaustive(seed):
    rng = np.random.default_rng(seed)
    records = [rec(f"t{i}", ts=i,
                   buyer=f"b{rng.integers(0, 5)}" if rng.random() > 0.3 else "",
                   pmt=f"p{rng.integers(0, 4)}" if rng.random() > 0.3 else "")
               for i in range(12)]
    g = build_graph(records)
    nbr_sets = [{n for n, _, _ in g.neighbors(v)} for v in range(g.num_nodes)]
    for v in range(g.num_nodes):
        assert v not in nbr_sets[v]
        for u in nbr_sets[v]:
            assert v in nbr_sets[u]


# -- homogeneous view --------------------------------------------------------

def test_shared_pmt_gives_one_homogeneous_edge():
    view = build_homogeneous_view(build_graph(two_record_shared_pmt()))
    assert list(zip(view.edge_u, view.edge_v)) == [(0, 1)]


def test_disjoint_entities_give_no_edges():
    g = build_graph([rec("t0", pmt="p0"), rec("t1", pmt="p1")])
    view = build_homogeneous_view(g)
    assert len(view.edge_u) == 0


@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_homogeneous_view_equals_two_hop_reachability(seed):
    rng = np.random.default_rng(seed)
    records = [rec(f"t{i}", ts=i,
                   buyer=f"b{rng.integers(0, 4)}" if rng.random() > 0.4 else "",
                   pmt=f"p{rng.integers(0, 3)}" if rng.random() > 0.4 else "",
                   email=f"e{rng.integers(0, 5)}" if rng.random() > 0.4 else "")
               for i in range(10)]
    g = build_graph(records)
    view = build_homogeneous_view(g)
    got = set(zip(view.edge_u.tolist(), view.edge_v.tolist()))
    want = set()
    for u in range(g.n_txn):
        for ent, _, _ in g.neighbors(u):
            for v, _, _ in g.neighbors(ent):
                if v != u:
                    want.add((min(u, v), max(u, v)))
    assert got == want


# -- degree filtering --------------------------------------------------------

def test_filter_threshold_one_is_identity():
    g = build_graph(two_record_shared_pmt())
    f = filter_low_degree(g, 1)
    assert f.num_nodes == g.num_nodes
    assert f.num_edges == g.num_edges


def test_filter_removes_single_use_entities_keeps_txns():
    g = build_graph(two_record_shared_pmt())
    f = filter_low_degree(g, 2)
    # only the shared pmt survives; both txns stay
    assert f.n_txn == 2
    assert f.num_nodes == 3
    assert f.num_edges == 2


def test_filter_enforces_min_degree_everywhere():
    rng = np.random.default_rng(17)
    records = [rec(f"t{i}", ts=i, buyer=f"b{rng.integers(0, 30)}",
                   pmt=f"p{rng.integers(0, 25)}") for i in range(100)]
    g = filter_low_degree(build_graph(records), 3)
    for v in range(g.n_txn, g.num_nodes):
        assert g.degree(v) >= 3


def test_filter_rejects_zero_threshold():
    with pytest.raises(GraphError):
        filter_low_degree(build_graph([rec("t0")]), 0)


# -- persistence -------------------------------------------------------------

def test_log_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(23)
    records = [rec(f"t{i}", ts=int(rng.integers(0, 10 ** 9)), buyer=f"b{i % 3}",
                   pmt=f"p{i % 2}", email=f"e{i}", addr="", label=int(i % 2 == 0),
                   feats=tuple(rng.normal(size=3))) for i in range(50)]
    path = tmp_path / "log.csv"
    write_log(records, path)
    assert read_log(path) == records


def test_log_rejects_bad_label(tmp_path):
    path = tmp_path / "log.csv"
    write_log([rec("t0")], path)
    text = path.read_text().replace("t0,0,,,,,0", "t0,0,,,,,2")
    path.write_text(text)
    with pytest.raises(GraphError, match=":2:"):
        read_log(path)


def test_graph_jsonl_roundtrip(tmp_path):
    g = build_graph(two_record_shared_pmt())
    path = tmp_path / "graph.jsonl"
    write_graph_jsonl(g, path)
    g2 = read_graph_jsonl(path)
    assert g2.node_keys == g.node_keys
    assert np.array_equal(g2.node_type_codes, g.node_type_codes)
    assert np.array_equal(g2.edge_src, g.edge_src)
    assert np.array_equal(g2.edge_dst, g.edge_dst)
    assert np.array_equal(g2.txn_features, g.txn_features)
    assert np.array_equal(g2.txn_labels, g.txn_labels)
    assert np.array_equal(g2.txn_timestamps, g.txn_timestamps)
