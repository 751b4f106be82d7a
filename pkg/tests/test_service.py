import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from fraudgraph import datagen
from fraudgraph.graph import build_graph, filter_low_degree
from fraudgraph.model import PredictorConfig, save_checkpoint
from fraudgraph.sampling import chronological_split
from fraudgraph.service import ServiceState, build_app, create_state
from fraudgraph.training import train_predictor


@pytest.fixture(scope="module")
def served(tmp_path_factory):
    d = tmp_path_factory.mktemp("svc")
    records, gt = datagen.generate(
        datagen.GenConfig(n_txn=800, fraud_rate=0.12, seed=5))
    datagen.write_log(records, d / "log.csv")
    g = filter_low_degree(build_graph(records), 2)
    cfg = PredictorConfig(n_hid=32, n_layers=2, n_heads=4, n_batch=64,
                          max_epochs=8, patience=8, seed=0)
    result = train_predictor(g, chronological_split(g), cfg)
    save_checkpoint(result.params, d / "model.ckpt", extras={"min_txn_count": 2})
    state = create_state(d / "log.csv", d / "model.ckpt")
    client = TestClient(build_app(state))
    return {"client": client, "state": state, "gt": gt, "graph": state.graph}


def wait_for_job(client, job_id, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        out = client.get(f"/explain/{job_id}").json()
        if out["status"] != "running":
            return out
        time.sleep(0.05)
    raise TimeoutError("explanation job did not finish")


def test_health_before_model_load():
    client = TestClient(build_app(ServiceState()))
    out = client.get("/health").json()
    assert out == {"v": 1, "status": "no_model"}


def test_health_with_model(served):
    out = served["client"].get("/health").json()
    assert out["status"] == "ok"
    assert out["txns"] == 800


def test_transactions_sorted_and_paginated(served):
    client = served["client"]
    page = client.get("/transactions?part=test&sort=score&limit=10").json()
    assert page["v"] == 1
    scores = [item["score"] for item in page["items"]]
    assert scores == sorted(scores, reverse=True)
    assert all(item["part"] == "test" for item in page["items"])
    page2 = client.get("/transactions?part=test&sort=score&limit=10&offset=10").json()
    assert [i["id"] for i in page2["items"]] != [i["id"] for i in page["items"]]
    assert page["total"] == page2["total"]


def test_repeated_gets_are_identical(served):
    client = served["client"]
    a = client.get("/transactions?part=val&sort=ts&order=asc").json()
    b = client.get("/transactions?part=val&sort=ts&order=asc").json()
    assert a == b


def test_transaction_detail_and_404(served):
    client = served["client"]
    some_id = client.get("/transactions?limit=1").json()["items"][0]["id"]
    detail = client.get(f"/transactions/{some_id}").json()
    assert detail["id"] == some_id
    assert len(detail["features"]) == served["graph"].feature_width
    assert client.get("/transactions/nope").status_code == 404


def test_neighborhood_payload(served):
    client = served["client"]
    g = served["graph"]
    txn = g.key_of(0)
    out = client.get(f"/neighborhood/{txn}?hops=2").json()
    ids = {n["id"] for n in out["nodes"]}
    assert txn in ids
    for e in out["edges"]:
        assert e["src"] in ids and e["dst"] in ids
        assert e["etype"].startswith("txn_")
    assert client.get("/neighborhood/zzz").status_code == 404


def test_explain_job_lifecycle_and_idempotence(served):
    client = served["client"]
    ring = next(p for p in served["gt"].patterns if p.kind == "stolen_financial")
    txn = ring.fraud_txns[0]
    body = {"txn_id": txn, "threshold": 0.0, "epochs": 10}
    first = client.post("/explain", json=body).json()
    assert first["v"] == 1 and not first["cached"]
    out = wait_for_job(client, first["job_id"])
    assert out["status"] == "done"
    exp = out["explanation"]
    assert exp["target"] == txn
    assert len(exp["edges"]) > 0
    # idempotent per (txn, config): same job id, served from cache
    again = client.post("/explain", json=body).json()
    assert again["job_id"] == first["job_id"]
    assert again["cached"]


def test_explain_threshold_one_returns_no_edges(served):
    client = served["client"]
    txn = served["gt"].patterns[0].fraud_txns[0]
    job = client.post("/explain", json={"txn_id": txn, "threshold": 1.0,
                                        "epochs": 5}).json()
    out = wait_for_job(client, job["job_id"])
    assert out["status"] == "done"
    assert out["explanation"]["edges"] == []


def test_explain_validation_errors(served):
    client = served["client"]
    assert client.post("/explain", json={"txn_id": "missing"}).status_code == 404
    assert client.post("/explain", json={}).status_code == 400
    assert client.post("/explain", content=b"{not json").status_code == 400
    assert client.post("/explain", json={"txn_id": "t000000",
                                         "threshold": 7}).status_code == 400
    assert client.get("/explain/deadbeef").status_code == 404


def test_busy_state_returns_409(served):
    state = served["state"]
    client = served["client"]
    state.loading = True
    try:
        assert client.get("/transactions").status_code == 409
        assert client.post("/explain", json={"txn_id": "t000000"}).status_code == 409
    finally:
        state.loading = False


def test_timeline_of_ring_pmt_orders_by_timestamp(served):
    client = served["client"]
    ring = next(p for p in served["gt"].patterns if p.kind == "stolen_financial")
    out = client.get(f"/timeline/{ring.hub_key}")
    assert out.status_code == 200
    payload = out.json()
    stamps = [p["ts"] for p in payload["points"]]
    assert stamps == sorted(stamps)
    assert len(payload["points"]) >= len(ring.fraud_txns)
    labels = {p["txn"]: p["label"] for p in payload["points"]}
    for t in ring.fraud_txns:
        assert labels[t] == 1
    assert client.get("/timeline/pmt:zzz").status_code == 404
    # txn ids are not valid timeline entities
    assert client.get("/timeline/t000000").status_code == 400


def test_timeline_fraud_window_scores_above_post_reclaim(served):
    client = served["client"]
    gt = served["gt"]
    for ring in gt.patterns:
        if ring.kind != "stolen_financial":
            continue
        payload = client.get(f"/timeline/{ring.hub_key}").json()
        score_of = {p["txn"]: p["score"] for p in payload["points"]}
        fraud_mean = np.mean([score_of[t] for t in ring.fraud_txns])
        reclaim_mean = np.mean([score_of[t] for t in ring.context_txns])
        assert fraud_mean > reclaim_mean, ring.hub_key


def test_projection_endpoint(served):
    client = served["client"]
    g = served["graph"]
    ids = [g.key_of(v) for v in range(4)]
    out = client.post("/project", json={"ids": ids}).json()
    assert len(out["coords"]) == 4
    assert len(out["coords"][0]) == 2
    assert client.post("/project", json={"ids": ids[:1]}).status_code == 400
    assert client.post("/project", json={"ids": ["nope", "alsono"]}).status_code == 404


def test_checkpoint_reload_invalidates_cache(served):
    state = served["state"]
    client = served["client"]
    txn = served["gt"].patterns[0].fraud_txns[0]
    job = client.post("/explain", json={"txn_id": txn, "epochs": 5}).json()
    wait_for_job(client, job["job_id"])
    assert state.cache
    state.load(state.graph, state.params)
    assert not state.cache
    assert not state.jobs
