"""HTTP service for the analyst workflow: scored transaction triage,
neighborhood inspection, background explanation jobs, entity timelines and
2-D feature projections. Read-mostly: training happens offline via the CLI
and the service loads the resulting checkpoint."""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .explain import (ExplainerConfig, export_explanation, extract_subgraph,
                      optimize_masks, project_features_2d)
from .graph import (EDGE_TYPE_ORDER, NODE_TYPE_ORDER, GraphError, HeteroGraph,
                    build_graph, filter_low_degree, read_graph_jsonl, read_log)
from .model import PredictorParams, load_checkpoint, predict_scores
from .sampling import PARTS, chronological_split, sample_khop

DEFAULT_EXPLAIN_EPOCHS = 100
DEFAULT_THRESHOLD = 0.15


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class ExplainJob:
    job_id: str
    txn_id: str
    status: str = "running"              # running | done | failed
    explanation: dict | None = None
    error: str | None = None


@dataclass
class ServiceState:
    """Loaded graph + checkpoint, cached scores, and the explanation job pool."""

    graph: HeteroGraph | None = None
    params: PredictorParams | None = None
    scores: np.ndarray | None = None
    part_tags: np.ndarray | None = None
    loading: bool = False
    jobs: dict[str, ExplainJob] = field(default_factory=dict)
    cache: dict[str, str] = field(default_factory=dict)   # config hash -> job id
    lock: threading.Lock = field(default_factory=threading.Lock)
    executor: ThreadPoolExecutor = field(
        default_factory=lambda: ThreadPoolExecutor(max_workers=2))

    # -- lifecycle -----------------------------------------------------------
    def load(self, graph: HeteroGraph, params: PredictorParams) -> None:
        """Swap in a graph + checkpoint; invalidates every cached artifact."""
        with self.lock:
            self.loading = True
        try:
            if graph.feature_width != params.feature_width:
                raise GraphError(
                    f"graph feature width {graph.feature_width} != checkpoint "
                    f"width {params.feature_width}")
            scores = predict_scores(graph, params, np.arange(graph.n_txn))
            tags = chronological_split(graph).tags
            with self.lock:
                self.graph = graph
                self.params = params
                self.scores = scores
                self.part_tags = tags
                self.jobs.clear()
                self.cache.clear()
        finally:
            with self.lock:
                self.loading = False

    @property
    def ready(self) -> bool:
        return self.graph is not None and self.params is not None

    def require_ready(self) -> None:
        if self.loading:
            raise ApiError(409, "checkpoint load in progress")
        if not self.ready:
            raise ApiError(409, "no model loaded")

    def txn_index(self, txn_id: str) -> int:
        try:
            v = self.graph.id_of(txn_id)
        except GraphError:
            raise ApiError(404, f"unknown transaction {txn_id!r}") from None
        if not self.graph.is_txn(v):
            raise ApiError(404, f"{txn_id!r} is not a transaction")
        return v

    # -- explanation jobs ------------------------------------------------------
    def submit_explain(self, txn_id: str, threshold: float, epochs: int,
                       seed: int) -> tuple[str, bool]:
        v = self.txn_index(txn_id)
        key = hashlib.sha256(
            f"{txn_id}|{threshold}|{epochs}|{seed}".encode()).hexdigest()[:16]
        with self.lock:
            if key in self.cache:
                return self.cache[key], True
            job = ExplainJob(job_id=key, txn_id=txn_id)
            self.jobs[key] = job
            self.cache[key] = key
        graph, params = self.graph, self.params

        def run():
            try:
                sub = extract_subgraph(graph, v, params.config.n_layers)
                cfg = ExplainerConfig(epochs=epochs, seed=seed)
                masks = optimize_masks(sub, params, v, cfg)
                exp = export_explanation(masks, sub, threshold)
                with self.lock:
                    job.explanation = exp.to_json_dict()
                    job.status = "done"
            except Exception as exc:  # surfaced through the job status
                with self.lock:
                    job.error = f"{type(exc).__name__}: {exc}"
                    job.status = "failed"

        self.executor.submit(run)
        return key, False


def create_state(graph_path: str | Path, checkpoint_path: str | Path,
                 min_txn_count: int | None = None) -> ServiceState:
    """Build service state from a graph container (.jsonl) or raw log (.csv)
    plus a predictor checkpoint."""
    params, extras = load_checkpoint(checkpoint_path)
    graph_path = Path(graph_path)
    if graph_path.suffix == ".jsonl":
        g = read_graph_jsonl(graph_path)
    else:
        g = build_graph(read_log(graph_path))
        k = min_txn_count if min_txn_count is not None else extras.get("min_txn_count")
        if k:
            g = filter_low_degree(g, int(k))
    state = ServiceState()
    state.load(g, params)
    return state


def build_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="fraudgraph service")

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"v": 1, "error": exc.message})

    async def read_json_body(request: Request) -> dict:
        try:
            body = json.loads(await request.body() or b"{}")
        except json.JSONDecodeError:
            raise ApiError(400, "malformed JSON body") from None
        if not isinstance(body, dict):
            raise ApiError(400, "body must be a JSON object")
        return body

    @app.get("/health")
    def health():
        if not state.ready:
            return {"v": 1, "status": "no_model"}
        return {"v": 1, "status": "ok", "nodes": state.graph.num_nodes,
                "txns": state.graph.n_txn, "edges": state.graph.num_edges}

    @app.get("/transactions")
    def transactions(part: str | None = None, sort: str = "score",
                     order: str = "desc", offset: int = 0, limit: int = 50):
        state.require_ready()
        g = state.graph
        ids = np.arange(g.n_txn)
        if part is not None:
            if part not in PARTS:
                raise ApiError(400, f"unknown partition {part!r}")
            ids = ids[state.part_tags[ids] == PARTS.index(part)]
        if sort == "score":
            keys = state.scores[ids]
        elif sort == "ts":
            keys = g.txn_timestamps[ids].astype(np.float64)
        else:
            raise ApiError(400, f"unknown sort key {sort!r}")
        ordered = ids[np.argsort(keys, kind="stable")]
        if order == "desc":
            ordered = ordered[::-1]
        elif order != "asc":
            raise ApiError(400, f"unknown order {order!r}")
        window = ordered[max(offset, 0):max(offset, 0) + max(min(limit, 500), 0)]
        return {
            "v": 1,
            "total": int(len(ordered)),
            "items": [_txn_summary(state, int(v)) for v in window],
        }

    @app.get("/transactions/{txn_id}")
    def transaction_detail(txn_id: str):
        state.require_ready()
        v = state.txn_index(txn_id)
        out = _txn_summary(state, v)
        out["v"] = 1
        out["features"] = [float(x) for x in state.graph.txn_features[v]]
        return out

    @app.get("/neighborhood/{node_id}")
    def neighborhood(node_id: str, hops: int = 1):
        state.require_ready()
        g = state.graph
        try:
            v = g.id_of(node_id)
        except GraphError:
            raise ApiError(404, f"unknown node {node_id!r}") from None
        if not 1 <= hops <= 4:
            raise ApiError(400, "hops must be in [1, 4]")
        seeds = [v] if g.is_txn(v) else [int(u) for u, _, _ in g.neighbors(v)]
        sub = sample_khop(g, seeds, k=hops, fanout=None, rng=np.random.default_rng(0))
        nodes = []
        include = set(sub.nodes.tolist()) | {v}
        for u in sorted(include):
            entry = {"id": g.key_of(u), "type": NODE_TYPE_ORDER[g.node_type_codes[u]].value}
            if g.is_txn(u):
                entry["label"] = int(g.txn_labels[u])
                entry["score"] = float(state.scores[u])
            nodes.append(entry)
        edges = [
            {"src": g.key_of(int(g.edge_src[e])), "dst": g.key_of(int(g.edge_dst[e])),
             "etype": EDGE_TYPE_ORDER[g.edge_type_codes[e]].value}
            for e in range(g.num_edges)
            if int(g.edge_src[e]) in include and int(g.edge_dst[e]) in include
        ]
        return {"v": 1, "center": node_id, "nodes": nodes, "edges": edges}

    @app.post("/explain")
    async def explain_txn(request: Request):
        state.require_ready()
        body = await read_json_body(request)
        txn_id = body.get("txn_id")
        if not isinstance(txn_id, str):
            raise ApiError(400, "txn_id (string) is required")
        try:
            threshold = float(body.get("threshold", DEFAULT_THRESHOLD))
            epochs = int(body.get("epochs", DEFAULT_EXPLAIN_EPOCHS))
            seed = int(body.get("seed", 0))
        except (TypeError, ValueError):
            raise ApiError(400, "threshold/epochs/seed must be numeric") from None
        if not 0.0 <= threshold <= 1.0:
            raise ApiError(400, "threshold must be in [0, 1]")
        if not 1 <= epochs <= 2000:
            raise ApiError(400, "epochs must be in [1, 2000]")
        job_id, cached = state.submit_explain(txn_id, threshold, epochs, seed)
        return {"v": 1, "job_id": job_id, "cached": cached}

    @app.get("/explain/{job_id}")
    def explain_status(job_id: str):
        state.require_ready()
        with state.lock:
            job = state.jobs.get(job_id)
            if job is None:
                raise ApiError(404, f"unknown job {job_id!r}")
            out = {"v": 1, "job_id": job.job_id, "txn_id": job.txn_id,
                   "status": job.status}
            if job.status == "done":
                out["explanation"] = job.explanation
            elif job.status == "failed":
                out["error"] = job.error
        return out

    @app.get("/timeline/{entity_id}")
    def timeline(entity_id: str):
        state.require_ready()
        g = state.graph
        try:
            v = g.id_of(entity_id)
        except GraphError:
            raise ApiError(404, f"unknown entity {entity_id!r}") from None
        if g.is_txn(v):
            raise ApiError(400, f"{entity_id!r} is a transaction, not an entity")
        points = []
        for txn, _, _ in g.neighbors(v):
            points.append({
                "txn": g.key_of(txn),
                "ts": int(g.txn_timestamps[txn]),
                "score": float(state.scores[txn]),
                "label": int(g.txn_labels[txn]),
            })
        points.sort(key=lambda p: (p["ts"], p["txn"]))
        return {"v": 1, "entity": entity_id,
                "entity_type": NODE_TYPE_ORDER[g.node_type_codes[v]].value,
                "points": points}

    @app.post("/project")
    async def project(request: Request):
        state.require_ready()
        body = await read_json_body(request)
        ids = body.get("ids")
        if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
            raise ApiError(400, "ids (list of txn id strings) is required")
        if len(ids) < 2:
            raise ApiError(400, "need at least 2 txns to project")
        rows = np.stack([state.graph.txn_features[state.txn_index(i)] for i in ids])
        coords, var = project_features_2d(rows)
        return {"v": 1, "ids": ids,
                "coords": [[float(a), float(b)] for a, b in coords],
                "explained_variance": [float(x) for x in var]}

    return app


def _txn_summary(state: ServiceState, v: int) -> dict:
    g = state.graph
    return {
        "id": g.key_of(v),
        "score": float(state.scores[v]),
        "label": int(g.txn_labels[v]),
        "ts": int(g.txn_timestamps[v]),
        "part": PARTS[state.part_tags[v]],
    }
