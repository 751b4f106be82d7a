"""Shared mini-batch training loop with early stopping on validation AUC."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .graph import HeteroGraph
from .metrics import auc
from .model import (PredictorConfig, PredictorParams, TrainingDiverged,
                    forward_probs, predictor_loss)
from .optim import AdamW
from .sampling import SampledSubgraph, SplitAssignment, minibatches, sample_khop
from .tensor import Tape, Tensor


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_auc: float          # nan when the validation partition is single-class
    seconds: float


@dataclass
class FitResult:
    log: list[EpochStats]
    best_epoch: int
    best_val_auc: float


class SupervisedModel:
    """Interface the fit loop drives. Implementations own their parameters
    and know how to score a batch (train mode) or a partition (eval mode)."""

    def parameters(self) -> list[Tensor]:
        raise NotImplementedError

    def batch_probs(self, ids: np.ndarray, train: bool,
                    rng: np.random.Generator) -> Tensor:
        raise NotImplementedError

    def val_scores(self, ids: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


def fit(model: SupervisedModel, split: SplitAssignment, labels: np.ndarray, *,
        n_batch: int, lr: float, betas: tuple[float, float], weight_decay: float,
        grad_clip: float | None, max_epochs: int, patience: int, seed: int,
        log_eps: float = 1e-12, class_weights: np.ndarray | None = None) -> FitResult:
    """Minibatch AdamW training; keeps the best-on-validation parameters.

    Stops once validation AUC has failed to improve for more than
    ``patience`` consecutive epochs. Fully deterministic for a fixed seed.
    """
    ss = np.random.SeedSequence(seed)
    r_shuffle, r_train, r_val = (np.random.default_rng(s) for s in ss.spawn(3))
    params = model.parameters()
    opt = AdamW(params, lr=lr, betas=betas, weight_decay=weight_decay,
                grad_clip_norm=grad_clip)
    val_ids = split.ids("val")
    val_labels = labels[val_ids]
    # single-class validation partitions (tiny datasets) fall back to
    # early stopping on validation loss; AUC is undefined there
    val_has_both = len(val_ids) > 0 and val_labels.min() != val_labels.max()
    best_metric = -np.inf
    best_auc = float("nan")
    best_epoch = -1
    best_snap = [p.data.copy() for p in params]
    bad = 0
    log: list[EpochStats] = []
    for epoch in range(max_epochs):
        t0 = time.monotonic()
        losses = []
        for batch in minibatches(split, "train", n_batch, r_shuffle):
            with Tape() as tape:
                probs = model.batch_probs(batch, True, r_train)
                loss = predictor_loss(probs, labels[batch], eps=log_eps,
                                      class_weights=class_weights)
            lv = loss.item()
            if not np.isfinite(lv):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            tape.backward(loss)
            opt.step()
            losses.append(lv)
        val_scores = model.val_scores(val_ids, r_val)
        if val_has_both:
            val_auc = float(auc(val_scores, val_labels))
            metric = val_auc
        else:
            val_auc = float("nan")
            p_true = np.where(val_labels == 1, val_scores, 1.0 - val_scores)
            metric = float(np.mean(np.log(p_true + log_eps)))
        log.append(EpochStats(epoch, float(np.mean(losses)), val_auc,
                              time.monotonic() - t0))
        if metric > best_metric:
            best_metric = metric
            best_auc = val_auc
            best_epoch = epoch
            best_snap = [p.data.copy() for p in params]
            bad = 0
        else:
            bad += 1
            if bad > patience:
                break
    for p, snap in zip(params, best_snap):
        p.data = snap
    return FitResult(log=log, best_epoch=best_epoch, best_val_auc=best_auc)


class _PredictorModel(SupervisedModel):
    def __init__(self, g: HeteroGraph, params: PredictorParams):
        self.g = g
        self.params = params
        self.cfg = params.config

    def parameters(self) -> list[Tensor]:
        return self.params.parameters()

    def _sample(self, ids: np.ndarray, rng: np.random.Generator) -> SampledSubgraph:
        return sample_khop(self.g, ids, k=self.cfg.n_layers,
                           fanout=self.cfg.fanout, rng=rng)

    def batch_probs(self, ids, train, rng):
        sub = self._sample(ids, rng)
        probs, _ = forward_probs(self.params, sub, train=train, rng=rng)
        return probs

    def val_scores(self, ids, rng):
        scores = np.empty(len(ids), dtype=np.float64)
        for start in range(0, len(ids), 1024):
            chunk = ids[start:start + 1024]
            sub = self._sample(chunk, rng)
            probs, _ = forward_probs(self.params, sub, train=False)
            scores[start:start + len(chunk)] = probs.data[:, 1]
        return scores


@dataclass
class TrainResult:
    params: PredictorParams
    log: list[EpochStats]
    best_epoch: int
    best_val_auc: float


def train_predictor(g: HeteroGraph, split: SplitAssignment,
                    config: PredictorConfig) -> TrainResult:
    """Train the heterogeneous predictor per the split; returns the
    best-on-validation parameters and the per-epoch log."""
    init_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])
    params = PredictorParams.init(config, g.feature_width, init_rng)
    model = _PredictorModel(g, params)
    weights = None
    if config.class_weighted:
        train_labels = g.txn_labels[split.ids("train")]
        counts = np.bincount(train_labels, minlength=2).astype(np.float64)
        weights = len(train_labels) / (2.0 * np.maximum(counts, 1.0))
    result = fit(model, split, g.txn_labels,
                 n_batch=config.n_batch, lr=config.lr, betas=config.betas,
                 weight_decay=config.weight_decay, grad_clip=config.grad_clip,
                 max_epochs=config.max_epochs, patience=config.patience,
                 seed=config.seed, log_eps=config.log_eps, class_weights=weights)
    return TrainResult(params=params, log=result.log,
                       best_epoch=result.best_epoch, best_val_auc=result.best_val_auc)
