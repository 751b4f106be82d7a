"""Evaluation protocol: exact rank-based AUC and multi-seed reporting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def auc(scores, labels) -> float:
    """AUC by the exact Mann-Whitney rank method.

    Equals P(score_fraud > score_legit) + 0.5 * P(tie). Ties get average
    ranks, which reproduces the pairwise definition exactly (no binning).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass
class ModelReport:
    model: str
    graph_type: str                     # homogeneous / heterogeneous / none
    seed_aucs: list[float] = field(default_factory=list)
    seconds_per_run: list[float] = field(default_factory=list)
    note: str = ""

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.seed_aucs)) if self.seed_aucs else float("nan")

    @property
    def std_auc(self) -> float:
        return float(np.std(self.seed_aucs)) if self.seed_aucs else float("nan")


@dataclass
class ExperimentReport:
    dataset: str
    n_seeds: int
    rows: list[ModelReport]

    def to_json_dict(self) -> dict:
        return {
            "v": 1,
            "dataset": self.dataset,
            "n_seeds": self.n_seeds,
            "rows": [
                {
                    "model": r.model,
                    "graph_type": r.graph_type,
                    "seed_aucs": r.seed_aucs,
                    "mean_auc": r.mean_auc,
                    "std_auc": r.std_auc,
                    "seconds_per_run": r.seconds_per_run,
                    "note": r.note,
                }
                for r in self.rows
            ],
        }

    def save_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    def render_table(self) -> str:
        """Fixed-width text table; omitted baselines keep labeled gap rows."""
        lines = [
            f"dataset: {self.dataset}   seeds: {self.n_seeds}",
            f"{'model':<18}{'graph':<16}{'AUC mean±std':<22}{'sec/run':<10}",
            "-" * 66,
        ]
        for r in self.rows:
            if r.seed_aucs:
                stat = f"{r.mean_auc:.4f} ± {r.std_auc:.4f}"
                secs = f"{np.mean(r.seconds_per_run):.1f}" if r.seconds_per_run else "-"
            else:
                stat = r.note or "(not run)"
                secs = "-"
            lines.append(f"{r.model:<18}{r.graph_type:<16}{stat:<22}{secs:<10}")
        return "\n".join(lines)
