"""OOD scoring functions and detection/classification metrics.

Sign convention: every scoring method is normalized so that a higher score
means "more likely out-of-distribution".
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax
from scipy.stats import rankdata

from . import dirichlet as dmath
from .data import LabeledDataset
from .losses import energy_scores
from .nn import Batch, Mlp

SCORE_METHODS = ("msp", "maxlogit", "energy", "diffent", "strength")


@dataclass(frozen=True)
class ScoreSet:
    id_scores: np.ndarray
    ood_scores: np.ndarray
    method: str = "msp"

    def __post_init__(self):
        for name in ("id_scores", "ood_scores"):
            s = np.asarray(getattr(self, name), dtype=float)
            if s.ndim != 1 or s.size < 1 or not np.all(np.isfinite(s)):
                raise ValueError(f"{name} must be a nonempty finite vector")
            object.__setattr__(self, name, s)
        if self.method not in SCORE_METHODS:
            raise ValueError(f"method must be one of {SCORE_METHODS}")


def score_logits(logits, method: str, alpha_mapping: str = "relu_plus_one") -> np.ndarray:
    """OOD scores for a batch of logit rows."""
    f = np.atleast_2d(np.asarray(logits, dtype=float))
    if method == "msp":
        return -softmax(f, axis=1).max(axis=1)
    if method == "maxlogit":
        return -f.max(axis=1)
    if method == "energy":
        return energy_scores(f)
    if method == "diffent":
        return np.array([
            dmath.diff_entropy(dmath.alpha_from_logits(row, alpha_mapping))
            for row in f
        ])
    if method == "strength":
        return np.array([
            -dmath.alpha_from_logits(row, alpha_mapping).alpha0 for row in f
        ])
    raise ValueError(f"unknown scoring method: {method}")


def ood_score(m: Mlp, x, method: str, alpha_mapping: str = "relu_plus_one") -> float:
    """Score a single point."""
    logits = m.forward(Batch(np.atleast_2d(np.asarray(x, dtype=float))))
    return float(score_logits(logits, method, alpha_mapping)[0])


def fpr_at_95tpr(s: ScoreSet) -> float:
    """Fraction of outliers at or below the threshold that keeps 95% of ID
    inside. Threshold: 95th percentile of ID scores, ceiling index on the
    sorted multiset (no interpolation)."""
    ids = np.sort(s.id_scores)
    n = ids.size
    idx = int(np.ceil(0.95 * n)) - 1
    gamma = ids[max(idx, 0)]
    return float(np.mean(s.ood_scores <= gamma))


def auroc(s: ScoreSet) -> float:
    """P(ood > id) + half credit for ties, via the rank-sum statistic."""
    n, m = s.id_scores.size, s.ood_scores.size
    ranks = rankdata(np.concatenate([s.ood_scores, s.id_scores]))
    u = ranks[:m].sum() - m * (m + 1) / 2.0
    return float(u / (n * m))


def aupr(s: ScoreSet) -> float:
    """Area under precision-recall, outliers positive, step-wise over
    descending score thresholds (precision at each recall step)."""
    scores = np.concatenate([s.ood_scores, s.id_scores])
    positive = np.concatenate([
        np.ones(s.ood_scores.size, dtype=bool),
        np.zeros(s.id_scores.size, dtype=bool),
    ])
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    positive = positive[order]
    tp = np.cumsum(positive)
    fp = np.cumsum(~positive)
    # evaluate only at the last index of each tied-score block
    last = np.flatnonzero(np.diff(scores, append=-np.inf))
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / s.ood_scores.size
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def accuracy(m: Mlp, d: LabeledDataset) -> float:
    """Fraction of correct argmax predictions; ties go to the lowest class."""
    if d.labels is None:
        raise ValueError("accuracy needs a labeled dataset")
    logits = m.forward(Batch(d.points))
    return float(np.mean(np.argmax(logits, axis=1) == d.labels))


EVAL_CSV_COLUMNS = [
    "method", "fpr95", "auroc", "aupr", "id_acc", "cov_acc",
    "mean_du_id", "mean_du_cov", "mean_du_sem",
    "mean_total_id", "mean_total_cov", "mean_total_sem",
]


@dataclass
class EvalReport:
    """Per-scoring-method detection metrics plus shared accuracy and
    uncertainty statistics."""

    detection: dict = field(default_factory=dict)  # method -> (fpr95, auroc, aupr)
    id_acc: float = 0.0
    cov_acc: float = 0.0
    uncertainty: dict = field(default_factory=dict)  # tag -> (mean_du, mean_total)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(EVAL_CSV_COLUMNS) + "\n")
        du = {t: self.uncertainty.get(t, (float("nan"),) * 2) for t in
              ("ID", "COV", "SEM_TEST")}
        for method in sorted(self.detection):
            fpr95, roc, pr = self.detection[method]
            row = [method] + [
                f"{v:.6f}" for v in (
                    fpr95, roc, pr, self.id_acc, self.cov_acc,
                    du["ID"][0], du["COV"][0], du["SEM_TEST"][0],
                    du["ID"][1], du["COV"][1], du["SEM_TEST"][1],
                )
            ]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def uncertainty_stats(m: Mlp, points, alpha_mapping: str = "relu_plus_one"):
    """(mean differential entropy, mean total uncertainty) over points."""
    logits = m.forward(Batch(np.asarray(points, dtype=float)))
    du = np.empty(logits.shape[0])
    tu = np.empty(logits.shape[0])
    for i, row in enumerate(logits):
        d = dmath.alpha_from_logits(row, alpha_mapping)
        du[i] = dmath.diff_entropy(d)
        tu[i] = dmath.total_uncertainty(d)
    return float(du.mean()), float(tu.mean())
