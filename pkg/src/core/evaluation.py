"""
Evaluation metrics: k-means clustering accuracy with optimal label matching,
ARI, and the group-recovery metrics RG_sim / TPR / FDR.
"""

from __future__ import annotations
import logging
import warnings
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning
from sklearn.metrics import adjusted_rand_score

from config.settings import EVAL_SEEDS, KMEANS_MAX_ITER
from core.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------

def kmeans(X: np.ndarray, k: int, seed: int, n_init: int = 1) -> Tuple[np.ndarray, float]:
    """Lloyd iterations from k-means++ seeding; returns (labels, inertia).

    tol=0 makes Lloyd stop only when assignments stop changing (or after
    KMEANS_MAX_ITER sweeps). Empty clusters are re-seeded from the points
    farthest from their centres.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if k < 1 or k > X.shape[0]:
        raise InvalidArgumentError(f"k must be in [1, {X.shape[0]}], got {k}")
    model = KMeans(
        n_clusters=k,
        init="k-means++",
        n_init=n_init,
        max_iter=KMEANS_MAX_ITER,
        tol=0.0,
        algorithm="lloyd",
        random_state=seed,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        labels = model.fit_predict(X)
    return labels.astype(np.int64), float(model.inertia_)


def clustering_accuracy(pred: Sequence[int], truth: Sequence[int]) -> float:
    """Best accuracy over label matchings (Hungarian on the confusion matrix)."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise InvalidArgumentError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        return 0.0
    _, p_idx = np.unique(pred, return_inverse=True)
    _, t_idx = np.unique(truth, return_inverse=True)
    confusion = np.zeros((p_idx.max() + 1, t_idx.max() + 1), dtype=np.int64)
    np.add.at(confusion, (p_idx, t_idx), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return float(confusion[rows, cols].sum()) / pred.size


def ari(pred: Sequence[int], truth: Sequence[int]) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise InvalidArgumentError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return float(adjusted_rand_score(truth, pred))


# ---------------------------------------------------------------------
# Group recovery
# ---------------------------------------------------------------------

def _jaccard(a: Set[int], b: Set[int]) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def rg_sim(truth_groups: Iterable[Iterable[int]], predicted_groups: Iterable[Iterable[int]]) -> float:
    """Relevant-group similarity in [0, 1].

    Only predicted groups that overlap some informative group take part;
    the score is 1 only when every informative group is recovered exactly
    and nothing else overlaps them.
    """
    truth = [set(g) for g in truth_groups]
    if not truth or any(not g for g in truth):
        raise InvalidArgumentError("truth groups must be nonempty sets")
    informative = set().union(*truth)
    relevant = [set(g) for g in predicted_groups if informative & set(g)]
    if not relevant:
        return 0.0
    total = sum(max(_jaccard(g, h) for h in relevant) for g in truth)
    return total / max(len(truth), len(relevant))


def tpr_fdr(selected: Iterable[int], informative: Iterable[int], d: int) -> Tuple[float, float]:
    selected = set(int(i) for i in selected)
    informative = set(int(i) for i in informative)
    if any(i < 0 or i >= d for i in selected):
        raise InvalidArgumentError(f"selected indices must lie in [0, {d})")
    noise = set(range(d)) - informative
    tpr = len(selected & informative) / len(informative) if informative else 0.0
    fdr = len(selected & noise) / len(selected) if selected else 0.0
    return tpr, fdr


# ---------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------

@dataclass
class MetricReport:
    n_selected: int
    accuracy_mean: Optional[float] = None  # percent
    accuracy_std: Optional[float] = None
    ari_mean: Optional[float] = None       # percent
    ari_std: Optional[float] = None
    rg_sim: Optional[float] = None
    tpr: Optional[float] = None
    fdr: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> MetricReport:
        return cls(**data)

    def to_table(self) -> str:
        rows: List[Tuple[str, str]] = [("features", str(self.n_selected))]
        if self.accuracy_mean is not None:
            rows.append(("accuracy (%)", f"{self.accuracy_mean:.1f} ± {self.accuracy_std:.1f}"))
        if self.ari_mean is not None:
            rows.append(("ARI (%)", f"{self.ari_mean:.1f} ± {self.ari_std:.1f}"))
        for name, value in (("RG_sim", self.rg_sim), ("TPR", self.tpr), ("FDR", self.fdr)):
            if value is not None:
                rows.append((name, f"{value:.3f}"))
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def clustering_scores(X: np.ndarray, labels: np.ndarray, k: int,
                      seeds: Sequence[int] = EVAL_SEEDS) -> Tuple[np.ndarray, np.ndarray]:
    """Accuracy and ARI (fractions) of k-means on X for each seed."""
    acc, adj = [], []
    for seed in seeds:
        pred, _ = kmeans(X, k, seed)
        acc.append(clustering_accuracy(pred, labels))
        adj.append(ari(pred, labels))
    return np.asarray(acc), np.asarray(adj)


def evaluate_selection(dataset, selection, k: Optional[int] = None,
                       seeds: Sequence[int] = EVAL_SEEDS) -> MetricReport:
    """Score a SelectionResult against a Dataset.

    Clustering metrics need labels; group metrics need true_groups. Either
    part is skipped when its ground truth is missing.
    """
    selected = list(selection.selected)
    report = MetricReport(n_selected=len(selected))

    if dataset.labels is not None and selected:
        k = k if k is not None else dataset.n_classes
        acc, adj = clustering_scores(dataset.X[:, selected], dataset.labels, k, seeds)
        report.accuracy_mean = 100.0 * float(acc.mean())
        report.accuracy_std = 100.0 * float(acc.std())
        report.ari_mean = 100.0 * float(adj.mean())
        report.ari_std = 100.0 * float(adj.std())
    elif dataset.labels is None:
        logger.info("no labels: clustering metrics skipped")

    if dataset.true_groups:
        informative = set().union(*(set(g) for g in dataset.true_groups))
        report.rg_sim = rg_sim(dataset.true_groups, selection.groups)
        report.tpr, report.fdr = tpr_fdr(selected, informative, dataset.X.shape[1])
    return report
