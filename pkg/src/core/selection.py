"""
Group-count heuristic, group ranking and feature-budget selection.

Choosing C: for every candidate C the row-normalized spectral embedding of
the feature graph is clustered with k-means and rotated onto the one-hot
cluster indicator by orthogonal Procrustes; the residual E(C) is small
when the features split cleanly into C groups.

Selecting features: groups (hard assignment of the logits) are ranked by
gate mean and taken as a prefix until a budget rule is satisfied.
"""

from __future__ import annotations
import logging
import warnings
from dataclasses import asdict, dataclass
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import orthogonal_procrustes

from config.settings import EVAL_SEEDS, KMEANS_RESEED_ATTEMPTS, KMEANS_RESTARTS
from core import graph
from core.errors import BudgetWarning, ClusteringError, InvalidArgumentError
from core.evaluation import clustering_scores, kmeans
from core.grouping import hard_assignment

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------
# Group-count heuristic
# ---------------------------------------------------------------------

def distortion_score(L_feat: np.ndarray, C: int, rng: np.random.Generator) -> float:
    """E(C) = ||U~ R* - Y||_F^2 for the best rotation R*."""
    d = L_feat.shape[0]
    if not 2 <= C <= d:
        raise InvalidArgumentError(f"C must lie in [2, d={d}], got {C}")
    U = graph.spectral_embedding(L_feat, C)

    for attempt in range(KMEANS_RESEED_ATTEMPTS):
        labels, _ = kmeans(U, C, seed=int(rng.integers(2**31 - 1)), n_init=KMEANS_RESTARTS)
        if np.unique(labels).size == C:
            break
        logger.debug("C=%d: k-means left an empty cluster (attempt %d)", C, attempt + 1)
    else:
        raise ClusteringError(
            f"k-means could not populate {C} clusters after {KMEANS_RESEED_ATTEMPTS} attempts"
        )

    Y = np.zeros((d, C))
    Y[np.arange(d), labels] = 1.0
    R, _ = orthogonal_procrustes(U, Y)
    residual = U @ R - Y
    return float((residual * residual).sum())


def local_minima(curve: Sequence[Tuple[int, float]]) -> List[int]:
    """C values whose score is below both neighbours (ends compare one side)."""
    values = [score for _, score in curve]
    minima = []
    for i, (c, score) in enumerate(curve):
        left = values[i - 1] if i > 0 else np.inf
        right = values[i + 1] if i + 1 < len(values) else np.inf
        if score < left and score < right:
            minima.append(c)
    return minima


@dataclass
class GroupCountResult:
    chosen: int
    curve: List[Tuple[int, float]]
    local_minima: List[int]


def choose_C(L_feat: np.ndarray, C_max: int, rng: Optional[np.random.Generator] = None) -> GroupCountResult:
    if C_max < 3:
        raise InvalidArgumentError(f"C_max must be >= 3, got {C_max}")
    d = L_feat.shape[0]
    if C_max > d:
        raise InvalidArgumentError(f"C_max ({C_max}) cannot exceed the number of features ({d})")
    rng = rng if rng is not None else np.random.default_rng(0)

    curve = []
    for C in range(2, C_max + 1):
        score = distortion_score(L_feat, C, rng)
        logger.info("C=%d distortion=%.6g", C, score)
        curve.append((C, score))
    chosen = min(curve, key=lambda item: item[1])[0]
    return GroupCountResult(chosen=chosen, curve=curve, local_minima=local_minima(curve))


# ---------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class BudgetRule:
    kind: str   # "groups" | "min_features" | "max_features"
    value: int

    KINDS: ClassVar[Tuple[str, ...]] = ("groups", "min_features", "max_features")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidArgumentError(f"unknown budget rule {self.kind!r}; expected one of {self.KINDS}")
        if self.value < 0:
            raise InvalidArgumentError(f"budget must be >= 0, got {self.value}")

    def __str__(self) -> str:
        return f"{self.kind}={self.value}"


@dataclass
class SelectionResult:
    group_order: List[int]          # group ids, best first (nonempty groups only)
    groups: List[List[int]]         # feature ids per group id (hard assignment)
    selected: List[int]             # sorted feature ids
    gate_means: List[float]
    budget: int                     # number of groups taken
    budget_met: bool = True
    rule: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> SelectionResult:
        return cls(**data)

    def selected_groups(self) -> List[List[int]]:
        return [self.groups[g] for g in self.group_order[: self.budget]]


def _group_members(labels: np.ndarray, C: int) -> List[List[int]]:
    return [np.flatnonzero(labels == j).tolist() for j in range(C)]


def _prefix_size(sizes: List[int], rule: BudgetRule) -> Tuple[int, bool]:
    """How many ranked groups to take and whether the rule was satisfied."""
    if rule.kind == "groups":
        return min(rule.value, len(sizes)), rule.value <= len(sizes)
    covered = np.cumsum([0] + sizes)
    if rule.kind == "min_features":
        hits = np.flatnonzero(covered >= rule.value)
        if hits.size == 0:
            return len(sizes), False
        return int(hits[0]), True
    # max_features: the longest prefix within the cap
    fits = np.flatnonzero(covered <= rule.value)
    return int(fits[-1]), True


def rank_groups(model) -> Tuple[List[List[int]], List[int]]:
    """Hard groups and the nonempty group ids by descending gate mean (stable)."""
    C = model.n_groups
    groups = _group_members(hard_assignment(model.grouping), C)
    order = np.argsort(-model.gates.mu, kind="stable")
    return groups, [int(j) for j in order if groups[j]]


def selection_from_prefix(groups: List[List[int]], order: List[int], take: int,
                          gate_means: Sequence[float], budget_met: bool = True,
                          rule: Optional[str] = None) -> SelectionResult:
    selected = sorted(i for g in order[:take] for i in groups[g])
    return SelectionResult(
        group_order=list(order),
        groups=groups,
        selected=selected,
        gate_means=[float(m) for m in gate_means],
        budget=take,
        budget_met=budget_met,
        rule=rule,
    )


def rank_and_select(model, budget_rule: BudgetRule) -> SelectionResult:
    groups, order = rank_groups(model)
    take, met = _prefix_size([len(groups[g]) for g in order], budget_rule)
    if not met:
        message = f"budget {budget_rule} unreachable; returning all {len(order)} nonempty groups"
        logger.warning(message)
        warnings.warn(message, BudgetWarning, stacklevel=2)
    result = selection_from_prefix(groups, order, take, model.gates.mu, met, str(budget_rule))
    logger.info("selected %d features from %d groups (%s)", len(result.selected), take, budget_rule)
    return result


def accuracy_guided_budget(model, dataset, k: Optional[int] = None,
                           seeds: Sequence[int] = EVAL_SEEDS,
                           cap: Optional[int] = None) -> SelectionResult:
    """Grow the ranked prefix and stop at the first local maximum of k-means accuracy.

    Label-guided evaluation mode; ``cap`` limits the number of features.
    """
    if dataset.labels is None:
        raise InvalidArgumentError("accuracy-guided selection needs labels")
    k = k if k is not None else dataset.n_classes
    groups, order = rank_groups(model)

    best_take, best_acc = 0, -np.inf
    covered = 0
    for take in range(1, len(order) + 1):
        covered += len(groups[order[take - 1]])
        if cap is not None and covered > cap:
            break
        features = sorted(i for g in order[:take] for i in groups[g])
        acc, _ = clustering_scores(dataset.X[:, features], dataset.labels, k, seeds)
        logger.info("prefix of %d groups (%d features): accuracy %.2f%%", take, covered, 100 * acc.mean())
        if acc.mean() < best_acc:
            break
        best_take, best_acc = take, float(acc.mean())

    rule = "accuracy_guided" + (f"(cap={cap})" if cap is not None else "")
    return selection_from_prefix(groups, order, best_take, model.gates.mu, best_take > 0, rule)


def laplacian_score_selection(X: np.ndarray, K: int, n_features: int) -> SelectionResult:
    """Laplacian Score baseline: one singleton group per feature, smoothest first."""
    d = X.shape[1]
    if not 0 <= n_features <= d:
        raise InvalidArgumentError(f"n_features must lie in [0, {d}], got {n_features}")
    ops = graph.graph_operators(graph.self_tuning_affinity(X, K))
    scores = graph.laplacian_score(X, ops)
    order = np.argsort(scores, kind="stable").tolist()
    groups = [[i] for i in range(d)]
    return selection_from_prefix(groups, order, n_features, -scores, True,
                                 f"laplacian_score={n_features}")
