"""
The three GroupFS loss terms and their weighted sum.

    L = L_s + lambda1 * L_f + lambda2 * L_reg

    L_s   = -(1 / (B d)) tr(X~^T P^t X~)          sample-graph smoothness
    L_f   =  (1 / (d C)) [tr(F^T L_feat F) + beta ||F^T F - I||_F^2]
    L_reg =  (1 / C) sum_j P(z_j > 0) * mean_i M_ij

L_s is negative (its trace is maximised), L_f enters with a positive sign.
The sample graph is rebuilt on every batch; its bandwidths gamma are
treated as constants for differentiation.
"""

from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.stats import ortho_group

from config.settings import (
    DEGREE_FLOOR,
    DIFFUSION_STEPS,
    FEATURE_KERNEL_NEIGHBORS,
    KERNEL_NEIGHBORS,
)
from core import autodiff as ad
from core import graph
from core.errors import InvalidArgumentError
from core.gates import (
    GateState,
    apply_gates,
    draw_gate_noise,
    feature_weights,
    open_probability_tensor,
    relaxed_gates,
)
from core.grouping import GroupingState, draw_gumbel, relaxed_assignment

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------
# Domain Types
# ---------------------------------------------------------------------

@dataclass
class LossConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    beta: float = 1.0
    t: int = DIFFUSION_STEPS
    K: int = KERNEL_NEIGHBORS

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "beta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {value}")
        if self.t < 1:
            raise InvalidArgumentError(f"diffusion steps t must be >= 1, got {self.t}")
        if self.K < 1:
            raise InvalidArgumentError(f"kernel neighbours K must be >= 1, got {self.K}")


@dataclass(frozen=True)
class FeatureGraph:
    L_feat: np.ndarray  # d x d


@dataclass
class ProjectionQ:
    Q: np.ndarray  # C x C

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=np.float64)
        if self.Q.ndim != 2 or self.Q.shape[0] != self.Q.shape[1]:
            raise InvalidArgumentError(f"Q must be square, got shape {self.Q.shape}")
        if not np.all(np.isfinite(self.Q)):
            raise InvalidArgumentError("Q contains non-finite entries")


@dataclass
class NoiseDraw:
    """Everything random in one forward pass, so it can be replayed."""
    gumbel: np.ndarray                       # d x C
    gate_eps: np.ndarray                     # C
    bandwidths: Optional[np.ndarray] = None  # B; frozen gamma for finite differences


@dataclass
class LossBreakdown:
    total: ad.Tensor
    l_s: float
    l_f: float
    l_reg: float
    weighted_l_f: float
    weighted_l_reg: float
    leaves: Dict[str, ad.Tensor] = field(default_factory=dict)
    gated_batch: Optional[np.ndarray] = None

    @property
    def value(self) -> float:
        return self.total.item()


# ---------------------------------------------------------------------
# Initialisation helpers
# ---------------------------------------------------------------------

def build_feature_graph(X: np.ndarray, K: int = FEATURE_KERNEL_NEIGHBORS) -> FeatureGraph:
    """Normalized Laplacian of the self-tuning graph over the columns of X."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    if d < 2:
        raise InvalidArgumentError(f"feature graph needs at least 2 features, got {d}")
    K_eff = min(K, d - 1)
    if K_eff != K:
        logger.info("feature graph: K capped from %d to %d for d=%d", K, K_eff, d)
    ops = graph.graph_operators(graph.self_tuning_affinity(X.T, K_eff))
    return FeatureGraph(L_feat=ops.L_sym)


def init_projection(labels: np.ndarray, C: int, rng: np.random.Generator) -> ProjectionQ:
    """Random orthonormal Q with row j scaled by 1 / |cluster j|."""
    if C < 2:
        raise InvalidArgumentError(f"projection needs C >= 2, got {C}")
    Q = ortho_group.rvs(C, random_state=rng)
    sizes = np.bincount(np.asarray(labels, dtype=np.int64), minlength=C).astype(np.float64)
    sizes[sizes == 0] = 1.0
    return ProjectionQ(Q=Q / sizes[:, None])


def draw_noise(d: int, C: int, sigma: float, rng: np.random.Generator) -> NoiseDraw:
    return NoiseDraw(gumbel=draw_gumbel((d, C), rng), gate_eps=draw_gate_noise(C, sigma, rng))


# ---------------------------------------------------------------------
# Loss terms
# ---------------------------------------------------------------------

def sample_smoothness(X_tilde: ad.ArrayLike, cfg: LossConfig,
                      bandwidths: Optional[np.ndarray] = None) -> ad.Tensor:
    X_tilde = ad.as_tensor(X_tilde)
    B, d = X_tilde.shape
    if B < cfg.K + 1:
        raise InvalidArgumentError(f"batch of {B} rows is too small for K={cfg.K}")

    sq = ad.pairwise_sq_dists(X_tilde)
    gamma = graph.knn_bandwidths(sq.data, cfg.K) if bandwidths is None else np.asarray(bandwidths)
    off_diagonal = 1.0 - np.eye(B)
    W = ad.exp(-sq / np.outer(gamma, gamma)) * off_diagonal
    degrees = ad.clamp(W.sum(axis=1, keepdims=True), lo=DEGREE_FLOOR)
    P = W / degrees

    diffused = X_tilde
    for _ in range(cfg.t):
        diffused = P @ diffused
    return -(X_tilde * diffused).sum() / float(B * d)


def feature_embedding(M: ad.ArrayLike, Q: ad.ArrayLike) -> ad.Tensor:
    """F = M Q with columns centered and scaled to unit norm."""
    return ad.center_normalize_columns(ad.as_tensor(M) @ ad.as_tensor(Q))


def feature_smoothness(F: ad.ArrayLike, L_feat: np.ndarray, beta: float) -> ad.Tensor:
    F = ad.as_tensor(F)
    d, C = F.shape
    if L_feat.shape != (d, d):
        raise InvalidArgumentError(f"L_feat is {L_feat.shape} but F has {d} rows")
    smooth = (F * (L_feat @ F)).sum()
    gram_gap = F.T @ F - np.eye(C)
    ortho = (gram_gap * gram_gap).sum()
    return (smooth + beta * ortho) / float(d * C)


def group_sparsity(M: ad.ArrayLike, gate: GateState, mu: Optional[ad.ArrayLike] = None) -> ad.Tensor:
    """Expected open-gate mass weighted by group size.

    ``mu`` overrides ``gate.mu`` when the caller tracks gradients for it.
    """
    M = ad.as_tensor(M)
    C = M.shape[1]
    p_open = open_probability_tensor(gate.mu if mu is None else mu, gate.sigma)
    return (p_open * M.mean(axis=0)).sum() / float(C)


def total_loss(
    batch: np.ndarray,
    grouping: GroupingState,
    gates: GateState,
    projection: ProjectionQ,
    feature_graph: FeatureGraph,
    cfg: LossConfig,
    noise: NoiseDraw,
) -> LossBreakdown:
    """Forward pass with gradient-tracking leaves for logits, mu and Q."""
    logits = ad.Tensor(grouping.logits, requires_grad=True)
    mu = ad.Tensor(gates.mu, requires_grad=True)
    Q = ad.Tensor(projection.Q, requires_grad=True)

    M = relaxed_assignment(logits, noise.gumbel, grouping.temperature)
    z = relaxed_gates(mu, noise.gate_eps)
    X_tilde = apply_gates(batch, feature_weights(M, z))

    l_s = sample_smoothness(X_tilde, cfg, noise.bandwidths)
    l_f = feature_smoothness(feature_embedding(M, Q), feature_graph.L_feat, cfg.beta)
    l_reg = group_sparsity(M, gates, mu=mu)

    total = l_s + cfg.lambda1 * l_f + cfg.lambda2 * l_reg
    return LossBreakdown(
        total=total,
        l_s=l_s.item(),
        l_f=l_f.item(),
        l_reg=l_reg.item(),
        weighted_l_f=cfg.lambda1 * l_f.item(),
        weighted_l_reg=cfg.lambda2 * l_reg.item(),
        leaves={"logits": logits, "mu": mu, "Q": Q},
        gated_batch=X_tilde.data,
    )
