"""
Dense spectral-graph primitives.

The same self-tuning kernel builds the sample graph, the feature graph and
the graph behind the Laplacian Score baseline:

    W_ij = exp(-||x_i - x_j||^2 / (gamma_i * gamma_j)),  W_ii = 0

with gamma_i the distance from row i to its K-th nearest neighbour.
"""

from __future__ import annotations
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from config.settings import DEGREE_FLOOR, GAMMA_FLOOR_FACTOR, ZERO_NORM_TOL
from core.errors import InvalidArgumentError, NumericalError
from core.evaluation import kmeans

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------
# Domain Types
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class AffinityGraph:
    W: np.ndarray
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class GraphOperators:
    L_sym: np.ndarray
    P: np.ndarray


# ---------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------

def knn_bandwidths(sq_dists: np.ndarray, K: int) -> np.ndarray:
    """gamma_i = distance to the K-th nearest other row, floored.

    The floor is GAMMA_FLOOR_FACTOR * median(gamma); when every distance is
    zero (all rows identical) any positive bandwidth gives the same kernel,
    so 1.0 is used.
    """
    n = sq_dists.shape[0]
    if K < 1 or K >= n:
        raise InvalidArgumentError(f"K must satisfy 1 <= K < n, got K={K}, n={n}")
    masked = sq_dists.copy()
    np.fill_diagonal(masked, np.inf)
    kth = np.partition(masked, K - 1, axis=1)[:, K - 1]
    gamma = np.sqrt(np.maximum(kth, 0.0))
    median = float(np.median(gamma))
    floor = GAMMA_FLOOR_FACTOR * median if median > 0.0 else 1.0
    return np.maximum(gamma, floor)


def self_tuning_affinity(X: np.ndarray, K: int) -> AffinityGraph:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidArgumentError(f"X must be a 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("X contains non-finite entries")
    n = X.shape[0]
    if K >= n:
        raise InvalidArgumentError(f"need at least K+1={K + 1} rows, got {n}")

    sq = cdist(X, X, metric="sqeuclidean")
    gamma = knn_bandwidths(sq, K)
    W = np.exp(-sq / np.outer(gamma, gamma))
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    degrees = np.maximum(W.sum(axis=1), DEGREE_FLOOR)
    return AffinityGraph(W=W, degrees=degrees)


# ---------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------

def graph_operators(g: AffinityGraph) -> GraphOperators:
    if np.any(g.degrees <= 0.0):
        raise NumericalError("graph has a non-positive degree", {"min_degree": float(g.degrees.min())})
    inv_sqrt = 1.0 / np.sqrt(g.degrees)
    L_sym = np.eye(g.n) - inv_sqrt[:, None] * g.W * inv_sqrt[None, :]
    L_sym = 0.5 * (L_sym + L_sym.T)
    P = g.W / g.degrees[:, None]
    return GraphOperators(L_sym=L_sym, P=P)


def diffuse(P: np.ndarray, t: int) -> np.ndarray:
    """P^t by repeated multiplication."""
    if t < 1:
        raise InvalidArgumentError(f"diffusion steps must be >= 1, got {t}")
    out = P.copy()
    for _ in range(t - 1):
        out = out @ P
    return out


def laplacian_score(X: np.ndarray, ops: GraphOperators) -> np.ndarray:
    """Per-feature x^T L_sym x; lower means smoother on the sample graph."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != ops.L_sym.shape[0]:
        raise InvalidArgumentError(
            f"X has shape {X.shape} but the graph has {ops.L_sym.shape[0]} nodes"
        )
    return np.einsum("ik,ik->k", X, ops.L_sym @ X)


# ---------------------------------------------------------------------
# Spectral embedding / clustering
# ---------------------------------------------------------------------

def _row_normalize(U: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    return np.where(norms > ZERO_NORM_TOL, U / np.where(norms > ZERO_NORM_TOL, norms, 1.0), 0.0)


def spectral_embedding(L_sym: np.ndarray, C: int) -> np.ndarray:
    """Eigenvectors of the C smallest eigenvalues, rows scaled to unit norm."""
    n = L_sym.shape[0]
    if C < 1 or C > n:
        raise InvalidArgumentError(f"embedding dimension must be in [1, {n}], got {C}")
    try:
        eigvals, eigvecs = linalg.eigh(L_sym, driver="evd")
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            "symmetric eigensolver did not converge",
            {"n": n, "finite": bool(np.all(np.isfinite(L_sym))), "cause": str(exc)},
        ) from exc
    logger.debug("spectrum head: %s", np.array2string(eigvals[: min(n, C + 1)], precision=4))
    return _row_normalize(eigvecs[:, :C])


def spectral_cluster(L_sym: np.ndarray, C: int, seed: int = 0) -> np.ndarray:
    if C < 2:
        raise InvalidArgumentError(f"spectral clustering needs C >= 2, got {C}")
    U = spectral_embedding(L_sym, C)
    labels, _ = kmeans(U, C, seed)
    return labels
