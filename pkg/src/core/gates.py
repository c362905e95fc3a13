"""
Group-level stochastic gates.

    z_j   = clamp(mu_j + eps_j, 0, 1),  eps_j ~ N(0, sigma^2)
    zhat  = M z                        (per-feature weight)
    X~    = X_B * zhat                 (broadcast over the batch)
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from config.settings import GATE_MU_INIT, GATE_SIGMA
from core import autodiff as ad
from core.errors import InvalidArgumentError


@dataclass
class GateState:
    mu: np.ndarray
    sigma: float = GATE_SIGMA

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        if self.sigma <= 0.0:
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")
        if not np.all(np.isfinite(self.mu)):
            raise InvalidArgumentError("gate means contain non-finite entries")

    @classmethod
    def initial(cls, C: int, sigma: float = GATE_SIGMA, mu0: float = GATE_MU_INIT) -> GateState:
        return cls(mu=np.full(C, mu0), sigma=sigma)

    @property
    def n_groups(self) -> int:
        return self.mu.size


def draw_gate_noise(C: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, sigma, size=C)


def relaxed_gates(mu: ad.ArrayLike, eps: np.ndarray) -> ad.Tensor:
    return ad.clamp(ad.as_tensor(mu) + eps, 0.0, 1.0)


def sample_gates(state: GateState, rng: np.random.Generator,
                 eps: Optional[np.ndarray] = None) -> np.ndarray:
    if eps is None:
        eps = draw_gate_noise(state.n_groups, state.sigma, rng)
    return relaxed_gates(state.mu, eps).data


def open_probability(state: GateState) -> np.ndarray:
    """P(z_j > 0) = Phi(mu_j / sigma)."""
    return ndtr(state.mu / state.sigma)


def open_probability_tensor(mu: ad.ArrayLike, sigma: float) -> ad.Tensor:
    return ad.normal_cdf(ad.as_tensor(mu) / sigma)


def feature_weights(M: ad.ArrayLike, z: ad.ArrayLike) -> ad.Tensor:
    M, z = ad.as_tensor(M), ad.as_tensor(z)
    if M.ndim != 2 or z.data.size != M.shape[1]:
        raise InvalidArgumentError(f"M is {M.shape} but z has {z.data.size} entries")
    return (M @ z.reshape(M.shape[1], 1)).reshape(M.shape[0])


def apply_gates(X_B: ad.ArrayLike, zhat: ad.ArrayLike) -> ad.Tensor:
    X_B, zhat = ad.as_tensor(X_B), ad.as_tensor(zhat)
    if X_B.ndim != 2 or zhat.data.size != X_B.shape[1]:
        raise InvalidArgumentError(f"batch is {X_B.shape} but zhat has {zhat.data.size} entries")
    return X_B * zhat.reshape(1, X_B.shape[1])
