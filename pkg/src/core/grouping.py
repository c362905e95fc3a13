"""
Learnable feature-to-group assignment.

Each feature i holds C logits (log pi_i). During training a relaxed one-hot
row is drawn with the Gumbel-Softmax trick at the current temperature; at
evaluation time the noise-free argmax gives the hard group of each feature.
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.settings import MIN_TEMPERATURE, P_MAIN, START_TEMPERATURE
from core import autodiff as ad
from core.errors import InvalidArgumentError


# ---------------------------------------------------------------------
# Domain Types
# ---------------------------------------------------------------------

@dataclass
class TemperatureSchedule:
    start_t: float = START_TEMPERATURE
    min_t: float = MIN_TEMPERATURE
    total_epochs: int = 1

    def __post_init__(self):
        if self.min_t <= 0.0:
            raise InvalidArgumentError(f"min_t must be positive, got {self.min_t}")
        if self.start_t < self.min_t:
            raise InvalidArgumentError(f"start_t ({self.start_t}) must be >= min_t ({self.min_t})")
        if self.total_epochs < 1:
            raise InvalidArgumentError(f"total_epochs must be >= 1, got {self.total_epochs}")

    def at(self, epoch: int) -> float:
        return temperature_at(self, epoch)


@dataclass
class GroupingState:
    logits: np.ndarray  # d x C
    temperature: float = START_TEMPERATURE

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 2:
            raise InvalidArgumentError(f"logits must be d x C, got shape {self.logits.shape}")
        if not np.all(np.isfinite(self.logits)):
            raise InvalidArgumentError("logits contain non-finite entries")
        if self.temperature <= 0.0:
            raise InvalidArgumentError(f"temperature must be positive, got {self.temperature}")

    @property
    def n_features(self) -> int:
        return self.logits.shape[0]

    @property
    def n_groups(self) -> int:
        return self.logits.shape[1]


# ---------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------

def temperature_at(sched: TemperatureSchedule, epoch: int) -> float:
    """Linear decay from start_t reaching min_t at the last epoch, clipped at min_t."""
    decayed = sched.start_t - (sched.start_t - sched.min_t) * epoch / sched.total_epochs
    return max(sched.min_t, decayed)


def draw_gumbel(shape, rng: np.random.Generator) -> np.ndarray:
    """g = -log(-log u), u ~ Uniform(0, 1)."""
    u = rng.uniform(np.finfo(np.float64).tiny, 1.0, size=shape)
    return -np.log(-np.log(u))


def relaxed_assignment(logits: ad.ArrayLike, gumbel: np.ndarray, temperature: float) -> ad.Tensor:
    """Differentiable M = softmax((logits + g) / T) row by row."""
    if temperature <= 0.0:
        raise InvalidArgumentError(f"temperature must be positive, got {temperature}")
    return ad.softmax((ad.as_tensor(logits) + gumbel) / temperature, axis=1)


def sample_assignment(state: GroupingState, rng: np.random.Generator,
                      gumbel: Optional[np.ndarray] = None) -> np.ndarray:
    if gumbel is None:
        gumbel = draw_gumbel(state.logits.shape, rng)
    return relaxed_assignment(state.logits, gumbel, state.temperature).data


def hard_assignment(state: GroupingState) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest group index on ties
    return np.argmax(state.logits, axis=1).astype(np.int64)


def init_logits(labels: np.ndarray, C: int, p_main: float = P_MAIN) -> np.ndarray:
    """Warm-start logits: Delta = log(p_main / p_rest) on the assigned group, 0 elsewhere."""
    labels = np.asarray(labels, dtype=np.int64)
    if C < 2:
        raise InvalidArgumentError(f"warm start needs C >= 2, got {C}")
    if not (1.0 / C < p_main < 1.0):
        raise InvalidArgumentError(f"p_main must lie in (1/C, 1), got {p_main} for C={C}")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise InvalidArgumentError(f"labels must lie in [0, {C - 1}]")
    p_rest = (1.0 - p_main) / (C - 1)
    delta = np.log(p_main / p_rest)
    logits = np.zeros((labels.size, C))
    logits[np.arange(labels.size), labels] = delta
    return logits
