# src/config/run_config.py
"""
Validated run configuration.

Defaults come from ``config.settings``; a preset, a ``--config`` JSON file
and explicit CLI flags are layered on top of them in that order.
"""

from __future__ import annotations
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import settings
from core.errors import InvalidArgumentError


# ---------------------------------------------------------------------
# Sweep ranges
# ---------------------------------------------------------------------

class SweepRange(BaseModel):
    """Uniform grid ``lo:hi:steps`` (both ends included)."""
    model_config = ConfigDict(frozen=True)

    lo: float
    hi: float
    steps: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self) -> SweepRange:
        if self.hi < self.lo:
            raise ValueError(f"sweep upper bound {self.hi} is below lower bound {self.lo}")
        return self

    @classmethod
    def parse(cls, text: str) -> SweepRange:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidArgumentError(f"sweep must look like lo:hi:steps, got {text!r}")
        try:
            return cls(lo=float(parts[0]), hi=float(parts[1]), steps=int(parts[2]))
        except ValueError as exc:
            raise InvalidArgumentError(f"bad sweep {text!r}: {exc}") from exc

    def values(self) -> List[float]:
        return [float(v) for v in np.linspace(self.lo, self.hi, self.steps)]

    def __str__(self) -> str:
        return f"{self.lo:g}:{self.hi:g}:{self.steps}"


# ---------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------

class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # --- data source: CSV path, otherwise the synthetic two-moons set ---
    data_path: Optional[str] = None
    label_column: Optional[str] = None
    n_samples: int = Field(default=settings.MOONS_SAMPLES, ge=4)
    n_features: int = Field(default=settings.MOONS_FEATURES, ge=10)
    rho: float = Field(default=settings.MOONS_RHO, gt=0.0, le=1.0)
    moons_noise: float = Field(default=settings.MOONS_NOISE_STD, ge=0.0)

    # --- model ---
    C: Union[int, Literal["auto"]] = settings.DEFAULT_GROUPS
    c_max: int = Field(default=10, ge=3)
    p_main: float = settings.P_MAIN
    sigma: float = Field(default=settings.GATE_SIGMA, gt=0.0)
    K: int = Field(default=settings.KERNEL_NEIGHBORS, ge=1)
    t: int = Field(default=settings.DIFFUSION_STEPS, ge=1)

    # --- loss weights ---
    lambda1: float = Field(default=settings.DEFAULT_LAMBDA1, ge=0.0)
    lambda2: Union[float, Literal["auto"]] = settings.DEFAULT_LAMBDA2
    lambda2_sweep: Optional[SweepRange] = None
    beta: Optional[float] = Field(default=None, ge=0.0)

    # --- optimisation ---
    epochs: int = Field(default=settings.DEFAULT_EPOCHS, ge=1)
    batch_size: int = Field(default=settings.DEFAULT_BATCH_SIZE, ge=2)
    lr: float = Field(default=settings.LEARNING_RATE, gt=0.0)
    start_t: float = Field(default=settings.START_TEMPERATURE, gt=0.0)
    min_t: float = Field(default=settings.MIN_TEMPERATURE, gt=0.0)

    # --- bookkeeping ---
    seed: int = 0
    sweep_seeds: int = Field(default=1, ge=1)
    workers: int = Field(default=1, ge=1)
    log_every: int = Field(default=settings.LOG_EVERY_EPOCHS, ge=1)
    out_dir: Optional[str] = None

    @field_validator("lambda2_sweep", mode="before")
    @classmethod
    def _parse_sweep(cls, value: Any) -> Any:
        if isinstance(value, str):
            return SweepRange.parse(value)
        return value

    @field_validator("lambda2")
    @classmethod
    def _check_lambda2(cls, value: Union[float, str]) -> Union[float, str]:
        if value != "auto" and not (np.isfinite(value) and value >= 0.0):
            raise ValueError(f"lambda2 must be a finite number >= 0 or 'auto', got {value}")
        return value

    @field_validator("C")
    @classmethod
    def _check_groups(cls, value: Union[int, str]) -> Union[int, str]:
        if isinstance(value, int) and value < 2:
            raise ValueError(f"C must be >= 2 or 'auto', got {value}")
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> RunConfig:
        if self.start_t < self.min_t:
            raise ValueError(f"start_t ({self.start_t}) must be >= min_t ({self.min_t})")
        if self.batch_size < self.K + 1:
            raise ValueError(f"batch_size ({self.batch_size}) must be >= K+1 ({self.K + 1})")
        if isinstance(self.C, int) and not (1.0 / self.C < self.p_main < 1.0):
            raise ValueError(f"p_main must lie in (1/C, 1), got {self.p_main} for C={self.C}")
        return self

    # -----------------------------------------------------------------
    # Derived values
    # -----------------------------------------------------------------

    @property
    def effective_beta(self) -> float:
        """beta defaults to 1/lambda1 so the orthogonality term has weight 1."""
        if self.beta is not None:
            return self.beta
        return 1.0 / self.lambda1 if self.lambda1 > 0.0 else 1.0

    @property
    def groups(self) -> int:
        if self.C == "auto":
            raise InvalidArgumentError("C is 'auto'; resolve it with choose-c before training")
        return int(self.C)

    def output_root(self) -> Path:
        if self.out_dir:
            return Path(self.out_dir)
        return Path(os.environ.get(settings.OUTPUT_ROOT_ENV, settings.DEFAULT_OUTPUT_ROOT))

    # -----------------------------------------------------------------
    # Layering
    # -----------------------------------------------------------------

    def merged(self, overrides: Dict[str, Any]) -> RunConfig:
        """A validated copy with ``overrides`` (None values ignored) applied."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.model_validate(data)

    @classmethod
    def from_json_file(cls, path: Union[str, Path], base: Optional[RunConfig] = None) -> RunConfig:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise InvalidArgumentError(f"{path}: config file must hold a JSON object")
        return (base or cls()).merged(data)
