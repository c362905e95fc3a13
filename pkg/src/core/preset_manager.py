"""
Named hyperparameter presets for GroupFS runs.

A preset bundles the group count, loss weights, the lambda2 search range
and the optimisation settings for one dataset or one two-moons ablation
point. Presets live in ``presets.json`` next to ``main.py`` and are
layered onto a RunConfig before ``--config`` and CLI flags.
"""

from __future__ import annotations
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Optional, Tuple

from core.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

DEFAULT_PRESETS_PATH = Path(__file__).resolve().parents[1] / "presets.json"


# ---------------------------------------------------------------------
# Preset Class Definition
# ---------------------------------------------------------------------

@dataclass
class HyperparamPreset:
    # --- Identification ---
    name: str
    family: str
    description: Optional[str] = None

    # --- Model ---
    C: int = 12
    lambda1: float = 1.0
    lambda2: float = 6.2

    # --- lambda2 search range (lo, hi, steps) ---
    lambda2_range: Optional[Tuple[float, float, int]] = None

    # --- Optimisation ---
    epochs: int = 500
    batch_size: int = 100

    # --- Two-moons generation ---
    rho: Optional[float] = None
    moons_noise: Optional[float] = None

    # --- Default select budget (min features) ---
    n_features: Optional[int] = None

    FAMILIES: ClassVar[Tuple[str, ...]] = (
        "two_moons_noise", "two_moons_rho", "real_fixed", "real_adaptive",
    )

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise InvalidArgumentError(f"preset {self.name!r}: unknown family {self.family!r}")
        if self.C < 2:
            raise InvalidArgumentError(f"preset {self.name!r}: C must be >= 2, got {self.C}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidArgumentError(f"preset {self.name!r}: loss weights must be >= 0")
        if self.lambda2_range is not None:
            lo, hi, steps = self.lambda2_range
            if hi < lo or int(steps) < 1:
                raise InvalidArgumentError(f"preset {self.name!r}: bad lambda2 range {self.lambda2_range}")
            self.lambda2_range = (float(lo), float(hi), int(steps))

    @property
    def sweep(self) -> Optional[str]:
        """The lambda2 range in ``lo:hi:steps`` form."""
        if self.lambda2_range is None:
            return None
        lo, hi, steps = self.lambda2_range
        return f"{lo:g}:{hi:g}:{steps}"

    def to_overrides(self) -> Dict[str, Any]:
        """RunConfig fields this preset sets (None entries are left alone)."""
        return {
            "C": self.C,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "rho": self.rho,
            "moons_noise": self.moons_noise,
        }

    # -----------------------------------------------------------------
    # Serialization Helpers
    # -----------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        if self.lambda2_range is not None:
            d["lambda2_range"] = list(self.lambda2_range)
        return d

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> HyperparamPreset:
        data = dict(data)
        if data.get("lambda2_range") is not None:
            data["lambda2_range"] = tuple(data["lambda2_range"])
        return cls(**data)


# ---------------------------------------------------------------------
# Preset Manager
# ---------------------------------------------------------------------

@dataclass
class PresetManager:
    presets: Dict[str, HyperparamPreset] = field(default_factory=dict)

    @classmethod
    def default(cls) -> PresetManager:
        pm = cls()
        pm.load_from_json(DEFAULT_PRESETS_PATH)
        return pm

    def get_preset(self, name: str) -> HyperparamPreset:
        preset = self.presets.get(name)
        if preset is None:
            raise InvalidArgumentError(
                f"unknown preset {name!r}; available: {', '.join(self.list_presets())}"
            )
        return preset

    def list_presets(self) -> List[str]:
        return list(self.presets.keys())

    def list_presets_for(self, family: str) -> List[str]:
        """Preset names of one family (case-insensitive). Empty family -> all."""
        if not family or not family.strip():
            return self.list_presets()
        wanted = family.strip().casefold()
        return [p.name for p in self.presets.values() if p.family.casefold() == wanted]

    # ---------------- I/O ------------------

    def save_to_json(self, filepath: Path | str):
        data = {name: p.to_dict() for name, p in self.presets.items()}
        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=4)

    def load_from_json(self, filepath: Path | str):
        with open(filepath, "r", encoding="utf-8") as f:
            data = json.load(f)

        if isinstance(data, dict):
            self.presets = {name: HyperparamPreset.from_dict({"name": name, **pdata})
                            for name, pdata in data.items()}
        elif isinstance(data, list):
            self.presets = {pdata["name"]: HyperparamPreset.from_dict(pdata) for pdata in data}
        else:
            raise InvalidArgumentError(
                f"unsupported preset file: expected dict or list, got {type(data).__name__}"
            )
        logger.debug("loaded %d presets from %s", len(self.presets), filepath)
