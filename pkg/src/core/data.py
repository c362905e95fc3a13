"""
Datasets: the synthetic two-moons benchmark, CSV ingestion and z-scoring.

Two-moons construction:
  - two interleaved unit half-circles (second moon shifted by (1, -0.5))
    plus Gaussian noise, each coordinate standardized
  - features 0-4 are sqrt(rho) * x1 + sqrt(1 - rho) * eps, features 5-9
    the same from x2, fresh eps per feature
  - features 10..d-1 are i.i.d. N(0, 1)
  - the final matrix is z-scored feature-wise
"""

from __future__ import annotations
import json
import logging
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from sklearn.datasets import make_moons

from config import settings
from core.errors import ConstantFeatureWarning, DataParseError, InvalidArgumentError

logger = logging.getLogger(__name__)

DATA_FILE = "X.csv"
META_FILE = "meta.json"

_CONSTANT_STD = 1e-12


# ---------------------------------------------------------------------
# Domain Types
# ---------------------------------------------------------------------

@dataclass
class SyntheticSpec:
    N: int = settings.MOONS_SAMPLES
    d: int = settings.MOONS_FEATURES
    rho: float = settings.MOONS_RHO
    moons_noise_std: float = settings.MOONS_NOISE_STD
    seed: int = 0

    def __post_init__(self):
        if self.N < 4:
            raise InvalidArgumentError(f"two-moons needs N >= 4, got {self.N}")
        if self.d < 2 * settings.MOONS_BLOCK_SIZE:
            raise InvalidArgumentError(f"d must be >= {2 * settings.MOONS_BLOCK_SIZE}, got {self.d}")
        if not 0.0 < self.rho <= 1.0:
            raise InvalidArgumentError(f"rho must lie in (0, 1], got {self.rho}")
        if self.moons_noise_std < 0.0:
            raise InvalidArgumentError(f"noise std must be >= 0, got {self.moons_noise_std}")


@dataclass
class Dataset:
    X: np.ndarray
    labels: Optional[np.ndarray] = None
    true_groups: Optional[List[List[int]]] = None
    feature_names: Optional[List[str]] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise InvalidArgumentError(f"X must be 2-D, got shape {self.X.shape}")
        if not np.all(np.isfinite(self.X)):
            raise InvalidArgumentError("X contains non-finite entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.X.shape[0],):
                raise InvalidArgumentError(
                    f"{self.labels.size} labels for {self.X.shape[0]} samples"
                )
            if self.labels.size and (self.labels.min() < 0
                                     or np.unique(self.labels).size != self.labels.max() + 1):
                raise InvalidArgumentError("labels must be the integers 0..k-1")
        if self.true_groups is not None:
            self.true_groups = [sorted(int(i) for i in g) for g in self.true_groups]
            for g in self.true_groups:
                if any(i < 0 or i >= self.X.shape[1] for i in g):
                    raise InvalidArgumentError(f"true group {g} has indices outside [0, {self.X.shape[1]})")
        if self.feature_names is not None and len(self.feature_names) != self.X.shape[1]:
            raise InvalidArgumentError("feature_names must name every column")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> Optional[int]:
        return None if self.labels is None else int(np.unique(self.labels).size)

    def column_names(self) -> List[str]:
        return list(self.feature_names) if self.feature_names else [f"f{i}" for i in range(self.n_features)]


# ---------------------------------------------------------------------
# Two-moons benchmark
# ---------------------------------------------------------------------

def two_moons(N: int, noise_std: float, seed: int):
    """N x 2 standardized two-moons coordinates and their binary labels."""
    if N < 4:
        raise InvalidArgumentError(f"two-moons needs N >= 4, got {N}")
    if noise_std < 0.0:
        raise InvalidArgumentError(f"noise std must be >= 0, got {noise_std}")
    base, labels = make_moons(n_samples=N, noise=noise_std or None, shuffle=True, random_state=seed)
    base = (base - base.mean(axis=0)) / base.std(axis=0)
    return base, labels.astype(np.int64)


def extend_moons(base: np.ndarray, d: int, rho: float, seed: int,
                 labels: Optional[np.ndarray] = None) -> Dataset:
    base = np.asarray(base, dtype=np.float64)
    block = settings.MOONS_BLOCK_SIZE
    if base.ndim != 2 or base.shape[1] != 2:
        raise InvalidArgumentError(f"base must be N x 2, got {base.shape}")
    if d < 2 * block:
        raise InvalidArgumentError(f"d must be >= {2 * block}, got {d}")
    if not 0.0 < rho <= 1.0:
        raise InvalidArgumentError(f"rho must lie in (0, 1], got {rho}")

    rng = np.random.default_rng(seed)
    N = base.shape[0]
    eps = rng.standard_normal((N, 2 * block))
    source = np.repeat(base, block, axis=1)
    informative = np.sqrt(rho) * source + np.sqrt(1.0 - rho) * eps
    noise = rng.standard_normal((N, d - 2 * block))

    return Dataset(
        X=np.hstack([informative, noise]),
        labels=labels,
        true_groups=[list(range(block)), list(range(block, 2 * block))],
    )


def zscore(X: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance columns; constant columns become zero."""
    X = np.asarray(X, dtype=np.float64)
    centered = X - X.mean(axis=0)
    std = X.std(axis=0)
    constant = std <= _CONSTANT_STD
    if constant.any():
        columns = np.flatnonzero(constant).tolist()
        message = f"constant feature columns {columns} left at zero"
        logger.warning(message)
        warnings.warn(message, ConstantFeatureWarning, stacklevel=2)
        centered[:, constant] = 0.0
        std = np.where(constant, 1.0, std)
    return centered / std


def make_synthetic(spec: SyntheticSpec) -> Dataset:
    moons_seed, extend_seed = np.random.SeedSequence(spec.seed).generate_state(2)
    base, labels = two_moons(spec.N, spec.moons_noise_std, int(moons_seed))
    ds = extend_moons(base, spec.d, spec.rho, int(extend_seed), labels=labels)
    ds.X = zscore(ds.X)
    logger.info("two-moons: N=%d d=%d rho=%g noise=%g seed=%d",
                spec.N, spec.d, spec.rho, spec.moons_noise_std, spec.seed)
    return ds


# ---------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------

_LINE_RE = re.compile(r"line (\d+)")


def _read_frame(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise DataParseError(f"{path}: empty file") from exc
    except pd.errors.ParserError as exc:
        match = _LINE_RE.search(str(exc))
        raise DataParseError(f"{path}: ragged row", row=int(match.group(1)) if match else None) from exc


def _parse_cell(cell: str) -> float:
    # float() is correctly rounded, so values written with %.17g read back bit-exact
    try:
        return float(cell)
    except ValueError:
        return np.nan


def _first_bad_cell(raw: pd.DataFrame, parsed: pd.DataFrame):
    bad = parsed.isna().to_numpy()
    row, col = np.argwhere(bad)[0]
    return int(row), raw.columns[col], raw.iat[row, col]


def load_csv(path: Union[str, Path], label_column: Optional[str] = None) -> Dataset:
    """Numeric CSV with a header row; ``label_column`` is label-encoded."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    raw = _read_frame(path)

    labels = None
    if label_column is not None:
        if label_column not in raw.columns:
            raise DataParseError(f"{path}: label column {label_column!r} not found", column=label_column)
        codes, _ = pd.factorize(raw.pop(label_column), sort=False)
        labels = codes.astype(np.int64)

    parsed = raw.apply(lambda column: column.map(_parse_cell))
    if parsed.isna().to_numpy().any():
        row, column, cell = _first_bad_cell(raw, parsed)
        reason = "missing value" if cell == "" else f"non-numeric value {cell!r}"
        raise DataParseError(f"{path}: {reason}", row=row + 2, column=str(column))

    logger.info("loaded %s: %d samples x %d features", path, *parsed.shape)
    return Dataset(X=parsed.to_numpy(dtype=np.float64), labels=labels,
                   feature_names=[str(c) for c in parsed.columns])


def save_dataset(ds: Dataset, out_dir: Union[str, Path]) -> Path:
    """Write X.csv and the meta.json sidecar; returns the CSV path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / DATA_FILE
    pd.DataFrame(ds.X, columns=ds.column_names()).to_csv(csv_path, index=False, float_format="%.17g")

    meta: Dict[str, Any] = {
        "labels": None if ds.labels is None else ds.labels.tolist(),
        "true_groups": ds.true_groups,
    }
    with open(out_dir / META_FILE, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2)
    logger.info("dataset written to %s", out_dir)
    return csv_path


def load_dataset(csv_path: Union[str, Path], label_column: Optional[str] = None,
                 meta_path: Optional[Union[str, Path]] = None) -> Dataset:
    """CSV plus labels / true groups from ``meta_path`` or a sibling meta.json."""
    csv_path = Path(csv_path)
    ds = load_csv(csv_path, label_column)
    meta_path = Path(meta_path) if meta_path else csv_path.with_name(META_FILE)
    if not meta_path.is_file():
        return ds

    with open(meta_path, "r", encoding="utf-8") as f:
        meta = json.load(f)
    labels = ds.labels
    if labels is None and meta.get("labels") is not None:
        labels = np.asarray(meta["labels"], dtype=np.int64)
    logger.debug("metadata picked up from %s", meta_path)
    return Dataset(X=ds.X, labels=labels, true_groups=meta.get("true_groups"),
                   feature_names=ds.feature_names)
