# src/services/artifact_store.py
"""
Run artifacts on disk.

  checkpoint.json   model parameters + config echo + final losses
  history.csv       one row per epoch
  curve.csv         group-count distortion curve
  selection.json    SelectionResult
  metrics.json      MetricReport

JSON floats are written with repr precision, so a checkpoint reloads
bit-identical.
"""

from __future__ import annotations
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError

from config.settings import CHECKPOINT_SCHEMA_VERSION
from core.errors import DataParseError, InvalidArgumentError
from core.evaluation import MetricReport
from core.gates import GateState
from core.grouping import GroupingState
from core.losses import ProjectionQ
from core.optim import EpochRecord, TrainedModel
from core.selection import SelectionResult

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.json"
HISTORY_FILE = "history.csv"
CURVE_FILE = "curve.csv"
SELECTION_FILE = "selection.json"
METRICS_FILE = "metrics.json"
SUMMARY_FILE = "summary.csv"

HISTORY_COLUMNS = ["epoch", "loss", "l_s", "lambda1_l_f", "lambda2_l_reg", "temperature"]

PathLike = Union[str, Path]


# ---------------------------------------------------------------------
# Checkpoint schema
# ---------------------------------------------------------------------

class Checkpoint(BaseModel):
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")

    schema_version: int = CHECKPOINT_SCHEMA_VERSION
    logits: List[List[float]]
    mu: List[float]
    Q: List[List[float]]
    temperature: float
    sigma: float
    config: Dict[str, Any]
    best_epoch: int
    best_loss: float
    final_losses: Dict[str, float]
    aborted: bool = False

    @classmethod
    def from_model(cls, model: TrainedModel, aborted: bool = False) -> Checkpoint:
        final = {}
        if model.history:
            last = model.history[-1]
            final = dict(zip(HISTORY_COLUMNS[1:], last.to_row()[1:]))
        return cls(
            logits=model.grouping.logits.tolist(),
            mu=model.gates.mu.tolist(),
            Q=model.projection.Q.tolist(),
            temperature=model.grouping.temperature,
            sigma=model.gates.sigma,
            config=model.config,
            best_epoch=model.best_epoch,
            best_loss=model.best_loss,
            final_losses=final,
            aborted=aborted,
        )

    def to_model(self) -> TrainedModel:
        return TrainedModel(
            grouping=GroupingState(np.asarray(self.logits, dtype=np.float64), self.temperature),
            gates=GateState(np.asarray(self.mu, dtype=np.float64), self.sigma),
            projection=ProjectionQ(np.asarray(self.Q, dtype=np.float64)),
            config=dict(self.config),
            best_epoch=self.best_epoch,
            best_loss=self.best_loss,
        )


def save_checkpoint(model: TrainedModel, path: PathLike, aborted: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(Checkpoint.from_model(model, aborted).model_dump_json(indent=2), encoding="utf-8")
    logger.info("checkpoint written to %s", path)
    return path


def load_checkpoint(path: PathLike) -> TrainedModel:
    path = Path(path)
    try:
        ckpt = Checkpoint.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise InvalidArgumentError(f"{path}: not a valid checkpoint: {exc}") from exc
    if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION:
        raise InvalidArgumentError(
            f"{path}: checkpoint schema {ckpt.schema_version}, expected {CHECKPOINT_SCHEMA_VERSION}"
        )
    if ckpt.aborted:
        logger.warning("%s holds the partial model of an aborted run", path)
    return ckpt.to_model()


# ---------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------

def write_history(history: Sequence[EpochRecord], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([r.to_row() for r in history], columns=HISTORY_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def read_history(path: PathLike) -> List[EpochRecord]:
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != HISTORY_COLUMNS:
        raise DataParseError(f"{path}: unexpected history columns {list(frame.columns)}")
    return [EpochRecord(int(row[0]), *map(float, row[1:])) for row in frame.itertuples(index=False)]


def write_curve(curve: Sequence[Tuple[int, float]], local_minima: Sequence[int], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    minima = set(local_minima)
    frame = pd.DataFrame(
        [(c, score, c in minima) for c, score in curve],
        columns=["C", "distortion", "local_minimum"],
    )
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def write_summary(rows: List[Dict[str, Any]], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.17g")
    return path


# ---------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------

def write_json(data: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def save_selection(result: SelectionResult, path: PathLike) -> Path:
    return write_json(result.to_dict(), path)


def load_selection(path: PathLike) -> SelectionResult:
    try:
        return SelectionResult.from_dict(read_json(path))
    except TypeError as exc:
        raise InvalidArgumentError(f"{path}: not a selection file: {exc}") from exc


def save_metrics(report: MetricReport, path: PathLike) -> Path:
    return write_json(report.to_dict(), path)


def resolve_checkpoint(path: PathLike) -> Path:
    """Accept either a checkpoint file or a run directory holding one."""
    path = Path(path)
    return path / CHECKPOINT_FILE if path.is_dir() else path
