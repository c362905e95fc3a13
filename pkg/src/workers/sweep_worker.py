# src/workers/sweep_worker.py
"""
Runs lambda2 sweeps (optionally x several seeds) in a process pool.

Every (lambda2, seed) run gets its own RNG seeded from ``seed`` alone, so
a sweep entry reproduces a single ``train`` run with the same settings,
and its own output directory; workers never share a file.
"""

from __future__ import annotations
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config.run_config import RunConfig
from core.errors import TrainingAborted
from core.optim import train
from services import artifact_store

logger = logging.getLogger(__name__)


@dataclass
class SweepJob:
    index: int
    lambda2: float
    seed: int
    run_dir: str
    config: Dict[str, Any]
    log_level: Optional[str] = None


@dataclass
class SweepOutcome:
    index: int
    lambda2: float
    seed: int
    run_dir: str
    status: str                 # "ok" | "aborted"
    best_loss: float
    best_epoch: int
    message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def run_name(lambda2: float, seed: int) -> str:
    return f"lambda2-{lambda2:.6g}-seed-{seed}"


def plan_jobs(config: RunConfig, lambda2_values: Sequence[float], seeds: Sequence[int],
              out_root: Path, log_level: Optional[str] = None) -> List[SweepJob]:
    jobs = []
    for lambda2 in lambda2_values:
        for seed in seeds:
            data = config.model_dump()
            data.update(lambda2=float(lambda2), seed=int(seed), lambda2_sweep=None)
            run_config = RunConfig.model_validate(data)
            jobs.append(SweepJob(
                index=len(jobs),
                lambda2=float(lambda2),
                seed=int(seed),
                run_dir=str(out_root / run_name(lambda2, seed)),
                config=run_config.model_dump(mode="json"),
                log_level=log_level,
            ))
    return jobs


def run_job(job: SweepJob, X: np.ndarray) -> SweepOutcome:
    """Train one sweep entry and write its checkpoint and history."""
    if job.log_level is not None:
        from app.log_manager import configure_logging
        configure_logging(job.log_level)

    config = RunConfig.model_validate(job.config)
    out = Path(job.run_dir)
    rng = np.random.default_rng(job.seed)
    try:
        model = train(X, config, rng)
    except TrainingAborted as exc:
        logger.error("run %s aborted: %s", out.name, exc)
        if exc.partial is not None:
            artifact_store.save_checkpoint(exc.partial, out / artifact_store.CHECKPOINT_FILE, aborted=True)
            artifact_store.write_history(exc.partial.history, out / artifact_store.HISTORY_FILE)
        return SweepOutcome(job.index, job.lambda2, job.seed, job.run_dir, "aborted",
                            float("inf"), -1, str(exc))

    artifact_store.save_checkpoint(model, out / artifact_store.CHECKPOINT_FILE)
    artifact_store.write_history(model.history, out / artifact_store.HISTORY_FILE)
    return SweepOutcome(job.index, job.lambda2, job.seed, job.run_dir, "ok",
                        model.best_loss, model.best_epoch)


def run_sweep(X: np.ndarray, jobs: Sequence[SweepJob], workers: int = 1) -> List[SweepOutcome]:
    """Results come back in job order regardless of completion order."""
    logger.info("sweep: %d runs on %d worker(s)", len(jobs), workers)
    if workers <= 1:
        outcomes = [run_job(job, X) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_job, jobs, [X] * len(jobs)))
    for outcome in outcomes:
        logger.info("lambda2=%g seed=%d %s best_loss=%.6f", outcome.lambda2, outcome.seed,
                    outcome.status, outcome.best_loss)
    return outcomes


def rank_summary(outcomes: Sequence[SweepOutcome]) -> List[Dict[str, Any]]:
    """One row per lambda2, ranked by the mean best loss over its seeds.

    Aborted runs do not enter the mean; a lambda2 whose runs all aborted
    ranks last.
    """
    frame = pd.DataFrame([o.to_dict() for o in outcomes])
    rows = []
    for lambda2, runs in frame.groupby("lambda2", sort=True):
        ok = runs[runs["status"] == "ok"]
        rows.append({
            "lambda2": float(lambda2),
            "mean_best_loss": float(ok["best_loss"].mean()) if len(ok) else float("inf"),
            "std_best_loss": float(ok["best_loss"].std(ddof=0)) if len(ok) else float("nan"),
            "n_runs": int(len(runs)),
            "n_aborted": int(len(runs) - len(ok)),
            "best_run": ok.loc[ok["best_loss"].idxmin(), "run_dir"] if len(ok) else "",
        })
    rows.sort(key=lambda r: (r["mean_best_loss"], r["lambda2"]))
    for rank, row in enumerate(rows, start=1):
        row["rank"] = rank
    return rows
