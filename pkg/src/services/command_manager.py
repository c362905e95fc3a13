# src/services/command_manager.py
"""
One function per CLI command. Each takes the parsed argparse namespace
and returns the process exit code; domain failures are raised as
GroupFSError and mapped to exit codes by ``main``.

Configuration layering: settings defaults < --preset < --config < flags.
"""

from __future__ import annotations
import argparse
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from config.run_config import RunConfig, SweepRange
from core import data as datasets
from core.errors import InvalidArgumentError, TrainingAborted
from core.evaluation import evaluate_selection
from core.gradcheck import check_gradients, make_instance
from core.losses import LossConfig, build_feature_graph
from core.optim import train
from core.preset_manager import PresetManager
from core.selection import (
    BudgetRule,
    SelectionResult,
    accuracy_guided_budget,
    choose_C,
    laplacian_score_selection,
    rank_and_select,
)
from services import artifact_store
from workers import sweep_worker

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------
#   Helpers
# ------------------------------------------------------------------

def build_config(args: argparse.Namespace, presets: Optional[PresetManager] = None) -> RunConfig:
    config = RunConfig()
    preset_name = getattr(args, "preset", None)
    if preset_name:
        preset = (presets or PresetManager.default()).get_preset(preset_name)
        config = config.merged(preset.to_overrides())
        if preset.sweep and getattr(args, "command", None) == "sweep":
            config = config.merged({"lambda2_sweep": preset.sweep})
        logger.info("preset %s applied", preset_name)
    if getattr(args, "config", None):
        config = RunConfig.from_json_file(args.config, base=config)
    flags = {name: getattr(args, name) for name in RunConfig.model_fields if getattr(args, name, None) is not None}
    return config.merged(flags)


def output_dir(config: RunConfig, default_name: str) -> Path:
    """--out as given, otherwise <output root>/<default_name>."""
    if config.out_dir:
        path = Path(config.out_dir)
    else:
        path = config.output_root() / default_name
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_data(config: RunConfig) -> datasets.Dataset:
    if config.data_path:
        return datasets.load_dataset(config.data_path, config.label_column)
    spec = datasets.SyntheticSpec(N=config.n_samples, d=config.n_features, rho=config.rho,
                                  moons_noise_std=config.moons_noise, seed=config.seed)
    return datasets.make_synthetic(spec)


def resolve_groups(config: RunConfig, X: np.ndarray) -> RunConfig:
    """Replace C='auto' by the group-count heuristic's choice."""
    if config.C != "auto":
        return config
    c_max = min(config.c_max, X.shape[1])
    result = choose_C(build_feature_graph(X).L_feat, c_max, np.random.default_rng(config.seed))
    logger.info("C=auto resolved to %d (local minima %s)", result.chosen, result.local_minima)
    return config.merged({"C": result.chosen})


def _write_run(model, out: Path, aborted: bool = False):
    artifact_store.save_checkpoint(model, out / artifact_store.CHECKPOINT_FILE, aborted=aborted)
    artifact_store.write_history(model.history, out / artifact_store.HISTORY_FILE)


# ------------------------------------------------------------------
#   Commands
# ------------------------------------------------------------------

def cmd_generate(args: argparse.Namespace) -> int:
    config = build_config(args)
    spec = datasets.SyntheticSpec(N=config.n_samples, d=config.n_features, rho=config.rho,
                                  moons_noise_std=config.moons_noise, seed=config.seed)
    out = output_dir(config, "data")
    csv_path = datasets.save_dataset(datasets.make_synthetic(spec), out)
    print(f"{csv_path}: {spec.N} x {spec.d}, groups [0..4] [5..9]")
    return 0


def cmd_choose_c(args: argparse.Namespace) -> int:
    config = build_config(args)
    X = datasets.zscore(load_data(config).X)
    result = choose_C(build_feature_graph(X).L_feat, config.c_max, np.random.default_rng(config.seed))
    out = output_dir(config, "choose-c")
    artifact_store.write_curve(result.curve, result.local_minima, out / artifact_store.CURVE_FILE)
    print(f"C={result.chosen}")
    if result.local_minima:
        print(f"local minima: {' '.join(str(c) for c in result.local_minima)}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = build_config(args)
    if config.lambda2_sweep is not None:
        return _sweep(config, getattr(args, "log_level", None))

    X = datasets.zscore(load_data(config).X)
    config = resolve_groups(config, X)
    out = output_dir(config, f"train-seed-{config.seed}")
    try:
        model = train(X, config, np.random.default_rng(config.seed))
    except TrainingAborted as exc:
        logger.error("%s", exc)
        if exc.partial is not None:
            _write_run(exc.partial, out, aborted=True)
        return 1
    _write_run(model, out)
    print(f"best epoch {model.best_epoch}, loss {model.best_loss:.6f} -> {out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = build_config(args)
    if config.lambda2_sweep is None:
        raise InvalidArgumentError("sweep needs --lambda2-sweep lo:hi:steps or a preset with a range")
    return _sweep(config, getattr(args, "log_level", None))


def _sweep(config: RunConfig, log_level: Optional[str]) -> int:
    X = datasets.zscore(load_data(config).X)
    config = resolve_groups(config, X)
    sweep: SweepRange = config.lambda2_sweep
    out = output_dir(config, f"sweep-{sweep.lo:g}-{sweep.hi:g}-{sweep.steps}")
    seeds = [config.seed + i for i in range(config.sweep_seeds)]
    jobs = sweep_worker.plan_jobs(config, sweep.values(), seeds, out,
                                  log_level if config.workers > 1 else None)
    outcomes = sweep_worker.run_sweep(X, jobs, config.workers)
    summary = sweep_worker.rank_summary(outcomes)
    artifact_store.write_summary(summary, out / artifact_store.SUMMARY_FILE)

    best = summary[0]
    print(f"best lambda2={best['lambda2']:g} mean loss {best['mean_best_loss']:.6f} ({len(outcomes)} runs) -> {out}")
    return 1 if any(o.status != "ok" for o in outcomes) else 0


def _budget_rule(args: argparse.Namespace) -> BudgetRule:
    for kind in BudgetRule.KINDS:
        value = getattr(args, kind, None)
        if value is not None:
            return BudgetRule(kind, value)
    if getattr(args, "preset", None):
        preset = PresetManager.default().get_preset(args.preset)
        if preset.n_features is not None:
            logger.info("budget from preset %s: at least %d features", preset.name, preset.n_features)
            return BudgetRule("min_features", preset.n_features)
    raise InvalidArgumentError("choose a budget: --groups, --min-features, --max-features or a preset with n_features")


def cmd_select(args: argparse.Namespace) -> int:
    ckpt_path = artifact_store.resolve_checkpoint(args.checkpoint)
    model = artifact_store.load_checkpoint(ckpt_path)

    if args.accuracy_guided:
        config = build_config(args)
        dataset = load_data(config)
        dataset.X = datasets.zscore(dataset.X)
        result = accuracy_guided_budget(model, dataset, k=args.k, cap=args.max_features)
    else:
        result = rank_and_select(model, _budget_rule(args))

    out = Path(args.out_dir) if args.out_dir else ckpt_path.parent
    artifact_store.save_selection(result, out / artifact_store.SELECTION_FILE)
    print(f"{len(result.selected)} features from {result.budget} groups: {result.selected}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = build_config(args)
    dataset = load_data(config)
    dataset.X = datasets.zscore(dataset.X)
    d = dataset.n_features

    if args.selection:
        selection = artifact_store.load_selection(args.selection)
        if selection.selected and max(selection.selected) >= d:
            raise InvalidArgumentError(f"selection refers to features beyond d={d}")
        default_out = Path(args.selection).parent
    else:
        everything = list(range(d))
        selection = SelectionResult(group_order=[0], groups=[everything], selected=everything,
                                    gate_means=[1.0], budget=1, rule="all")
        default_out = output_dir(config, "eval")

    seeds = list(range(args.seeds))
    report = evaluate_selection(dataset, selection, k=args.k, seeds=seeds)
    out = Path(config.out_dir) if config.out_dir else default_out
    artifact_store.save_metrics(report, out / artifact_store.METRICS_FILE)
    print(report.to_table())
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    cfg = LossConfig(lambda1=args.lambda1, lambda2=args.lambda2,
                     beta=args.beta if args.beta is not None else (1.0 / args.lambda1 if args.lambda1 else 1.0))
    instance = make_instance(n=args.n, d=args.d, C=args.groups, seed=args.seed, cfg=cfg,
                             temperature=args.temperature)
    report = check_gradients(instance, tolerance=args.tolerance)
    if args.out_dir:
        artifact_store.write_json(report.to_dict(), Path(args.out_dir) / "gradcheck.json")
    print(report.to_table())
    return 0 if report.passed else 1


def cmd_ls_baseline(args: argparse.Namespace) -> int:
    config = build_config(args)
    X = datasets.zscore(load_data(config).X)
    result = laplacian_score_selection(X, config.K, args.n_select)
    out = output_dir(config, "ls-baseline")
    artifact_store.save_selection(result, out / artifact_store.SELECTION_FILE)
    print(f"Laplacian Score top {args.n_select}: {result.selected}")
    return 0


COMMANDS: Dict[str, Any] = {
    "generate": cmd_generate,
    "choose-c": cmd_choose_c,
    "train": cmd_train,
    "select": cmd_select,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "sweep": cmd_sweep,
    "ls-baseline": cmd_ls_baseline,
}
