"""
Central finite-difference check of the reverse-mode gradients.

All randomness of the forward pass (Gumbel noise, gate noise and the
sample-graph bandwidths) is frozen, so finite differences and the tape
differentiate the same function. Gate coordinates whose pre-clip value
sits within GRADCHECK_CLIP_MARGIN of 0 or 1 are skipped: the clamp has no
derivative there.
"""

from __future__ import annotations
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.spatial.distance import cdist

from config import settings
from core import graph
from core.gates import GateState
from core.grouping import GroupingState, init_logits
from core.losses import (
    FeatureGraph,
    LossConfig,
    NoiseDraw,
    ProjectionQ,
    build_feature_graph,
    draw_noise,
    init_projection,
    total_loss,
)
from core.optim import PARAM_NAMES, ParamSet, backward

logger = logging.getLogger(__name__)


@dataclass
class ParamCheck:
    name: str
    worst_index: List[int]
    analytic: float
    numeric: float
    rel_error: float
    checked: int
    skipped: int


@dataclass
class GradcheckReport:
    max_rel_error: float
    tolerance: float
    params: List[ParamCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error <= self.tolerance)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "max_rel_error": self.max_rel_error,
            "tolerance": self.tolerance,
            "params": [asdict(p) for p in self.params],
        }

    def to_table(self) -> str:
        lines = [f"{'param':<8}{'worst index':<14}{'analytic':>14}{'numeric':>14}{'rel err':>11}{'skipped':>9}"]
        for p in self.params:
            lines.append(
                f"{p.name:<8}{str(tuple(p.worst_index)):<14}{p.analytic:>14.6e}"
                f"{p.numeric:>14.6e}{p.rel_error:>11.2e}{p.skipped:>9d}"
            )
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"{verdict}: max rel error {self.max_rel_error:.2e} (tolerance {self.tolerance:.0e})")
        return "\n".join(lines)


@dataclass
class GradcheckInstance:
    batch: np.ndarray
    params: ParamSet
    temperature: float
    sigma: float
    feature_graph: FeatureGraph
    cfg: LossConfig
    noise: NoiseDraw


def make_instance(
    n: int = settings.GRADCHECK_SAMPLES,
    d: int = settings.GRADCHECK_FEATURES,
    C: int = settings.GRADCHECK_GROUPS,
    seed: int = 0,
    cfg: Optional[LossConfig] = None,
    temperature: float = 1.0,
    sigma: float = settings.GATE_SIGMA,
) -> GradcheckInstance:
    """Random z-scored data with a warm-started model and frozen noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    cfg = cfg or LossConfig(lambda1=1.0, lambda2=1.0, beta=1.0)
    feature_graph = build_feature_graph(X)
    labels = graph.spectral_cluster(feature_graph.L_feat, C, seed=seed)
    params = ParamSet(
        logits=init_logits(labels, C) + 0.1 * rng.normal(size=(d, C)),
        mu=rng.uniform(0.2, 0.8, size=C),
        Q=init_projection(labels, C, rng).Q,
    )
    noise = draw_noise(d, C, sigma, rng)
    return GradcheckInstance(X, params, temperature, sigma, feature_graph, cfg, noise)


def _loss(inst: GradcheckInstance, params: ParamSet, noise: NoiseDraw):
    return total_loss(
        inst.batch,
        GroupingState(params.logits, inst.temperature),
        GateState(params.mu, inst.sigma),
        ProjectionQ(params.Q),
        inst.feature_graph,
        inst.cfg,
        noise,
    )


def freeze_bandwidths(inst: GradcheckInstance) -> NoiseDraw:
    """Noise draw with the sample-graph bandwidths captured at the base point."""
    base = _loss(inst, inst.params, inst.noise)
    sq = cdist(base.gated_batch, base.gated_batch, metric="sqeuclidean")
    gamma = graph.knn_bandwidths(sq, inst.cfg.K)
    return NoiseDraw(gumbel=inst.noise.gumbel, gate_eps=inst.noise.gate_eps, bandwidths=gamma)


def check_gradients(
    inst: GradcheckInstance,
    step: float = settings.GRADCHECK_STEP,
    tolerance: float = settings.GRADCHECK_TOLERANCE,
) -> GradcheckReport:
    noise = freeze_bandwidths(inst)
    analytic = backward(_loss(inst, inst.params, noise))

    pre_clip = inst.params.mu + noise.gate_eps
    near_clip = (np.abs(pre_clip) <= settings.GRADCHECK_CLIP_MARGIN) | \
                (np.abs(pre_clip - 1.0) <= settings.GRADCHECK_CLIP_MARGIN)

    report = GradcheckReport(max_rel_error=0.0, tolerance=tolerance)
    for name in PARAM_NAMES:
        base_value = getattr(inst.params, name)
        grad = getattr(analytic, name)
        worst = (0.0, (0,), 0.0, 0.0)
        checked = skipped = 0
        for index in np.ndindex(base_value.shape):
            if name == "mu" and near_clip[index]:
                skipped += 1
                continue
            numeric = _central_difference(inst, noise, name, index, step)
            a = float(grad[index])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), settings.GRADCHECK_ABS_FLOOR)
            checked += 1
            if rel >= worst[0]:
                worst = (rel, index, a, numeric)
        rel, index, a, numeric = worst
        report.params.append(ParamCheck(name, [int(i) for i in index], a, numeric, rel, checked, skipped))
        report.max_rel_error = max(report.max_rel_error, rel)
        logger.debug("gradcheck %s: worst %s rel=%.2e", name, index, rel)

    logger.info("gradcheck max rel error %.2e (%s)", report.max_rel_error,
                "pass" if report.passed else "fail")
    return report


def _central_difference(inst: GradcheckInstance, noise: NoiseDraw, name: str, index, step: float) -> float:
    values = []
    for sign in (1.0, -1.0):
        shifted = inst.params.copy()
        getattr(shifted, name)[index] += sign * step
        values.append(_loss(inst, shifted, noise).value)
    return (values[0] - values[1]) / (2.0 * step)
