"""
Gradients, Adam updates and the GroupFS training loop.

Training recipe:
  - feature graph from the full z-scored X (frozen)
  - logits warm-started from spectral clustering of that graph
  - gates mu = 0.5, Q random orthonormal scaled by warm-start cluster sizes
  - per epoch: anneal temperature, shuffle into batches, and per batch
    draw noise -> total_loss -> backward -> Adam step
  - keep the parameters the lowest-mean-loss epoch started from
  - lambda2="auto" is resolved from the gate-gradient balance at initialisation
"""

from __future__ import annotations
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from config import settings
from config.run_config import RunConfig
from core import graph
from core.errors import InvalidArgumentError, NumericalError, TrainingAborted
from core.gates import GateState
from core.grouping import GroupingState, TemperatureSchedule, init_logits, temperature_at
from core.losses import (
    FeatureGraph,
    LossBreakdown,
    LossConfig,
    ProjectionQ,
    build_feature_graph,
    draw_noise,
    init_projection,
    total_loss,
)

logger = logging.getLogger(__name__)

PARAM_NAMES: Tuple[str, ...] = ("logits", "mu", "Q")


# ---------------------------------------------------------------------
# Parameters and optimizer state
# ---------------------------------------------------------------------

@dataclass
class ParamSet:
    logits: np.ndarray  # d x C
    mu: np.ndarray      # C
    Q: np.ndarray       # C x C

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name in PARAM_NAMES:
            yield name, getattr(self, name)

    def copy(self) -> ParamSet:
        return ParamSet(*(np.array(v, dtype=np.float64, copy=True) for _, v in self.items()))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for _, v in self.items())

    @classmethod
    def from_states(cls, grouping: GroupingState, gates: GateState, projection: ProjectionQ) -> ParamSet:
        return cls(logits=grouping.logits.copy(), mu=gates.mu.copy(), Q=projection.Q.copy())


@dataclass
class AdamState:
    lr: float = settings.LEARNING_RATE
    beta1: float = settings.ADAM_BETA1
    beta2: float = settings.ADAM_BETA2
    eps: float = settings.ADAM_EPS
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def backward(breakdown: LossBreakdown) -> ParamSet:
    """Reverse-mode gradients of the total loss w.r.t. logits, mu and Q."""
    breakdown.total.backward()
    grads = {}
    for name in PARAM_NAMES:
        leaf = breakdown.leaves[name]
        grads[name] = np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad
    bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NumericalError(
            "non-finite gradient",
            {"params": bad, "loss": breakdown.value,
             "l_s": breakdown.l_s, "l_f": breakdown.l_f, "l_reg": breakdown.l_reg},
        )
    return ParamSet(**grads)


def adam_step(params: ParamSet, grads: ParamSet, state: AdamState) -> ParamSet:
    """One bias-corrected Adam update (eps added to sqrt of the second moment)."""
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    updated = {}
    for name, value in params.items():
        g = getattr(grads, name)
        if g.shape != value.shape:
            raise InvalidArgumentError(f"gradient for {name} has shape {g.shape}, expected {value.shape}")
        m = state.m.get(name, np.zeros_like(value))
        v = state.v.get(name, np.zeros_like(value))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        updated[name] = value - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return ParamSet(**updated)


# ---------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------

@dataclass
class EpochRecord:
    epoch: int
    loss: float
    l_s: float
    weighted_l_f: float
    weighted_l_reg: float
    temperature: float

    def to_row(self) -> List[Any]:
        return [self.epoch, self.loss, self.l_s, self.weighted_l_f, self.weighted_l_reg, self.temperature]


@dataclass
class TrainedModel:
    grouping: GroupingState
    gates: GateState
    projection: ProjectionQ
    config: Dict[str, Any] = field(default_factory=dict)
    best_epoch: int = -1
    best_loss: float = float("inf")
    history: List[EpochRecord] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.grouping.n_features

    @property
    def n_groups(self) -> int:
        return self.grouping.n_groups

    def params(self) -> ParamSet:
        return ParamSet.from_states(self.grouping, self.gates, self.projection)

    def with_params(self, params: ParamSet, temperature: Optional[float] = None) -> TrainedModel:
        return TrainedModel(
            grouping=GroupingState(params.logits.copy(),
                                   self.grouping.temperature if temperature is None else temperature),
            gates=GateState(params.mu.copy(), self.gates.sigma),
            projection=ProjectionQ(params.Q.copy()),
            config=dict(self.config),
            best_epoch=self.best_epoch,
            best_loss=self.best_loss,
            history=list(self.history),
        )


def initialize_model(X: np.ndarray, C: int, config: RunConfig,
                     rng: np.random.Generator) -> Tuple[TrainedModel, FeatureGraph]:
    """Feature graph, spectral warm start of the logits, gates and Q."""
    d = X.shape[1]
    if not 2 <= C <= d:
        raise InvalidArgumentError(f"C must lie in [2, d={d}], got {C}")
    feature_graph = build_feature_graph(X, settings.FEATURE_KERNEL_NEIGHBORS)
    labels = graph.spectral_cluster(feature_graph.L_feat, C, seed=int(rng.integers(2**31 - 1)))
    logger.info("warm start group sizes: %s", np.bincount(labels, minlength=C).tolist())

    model = TrainedModel(
        grouping=GroupingState(init_logits(labels, C, config.p_main), config.start_t),
        gates=GateState.initial(C, sigma=config.sigma),
        projection=init_projection(labels, C, rng),
        config=config.model_dump(mode="json"),
    )
    return model, feature_graph


# ---------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------

def make_batches(n: int, batch_size: int, K: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Shuffled, without replacement; a final batch below K+1 rows joins the previous one."""
    if n < K + 1:
        raise InvalidArgumentError(f"need at least K+1={K + 1} samples, got {n}")
    order = rng.permutation(n)
    size = min(batch_size, n)
    batches = [order[i:i + size] for i in range(0, n, size)]
    if len(batches) > 1 and batches[-1].size < K + 1:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def loss_config_for(config: RunConfig, lambda2: Optional[float] = None) -> LossConfig:
    if lambda2 is None:
        if config.lambda2 == "auto":
            raise InvalidArgumentError("lambda2 is 'auto'; resolve it before building the loss")
        lambda2 = config.lambda2
    return LossConfig(lambda1=config.lambda1, lambda2=lambda2,
                      beta=config.effective_beta, t=config.t, K=config.K)


@dataclass
class InitialBalance:
    """Loss magnitudes and mean gate gradients over one pass at the initial parameters.

    ``drive`` is d(L_s + lambda1 L_f)/d mu and ``pressure`` is d L_reg/d mu,
    both averaged over gates and batches.
    """
    l_s: float
    weighted_l_f: float
    l_reg: float
    drive: float
    pressure: float

    @property
    def lambda2_open(self) -> float:
        """The lambda2 below which the gates start out opening."""
        if self.pressure <= 0.0:
            return float("inf")
        return max(-self.drive / self.pressure, 0.0)


def initial_balance(X: np.ndarray, model: TrainedModel, feature_graph: FeatureGraph,
                    config: RunConfig, rng: np.random.Generator) -> InitialBalance:
    base_cfg = loss_config_for(config, lambda2=0.0)
    reg_cfg = replace(base_cfg, lambda2=1.0)
    params = model.params()
    grouping = GroupingState(params.logits, model.grouping.temperature)
    gates = GateState(params.mu, config.sigma)
    projection = ProjectionQ(params.Q)

    rows = []
    for idx in make_batches(X.shape[0], config.batch_size, base_cfg.K, rng):
        noise = draw_noise(X.shape[1], params.mu.size, config.sigma, rng)
        base = total_loss(X[idx], grouping, gates, projection, feature_graph, base_cfg, noise)
        g_base = float(backward(base).mu.mean())
        with_reg = total_loss(X[idx], grouping, gates, projection, feature_graph, reg_cfg, noise)
        g_reg = float(backward(with_reg).mu.mean())
        rows.append((base.l_s, base.weighted_l_f, base.l_reg, g_base, g_reg - g_base))

    l_s, l_f, l_reg, drive, pressure = np.mean(rows, axis=0).tolist()
    return InitialBalance(l_s, l_f, l_reg, drive, pressure)


def resolve_lambda2(X: np.ndarray, model: TrainedModel, feature_graph: FeatureGraph,
                    config: RunConfig, rng: np.random.Generator) -> RunConfig:
    """Replace lambda2='auto' by a fixed fraction of the initial opening threshold."""
    if config.lambda2 != "auto":
        return config
    balance = initial_balance(X, model, feature_graph, config, rng.spawn(1)[0])
    if not np.isfinite(balance.lambda2_open):
        raise NumericalError("no finite lambda2 balances the gates", {"drive": balance.drive,
                                                                    "pressure": balance.pressure})
    lambda2 = settings.AUTO_LAMBDA2_FRACTION * balance.lambda2_open
    logger.info("lambda2=auto resolved to %.4g (gates start closing above %.4g)",
                lambda2, balance.lambda2_open)
    model.config["lambda2"] = lambda2
    return config.merged({"lambda2": lambda2})


def _log_first_epoch(record: EpochRecord, cfg: LossConfig):
    logger.info("first epoch magnitudes: |l_s|=%.4g lambda1*l_f=%.4g lambda2*l_reg=%.4g",
                abs(record.l_s), record.weighted_l_f, record.weighted_l_reg)
    if cfg.lambda1 == 0.0:
        return
    ratio = abs(record.l_s) / record.weighted_l_f if record.weighted_l_f > 0.0 else float("inf")
    limit = settings.LAMBDA1_BALANCE_RATIO
    if not 1.0 / limit <= ratio <= limit:
        logger.warning("lambda1=%g leaves |l_s| and lambda1*l_f %.3gx apart; choose lambda1 so they are comparable",
                       cfg.lambda1, ratio)


def train(X: np.ndarray, config: RunConfig, rng: np.random.Generator) -> TrainedModel:
    """Fit GroupFS on z-scored X; returns the parameters the lowest-loss epoch started from.

    Raises TrainingAborted (with the last good model attached) when a loss
    or gradient turns non-finite.
    """
    X = np.asarray(X, dtype=np.float64)
    C = config.groups
    schedule = TemperatureSchedule(config.start_t, config.min_t, config.epochs)

    model, feature_graph = initialize_model(X, C, config, rng)
    config = resolve_lambda2(X, model, feature_graph, config, rng)
    cfg = loss_config_for(config)
    params = model.params()
    adam = AdamState(lr=config.lr)
    best_params = params.copy()
    best_temperature = model.grouping.temperature

    logger.info("training: N=%d d=%d C=%d lambda1=%g lambda2=%g beta=%g epochs=%d batch=%d",
                X.shape[0], X.shape[1], C, cfg.lambda1, cfg.lambda2, cfg.beta,
                config.epochs, config.batch_size)

    for epoch in range(config.epochs):
        temperature = temperature_at(schedule, epoch)
        sums = np.zeros(4)
        epoch_start = params.copy()
        batches = make_batches(X.shape[0], config.batch_size, cfg.K, rng)
        for idx in batches:
            grouping = GroupingState(params.logits, temperature)
            gates = GateState(params.mu, config.sigma)
            noise = draw_noise(X.shape[1], C, config.sigma, rng)
            try:
                breakdown = total_loss(X[idx], grouping, gates, ProjectionQ(params.Q),
                                       feature_graph, cfg, noise)
                if not np.isfinite(breakdown.value):
                    raise NumericalError("non-finite loss", {"epoch": epoch, "loss": breakdown.value})
                grads = backward(breakdown)
            except NumericalError as exc:
                partial = model.with_params(best_params, best_temperature)
                raise TrainingAborted(f"training aborted at epoch {epoch}: {exc}", partial=partial,
                                      diagnostics={"epoch": epoch}) from exc

            params = adam_step(params, grads, adam)
            sums += (breakdown.value, breakdown.l_s, breakdown.weighted_l_f, breakdown.weighted_l_reg)

        means = sums / len(batches)
        record = EpochRecord(epoch, *means.tolist(), temperature)
        model.history.append(record)
        level = logging.INFO if epoch % config.log_every == 0 or epoch == config.epochs - 1 else logging.DEBUG
        logger.log(level, "epoch=%d loss=%.6f l_s=%.6f l_f=%.6f l_reg=%.6f temp=%.4f",
                   epoch, record.loss, record.l_s, record.weighted_l_f, record.weighted_l_reg, temperature)
        if epoch == 0:
            _log_first_epoch(record, cfg)

        if record.loss < model.best_loss:
            model.best_loss = record.loss
            model.best_epoch = epoch
            best_params = epoch_start
            best_temperature = temperature

    result = model.with_params(best_params, best_temperature)
    logger.info("best epoch %d with loss %.6f", result.best_epoch, result.best_loss)
    return result
