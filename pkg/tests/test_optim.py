import logging

import mock
import numpy as np
import pytest

from conftest import planted_blocks
from config import settings
from config.run_config import RunConfig
from core import autodiff as ad
from core import optim
from core.errors import InvalidArgumentError, NumericalError, TrainingAborted
from core.losses import LossBreakdown
from core.optim import AdamState, ParamSet


def _params(value=0.0):
    return ParamSet(logits=np.full((3, 2), value), mu=np.full(2, value), Q=np.full((2, 2), value))


# ------------------------------------------------------------------
#   Adam
# ------------------------------------------------------------------

def test_first_adam_step_moves_by_lr():
    grads = ParamSet(logits=np.array([[0.3, -2.0], [1e-3, 5.0], [-0.7, 0.2]]),
                     mu=np.array([4.0, -0.01]), Q=np.array([[1.0, -1.0], [2.0, -3.0]]))
    state = AdamState(lr=1e-3)
    updated = optim.adam_step(_params(), grads, state)
    for name, value in updated.items():
        np.testing.assert_allclose(value, -1e-3 * np.sign(getattr(grads, name)), rtol=1e-4)
    assert state.step == 1


def test_zero_gradient_leaves_params():
    params = _params(0.25)
    updated = optim.adam_step(params, _params(0.0), AdamState())
    for name, value in updated.items():
        np.testing.assert_array_equal(value, getattr(params, name))


def test_constant_gradient_descends():
    params, state = _params(), AdamState(lr=1e-2)
    grads = _params(0.5)
    for _ in range(50):
        params = optim.adam_step(params, grads, state)
    assert np.all(params.mu < 0.0)
    assert np.all(params.logits < 0.0)


def test_adam_rejects_shape_mismatch():
    grads = _params()
    grads.mu = np.zeros(3)
    with pytest.raises(InvalidArgumentError):
        optim.adam_step(_params(), grads, AdamState())


# ------------------------------------------------------------------
#   backward
# ------------------------------------------------------------------

def _breakdown(scale):
    leaves = {name: ad.Tensor(np.ones(shape), requires_grad=True)
              for name, shape in (("logits", (3, 2)), ("mu", (2,)), ("Q", (2, 2)))}
    total = (leaves["mu"] * scale).sum() + (leaves["Q"] * leaves["Q"]).sum() * 0.5
    return LossBreakdown(total=total, l_s=0.0, l_f=0.0, l_reg=0.0,
                         weighted_l_f=0.0, weighted_l_reg=0.0, leaves=leaves)


def test_backward_fills_unused_leaves_with_zeros():
    grads = optim.backward(_breakdown(2.0))
    np.testing.assert_array_equal(grads.logits, 0.0)
    np.testing.assert_allclose(grads.mu, 2.0)
    np.testing.assert_allclose(grads.Q, 1.0)


def test_backward_reports_non_finite_gradient():
    with pytest.raises(NumericalError) as info:
        optim.backward(_breakdown(np.inf))
    assert info.value.diagnostics["params"] == ["mu"]


# ------------------------------------------------------------------
#   Batching
# ------------------------------------------------------------------

def test_make_batches_covers_everything_once(rng):
    batches = optim.make_batches(25, 10, 7, rng)
    assert [b.size for b in batches] == [10, 15]
    assert sorted(np.concatenate(batches).tolist()) == list(range(25))

    assert [b.size for b in optim.make_batches(30, 10, 7, rng)] == [10, 10, 10]
    assert [b.size for b in optim.make_batches(12, 100, 7, rng)] == [12]
    with pytest.raises(InvalidArgumentError):
        optim.make_batches(5, 10, 7, rng)


# ------------------------------------------------------------------
#   Training
# ------------------------------------------------------------------

def _small_config(**overrides):
    base = dict(C=2, epochs=4, batch_size=30, lambda1=1.0, lambda2=1.0, log_every=1)
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture
def small_X():
    return planted_blocks(n=60, blocks=2, size=4, seed=3)


def test_train_records_history_and_best_epoch(small_X):
    model = optim.train(small_X, _small_config(), np.random.default_rng(0))
    assert len(model.history) == 4
    losses = [r.loss for r in model.history]
    assert model.best_loss == pytest.approx(min(losses))
    assert model.history[model.best_epoch].loss == model.best_loss
    assert model.grouping.logits.shape == (8, 2)
    assert model.params().all_finite()
    assert model.history[0].temperature == pytest.approx(10.0)


def test_train_is_deterministic(small_X):
    a = optim.train(small_X, _small_config(), np.random.default_rng(5))
    b = optim.train(small_X, _small_config(), np.random.default_rng(5))
    assert [r.to_row() for r in a.history] == [r.to_row() for r in b.history]
    np.testing.assert_array_equal(a.gates.mu, b.gates.mu)


def test_no_sparsity_pressure_keeps_gates_open(small_X):
    model = optim.train(small_X, _small_config(lambda2=0.0), np.random.default_rng(0))
    assert np.all(model.gates.mu > 0.4)


def test_train_rejects_too_many_groups(small_X):
    with pytest.raises(InvalidArgumentError):
        optim.train(small_X, _small_config(C=9), np.random.default_rng(0))


def test_non_finite_step_aborts_with_partial_model(small_X):
    with mock.patch("core.optim.backward", side_effect=NumericalError("non-finite gradient")):
        with pytest.raises(TrainingAborted) as info:
            optim.train(small_X, _small_config(), np.random.default_rng(0))
    partial = info.value.partial
    assert partial is not None
    assert partial.n_features == 8
    assert partial.params().all_finite()
    assert info.value.diagnostics["epoch"] == 0


def test_single_epoch_returns_the_initial_parameters(small_X):
    config = _small_config(epochs=1)
    initial, _ = optim.initialize_model(small_X, 2, config, np.random.default_rng(0))
    model = optim.train(small_X, config, np.random.default_rng(0))
    assert model.best_epoch == 0
    for name, value in model.params().items():
        np.testing.assert_array_equal(value, getattr(initial.params(), name))


def test_best_snapshot_is_where_the_best_epoch_started(small_X):
    with mock.patch("core.optim.adam_step", wraps=optim.adam_step) as step:
        model = optim.train(small_X, _small_config(epochs=6), np.random.default_rng(2))
    steps_per_epoch = step.call_count // 6
    entering = step.call_args_list[model.best_epoch * steps_per_epoch].args[0]
    for name, value in model.params().items():
        np.testing.assert_array_equal(value, getattr(entering, name))


# ------------------------------------------------------------------
#   Initial balance and lambda2="auto"
# ------------------------------------------------------------------

def test_initial_balance_on_smooth_features(small_X):
    config = _small_config()
    rng = np.random.default_rng(0)
    model, feature_graph = optim.initialize_model(small_X, 2, config, rng)
    balance = optim.initial_balance(small_X, model, feature_graph, config, rng)
    assert balance.l_s < 0.0
    assert balance.pressure > 0.0
    assert balance.drive < 0.0
    assert balance.lambda2_open == pytest.approx(-balance.drive / balance.pressure)


def test_opening_threshold_without_pressure_is_infinite():
    balance = optim.InitialBalance(l_s=-0.1, weighted_l_f=0.1, l_reg=0.2, drive=-0.01, pressure=0.0)
    assert balance.lambda2_open == float("inf")
    assert optim.InitialBalance(-0.1, 0.1, 0.2, drive=0.01, pressure=0.02).lambda2_open == 0.0


def test_auto_lambda2_is_a_share_of_the_opening_threshold(small_X):
    config = _small_config(lambda2="auto")
    rng = np.random.default_rng(0)
    model, feature_graph = optim.initialize_model(small_X, 2, config, rng)
    expected = optim.initial_balance(small_X, model, feature_graph, config, rng.spawn(1)[0])

    trained = optim.train(small_X, config, np.random.default_rng(0))
    assert trained.config["lambda2"] == pytest.approx(settings.AUTO_LAMBDA2_FRACTION * expected.lambda2_open)
    assert trained.history[0].weighted_l_reg > 0.0


def test_auto_lambda2_must_be_resolved_before_the_loss():
    with pytest.raises(InvalidArgumentError):
        optim.loss_config_for(_small_config(lambda2="auto"))
    assert optim.loss_config_for(_small_config(lambda2="auto"), lambda2=0.5).lambda2 == 0.5


def test_first_epoch_magnitudes_are_logged(small_X, caplog):
    with caplog.at_level(logging.INFO, logger="core.optim"):
        optim.train(small_X, _small_config(epochs=2), np.random.default_rng(0))
    assert sum("first epoch magnitudes" in r.message for r in caplog.records) == 1


def test_unbalanced_lambda1_is_reported(small_X, caplog):
    with caplog.at_level(logging.WARNING, logger="core.optim"):
        optim.train(small_X, _small_config(epochs=1, lambda1=1e4, beta=1e-4), np.random.default_rng(0))
    assert any("choose lambda1" in r.message for r in caplog.records)
