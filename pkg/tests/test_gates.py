import numpy as np
import pytest
from scipy.special import ndtr

from core import autodiff as ad
from core import gates
from core.errors import InvalidArgumentError
from core.gates import GateState


def test_clipped_gate_values():
    z = gates.sample_gates(GateState(np.array([5.0, -5.0, 0.5])), None, eps=np.zeros(3))
    np.testing.assert_allclose(z, [1.0, 0.0, 0.5])


def test_random_gates_stay_in_unit_interval(rng):
    state = GateState.initial(50, sigma=0.5)
    z = gates.sample_gates(state, rng)
    assert np.all((z >= 0.0) & (z <= 1.0))
    assert state.mu.tolist() == [0.5] * 50


def test_open_probability():
    np.testing.assert_allclose(gates.open_probability(GateState(np.array([0.0]))), [0.5])
    p = gates.open_probability(GateState(np.array([0.5]), sigma=0.5))
    assert p[0] == pytest.approx(0.841345, abs=1e-6)
    assert gates.open_probability(GateState(np.array([40.0])))[0] == pytest.approx(1.0)
    np.testing.assert_allclose(gates.open_probability_tensor(np.array([0.5]), 0.5).data, p)


def test_feature_weights():
    one_hot = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    z = np.array([0.2, 0.7, 0.9])
    np.testing.assert_allclose(gates.feature_weights(one_hot, z).data, [0.2, 0.9, 0.7])

    M = np.random.default_rng(0).dirichlet(np.ones(3), size=6)
    np.testing.assert_allclose(gates.feature_weights(M, np.ones(3)).data, 1.0)

    uniform = np.full((4, 3), 1.0 / 3.0)
    np.testing.assert_allclose(gates.feature_weights(uniform, z).data, z.mean())

    with pytest.raises(InvalidArgumentError):
        gates.feature_weights(uniform, np.ones(4))


def test_apply_gates():
    X = np.arange(12.0).reshape(4, 3)
    np.testing.assert_array_equal(gates.apply_gates(X, np.ones(3)).data, X)
    np.testing.assert_array_equal(gates.apply_gates(X, np.zeros(3)).data, 0.0)
    masked = gates.apply_gates(X, np.array([0.0, 1.0, 0.0])).data
    np.testing.assert_array_equal(masked[:, 1], X[:, 1])
    np.testing.assert_array_equal(masked[:, [0, 2]], 0.0)
    with pytest.raises(InvalidArgumentError):
        gates.apply_gates(X, np.ones(2))


def test_gate_state_validation():
    with pytest.raises(InvalidArgumentError):
        GateState(np.array([0.5]), sigma=0.0)
    with pytest.raises(InvalidArgumentError):
        GateState(np.array([np.nan]))


# ------------------------------------------------------------------
#   Randomised properties
# ------------------------------------------------------------------

@pytest.mark.parametrize("mu", [-1.0, 0.0, 0.5, 1.0])
def test_open_frequency_matches_normal_cdf(mu):
    n = 100_000
    z = gates.sample_gates(GateState(np.full(n, mu), sigma=0.5), np.random.default_rng(11))
    expected = ndtr(mu / 0.5)
    stderr = np.sqrt(expected * (1.0 - expected) / n)
    assert abs((z > 0.0).mean() - expected) <= 4.0 * stderr


@pytest.mark.parametrize("seed", range(10))
def test_group_weights_stay_between_gate_extremes(seed):
    rng = np.random.default_rng(seed)
    M = rng.dirichlet(np.ones(5), size=9)
    z = gates.sample_gates(GateState(rng.normal(0.5, 1.0, size=5)), rng)
    zhat = gates.feature_weights(M, z).data
    assert np.all(zhat >= z.min() - 1e-12)
    assert np.all(zhat <= z.max() + 1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_feature_weight_gradient_matches_differences(seed, fd):
    rng = np.random.default_rng(seed)
    M = rng.dirichlet(np.ones(4), size=6)
    w = rng.normal(size=6)
    mu = rng.uniform(0.2, 0.8, size=4)
    eps = rng.uniform(-0.15, 0.15, size=4)

    leaf = ad.Tensor(mu, requires_grad=True)
    (gates.feature_weights(M, gates.relaxed_gates(leaf, eps)) * w).sum().backward()

    def weighted(m):
        return float(gates.feature_weights(M, gates.relaxed_gates(m, eps)).data @ w)

    np.testing.assert_allclose(leaf.grad, fd(weighted, mu.copy()), rtol=1e-4, atol=1e-9)
