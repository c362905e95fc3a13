import numpy as np
import pytest

from core import grouping
from core.errors import InvalidArgumentError
from core.grouping import GroupingState, TemperatureSchedule


def test_temperature_schedule_endpoints():
    sched = TemperatureSchedule(start_t=10.0, min_t=0.01, total_epochs=100)
    assert sched.at(0) == pytest.approx(10.0)
    assert sched.at(100) == pytest.approx(0.01)
    assert sched.at(250) == pytest.approx(0.01)
    assert sched.at(50) == pytest.approx(5.005)


def test_degenerate_schedule_is_constant():
    sched = TemperatureSchedule(start_t=0.5, min_t=0.5, total_epochs=10)
    assert {sched.at(e) for e in range(12)} == {0.5}


def test_schedule_rejects_inverted_bounds():
    with pytest.raises(InvalidArgumentError):
        TemperatureSchedule(start_t=0.01, min_t=1.0, total_epochs=10)


def test_relaxed_assignment_without_noise():
    uniform = grouping.relaxed_assignment(np.zeros((4, 5)), np.zeros((4, 5)), 3.0).data
    np.testing.assert_allclose(uniform, 0.2)

    logits = np.array([[0.1, 0.5, 0.2], [2.0, 1.0, 1.5]])
    cold = grouping.relaxed_assignment(logits, np.zeros_like(logits), 1e-4).data
    np.testing.assert_allclose(cold, [[0, 1, 0], [1, 0, 0]], atol=1e-12)


def test_sampled_rows_are_distributions(rng):
    state = GroupingState(rng.normal(size=(20, 6)), temperature=0.7)
    M = grouping.sample_assignment(state, rng)
    assert M.shape == (20, 6)
    np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-10)
    assert np.all(M >= 0.0)


def test_hard_assignment_breaks_ties_low():
    state = GroupingState(np.array([[0.0, 3.0, 1.0], [2.0, 2.0, 2.0], [0.0, 0.0, 4.0]]))
    np.testing.assert_array_equal(grouping.hard_assignment(state), [1, 0, 2])


def test_init_logits_delta():
    logits = grouping.init_logits(np.array([0, 1, 2, 3, 1]), C=4, p_main=0.7)
    assert logits[0, 0] == pytest.approx(np.log(7.0))
    assert logits[0, 0] == pytest.approx(1.945910, abs=1e-6)
    assert logits[0, 1:].tolist() == [0.0, 0.0, 0.0]

    wide = grouping.init_logits(np.array([5]), C=26, p_main=0.7)
    assert wide[0, 5] == pytest.approx(np.log(0.7 / 0.012))


def test_warm_start_round_trips_and_keeps_p_main():
    labels = np.array([2, 0, 1, 1, 3, 0])
    state = GroupingState(grouping.init_logits(labels, C=4, p_main=0.7), temperature=1.0)
    np.testing.assert_array_equal(grouping.hard_assignment(state), labels)
    M = grouping.sample_assignment(state, None, gumbel=np.zeros((6, 4)))
    np.testing.assert_allclose(M[np.arange(6), labels], 0.7, atol=1e-9)


def test_init_logits_errors():
    with pytest.raises(InvalidArgumentError):
        grouping.init_logits(np.array([0]), C=1)
    with pytest.raises(InvalidArgumentError):
        grouping.init_logits(np.array([0]), C=4, p_main=0.2)
    with pytest.raises(InvalidArgumentError):
        grouping.init_logits(np.array([4]), C=4)


def test_gumbel_draws_are_finite_and_seeded():
    a = grouping.draw_gumbel((50, 3), np.random.default_rng(7))
    b = grouping.draw_gumbel((50, 3), np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)
    assert np.all(np.isfinite(a))


@pytest.mark.parametrize("seed", range(3))
def test_sampled_mass_ranks_like_the_logits(seed):
    rng = np.random.default_rng(seed)
    d, C, draws = 4, 5, 100_000
    logits = np.stack([0.6 * rng.permutation(C) for _ in range(d)])
    tiled = GroupingState(np.tile(logits, (draws, 1)), temperature=1.0)
    mass = grouping.sample_assignment(tiled, rng).reshape(draws, d, C).mean(axis=0)
    np.testing.assert_array_equal(mass.argmax(axis=1), logits.argmax(axis=1))
    np.testing.assert_array_equal(np.argsort(mass, axis=1), np.argsort(logits, axis=1))
