import mock
import numpy as np
import pytest

from core import gradcheck
from core.losses import LossConfig


@pytest.fixture(scope="module")
def instance():
    return gradcheck.make_instance()


def test_default_instance_passes(instance):
    report = gradcheck.check_gradients(instance)
    assert report.passed, report.to_table()
    assert report.max_rel_error <= 1e-4
    assert [p.name for p in report.params] == ["logits", "mu", "Q"]
    counts = {p.name: p.checked + p.skipped for p in report.params}
    assert counts == {"logits": 12 * 4, "mu": 4, "Q": 16}
    assert "PASS" in report.to_table()


def test_weighted_terms_pass_at_low_temperature():
    inst = gradcheck.make_instance(seed=3, cfg=LossConfig(lambda1=0.5, lambda2=3.0, beta=2.0),
                                   temperature=0.5)
    assert gradcheck.check_gradients(inst).passed


def test_gate_coordinates_at_the_clip_are_skipped():
    inst = gradcheck.make_instance()
    inst.params.mu[0] = 1.0 - inst.noise.gate_eps[0]
    report = gradcheck.check_gradients(inst)
    mu_check = next(p for p in report.params if p.name == "mu")
    assert mu_check.skipped >= 1


def test_broken_gate_derivative_is_caught(instance):
    def doubled(x):
        return 2.0 * np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)

    with mock.patch("core.autodiff._normal_pdf", side_effect=doubled):
        report = gradcheck.check_gradients(instance)
    assert not report.passed
    worst = max(report.params, key=lambda p: p.rel_error)
    assert worst.name == "mu"
    assert report.to_dict()["passed"] is False


@pytest.mark.parametrize("seed,C", [(0, 2), (1, 2), (2, 4), (3, 4), (4, 8)])
def test_random_instances_pass(seed, C):
    inst = gradcheck.make_instance(n=24, d=16, C=C, seed=seed,
                                   cfg=LossConfig(lambda1=1.0, lambda2=2.0, beta=1.0))
    report = gradcheck.check_gradients(inst)
    assert report.passed, report.to_table()
