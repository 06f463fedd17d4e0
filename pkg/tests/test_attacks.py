"""Attack contracts: projections, ascent monotonicity, closed-form cases."""
import numpy as np
import pytest

from ardlab import autodiff as ad
from ardlab.attacks import (AttackConfig, ascend, feature_attack, fgsm, pgd,
                            project_delta)
from ardlab.autodiff import Tensor
from ardlab.errors import ContractError, NumericError
from ardlab.losses import cross_entropy_per_sample
from ardlab.models import MlpModel, forward_np


def _linear_model(w):
    w = np.asarray(w, dtype=float)
    return MlpModel([w.shape[0], w.shape[1]], weights=[w],
                    biases=[np.zeros(w.shape[1])])


def test_fgsm_zero_epsilon_is_identity(rng):
    m = MlpModel([3, 4, 2], seed=0)
    x = rng.standard_normal((5, 3))
    x_adv = fgsm(m, x, rng.integers(0, 2, 5), 0.0)
    assert np.array_equal(x_adv, x)


def test_fgsm_linear_binary_closed_form(rng):
    # binary logistic model with logits (0, x.w): d loss/d x = (p1 - 1[y=1]) w
    w = rng.standard_normal(4)
    m = _linear_model(np.stack([np.zeros(4), w], axis=1))
    x = rng.standard_normal((1, 4))
    eps = 0.05
    for y in (0, 1):
        logits = forward_np(m, x)[0]
        p1 = 1.0 / (1.0 + np.exp(logits[0] - logits[1]))
        grad_x = (p1 - (1 if y == 1 else 0)) * w
        x_adv = fgsm(m, x, [y], eps)
        np.testing.assert_allclose(x_adv - x, eps * np.sign(grad_x)[None, :],
                                   atol=1e-12)


def test_fgsm_sign_of_zero_gradient_is_zero():
    # second input coordinate never reaches the logits
    w = np.array([[1.0, -1.0], [0.0, 0.0]])
    m = _linear_model(w)
    x = np.array([[0.3, 0.7]])
    x_adv = fgsm(m, x, [0], 0.25)
    assert x_adv[0, 1] == x[0, 1]
    assert abs(x_adv[0, 0] - x[0, 0]) == 0.25


def test_pgd_zero_epsilon_is_identity(rng):
    m = MlpModel([3, 4, 2], seed=0)
    x = rng.standard_normal((4, 3))
    cfg = AttackConfig(norm="l2", epsilon=0.0, steps=5, restarts=3)
    x_adv = pgd(m, cross_entropy_per_sample, x, rng.integers(0, 2, 4), cfg)
    assert np.array_equal(x_adv, x)


def _quadratic_objective(center):
    target = np.asarray(center, dtype=float)

    def objective(xt: Tensor) -> Tensor:
        return ad.l2_norm_sq(ad.subtract(xt, Tensor(np.broadcast_to(
            target, xt.shape).copy())), axis=1)

    return objective


def test_pgd_quadratic_ball_reaches_analytic_max():
    # max ||x - c||^2 over the l2 ball of radius eps around x0 is
    # (||c - x0|| + eps)^2, attained opposite c
    x0 = np.array([[0.5, -0.25]])
    c = np.array([2.0, 1.0])
    eps = 0.8
    cfg = AttackConfig(norm="l2", epsilon=eps, steps=50, step_size=0.1,
                       restarts=1, random_start=False)
    x_adv, vals = ascend(_quadratic_objective(c), x0, cfg)
    best = (np.linalg.norm(c - x0[0]) + eps) ** 2
    assert vals[0] == pytest.approx(best, rel=1e-6)
    direction = (x_adv[0] - x0[0]) / eps
    expected = -(c - x0[0]) / np.linalg.norm(c - x0[0])
    np.testing.assert_allclose(direction, expected, atol=1e-6)


def test_pgd_quadratic_trace_nondecreasing():
    x0 = np.array([[0.0, 0.0], [1.0, 2.0]])
    c = np.array([3.0, -1.0])
    cfg = AttackConfig(norm="l2", epsilon=1.0, steps=25, step_size=0.15,
                       restarts=2, random_start=True, seed=7)
    _, _, traces = ascend(_quadratic_objective(c), x0, cfg, return_trace=True)
    for trace in traces:
        diffs = np.diff(trace, axis=0)
        assert np.all(diffs >= -1e-9)


def test_projection_invariants(rng):
    for norm in ("linf", "l2"):
        delta = rng.standard_normal((200, 6)) * 3
        eps = rng.uniform(0.01, 1.0, 200)
        proj = project_delta(delta, norm, eps)
        if norm == "linf":
            assert np.all(np.abs(proj) <= eps[:, None] + 1e-12)
        else:
            norms = np.linalg.norm(proj, axis=1)
            assert np.all(norms <= eps * (1 + 1e-9))


def test_pgd_final_perturbation_within_ball(rng):
    m = MlpModel([4, 8, 3], seed=2)
    x = rng.standard_normal((32, 4))
    y = rng.integers(0, 3, 32)
    for norm in ("linf", "l2"):
        cfg = AttackConfig(norm=norm, epsilon=0.3, steps=8, restarts=2,
                           random_start=True, seed=5)
        x_adv = pgd(m, cross_entropy_per_sample, x, y, cfg)
        delta = x_adv - x
        if norm == "linf":
            assert np.all(np.abs(delta) <= 0.3 + 1e-9)
        else:
            assert np.all(np.linalg.norm(delta, axis=1) <= 0.3 * (1 + 1e-9))


def test_monotone_restarts(rng):
    m = MlpModel([3, 6, 2], seed=4)
    x = rng.standard_normal((10, 3))
    y = rng.integers(0, 2, 10)

    def loss_vals(x_adv):
        return cross_entropy_per_sample(
            Tensor(forward_np(m, x_adv)), y).data

    single = AttackConfig(norm="linf", epsilon=0.2, steps=5, restarts=1,
                          random_start=True, seed=9)
    multi = AttackConfig(norm="linf", epsilon=0.2, steps=5, restarts=6,
                         random_start=True, seed=9)
    lo = loss_vals(pgd(m, cross_entropy_per_sample, x, y, single))
    hi = loss_vals(pgd(m, cross_entropy_per_sample, x, y, multi))
    assert np.all(hi >= lo - 1e-12)


def test_fgsm_equals_single_step_pgd(rng):
    m = MlpModel([5, 8, 4], seed=6)
    x = rng.standard_normal((12, 5))
    y = rng.integers(0, 4, 12)
    eps = 0.07
    cfg = AttackConfig(norm="linf", epsilon=eps, steps=1, step_size=eps,
                       restarts=1, random_start=False)
    a = fgsm(m, x, y, eps)
    b = pgd(m, cross_entropy_per_sample, x, y, cfg)
    assert np.array_equal(a, b)


def test_feature_attack_same_model_zero_eps(rng):
    m = MlpModel([3, 4, 2], seed=1)
    x = rng.standard_normal((6, 3))
    cfg = AttackConfig(norm="l2", epsilon=0.0, steps=5)
    delta, p = feature_attack(m, m, x, cfg)
    assert np.array_equal(delta, np.zeros_like(x))
    np.testing.assert_allclose(p, 0.0, atol=1e-24)


def test_feature_attack_identity_models_reaches_eps_squared(rng):
    m = MlpModel([3, 3], weights=[np.eye(3)], biases=[np.zeros(3)])
    x = rng.standard_normal((4, 3))
    eps = 0.5
    cfg = AttackConfig(norm="l2", epsilon=eps, steps=30, restarts=1,
                       random_start=True, seed=3)
    _, p = feature_attack(m, m, x, cfg)
    np.testing.assert_allclose(p, eps ** 2, rtol=1e-9)


def test_feature_attack_zero_eps_distinct_models(rng):
    a = MlpModel([3, 5, 2], seed=1)
    b = MlpModel([3, 5, 2], seed=2)
    x = rng.standard_normal((6, 3))
    cfg = AttackConfig(norm="l2", epsilon=0.0, steps=5)
    _, p = feature_attack(a, b, x, cfg)
    exact = ((forward_np(a, x) - forward_np(b, x)) ** 2).sum(axis=1)
    assert np.array_equal(p, exact)


def test_feature_attack_never_below_start(rng):
    a = MlpModel([4, 8, 3], seed=5)
    b = MlpModel([4, 8, 3], seed=6)
    x = rng.standard_normal((10, 4))
    cfg = AttackConfig(norm="linf", epsilon=0.1, steps=4, restarts=2,
                       random_start=True, seed=1)
    _, p = feature_attack(a, b, x, cfg)
    at_zero = ((forward_np(a, x) - forward_np(b, x)) ** 2).sum(axis=1)
    assert np.all(p >= at_zero - 1e-12)


def test_feature_attack_dim_mismatch():
    a = MlpModel([3, 2], seed=0)
    b = MlpModel([4, 2], seed=0)
    with pytest.raises(ContractError):
        feature_attack(a, b, np.zeros((1, 3)), AttackConfig())


def test_attack_clamp_keeps_pixel_range(rng):
    m = MlpModel([4, 6, 2], seed=8)
    x = rng.uniform(0, 1, (20, 4))
    cfg = AttackConfig(norm="linf", epsilon=0.3, steps=5, clamp=(0.0, 1.0),
                       random_start=True, seed=2)
    x_adv = pgd(m, cross_entropy_per_sample, x, rng.integers(0, 2, 20), cfg)
    assert x_adv.min() >= 0.0 and x_adv.max() <= 1.0
    assert np.all(np.abs(x_adv - x) <= 0.3 + 1e-9)


@pytest.mark.filterwarnings("ignore:overflow")
def test_nonfinite_loss_reports_step():
    w0 = np.full((2, 2), 1e200)
    w1 = np.full((2, 2), 1e200)
    m = MlpModel([2, 2, 2], weights=[w0, w1],
                 biases=[np.zeros(2), np.zeros(2)])
    cfg = AttackConfig(norm="linf", epsilon=0.1, steps=3, random_start=False)

    def objective(xt):
        return ad.l2_norm_sq(ad.matmul(ad.matmul(xt, Tensor(w0)), Tensor(w1)),
                             axis=1)

    with pytest.raises(NumericError, match="step 0"):
        ascend(objective, np.ones((1, 2)), cfg)


def test_attack_config_validation():
    with pytest.raises(ContractError):
        AttackConfig(norm="l3")
    with pytest.raises(ContractError):
        AttackConfig(epsilon=-1.0)
    with pytest.raises(ContractError):
        AttackConfig(steps=0)
    with pytest.raises(ContractError):
        AttackConfig(step_size=0.0)
    with pytest.raises(ContractError):
        AttackConfig(clamp=(1.0, 0.0))


def test_repeated_attack_is_bit_identical(rng):
    m = MlpModel([3, 5, 2], seed=3)
    x = rng.standard_normal((6, 3))
    y = rng.integers(0, 2, 6)
    cfg = AttackConfig(norm="l2", epsilon=0.2, steps=6, restarts=3,
                       random_start=True, seed=11)
    a = pgd(m, cross_entropy_per_sample, x, y, cfg)
    b = pgd(m, cross_entropy_per_sample, x, y, cfg)
    assert np.array_equal(a, b)


def test_random_starts_keyed_by_sample_id(rng):
    # the noise a sample sees does not depend on its batch neighbours
    from ardlab.attacks import _random_start
    eps = np.full(4, 0.3)
    joint = _random_start(np.arange(4), 5, "l2", eps, seed=9, restart=2)
    solo = _random_start(np.array([2]), 5, "l2", eps[:1], seed=9, restart=2)
    assert np.array_equal(joint[2], solo[0])
