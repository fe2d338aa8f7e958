import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gxpo.core import (AdamW, DimensionError, GradientOracle, NonFiniteError, PlainGD, as_param, check_finite,
                       make_optimizer, optim_step, total_passes)
from gxpo.testbed import QuadraticObjective

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_plain_gd_step():
    out = optim_step(PlainGD(lr=0.1), np.array([1.0, 2.0]), np.array([1.0, 1.0]))
    np.testing.assert_allclose(out, [0.9, 1.9], rtol=0, atol=1e-15)


@given(arrays(np.float64, 5, elements=finite))
def test_zero_gradient_is_fixed_point(theta):
    assert np.array_equal(PlainGD(lr=0.3).step(theta, np.zeros(5)), theta)


@given(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite),
       st.floats(1e-4, 1.0))
def test_plain_gd_is_exact_formula(theta, g, lr):
    assert np.array_equal(PlainGD(lr=lr).step(theta, g), theta - lr * g)


def test_adam_first_step_is_minus_lr():
    # bias correction makes the first step lr * g/|g| up to eps
    opt = AdamW(lr=0.1, weight_decay=0.0)
    out = opt.step(np.array([0.0]), np.array([1.0]))
    np.testing.assert_allclose(out, [-0.1], rtol=1e-7)
    assert opt.t == 1


def test_adam_matches_hand_recursion():
    theta, lr, b1, b2, eps, wd = np.array([0.5, -1.0]), 0.05, 0.9, 0.99, 1e-8, 0.1
    grads = [np.array([1.0, -2.0]), np.array([0.5, 0.5]), np.array([-1.0, 3.0])]
    opt = AdamW(lr=lr, beta1=b1, beta2=b2, eps=eps, weight_decay=wd)
    m = v = np.zeros(2)
    ref = theta.copy()
    for t, g in enumerate(grads, 1):
        theta = opt.step(theta, g)
        ref = ref * (1 - lr * wd)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g**2
        ref = ref - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    np.testing.assert_allclose(theta, ref, rtol=1e-14)


def test_adam_snapshot_restore_roundtrip():
    opt = AdamW(lr=0.1)
    opt.step(np.zeros(3), np.ones(3))
    snap = opt.snapshot()
    opt.step(np.zeros(3), -np.ones(3))
    opt.restore(snap)
    assert opt.t == 1
    np.testing.assert_allclose(opt.m, 0.1 * np.ones(3))


def test_clip_norm_rescales_gradient():
    out = PlainGD(lr=1.0, clip_norm=1.0).step(np.zeros(2), np.array([3.0, 4.0]))
    np.testing.assert_allclose(out, [-0.6, -0.8])
    out = PlainGD(lr=1.0, clip_norm=10.0).step(np.zeros(2), np.array([3.0, 4.0]))
    np.testing.assert_allclose(out, [-3.0, -4.0])


def test_optimizer_errors():
    with pytest.raises(DimensionError):
        PlainGD(lr=0.1).step(np.zeros(2), np.zeros(3))
    with pytest.raises(NonFiniteError):
        PlainGD(lr=0.1).step(np.zeros(2), np.array([np.nan, 0.0]))
    opt = AdamW(lr=0.1)
    opt.step(np.zeros(2), np.ones(2))
    with pytest.raises(DimensionError):
        opt.step(np.zeros(3), np.ones(3))
    with pytest.raises(ValueError):
        make_optimizer("sgd-momentum", 0.1)
    with pytest.raises(ValueError):
        PlainGD(lr=0.0)


def test_as_param_copies_and_checks_dimension():
    x = np.array([[1.0, 2.0]])
    p = as_param(x, 2)
    p[0] = 5.0
    assert x[0, 0] == 1.0
    with pytest.raises(DimensionError):
        as_param(x, 3)


def test_check_finite_names_first_bad_coordinate():
    with pytest.raises(NonFiniteError) as exc:
        check_finite(np.array([0.0, np.inf, np.nan]), "probe")
    assert exc.value.index == 1
    assert "coordinate 1" in str(exc.value)


def test_oracle_counts_one_pass_per_gradient():
    q = QuadraticObjective(np.diag([1.0, 2.0]))
    oracle = GradientOracle(q)
    before = oracle.pass_count
    oracle.grad(np.ones(2))
    assert oracle.pass_count == before + 1
    oracle.loss(np.ones(2))
    assert oracle.pass_count == before + 1


def test_oracle_is_deterministic_and_scales(rng):
    q = QuadraticObjective(np.diag([1.0, 2.0, 3.0]))
    oracle = GradientOracle(q)
    theta = rng.standard_normal(3)
    a, b = oracle.grad(theta), oracle.grad(theta)
    assert a.tobytes() == b.tobytes()
    oracle.loss_scale = 10.0
    np.testing.assert_allclose(oracle.grad(theta), 10 * a)
    with pytest.raises(DimensionError):
        oracle.grad(np.ones(4))


@pytest.mark.parametrize("T,s,expected", [(300, 100, 500), (10, 0, 10), (10, 10, 30), (7, 3, 13)])
def test_total_passes(T, s, expected):
    assert total_passes(T, s) == expected


def test_total_passes_rejects_shutoff_past_horizon():
    with pytest.raises(ValueError):
        total_passes(5, 6)


@given(st.integers(0, 10_000), st.data())
def test_total_passes_between_one_and_three_per_step(T, data):
    s = data.draw(st.integers(0, T))
    assert T <= total_passes(T, s) <= 3 * T
