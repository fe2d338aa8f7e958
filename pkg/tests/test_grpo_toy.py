import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gxpo.baselines import SfpoConfig
from gxpo.core import NonFiniteError, total_passes
from gxpo.grpo_toy import (GrpoLoss, ToyConfig, ToyTask, aggregate_curves, expected_reward, group_advantages,
                           grpo_loss_oracle, sample_rollouts, softmax_rows, train_toy)
from gxpo.testbed import central_difference
from gxpo.update import GxpoConfig


@pytest.fixture
def task():
    return ToyTask.random(8, 4, seed=0)


def test_near_deterministic_correct_policy_always_rewarded(task):
    theta = np.zeros((8, 4))
    theta[np.arange(8), list(task.correct)] = 50.0
    batch = sample_rollouts(task, theta.ravel(), 16, seed=1)
    assert np.all(batch.rewards == 1.0)
    assert expected_reward(task, theta.ravel()) == pytest.approx(1.0)


def test_rollouts_are_seed_deterministic(task):
    a = sample_rollouts(task, np.zeros(32), 8, seed=(3, 1))
    b = sample_rollouts(task, np.zeros(32), 8, seed=(3, 1))
    assert np.array_equal(a.answers, b.answers) and np.array_equal(a.behavior_probs, b.behavior_probs)


def test_uniform_policy_accuracy_near_chance(task):
    batch = sample_rollouts(task, np.zeros(32), 1000, seed=0)
    assert abs(batch.rewards.mean() - 0.25) <= 0.05
    assert np.allclose(batch.behavior_probs, 0.25)


def test_group_advantages_examples():
    assert np.array_equal(group_advantages([1.0, 1.0, 1.0]), [0.0, 0.0, 0.0])
    adv = group_advantages([1.0, 0.0, 0.0, 0.0, 1.0], eps_a=0.0)
    np.testing.assert_allclose(adv, [1.2247449, -0.8164966, -0.8164966, -0.8164966, 1.2247449], rtol=1e-6)
    with pytest.raises(ValueError):
        group_advantages([1.0])


@given(arrays(np.float64, (3, 6), elements=st.sampled_from([0.0, 1.0])))
def test_group_advantages_are_centered(r):
    adv = group_advantages(r)
    assert np.all(np.abs(adv.sum(axis=1)) <= 1e-12)
    assert np.all(adv[r.std(axis=1) == 0] == 0.0)


def test_loss_is_zero_at_reference_with_no_signal():
    task = ToyTask(2, 3, (0, 0))
    theta = np.zeros(6)
    theta[[1, 2, 4, 5]] = -60.0  # every sample answers 0 and is rewarded
    batch = sample_rollouts(task, theta, 4, seed=0)
    loss = GrpoLoss(task, batch, theta)
    assert loss.loss(theta) == 0.0
    assert not np.any(loss.grad(theta))
    assert loss.stats(theta)["clip_fraction"] == 0.0


def test_clip_fraction_zero_at_behavior_policy(task, rng):
    theta = rng.standard_normal(32)
    loss = GrpoLoss(task, sample_rollouts(task, theta, 8, seed=2), np.zeros(32))
    assert loss.stats(theta)["clip_fraction"] == 0.0
    loss.grad(theta + 3 * rng.standard_normal(32))
    assert loss.last_clip_fraction > 0


def test_gradient_matches_finite_differences(task, rng):
    theta_old = rng.standard_normal(32)
    batch = sample_rollouts(task, theta_old, 8, seed=5)
    loss = GrpoLoss(task, batch, rng.standard_normal(32), beta=0.05)
    theta = theta_old + 0.05 * rng.standard_normal(32)
    g, fd = loss.grad(theta), central_difference(loss.loss, theta)
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)


def test_kl_term_is_exact_categorical_divergence(task, rng):
    theta, ref = rng.standard_normal(32), rng.standard_normal(32)
    loss = GrpoLoss(task, sample_rollouts(task, theta, 4, seed=0), ref)
    p, q = softmax_rows(theta.reshape(8, 4)), softmax_rows(ref.reshape(8, 4))
    assert loss.stats(theta)["kl"] == pytest.approx(float(np.mean(np.sum(p * np.log(p / q), axis=1))))


def test_dimension_and_batch_mismatches(task):
    batch = sample_rollouts(task, np.zeros(32), 4, seed=0)
    with pytest.raises(ValueError):
        GrpoLoss(task, batch, np.zeros(31))
    with pytest.raises(ValueError):
        grpo_loss_oracle(np.ones(32) * np.arange(32), batch, task, np.zeros(32))
    with pytest.raises(ValueError):
        sample_rollouts(task, np.zeros(32), 1, seed=0)
    with pytest.raises(ValueError):
        ToyTask(2, 3, (0, 3))


def test_oracle_counts_passes_on_frozen_batch(task):
    batch = sample_rollouts(task, np.zeros(32), 4, seed=0)
    oracle = grpo_loss_oracle(np.zeros(32), batch, task, np.zeros(32))
    oracle.grad(np.zeros(32))
    oracle.grad(np.ones(32))
    assert oracle.pass_count == 2


def test_grpo_run_passes_one_per_step():
    rows, _ = train_toy(ToyConfig(method="grpo", steps=10), seed=0)
    assert len(rows) == 10 and rows[-1]["passes_cumulative"] == 10


def test_gxpo_run_without_gate_costs_three_per_step():
    cfg = ToyConfig(method="gxpo", steps=10, gxpo=GxpoConfig(tau=math.inf, r_max=1.0))
    rows, diags = train_toy(cfg, seed=0)
    assert rows[-1]["passes_cumulative"] == 30
    assert all(d.phase == "active" for d in diags)


@pytest.mark.parametrize("K", [3, 5, 10])
def test_active_passes_independent_of_K(K):
    _, gx = train_toy(ToyConfig(steps=8, gxpo=GxpoConfig(K=K, tau=math.inf, r_max=1.0)), seed=1)
    _, sf = train_toy(ToyConfig(method="sfpo", steps=8, sfpo=SfpoConfig(K=K)), seed=1)
    assert {d.passes_this_step for d in gx} == {3}
    assert {d.passes_this_step for d in sf} == {K + 1}


def test_gated_run_pass_budget():
    for seed in range(5):
        rows, diags = train_toy(ToyConfig(steps=60), seed=seed)
        s = diags[-1].s_star
        s = 60 if s is None else min(s, 60)
        assert rows[-1]["passes_cumulative"] == total_passes(60, s)
        assert all((d.phase == "fallback") == (d.passes_this_step == 1) for d in diags)


def test_training_is_deterministic():
    a, _ = train_toy(ToyConfig(steps=15), seed=3)
    b, _ = train_toy(ToyConfig(steps=15), seed=3)
    assert a == b


def test_divergence_aborts_with_dump(monkeypatch):
    real = GrpoLoss.grad
    calls = []

    def poisoned(self, theta):
        calls.append(1)
        g = real(self, theta)
        return g * np.nan if len(calls) > 7 else g

    monkeypatch.setattr(GrpoLoss, "grad", poisoned)
    with pytest.raises(NonFiniteError) as exc:
        train_toy(ToyConfig(steps=5, gxpo=GxpoConfig(tau=math.inf, r_max=1.0)), seed=4)
    assert exc.value.dump["seed"] == 4 and exc.value.dump["step"] == 2


def test_aggregate_curves():
    runs = [train_toy(ToyConfig(method="grpo", steps=4), seed=s)[0] for s in range(3)]
    agg = aggregate_curves(runs)
    assert len(agg) == 4 and agg[0]["n_seeds"] == 3
    assert agg[-1]["mean_reward"] == pytest.approx(np.mean([r[-1]["mean_reward"] for r in runs]))
    assert agg[-1]["active_seeds"] == 0
