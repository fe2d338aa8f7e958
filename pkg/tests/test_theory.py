import numpy as np
import pytest
from hypothesis import given, strategies as st

from gxpo.testbed import QuadraticObjective, gd_trajectory, make_cubic, make_random_quadratic
from gxpo.theory import (alignment_check, bound_constants, budget_check, displacement_error,
                         interpolation_errors, probe_extrapolation, ratio_bias_check, ratio_bias_terms)

HC = np.array([[2.0, 0.5], [0.5, 1.0]])


def test_ratio_bias_worked_example():
    q = QuadraticObjective(HC)
    theta0 = np.linalg.solve(HC, [1.0, 1.0])
    r, r_bar, bias = ratio_bias_terms(q, theta0, 0.01)
    assert r[0] == pytest.approx(0.975, abs=1e-14)
    assert r_bar[0] == pytest.approx(0.98, abs=1e-15)
    assert bias[0] == pytest.approx(-0.005, abs=1e-14)
    assert np.max(np.abs(ratio_bias_check(q, theta0, 0.01))) <= 1e-14


def test_ratio_bias_diagonal_and_zero_step(rng):
    q = make_random_quadratic(6, diagonal=True, seed=2)
    theta0 = rng.standard_normal(6)
    r, r_bar, _ = ratio_bias_terms(q, theta0, 0.05)
    np.testing.assert_allclose(r, r_bar, atol=1e-14)
    spd = make_random_quadratic(6, seed=2)
    r, r_bar, _ = ratio_bias_terms(spd, theta0, 0.0)
    assert np.all(r == 1.0) and np.all(r_bar == 1.0)
    assert not np.any(ratio_bias_check(spd, theta0, 0.0))


def test_ratio_bias_rejects_zero_gradient_coordinate():
    with pytest.raises(ValueError, match="coordinate 1"):
        ratio_bias_check(QuadraticObjective(np.diag([1.0, 2.0])), [1.0, 0.0], 0.01)


@given(st.integers(2, 16), st.integers(0, 2**31 - 1), st.floats(1e-4, 1e-2))
def test_ratio_bias_residual_vanishes(d, seed, eta):
    q = make_random_quadratic(d, seed=seed)
    theta0 = np.random.default_rng(seed).standard_normal(d)
    if np.min(np.abs(q.grad(theta0))) < 1e-3:
        return
    assert np.max(np.abs(ratio_bias_check(q, theta0, eta))) <= 1e-10


@pytest.mark.parametrize("R", [0.0, 0.5, 0.9, 1.3])
def test_bound_constants_for_three_steps(R):
    C, D = bound_constants(3, R)
    assert C == pytest.approx(1 + 2 * R) and D == pytest.approx(3 + R + R**2)


def test_diagonal_surrogate_is_exact(rng):
    q = make_random_quadratic(8, diagonal=True, seed=1)
    theta0 = rng.standard_normal(8)
    delta = 0.5 * np.min(np.abs(q.grad(theta0)))
    rep = displacement_error(q, theta0, 0.05, 5, delta)
    assert rep.measured_error <= 1e-10 and rep.E_off == 0.0 and rep.E_nonquad == 0.0
    assert rep.satisfied and rep.rho_max >= 1.0


def test_quadratic_bound_has_no_taylor_term(rng):
    q = make_random_quadratic(6, seed=4)
    rep = displacement_error(q, rng.standard_normal(6), 1e-3, 3, 1e-12)
    assert rep.E_nonquad == 0.0 and rep.satisfied
    assert rep.measured_error <= rep.E_off + rep.E_ratio + rep.roundoff


def test_bound_term_coefficients_scale_as_stated():
    obj = make_cubic(3, 0.01, seed=0)
    theta0 = np.array([0.3, -0.2, 0.5])
    eta = 1e-7
    rep = displacement_error(obj, theta0, eta, 3, 1e-30)
    H0 = obj.hessian(theta0)
    off = H0 - np.diag(np.diag(H0))
    g0 = obj.grad(theta0)
    assert rep.E_off == pytest.approx(3 * eta**2 * np.linalg.norm(off, 2) * np.linalg.norm(g0) * rep.rho_max,
                                      rel=1e-12)
    assert rep.E_nonquad == pytest.approx(2.5 * eta**3 * rep.M3 * rep.G**2 * rep.rho_max**2, rel=1e-12)


def test_bound_reports_violated_hypotheses(rng):
    q = make_random_quadratic(4, seed=0)
    rep = displacement_error(q, rng.standard_normal(4), 0.01, 3, 1e-12, R=0.1, G=1e-6)
    assert not rep.hypotheses_ok
    assert "ratio bound" in rep.note and "gradient bound" in rep.note


@pytest.mark.parametrize("family", ["diag", "spd", "cubic"])
def test_bound_holds_on_random_instances(family):
    rng = np.random.default_rng(["diag", "spd", "cubic"].index(family))
    for i in range(25):
        d = int(rng.integers(1, 20))
        if family == "cubic":
            obj = make_cubic(d, rng.uniform(-0.05, 0.05), seed=i)
        else:
            obj = make_random_quadratic(d, diagonal=family == "diag", seed=i)
        theta0 = rng.standard_normal(d)
        delta = float(np.quantile(np.abs(obj.grad(theta0)), 0.3))
        rep = displacement_error(obj, theta0, 10 ** rng.uniform(-3, -1), (2, 3, 5, 10)[i % 4], delta)
        assert rep.satisfied, rep
        assert all(np.isfinite(x) and x >= 0 for x in (rep.E_off, rep.E_ratio, rep.E_nonquad))


def test_model_probe_matches_observed_on_quadratics(rng):
    q = make_random_quadratic(5, seed=3)
    theta0 = rng.standard_normal(5)
    a = probe_extrapolation(q, theta0, 0.05, 4, 1e-12, "observed")
    b = probe_extrapolation(q, theta0, 0.05, 4, 1e-12, "model")
    np.testing.assert_allclose(a.thetaK, b.thetaK, rtol=1e-12)
    with pytest.raises(ValueError):
        probe_extrapolation(q, theta0, 0.05, 4, 1e-12, "guess")


def test_interpolation_errors(rng):
    wins = 0
    for seed in range(20):
        q = make_random_quadratic(8, seed=seed)
        theta0 = rng.standard_normal(8)
        one = interpolation_errors(q, theta0, 0.05, 5, 1.0)
        half = interpolation_errors(q, theta0, 0.05, 5, 0.5)
        # triangle inequality for the literal target
        assert half.error_tilde_literal <= 0.5 * one.error_thetaK + 0.5 * one.error_theta0 + 1e-12
        assert one.error_tilde == pytest.approx(one.error_thetaK)
        wins += half.error_tilde < one.error_tilde
    assert wins == 20


def test_alignment_examples(rng):
    q = make_random_quadratic(5, seed=8)
    theta0 = rng.standard_normal(5)
    rep = alignment_check(q, theta0, 0.1, 3, 0.0)
    g0 = q.grad(theta0)
    assert rep.condition_lhs == 0.0 and rep.condition_holds
    assert rep.modelled_inner == pytest.approx(g0 @ g0)
    for eta in 10.0 ** -np.arange(1, 8):
        rep = alignment_check(q, theta0, eta, 3, 0.5)
        if rep.condition_holds:
            break
    assert rep.condition_holds and rep.modelled_inner > 0


@given(st.integers(1, 16), st.integers(0, 2**31 - 1), st.floats(0.05, 1.0))
def test_alignment_positive_on_diagonal_quadratics(d, seed, eta_frac):
    q = make_random_quadratic(d, diagonal=True, seed=seed)
    theta0 = np.random.default_rng(seed).standard_normal(d)
    rep = alignment_check(q, theta0, eta_frac / np.max(np.diag(q.H)), 3, 0.5)
    assert rep.measured_cos > 0
    if rep.condition_holds:
        assert rep.modelled_inner > 0


def test_budget_worked_example():
    q = QuadraticObjective(np.diag([1.0, 0.5]))
    rep = budget_check(q, [1.0, 2.0], 0.1, 3, 5)
    assert rep.pass_count == 15 and rep.points_match and rep.ok
    assert rep.loss_bound_strict


def test_budget_zero_steps():
    rep = budget_check(QuadraticObjective(np.diag([1.0, 0.5])), [1.0, 2.0], 0.1, 3, 0)
    assert rep.ok and rep.pass_count == 0 and rep.loss_gxpo == rep.loss_initial


def test_budget_preconditions():
    with pytest.raises(ValueError):
        budget_check(QuadraticObjective(HC), [1.0, 1.0], 0.1, 3, 2)
    with pytest.raises(ValueError):
        budget_check(QuadraticObjective(np.diag([1.0, 0.5])), [1.0, 1.0], 1.5, 3, 2)


@given(st.integers(1, 10), st.integers(0, 2**31 - 1), st.integers(1, 60))
def test_gd_loss_contraction_on_diagonal_quadratics(d, seed, n):
    q = make_random_quadratic(d, diagonal=True, seed=seed)
    h = np.diag(q.H)
    eta = 0.9 / h.max()
    rho = (1 - eta * h.min()) ** 2
    traj = gd_trajectory(q, np.random.default_rng(seed).standard_normal(d), eta, n)
    L0 = q.loss(traj[0][0])
    for k, (theta, _) in enumerate(traj):
        assert q.loss(theta) <= rho**k * L0 * (1 + 1e-12)
