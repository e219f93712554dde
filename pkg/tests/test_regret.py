import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momentauc import kernel as K
from momentauc.data import gaussian_stream
from momentauc.linear import MomentAUC
from momentauc.moments import batch_recompute
from momentauc.regret import (HindsightProblem, kernel_features, kernel_regret_bound, kernel_regret_curve,
                              kernel_regret_trace, linear_regret_bound, psi_and_partials,
                              regret_curve, regret_trace)
from momentauc.schedules import ConstantStep
from momentauc.surrogate import LossKind, psi_m_loss, psi_s


def test_bound_constants():
    assert linear_regret_bound(1.0, 1) == 18.0
    assert linear_regret_bound(0.5, math.e) == pytest.approx(72.0)
    assert kernel_regret_bound(1.0, 1) == pytest.approx((2 * math.sqrt(2) + 1) ** 2 / 2)


def test_partials_match_scalar_losses():
    mu = np.array([-1.0, 0.3, 1.0, 2.5, 0.9])
    var = np.array([0.5, 1e-3, 0.0, 2.0, 1e-14])
    val, _, _ = psi_and_partials(LossKind.HINGE, mu, var)
    np.testing.assert_allclose(val, [psi_m_loss(m, v) for m, v in zip(mu, var)], rtol=1e-14)
    val, d_mu, d_var = psi_and_partials(LossKind.SQUARE, mu, var)
    np.testing.assert_allclose(val, [0.5 * psi_s(m, v) for m, v in zip(mu, var)])


def _direct_round_losses(X, y, w, loss, lam, strict=False):
    out = []
    for t in range(len(y)):
        hist = X[:t][y[:t] == -y[t]]
        if hist.shape[0] == 0 and not strict:
            out.append(np.nan)
            continue
        m = batch_recompute(hist, dim=X.shape[1])
        mu, s2 = y[t] * w @ (X[t] - m.mean), max(w @ m.cov @ w, 0.0)
        psi = psi_m_loss(mu, s2) if loss == "hinge" else 0.5 * psi_s(mu, s2)
        out.append(0.5 * lam * w @ w + psi)
    return np.array(out)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["hinge", "square"]), st.booleans())
def test_round_losses_match_direct_evaluation(seed, loss, strict):
    ds = gaussian_stream(40, 3, seed)
    w = np.random.default_rng(seed).standard_normal(3)
    prob = HindsightProblem(ds.X, ds.y, loss, 0.7, strict)
    got = prob.evaluate(w, per_round=True)
    ref = _direct_round_losses(ds.X, ds.y, w, loss, 0.7, strict)
    np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-12)
    value, _ = prob.evaluate(w)
    assert value == pytest.approx(np.nansum(ref), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["hinge", "square"]), st.sampled_from([None, 3]))
def test_objective_gradient_finite_differences(seed, loss, budget):
    ds = gaussian_stream(30, 3, seed)
    theta = np.random.default_rng(seed + 1).standard_normal(3)
    prob = HindsightProblem(ds.X, ds.y, loss, 0.3, budgets={1: budget, -1: budget})
    _, g = prob.evaluate(theta)
    h = 1e-6
    fd = np.array([(prob.evaluate(theta + h * e)[0] - prob.evaluate(theta - h * e)[0]) / (2 * h)
                   for e in np.eye(3)])
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-6)


def test_learner_losses_are_hindsight_round_losses():
    ds = gaussian_stream(120, 4, 8)
    model = MomentAUC(4, "hinge", 0.5)
    prob = HindsightProblem(ds.X, ds.y, "hinge", 0.5)
    for t, (x, y) in enumerate(zip(ds.X, ds.y)):
        w = model.w.copy()
        loss = model.step(x, int(y))
        if loss is not None:
            assert loss == pytest.approx(prob.evaluate(w, upto=t + 1, per_round=True)[t], rel=1e-9)


@pytest.mark.parametrize("budget", [None, 5])
def test_kernel_learner_losses_are_hindsight_round_losses(budget):
    ds = gaussian_stream(80, 2, 3)
    kern = K.GaussianKernel(1.0)
    model = K.KernelAUC(2, kern, "hinge", 1.0, budget)
    phi = kernel_features(kern.gram(ds.X, ds.X))
    prob = HindsightProblem(phi, ds.y, "hinge", 1.0, budgets={1: budget, -1: budget})
    for t, (x, y) in enumerate(zip(ds.X, ds.y)):
        c = np.zeros(len(ds))
        for key, a in model.alpha.items():
            c[key - 1] = a
        loss = model.step(x, int(y))
        if loss is not None:
            ref = prob.evaluate(phi.T @ c, per_round=True)[t]
            assert loss == pytest.approx(ref, rel=1e-7, abs=1e-9)


def test_solver_certificate():
    ds = gaussian_stream(300, 5, 1)
    prob = HindsightProblem(ds.X, ds.y, "hinge", 0.1)
    res = prob.solve()
    assert res.grad_norm <= 1e-6 and res.lower_bound <= res.value
    assert res.value - res.lower_bound <= 1e-9
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert prob.evaluate(res.theta + 0.05 * rng.standard_normal(5))[0] >= res.lower_bound


def test_trace_edge_cases():
    losses, opt = regret_trace(np.array([[0.3, 0.1]]), np.array([1]))
    assert losses == [] and opt == 0.0
    with pytest.raises(ValueError):
        regret_trace(np.zeros((0, 2)), np.zeros(0, dtype=int))
    losses, opt = kernel_regret_trace(np.array([[0.3]]), np.array([-1]), K.GaussianKernel(1.0))
    assert losses == [] and opt == 0.0
    with pytest.raises(ValueError):
        kernel_regret_trace(np.zeros((0, 1)), np.zeros(0, dtype=int), K.GaussianKernel(1.0))


def test_linear_regret_bound_and_sublinearity():
    ds = gaussian_stream(2000, 5, 0)
    curve = regret_curve(ds.X, ds.y, "hinge", 1.0, every=10)
    bounds = np.array([linear_regret_bound(1.0, r) for r in curve.rounds])
    assert np.all(curve.regret_upper <= bounds)
    per_t = []
    for T in (250, 500, 1000, 2000):
        k = np.searchsorted(curve.positions, T - 1, side="right") - 1
        per_t.append(curve.regret[k] / T)
    assert all(a > b for a, b in zip(per_t, per_t[1:])), per_t


def test_regret_trace_matches_curve_end():
    ds = gaussian_stream(300, 3, 4)
    losses, opt = regret_trace(ds.X, ds.y, "square", 0.5, ConstantStep(0.05))
    curve = regret_curve(ds.X, ds.y, "square", 0.5, ConstantStep(0.05), every=1000)
    assert curve.cumulative_loss[-1] == pytest.approx(sum(losses))
    assert curve.optimum[-1] == pytest.approx(opt, rel=1e-8)


def test_kernel_regret_sublinear():
    ds = gaussian_stream(500, 2, 6)
    curve = kernel_regret_curve(ds.X, ds.y, K.GaussianKernel(1.0), 1.0, every=5)
    bounds = np.array([kernel_regret_bound(1.0, r) for r in curve.rounds])
    assert np.all(curve.regret_upper <= bounds)
    per_t = []
    for T in (125, 250, 500):
        k = np.searchsorted(curve.positions, T - 1, side="right") - 1
        per_t.append(curve.regret[k] / T)
    assert per_t[0] > per_t[1] > per_t[2], per_t
