import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momentauc.core import DimensionError
from momentauc.data import gaussian_stream
from momentauc.evaluation import auc
from momentauc.linear import MomentAUC, PassiveAggressive, Perceptron
from momentauc.schedules import ConstantStep, HorizonStep, InverseTimeStep, schedule_from_dict
from momentauc.surrogate import grad_psi_s


def test_schedules():
    assert ConstantStep(0.3)(7) == 0.3
    assert InverseTimeStep(2.0)(5) == 0.1
    h = HorizonStep(1.0, 100, 2.0)
    assert h(1) == pytest.approx(1 / (5 + math.sqrt(25 + 5 * 100 * 2.0)))
    for s in (ConstantStep(1.0), InverseTimeStep(0.5), h):
        assert schedule_from_dict(s.to_dict()) == s
    with pytest.raises(ValueError):
        ConstantStep(0.0)


def test_first_round_is_skipped():
    m = MomentAUC(2)
    assert m.step([1.0, 2.0], 1) is None
    assert not m.w.any()
    assert m.pos.count == 1 and m.t == 2 and m.updates == 0


def test_two_round_hand_trace():
    eta = 0.25
    x1, x2 = np.array([0.2, -0.4]), np.array([0.5, 0.1])
    m = MomentAUC(2, "hinge", lam=1.0, schedule=ConstantStep(eta))
    m.step(x1, 1)
    loss = m.step(x2, -1)
    # w = 0, so sigma^2 = 0 and the hinge subgradient -y(x2 - x1) applies
    assert loss == 1.0
    np.testing.assert_allclose(m.w, -eta * (x2 - x1))


def test_square_step_uses_halved_gradient():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((6, 3))
    m = MomentAUC(3, "square", lam=0.5, schedule=ConstantStep(0.1))
    for x in X[:5]:
        m.step(x, 1 if x[0] > 0 else -1)
    w0, y = m.w.copy(), -1
    other = m.pos
    g = grad_psi_s(X[5], y, other, w0)
    m.step(X[5], y)
    np.testing.assert_allclose(m.w, (1 - 0.05) * w0 - 0.1 * g)


def test_strict_init_scores_first_round():
    m = MomentAUC(2, strict_paper_init=True)
    assert m.step([0.5, 0.0], 1) == 1.0
    assert m.updates == 1


def test_separable_stream_auc():
    ds = gaussian_stream(500, 5, 3, shift=2.0)
    m = MomentAUC(5, lam=1.0)
    m.fit(ds.X, ds.y)
    assert auc(m.decision_function(ds.X), ds.y).value >= 0.95


def test_score():
    m = MomentAUC(2)
    assert m.score([4.0, -1.0]) == 0
    m.w = np.array([1.0, 0.0])
    assert m.score([3.0, 7.0]) == 3
    x, z = np.array([0.3, 2.0]), np.array([-1.0, 0.5])
    assert m.score(2 * x - 3 * z) == pytest.approx(2 * m.score(x) - 3 * m.score(z), abs=1e-12)
    with pytest.raises(DimensionError):
        m.score([1.0])


def test_step_rejects_bad_input():
    m = MomentAUC(2)
    with pytest.raises(ValueError):
        m.step([1.0, 1.0], 0)
    with pytest.raises(DimensionError):
        m.step([1.0], 1)


def test_weight_norm_bound():
    for lam in (0.1, 1.0):
        ds = gaussian_stream(1000, 5, 11)
        m = MomentAUC(5, lam=lam)
        for x, y in zip(ds.X, ds.y):
            m.step(x, int(y))
            assert np.linalg.norm(m.w) <= 3 / lam


def test_determinism_and_snapshot():
    ds = gaussian_stream(200, 4, 5)
    a, b = MomentAUC(4, lam=0.3), MomentAUC(4, lam=0.3)
    a.fit(ds.X, ds.y)
    b.fit(ds.X, ds.y)
    assert np.array_equal(a.w, b.w)
    c = MomentAUC.from_dict(a.to_dict())
    assert np.array_equal(c.w, a.w) and c.t == a.t
    x = np.ones(4) * 0.1
    assert c.step(x, 1) == a.step(x, 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["hinge", "square"]))
def test_label_flip_symmetry(seed, loss):
    ds = gaussian_stream(60, 3, seed % 10_000)
    sched = ConstantStep(0.2) if loss == "square" else None
    a = MomentAUC(3, loss, 0.5, sched).fit(ds.X, ds.y)
    b = MomentAUC(3, loss, 0.5, sched).fit(-ds.X, -ds.y)
    assert [l is None for l in a] == [l is None for l in b]
    np.testing.assert_allclose([l for l in a if l is not None], [l for l in b if l is not None],
                               rtol=1e-9, atol=1e-12)


def test_perceptron():
    p = Perceptron(2)
    p.step([1.0, 1.0], 1)
    np.testing.assert_array_equal(p.w, [1, 1])
    p.step([1.0, 1.0], 1)
    np.testing.assert_array_equal(p.w, [1, 1])


def test_passive_aggressive():
    pa = PassiveAggressive(2, C=1.0)
    pa.step([1.0, 0.0], 1)
    np.testing.assert_array_equal(pa.w, [1, 0])
    pa.step([2.0, 0.0], 1)
    np.testing.assert_array_equal(pa.w, [1, 0])
    pa.step([0.0, 0.0], -1)
    np.testing.assert_array_equal(pa.w, [1, 0])
    small = PassiveAggressive(1, C=0.1)
    small.step([1.0], -1)
    np.testing.assert_allclose(small.w, [-0.1])
    with pytest.raises(ValueError):
        PassiveAggressive(2, C=0)
