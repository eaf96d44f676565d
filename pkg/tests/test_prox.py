import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from zovr.objectives import analytic_gradient, make_quadratic
from zovr.prox import L1Regularizer, ZeroRegularizer, generalized_gradient, prox_map

vec = hnp.arrays(np.float64, 5, elements=st.floats(-1e3, 1e3))


def _piecewise_argmin(g, x, eta, lam):
    """Minimize ``g z + (z - x)^2 / (2 eta) + lam |z|`` by comparing the stationary
    point of each smooth piece with the kink at zero."""
    candidates = [0.0]
    right = x - eta * (g + lam)
    if right > 0:
        candidates.append(right)
    left = x - eta * (g - lam)
    if left < 0:
        candidates.append(left)
    obj = lambda z: g * z + (z - x) ** 2 / (2 * eta) + lam * abs(z)
    return min(candidates, key=obj)


def test_soft_threshold_examples():
    assert prox_map(np.array([0.3]), 0.5)[0] == 0.0
    assert prox_map(np.array([-2.0]), 0.5)[0] == -1.5
    np.testing.assert_array_equal(prox_map(np.array([1.0, -1.0, 0.5]), 0.5), [0.5, -0.5, 0.0])


def test_zero_kind_is_identity():
    z = np.array([0.1, -3.0])
    out = prox_map(z, 10.0, kind="zero")
    np.testing.assert_array_equal(out, z)
    assert out is not z


def test_prox_errors():
    with pytest.raises(ValueError):
        prox_map(np.zeros(2), -0.1)
    with pytest.raises(ValueError):
        prox_map(np.zeros(2), 0.1, kind="l2")
    with pytest.raises(ValueError):
        L1Regularizer(-1.0)


@given(vec, vec, st.floats(0, 100))
def test_prox_nonexpansive(z1, z2, t):
    diff = np.linalg.norm(prox_map(z1, t) - prox_map(z2, t))
    assert diff <= np.linalg.norm(z1 - z2) * (1 + 1e-12) + 1e-12


def test_prox_nonexpansive_random_pairs(rng):
    for _ in range(1000):
        z1, z2 = rng.standard_normal((2, 6)) * 3
        t = rng.uniform(0, 2)
        assert np.linalg.norm(prox_map(z1, t) - prox_map(z2, t)) <= np.linalg.norm(z1 - z2) + 1e-12


def test_prox_matches_piecewise_minimizer(rng):
    for _ in range(200):
        y, eta, lam = rng.standard_normal() * 2, rng.uniform(0.01, 2), rng.uniform(0, 1)
        expected = _piecewise_argmin(0.0, y, eta, lam)
        assert L1Regularizer(lam).prox(np.array([y]), eta)[0] == pytest.approx(expected, abs=1e-12)


def test_regularizer_values():
    assert L1Regularizer(0.5).value(np.array([1.0, -2.0])) == 1.5
    assert ZeroRegularizer().value(np.array([1.0])) == 0.0
    assert ZeroRegularizer().is_zero and L1Regularizer(0.0).is_zero
    assert not L1Regularizer(0.1).is_zero


def test_generalized_gradient_zero_h_is_gradient(rng):
    obj = make_quadratic(np.diag([1.0, 3.0]), np.array([1.0, -1.0]))
    x = rng.standard_normal(2)
    np.testing.assert_array_equal(generalized_gradient(obj, x, 0.3, ZeroRegularizer()), analytic_gradient(obj, x))


def test_generalized_gradient_vanishes_at_minimizer():
    # f = |x - b|^2 / 2, h = lam |x|_1: minimizer is soft_threshold(b, lam)
    b, lam = np.array([2.0, 0.05, -1.0]), 0.1
    obj = make_quadratic(np.eye(3), b)
    x_star = prox_map(b, lam)
    np.testing.assert_allclose(generalized_gradient(obj, x_star, 0.5, L1Regularizer(lam)), np.zeros(3), atol=1e-15)


def test_generalized_gradient_quadratic_l1_oracle(rng):
    M = rng.standard_normal((4, 4))
    A, b = M @ M.T + np.eye(4), rng.standard_normal(4)
    obj = make_quadratic(A, b)
    lam = 0.3
    for _ in range(50):
        x = rng.standard_normal(4) * 2
        eta = rng.uniform(0.05, 1.0)
        g = A @ x - b
        x_plus = np.array([_piecewise_argmin(g[j], x[j], eta, lam) for j in range(4)])
        G = generalized_gradient(obj, x, eta, L1Regularizer(lam))
        assert np.max(np.abs(G - (x - x_plus) / eta)) <= 1e-8
