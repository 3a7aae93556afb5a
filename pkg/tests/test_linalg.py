import numpy as np
import pytest

from garkrow.errors import Singular
from garkrow.linalg import invert_small, lu_factor, lu_solve, solve
from garkrow.methods import ROS2_GAMMA


def test_identity_factors_trivially():
    f = lu_factor(np.eye(3))
    assert np.array_equal(f.lu, np.eye(3))
    assert list(f.perm) == [0, 1, 2]
    assert f.sign == 1


def test_permutation_matrix_pivots():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    f = lu_factor(a)
    assert f.sign == -1
    assert np.array_equal(lu_solve(f, [2.0, 3.0]), [3.0, 2.0])


def test_stage_matrix_example():
    h, gamma = 0.1, 0.25
    J = np.diag([-10.0, -10.0])
    f = lu_factor(np.eye(2) - h * gamma * J)
    assert np.allclose(np.diag(f.lu), [1.25, 1.25], rtol=0, atol=1e-15)
    assert np.allclose(lu_solve(f, [1.0, 1.0]), [0.8, 0.8], rtol=0, atol=1e-15)


def test_identity_solve_returns_rhs():
    r = np.array([1.5, -2.0, 7.0])
    assert np.array_equal(lu_solve(lu_factor(np.eye(3)), r), r)


def test_construct_then_solve_recovers_solution():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((5, 5)) + 5 * np.eye(5)
    x = rng.standard_normal(5)
    got = solve(a, a @ x)
    assert np.max(np.abs(got - x)) <= 1e-12 * np.max(np.abs(x))


def test_complex_scalar():
    assert solve(np.array([[1 - 1j]]), np.array([2.0 + 0j]))[0] == pytest.approx(1 + 1j, abs=1e-15)


def test_complex_rhs_with_real_matrix():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert np.allclose(solve(a, a @ x), x, rtol=0, atol=1e-13)


def test_real_and_complex_variants_agree():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((6, 6)) + 3 * np.eye(6)
    r = rng.standard_normal(6)
    real = solve(a, r)
    cplx = solve(a.astype(complex), r.astype(complex))
    assert np.max(np.abs(real - cplx)) <= 1e-14 * np.max(np.abs(real))


def test_reconstruction_and_residual_bounds():
    rng = np.random.default_rng(4)
    for n in range(1, 9):
        a = rng.standard_normal((n, n)) + n * np.eye(n)
        f = lu_factor(a)
        L = np.tril(f.lu, -1) + np.eye(n)
        U = np.triu(f.lu)
        norm = np.abs(a).sum(axis=1).max()
        assert np.max(np.abs(a[f.perm] - L @ U)) <= 1e-12 * norm
        x = rng.standard_normal(n)
        got = lu_solve(f, a @ x)
        assert np.max(np.abs(got - x)) <= 1e-11 * np.max(np.abs(x))
        rhs = rng.standard_normal(n)
        y = lu_solve(f, rhs)
        lhs = np.max(np.abs(a @ y - rhs))
        assert lhs <= 1e-10 * (norm * np.max(np.abs(y)) + np.max(np.abs(rhs)))


def test_multiple_right_hand_sides():
    a = np.array([[4.0, 1.0], [2.0, 3.0]])
    rhs = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert np.allclose(solve(a, rhs) @ np.eye(2), np.linalg.inv(a), rtol=0, atol=1e-15)


def test_singular_threshold():
    with pytest.raises(Singular):
        lu_factor(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(Singular):
        lu_factor(np.zeros((2, 2)))
    # a pivot just above the relative threshold is still accepted
    lu_factor(np.array([[1.0, 0.0], [0.0, 1e-13]]))


def test_determinant_sign():
    a = np.array([[0.0, 2.0], [3.0, 0.0]])
    assert lu_factor(a).determinant() == pytest.approx(-6.0)


def test_rejects_bad_shapes():
    with pytest.raises(ValueError):
        lu_factor(np.ones((2, 3)))
    with pytest.raises(ValueError):
        lu_solve(lu_factor(np.eye(2)), np.ones(3))


def test_invert_small_examples():
    assert np.array_equal(invert_small(np.eye(3)), np.eye(3))
    assert invert_small(np.array([[2.0]]))[0, 0] == 0.5
    g = ROS2_GAMMA
    beta = np.array([[g, 0.0], [1 - g, g]])
    expected = np.array([[1 / g, 0.0], [-(1 - g) / g**2, 1 / g]])
    assert np.max(np.abs(invert_small(beta) - expected)) <= 1e-14 * np.max(np.abs(expected))
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    assert np.max(np.abs(a @ invert_small(a) - np.eye(4))) <= 1e-12
