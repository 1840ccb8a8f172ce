import numpy as np
import pytest

from errors import InvalidArgumentError, SingularMatrixError
from numerics_core import composite_gauss, gauss_legendre, one_sided_jacobi, solve_dense, sym_eigen_descending


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 12])
def test_gauss_legendre_exact_up_to_degree_2n_minus_1(n):
    rule = gauss_legendre(n)
    for k in range(2 * n):
        expected = 2.0 / (k + 1) if k % 2 == 0 else 0.0
        assert rule.integrate(lambda t: t ** k) == pytest.approx(expected, abs=1e-13)


def test_gauss_legendre_nodes_and_weights():
    rule = gauss_legendre(7)
    assert rule.size == 7
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(2.0, abs=1e-14)
    # symmetric about the origin
    assert np.allclose(rule.nodes, -rule.nodes[::-1], atol=1e-15)


def test_gauss_legendre_rejects_zero_points():
    with pytest.raises(InvalidArgumentError):
        gauss_legendre(0)


def test_mapped_rule_integrates_on_interval():
    rule = gauss_legendre(4)
    assert rule.integrate(lambda t: t ** 3, 1.0, 3.0) == pytest.approx((81.0 - 1.0) / 4.0, rel=1e-14)


def test_composite_gauss_integrates_sine():
    nodes, weights = composite_gauss(0.0, np.pi, 8, 6)
    assert nodes.size == 48
    assert float(np.dot(weights, np.sin(nodes))) == pytest.approx(2.0, abs=1e-13)


def test_solve_dense_matches_numpy():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(12, 12)) + 12 * np.eye(12)
    b = rng.normal(size=12)
    assert np.allclose(solve_dense(A, b), np.linalg.solve(A, b), atol=1e-12)


def test_solve_dense_singular():
    with pytest.raises(SingularMatrixError):
        solve_dense(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 1.0]))
    with pytest.raises(SingularMatrixError):
        solve_dense(np.zeros((3, 3)), np.ones(3))


def test_solve_dense_shape_checks():
    with pytest.raises(InvalidArgumentError):
        solve_dense(np.ones((2, 3)), np.ones(2))
    with pytest.raises(InvalidArgumentError):
        solve_dense(np.eye(3), np.ones(2))
    with pytest.raises(InvalidArgumentError):
        solve_dense(np.array([[1.0, np.nan], [0.0, 1.0]]), np.ones(2))


@pytest.mark.parametrize("n", [9, 50, 200])
def test_sym_eigen_descending_matches_eigh(n):
    rng = np.random.default_rng(7)
    B = rng.normal(size=(n, n))
    G = B @ B.T
    values, vectors = sym_eigen_descending(G)
    assert np.all(np.diff(values) <= 1e-12 * values[0])
    assert np.allclose(values, np.sort(np.linalg.eigvalsh(G))[::-1], rtol=1e-10, atol=1e-12 * values[0])
    assert np.allclose(vectors.T @ vectors, np.eye(n), atol=1e-11)
    assert np.allclose(G @ vectors, vectors * values, atol=1e-9 * np.abs(values).max())


def test_sym_eigen_rejects_nonsymmetric():
    with pytest.raises(InvalidArgumentError):
        sym_eigen_descending(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_one_sided_jacobi_orthogonalizes_columns():
    rng = np.random.default_rng(11)
    W = rng.normal(size=(30, 6)) @ np.diag([1.0, 1e-2, 1e-4, 1e-6, 1e-7, 1e-8])
    WR, R = one_sided_jacobi(W)
    assert np.allclose(R.T @ R, np.eye(6), atol=1e-13)
    assert np.allclose(W @ R, WR, atol=1e-13)
    norms = np.linalg.norm(WR, axis=0)
    gram = (WR.T @ WR) / np.outer(norms, norms)
    assert np.allclose(gram, np.eye(6), atol=1e-12)
    expected = np.linalg.svd(W, compute_uv=False)
    assert np.allclose(np.sort(norms)[::-1], expected, rtol=1e-10)
