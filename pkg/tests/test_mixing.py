import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edas.exceptions import DegenerateSpectrumError, InvalidTopologyError, ParameterError
from edas.mixing import b_decomposition, b_matrix, beta_shift, choose_c, lazy_metropolis, spectral
from edas.topology import from_edges, ring

from strategies import connected_graphs

PATH2 = from_edges([(0, 1)])


def circulant_eigs(n):
    # Lazy Metropolis on a ring is (I + (S + S^T)/2) / 2 for the cyclic shift S
    return np.sort(0.5 + 0.5 * np.cos(2 * np.pi * np.arange(n) / n))[::-1]


def test_lazy_metropolis_ring3():
    W = lazy_metropolis(ring(3))
    assert np.allclose(W, [[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]], atol=0, rtol=0)


def test_lazy_metropolis_ring4_circulant():
    W = lazy_metropolis(ring(4))
    first = np.array([0.5, 0.25, 0.0, 0.25])
    for i in range(4):
        assert np.array_equal(W[i], np.roll(first, i))


def test_lazy_metropolis_path2():
    assert np.array_equal(lazy_metropolis(PATH2), [[0.5, 0.5], [0.5, 0.5]])


def test_lazy_metropolis_rejects_disconnected():
    with pytest.raises(InvalidTopologyError):
        lazy_metropolis(from_edges([(0, 1), (2, 3)]))


def test_beta_shift_examples():
    W = beta_shift(lazy_metropolis(ring(4)), 0.9)
    assert np.linalg.eigvalsh(W).min() >= 0.8 - 1e-12
    assert np.array_equal(beta_shift(np.eye(3), 0.6), np.eye(3))
    W3 = beta_shift(lazy_metropolis(ring(3)), 0.75)
    assert np.allclose(np.diag(W3), 7 / 8, atol=1e-15)
    assert np.allclose(W3[~np.eye(3, dtype=bool)], 1 / 16, atol=1e-15)


@pytest.mark.parametrize("beta", [0.5, 1.0, 0.2, 1.3])
def test_beta_shift_range(beta):
    with pytest.raises(ParameterError):
        beta_shift(np.eye(2), beta)


def test_spectral_ring3():
    s = spectral(lazy_metropolis(ring(3)))
    assert np.allclose(s.lambdas, [1, 0.25, 0.25], atol=1e-14)
    assert s.gap == pytest.approx(0.75, abs=1e-14)


def test_spectral_ring4():
    s = spectral(lazy_metropolis(ring(4)))
    assert np.allclose(s.lambdas, [1, 0.5, 0.5, 0], atol=1e-14)
    assert s.gap == pytest.approx(0.5, abs=1e-14)


def test_spectral_path2_closed_form():
    s = spectral(lazy_metropolis(PATH2))
    assert np.allclose(s.lambdas, [1, 0], atol=1e-15)
    assert np.allclose(s.V, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-14)
    assert np.allclose(s.V @ s.V, np.eye(2) - s.W, atol=1e-14)


@pytest.mark.parametrize("n", [5, 8, 13, 20])
def test_spectral_ring_matches_circulant(n):
    assert np.allclose(spectral(lazy_metropolis(ring(n))).lambdas, circulant_eigs(n), atol=1e-12)


def test_spectral_first_eigenvector_and_signs(ring8):
    assert np.allclose(ring8.Q[:, 0], 1 / np.sqrt(8), atol=0)
    for k in range(8):
        col = ring8.Q[:, k]
        assert col[np.flatnonzero(np.abs(col) > 1e-14)[0]] > 0


def test_spectral_rejects_disconnected():
    W = np.kron(np.eye(2), np.full((2, 2), 0.5))
    with pytest.raises(InvalidTopologyError):
        spectral(W)


def test_spectral_rejects_bad_matrices():
    with pytest.raises(InvalidTopologyError):
        spectral(np.array([[0.5, 0.6], [0.5, 0.4]]))
    with pytest.raises(InvalidTopologyError):
        spectral(np.array([[1.5, -0.5], [-0.5, 1.5]]))


def test_spectral_outputs_are_read_only(ring8):
    with pytest.raises(ValueError):
        ring8.V[0, 0] = 1.0


def test_b_decomposition_requires_positive_lambda_n():
    with pytest.raises(DegenerateSpectrumError, match="lambda_4"):
        b_decomposition(spectral(lazy_metropolis(ring(4))))


def test_b_decomposition_ring3_shifted():
    s = spectral(beta_shift(lazy_metropolis(ring(3)), 0.75))
    bd = b_decomposition(s, 1.0)
    assert np.max(np.abs(bd.D1)) == pytest.approx(np.sqrt(0.8125), abs=1e-10)
    assert np.allclose(np.abs(bd.D1), np.repeat(np.sqrt(s.lambdas[1:]), 2), atol=1e-12)


def test_b_decomposition_path2_bound():
    s = spectral(beta_shift(lazy_metropolis(PATH2), 0.75))
    assert s.lambda_n == pytest.approx(0.75, abs=1e-14)
    bd = b_decomposition(s)
    assert bd.norm_UL**2 * bd.norm_UR**2 <= 1 / s.lambda_n + 1e-9
    assert np.allclose(bd.reconstruct_B(), b_matrix(s), atol=1e-12)


def test_c_is_pure_scaling():
    s = spectral(beta_shift(lazy_metropolis(ring(6)), 0.75))
    b1, b2 = b_decomposition(s, 1.0), b_decomposition(s, 2.0)
    n = s.n
    U1, U2 = b1.U(), b2.U()
    assert np.allclose(U2[:, 2:], 2 * U1[:, 2:], atol=1e-14)
    assert np.allclose(b2.U_inv()[2:], 0.5 * b1.U_inv()[2:], atol=1e-14)
    assert b1.norm_UL * b1.norm_UR == pytest.approx(b2.norm_UL * b2.norm_UR, rel=1e-14)
    assert np.allclose(b2.reconstruct_B(), b_matrix(s), atol=1e-12 * n)


def _power_norm(A, iters=2000):
    x = np.ones(A.shape[1], dtype=complex)
    for _ in range(iters):
        x = A.conj().T @ (A @ x)
        x /= np.linalg.norm(x)
    return np.linalg.norm(A @ x)


def test_choose_c_matches_power_iteration():
    s = spectral(beta_shift(lazy_metropolis(ring(8)), 0.75))
    UL = b_decomposition(s, 1.0).UL
    assert choose_c(s) == pytest.approx(np.sqrt(8) * _power_norm(UL), rel=1e-8)


def test_choose_c_path2():
    s = spectral(beta_shift(lazy_metropolis(PATH2), 0.75))
    assert choose_c(s) == pytest.approx(np.sqrt(2) * b_decomposition(s).norm_UL, rel=1e-15)


def test_y_star_solves_dual_equation(ring8_problem, ring8):
    for alpha in (0.1, 0.02, 1e-4):
        rhs = -alpha * ring8.W @ ring8_problem.grad_F_star
        y = ring8.y_star(alpha, ring8_problem.grad_F_star)
        assert np.linalg.norm(ring8.V @ y - rhs) <= 1e-8


@settings(max_examples=60)
@given(connected_graphs(), st.floats(0.55, 0.95))
def test_spectral_invariants_random_graphs(graph, beta):
    W = beta_shift(lazy_metropolis(graph), beta)
    s = spectral(W)
    n = s.n
    assert np.abs(W.sum(axis=1) - 1).max() <= 1e-12
    assert np.array_equal(W, W.T)
    assert np.linalg.norm(W - (s.Q * s.lambdas) @ s.Q.T) <= 1e-10 * n
    assert np.linalg.norm(s.V @ s.V - (np.eye(n) - W)) <= 1e-9 * n
    assert np.abs(s.V @ s.Vpinv @ s.V - s.V).max() <= 1e-9
    assert np.abs(np.ones(n) @ s.Vpinv).max() <= 1e-10
    assert np.abs(s.V @ np.ones(n)).max() <= 1e-10
    assert abs(s.lambdas[0] - 1) <= 1e-10
    if n > 1:
        assert s.lambda2 < 1
        bd = b_decomposition(s, choose_c(s))
        assert np.linalg.norm(bd.reconstruct_B() - b_matrix(s)) <= 1e-8 * n
        assert bd.norm_UL**2 * bd.norm_UR**2 <= 1 / s.lambda_n + 1e-9
        assert np.max(np.abs(bd.D1)) == pytest.approx(np.sqrt(s.lambda2), abs=1e-10)


@given(connected_graphs(min_n=3, max_n=15), st.floats(0.55, 0.95))
def test_beta_shift_maps_eigenvalues_affinely(graph, beta):
    W = lazy_metropolis(graph)
    s, t = spectral(W), spectral(beta_shift(W, beta))
    assert np.allclose(t.lambdas, beta + (1 - beta) * s.lambdas, atol=1e-12)
    # eigenvectors of the shifted matrix diagonalise the original
    D = t.Q.T @ W @ t.Q
    assert np.abs(D - np.diag(np.diag(D))).max() <= 1e-10


@given(connected_graphs(min_n=2, max_n=20), st.integers(0, 2**31))
def test_pseudoinverse_solves_range_equation(graph, seed):
    s = spectral(lazy_metropolis(graph))
    G = np.random.default_rng(seed).standard_normal((s.n, 3))
    G -= G.mean(axis=0)
    rhs = -0.05 * s.W @ G
    assert np.abs(s.V @ (s.Vpinv @ rhs) - rhs).max() <= 1e-8
