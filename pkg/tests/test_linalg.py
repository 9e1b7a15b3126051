import numpy as np
import pytest

from csrg import (NotPD, NotSchur, SingularMatrix, cholesky, is_schur,
                  lu_solve, mat_exp, solve_discrete_lyapunov)


def power_iteration_radius(A):
    """Independent spectral-radius estimate: rho(A) = lim ||A^k||^(1/k),
    evaluated by repeated squaring with running normalization."""
    M = A.copy()
    k = 1
    log_scale = 0.0
    for _ in range(12):
        M = M @ M
        k *= 2
        n = np.linalg.norm(M, np.inf)
        if n == 0:
            return 0.0
        M = M / n
        log_scale += np.log(n)
    return float(np.exp(log_scale / k))


class TestLuSolve:
    def test_identity(self):
        B = np.arange(6.0).reshape(3, 2)
        assert np.allclose(lu_solve(np.eye(3), B), B)

    def test_diagonal(self):
        X = lu_solve(np.array([[2.0, 0], [0, 4.0]]), np.array([[2.0], [8.0]]))
        assert np.allclose(X, [[1.0], [2.0]])

    def test_longitudinal_residual(self, lon_loop):
        A = np.eye(5) - lon_loop.Abar
        B = lon_loop.Bv_bar
        X = lu_solve(A, B)
        resid = np.max(np.abs(A @ X - B))
        assert resid <= 1e-10 * max(np.max(np.abs(B)), 1.0)

    def test_singular(self):
        with pytest.raises(SingularMatrix):
            lu_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.eye(2))


class TestDiscreteLyapunov:
    def test_zero_dynamics(self):
        P = solve_discrete_lyapunov(np.zeros((3, 3)), np.eye(3))
        assert np.allclose(P, np.eye(3))

    def test_scalar_closed_form(self):
        # p = q / (1 - a^2)
        P = solve_discrete_lyapunov(np.array([[0.5]]), np.array([[0.75]]))
        assert abs(P[0, 0] - 1.0) < 1e-12

    def test_lateral_residual(self, lat_loop):
        A = lat_loop.Abar
        P = solve_discrete_lyapunov(A, np.eye(5))
        resid = np.max(np.abs(A.T @ P @ A - P + np.eye(5)))
        assert resid <= 1e-10

    def test_not_schur(self):
        with pytest.raises(NotSchur):
            solve_discrete_lyapunov(np.array([[1.01]]), np.array([[1.0]]))

    def test_random_psd_property(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            A = rng.normal(size=(4, 4))
            A *= 0.8 / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-9)
            Q0 = rng.normal(size=(4, 4))
            Q = Q0 @ Q0.T
            P = solve_discrete_lyapunov(A, Q)
            assert np.allclose(P, P.T)
            assert np.min(np.linalg.eigvalsh(P)) >= -1e-10
            assert np.max(np.abs(A.T @ P @ A - P + Q)) <= 1e-10 * max(np.max(np.abs(Q)), 1.0)


class TestIsSchur:
    def test_contraction(self):
        assert is_schur(0.99 * np.eye(3))

    def test_unit_circle(self):
        assert not is_schur(np.eye(3))

    def test_longitudinal(self, lon_loop):
        assert is_schur(lon_loop.Abar)
        assert power_iteration_radius(lon_loop.Abar) < 1.0

    def test_agrees_with_brute_force(self):
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 40:
            A = rng.normal(size=(4, 4))
            rho = max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
            target = rng.uniform(0.3, 1.3)
            if 0.95 <= target <= 1.05:
                continue
            A *= target / rho
            brute = np.linalg.norm(np.linalg.matrix_power(A, 200), np.inf) < 1.0
            assert is_schur(A) == brute
            checked += 1


class TestCholesky:
    def test_identity(self):
        assert np.allclose(cholesky(np.eye(4)), np.eye(4))

    def test_diagonal(self):
        L = cholesky(np.diag([4.0, 9.0]))
        assert np.allclose(L, np.diag([2.0, 3.0]))

    def test_lateral_steady_cov(self, lat_loop):
        from csrg import steady_state_cov
        Sx, _ = steady_state_cov(lat_loop)
        L = cholesky(Sx)
        assert np.max(np.abs(L @ L.T - Sx)) <= 1e-10 * max(np.max(np.abs(Sx)), 1.0)

    def test_not_pd(self):
        with pytest.raises(NotPD):
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def taylor_expm(M, terms=60):
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


class TestMatExp:
    def test_zero(self):
        assert np.allclose(mat_exp(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        M = np.diag([np.log(2.0), 0.0])
        assert np.allclose(mat_exp(M), np.diag([2.0, 1.0]), atol=1e-13)

    def test_against_taylor_oracle(self, lon_bundle):
        A = lon_bundle.plant_c.A
        B = np.hstack([lon_bundle.plant_c.B_u, lon_bundle.plant_c.B_w])
        M = np.zeros((8, 8))
        M[:4, :4] = A
        M[:4, 4:] = B
        M = 0.1 * M
        # ||0.1 M|| is small enough for the plain series to converge fully
        assert np.max(np.abs(mat_exp(M) - taylor_expm(M))) <= 1e-10

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            M = rng.normal(size=(4, 4))
            M *= 10.0 / max(np.linalg.norm(M, np.inf), 1e-9)
            E = mat_exp(M) @ mat_exp(-M)
            assert np.max(np.abs(E - np.eye(4))) <= 1e-9
