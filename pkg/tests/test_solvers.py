import itertools

import numpy as np
import pytest
import scipy.optimize

from csrg import (BallConstraint, QpProblem, SolveStatus, find_feasible_point,
                  qp_kkt_residuals, solve_lp, solve_qp, solve_qp_ball)

TOL = dict(stationarity=1e-8, primal=1e-9, complementarity=1e-8,
           multiplier=-1e-10)


def assert_kkt(p: QpProblem, res, extra_rows=None):
    H, f, A, b = p.H, p.f, p.A, p.b
    scale_f = 1.0 + (np.max(np.abs(f)) if f.size else 0.0)
    scale_b = 1.0 + (np.max(np.abs(b)) if b.size else 0.0)
    r = qp_kkt_residuals(H, f, A, b, res.point, res.multipliers)
    assert r["stationarity"] <= TOL["stationarity"] * scale_f or extra_rows
    assert r["primal"] <= TOL["primal"] * scale_b
    assert r["complementarity"] <= TOL["complementarity"] * scale_b
    assert r["multiplier_min"] >= TOL["multiplier"]


class TestLp:
    def test_simple_max(self):
        r = solve_lp([1.0], [[1.0]], [1.0])
        assert r.status is SolveStatus.OPTIMAL
        assert abs(r.value - 1.0) <= 1e-12 and abs(r.point[0] - 1.0) <= 1e-12
        assert r.dual_residual <= 1e-9

    def test_infeasible(self):
        r = solve_lp([1.0], [[-1.0], [1.0]], [-2.0, 1.0])
        assert r.status is SolveStatus.INFEASIBLE

    def test_unbounded_no_rows(self):
        r = solve_lp([1.0], np.zeros((0, 1)), [])
        assert r.status is SolveStatus.UNBOUNDED

    def test_unbounded_direction(self):
        r = solve_lp([0.0, 1.0], np.array([[1.0, 0.0]]), [1.0])
        assert r.status is SolveStatus.UNBOUNDED

    def test_determinism(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(30, 4))
        b = rng.uniform(0.5, 2.0, size=30)
        c = rng.normal(size=4)
        r1 = solve_lp(c, A, b)
        r2 = solve_lp(c, A, b)
        assert r1.value == r2.value
        assert np.array_equal(r1.point, r2.point)

    def test_random_against_scipy(self):
        rng = np.random.default_rng(9)
        n_checked = 0
        while n_checked < 40:
            n = rng.integers(2, 6)
            m = rng.integers(n + 1, 25)
            A = rng.normal(size=(m, n))
            b = rng.uniform(0.2, 2.0, size=m)
            c = rng.normal(size=n)
            ours = solve_lp(c, A, b)
            ref = scipy.optimize.linprog(-c, A_ub=A, b_ub=b,
                                         bounds=[(None, None)] * n,
                                         method="highs")
            if ref.status == 0:
                assert ours.status is SolveStatus.OPTIMAL
                assert abs(ours.value - (-ref.fun)) <= 1e-7 * (1 + abs(ref.fun))
                assert np.max(A @ ours.point - b) <= 1e-9 * (1 + np.max(np.abs(b)))
                assert ours.dual_residual <= 1e-8
            elif ref.status == 3:
                assert ours.status is SolveStatus.UNBOUNDED
            elif ref.status == 2:
                assert ours.status is SolveStatus.INFEASIBLE
            n_checked += 1

    def test_feasible_point(self):
        A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        b = np.array([2.0, 1.0, 0.5, 0.5])
        z = find_feasible_point(A, b)
        assert z is not None and np.max(A @ z - b) <= 1e-9
        assert find_feasible_point(np.array([[-1.0], [1.0]]),
                                   np.array([-2.0, 1.0])) is None


def brute_force_qp(H, f, A, b, tol=1e-9):
    """Active-set enumeration oracle: try every constraint subset as
    equalities, keep the best feasible KKT point."""
    n = H.shape[0]
    m = A.shape[0]
    best = None
    for k in range(0, n + 1):
        for subset in itertools.combinations(range(m), k):
            AW = A[list(subset)]
            if k and np.linalg.matrix_rank(AW) < k:
                continue
            K = np.zeros((n + k, n + k))
            K[:n, :n] = H
            K[:n, n:] = AW.T
            K[n:, :n] = AW
            rhs = np.concatenate([-f, b[list(subset)]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            d, lam = sol[:n], sol[n:]
            if np.any(lam < -1e-8):
                continue
            if m and np.max(A @ d - b) > 1e-8 * (1 + np.max(np.abs(b))):
                continue
            val = 0.5 * d @ H @ d + f @ d
            if best is None or val < best:
                best = val
    return best


class TestQp:
    def test_scalar_bound(self):
        p = QpProblem(np.array([[2.0]]), np.array([0.0]),
                      np.array([[-1.0]]), np.array([-1.0]))
        r = solve_qp(p)
        assert r.status is SolveStatus.OPTIMAL
        assert abs(r.point[0] - 1.0) <= 1e-10
        assert_kkt(p, r)

    def test_unconstrained(self):
        rng = np.random.default_rng(1)
        M = rng.normal(size=(3, 3))
        H = M @ M.T + np.eye(3)
        f = rng.normal(size=3)
        p = QpProblem(H, f, np.zeros((0, 3)), [])
        r = solve_qp(p)
        assert np.max(np.abs(r.point + np.linalg.solve(H, f))) <= 1e-9

    def test_random_vs_enumeration(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            n = 6
            M = rng.normal(size=(n, n))
            H = M @ M.T + 0.5 * np.eye(n)
            f = rng.normal(size=n)
            A = rng.normal(size=(10, n))
            b = rng.uniform(0.1, 1.5, size=10)
            p = QpProblem(H, f, A, b)
            r = solve_qp(p)
            assert r.status is SolveStatus.OPTIMAL
            oracle = brute_force_qp(H, f, A, b)
            assert oracle is not None
            assert r.value <= oracle + 1e-7 * (1 + abs(oracle))
            assert_kkt(p, r)

    def test_infeasible(self):
        p = QpProblem(np.eye(1), np.zeros(1),
                      np.array([[-1.0], [1.0]]), np.array([-2.0, 1.0]))
        assert solve_qp(p).status is SolveStatus.INFEASIBLE

    def test_warm_start_matches_cold(self):
        rng = np.random.default_rng(3)
        H = np.diag([2.0, 3.0])
        f = np.array([-1.0, -4.0])
        A = rng.normal(size=(6, 2))
        b = rng.uniform(0.5, 1.5, size=6)
        p = QpProblem(H, f, A, b)
        cold = solve_qp(p)
        warm = solve_qp(p, warm=(np.zeros(2), []))
        assert np.max(np.abs(cold.point - warm.point)) <= 1e-9


class TestQpBall:
    def test_radius_zero_pins(self):
        p = QpProblem(np.array([[2.0]]), np.array([-4.0]), np.zeros((0, 1)), [])
        r = solve_qp_ball(p, BallConstraint([0.5], 0.0, np.array([[1.0]])), [0])
        assert r.point[0] == 0.5 and r.ball_active

    def test_inactive_matches_plain(self):
        rng = np.random.default_rng(8)
        H = np.diag([2.0, 2.0])
        f = np.array([-1.0, -1.0])
        A = rng.normal(size=(4, 2))
        b = rng.uniform(1.0, 2.0, size=4)
        p = QpProblem(H, f, A, b)
        plain = solve_qp(p)
        balled = solve_qp_ball(p, BallConstraint([0.0, 0.0], 50.0, np.eye(2)),
                               [0, 1])
        assert np.max(np.abs(plain.point - balled.point)) <= 1e-8

    def test_scalar_projection(self):
        p = QpProblem(np.array([[2.0]]), np.array([-4.0]), np.zeros((0, 1)), [])
        r = solve_qp_ball(p, BallConstraint([0.0], 1.0, np.array([[1.0]])), [0])
        assert abs(r.point[0] - 1.0) <= 1e-8

    def test_multidim_ball_bisection(self):
        # 3 vars, ball on the last two; compare against a dense sampling oracle
        rng = np.random.default_rng(21)
        M = rng.normal(size=(3, 3))
        H = M @ M.T + np.eye(3)
        f = np.array([0.5, -2.0, -3.0])
        A = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
        b = np.array([1.0, 1.0])
        R = np.array([[2.0, 0.3], [0.3, 1.0]])
        cen = np.array([0.2, -0.1])
        rad = 0.7
        p = QpProblem(H, f, A, b)
        res = solve_qp_ball(p, BallConstraint(cen, rad, R), [1, 2])
        assert res.status is SolveStatus.OPTIMAL
        dv = res.point[1:] - cen
        assert np.sqrt(dv @ R @ dv) <= rad + 1e-8
        # sampling oracle
        best = np.inf
        for _ in range(20000):
            x = rng.uniform(-1, 1)
            ang = rng.uniform(0, 2 * np.pi)
            rr = rad * np.sqrt(rng.uniform())
            w = np.array([np.cos(ang), np.sin(ang)]) * rr
            L = np.linalg.cholesky(R)
            v = cen + np.linalg.solve(L.T, w)
            d = np.array([x, v[0], v[1]])
            if np.max(A @ d - b) <= 0:
                best = min(best, 0.5 * d @ H @ d + f @ d)
        assert res.value <= best + 1e-6

    def test_infeasible_ball(self):
        # rows force v >= 2 but ball keeps v within 0.5 of 0
        p = QpProblem(np.eye(1), np.zeros(1), np.array([[-1.0]]), np.array([-2.0]))
        r = solve_qp_ball(p, BallConstraint([0.0], 0.5, np.array([[1.0]])), [0])
        assert r.status is SolveStatus.INFEASIBLE
