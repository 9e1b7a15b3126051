"""Controller-state-and-reference governor step logic and diagnostics.

Both online algorithms minimize the same convex quadratic cost

    J(x_u, v) = ||[x_p; x_u] - (I - Abar)^-1 Bv v||_P^2 + ||v - r||_R^2

over the admissible set. Algorithm 1 additionally forces the chosen v to be
no farther from r (in the R-norm) than the previous value minus delta, with
a total fallback to the previously admissible pair whenever the state has
left the set or the subproblem is infeasible. Algorithm 2 first tries to
jump v to r outright and otherwise defers to Algorithm 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CsrgError, InitialStateInadmissible
from .linalg import Mat, as_matrix, lu_solve
from .model import ClosedLoopModel
from .oinf import OinfResult, membership
from .settings import DEFAULT, NumericSettings
from .solvers import BallConstraint, QpProblem, SolveStatus, solve_qp, \
    solve_qp_ball, _chol_min_pivot, _fix_coords


class Algorithm(Enum):
    ALG1 = "alg1"
    ALG2 = "alg2"


@dataclass
class GovernorConfig:
    """Cost weights, contraction margin, algorithm choice, and the built set."""

    P: Mat
    Q: Mat
    R: Mat
    delta: float
    algorithm: Algorithm
    oinf: OinfResult

    def __post_init__(self):
        self.P = as_matrix(self.P)
        self.Q = as_matrix(self.Q)
        self.R = as_matrix(self.R)
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if isinstance(self.algorithm, str):
            self.algorithm = Algorithm(self.algorithm)


@dataclass
class GovernorState:
    x_p_prev: np.ndarray
    x_u_prev: np.ndarray
    v_prev: np.ndarray
    first_step: bool = True


@dataclass
class StepDiag:
    branch: str                 # "optimized" | "fallback" | "jump"
    member_prev: bool
    qp_feasible: bool
    J: float
    ball_radius: float
    decision_violation: float
    jump_feasible: bool | None = None


def cost_terms(m: ClosedLoopModel, cfg: GovernorConfig, x_p: np.ndarray,
               r: np.ndarray, settings: NumericSettings = DEFAULT
               ) -> tuple[QpProblem, float]:
    """Quadratic data (H, f, rows) over d = (x_u, v) plus the constant term.

    Rows are the admissible-set halfspaces with the plant state substituted.
    """
    eng = GovernorEngine(m, cfg, settings)
    x_p = np.asarray(x_p, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel()
    H, f, const = eng.cost_data(x_p, r)
    b_eff = eng.b - eng.A_xp @ x_p
    return QpProblem(H, f, eng.A_d, b_eff), const


class GovernorEngine:
    """Immutable per-model precomputation shared by all simulation lanes."""

    def __init__(self, m: ClosedLoopModel, cfg: GovernorConfig,
                 settings: NumericSettings = DEFAULT):
        if m.ctrl is None:
            raise CsrgError("governor requires the controller blocks")
        self.m = m
        self.cfg = cfg
        self.settings = settings
        n_x, n_xu, n_v, n_xp = m.n_x, m.n_xu, m.n_v, m.n_xp

        resid = m.Abar.T @ cfg.P @ m.Abar - cfg.P + cfg.Q
        scale = max(1.0, float(np.max(np.abs(cfg.Q))))
        if float(np.max(np.abs(resid))) > 1e-9 * scale:
            raise CsrgError("P does not solve the Lyapunov equation for (Abar, Q)")

        self.S = lu_solve(np.eye(n_x) - m.Abar, m.Bv_bar, settings)
        nd = n_xu + n_v
        T_u = np.zeros((n_x, n_xu))
        T_u[n_xp:, :] = np.eye(n_xu)
        self.T_p = np.zeros((n_x, n_xp))
        self.T_p[:n_xp, :] = np.eye(n_xp)
        M = np.zeros((n_x, nd))
        M[:, :n_xu] = T_u
        M[:, n_xu:] = -self.S
        E_v = np.zeros((n_v, nd))
        E_v[:, n_xu:] = np.eye(n_v)
        self.M = M
        self.E_v = E_v
        self.H = 2.0 * (M.T @ cfg.P @ M + E_v.T @ cfg.R @ E_v)
        self.H = 0.5 * (self.H + self.H.T)
        if _chol_min_pivot(self.H) < settings.qp_regularization:
            self.H = self.H + settings.qp_regularization * np.eye(nd)
        self._fp = 2.0 * (M.T @ cfg.P @ self.T_p)     # f = fp x_p - 2 E'R r
        self._fr = 2.0 * (E_v.T @ cfg.R)
        self._PT = self.T_p.T @ cfg.P @ self.T_p

        poly = cfg.oinf.set
        self.A_xp = poly.A[:, :n_xp]
        self.A_d = poly.A[:, n_xp:]
        self.b = poly.b
        self.n_xu, self.n_v, self.n_xp = n_xu, n_v, n_xp
        self.v_idx = np.arange(n_xu, nd)
        # per-row maximum of A_d.d over the decision box of the set: rows
        # whose maximum stays below b - A_xp.x_p are inactive at any feasible
        # point and can be dropped from that step's subproblem
        self._box_A = None
        self._box_b = None
        self._rowmax_d = self._decision_box_rowmax(poly, settings)

    def _decision_box_rowmax(self, poly, settings) -> np.ndarray | None:
        from .solvers import solve_lp
        nd = self.n_xu + self.n_v
        lo = np.empty(nd)
        hi = np.empty(nd)
        for j in range(nd):
            e = np.zeros(poly.dim)
            e[self.n_xp + j] = 1.0
            r_hi = solve_lp(e, poly.A, poly.b, self.settings)
            r_lo = solve_lp(-e, poly.A, poly.b, self.settings)
            if r_hi.status is not SolveStatus.OPTIMAL or \
                    r_lo.status is not SolveStatus.OPTIMAL:
                return None
            hi[j] = r_hi.value + 1e-9
            lo[j] = -r_lo.value - 1e-9
        # box halfspaces keep the screened feasible set equal to the slice
        self._box_A = np.vstack([np.eye(nd), -np.eye(nd)])
        self._box_b = np.concatenate([hi, -lo])
        return np.sum(np.where(self.A_d >= 0.0, self.A_d * hi, self.A_d * lo),
                      axis=1)

    def _screen(self, b_eff: np.ndarray):
        """Subproblem rows restricted to those active somewhere in the
        decision box, plus the box itself (exact feasible-set preservation)."""
        if self._rowmax_d is None:
            return self.A_d, b_eff
        scr = self._rowmax_d > b_eff
        A_q = np.vstack([self.A_d[scr], self._box_A])
        b_q = np.concatenate([b_eff[scr], self._box_b])
        return A_q, b_q

    # -- cost pieces ------------------------------------------------------
    def cost_data(self, x_p: np.ndarray, r: np.ndarray):
        f = self._fp @ x_p - self._fr @ r
        const = float(x_p @ self._PT @ x_p + r @ self.cfg.R @ r)
        return self.H, f, const

    def cost_value(self, d: np.ndarray, x_p: np.ndarray, r: np.ndarray) -> float:
        H, f, const = self.cost_data(x_p, r)
        return float(0.5 * d @ H @ d + f @ d + const)

    def r_norm(self, dv: np.ndarray) -> float:
        return float(np.sqrt(max(dv @ self.cfg.R @ dv, 0.0)))

    # -- state handling ---------------------------------------------------
    def init_state(self, x_p0, x_u0, v0) -> GovernorState:
        x_p0 = np.asarray(x_p0, dtype=float).ravel()
        x_u0 = np.asarray(x_u0, dtype=float).ravel()
        v0 = np.asarray(v0, dtype=float).ravel()
        z0 = np.concatenate([x_p0, x_u0, v0])
        if not membership(self.cfg.oinf.set, z0, self.settings):
            raise InitialStateInadmissible(
                "initial (x_p, x_u, v) is outside the admissible set")
        return GovernorState(x_p0.copy(), x_u0.copy(), v0.copy(), True)

    def controller_propagate(self, st: GovernorState) -> np.ndarray:
        """The unreset controller state for the current step."""
        if st.first_step:
            return st.x_u_prev.copy()
        ctrl = self.m.ctrl
        return (ctrl.A_p @ st.x_p_prev + ctrl.A_u @ st.x_u_prev
                + ctrl.D_v @ st.v_prev)

    # -- algorithm steps ----------------------------------------------------
    def step(self, st: GovernorState, x_p, r):
        x_p = np.asarray(x_p, dtype=float).ravel()
        r = np.asarray(r, dtype=float).ravel()
        if self.cfg.algorithm is Algorithm.ALG2:
            return self._step_alg2(st, x_p, r)
        return self._step_alg1(st, x_p, r)

    def _finish(self, st: GovernorState, x_p, x_u, v):
        st.x_p_prev = x_p
        st.x_u_prev = np.asarray(x_u, dtype=float).ravel()
        st.v_prev = np.asarray(v, dtype=float).ravel()
        st.first_step = False

    def _step_alg1(self, st: GovernorState, x_p, r):
        s = self.settings
        xu_bar = self.controller_propagate(st)
        v_prev = st.v_prev
        d_prev = np.concatenate([xu_bar, v_prev])
        b_eff = self.b - self.A_xp @ x_p
        slack = self.A_d @ d_prev - b_eff
        member = bool(np.all(slack <= s.membership_tol * (1.0 + np.abs(self.b))))

        radius = max(self.r_norm(v_prev - r) - self.cfg.delta, 0.0)
        if member:
            H, f, _ = self.cost_data(x_p, r)
            A_q, b_q = self._screen(b_eff)
            prob = QpProblem(self.H, f, A_q, b_q)
            ball = BallConstraint(r, radius, self.cfg.R)
            res = solve_qp_ball(prob, ball, self.v_idx,
                                warm=(d_prev, []), settings=s, assume_pd=True)
            if res.status is SolveStatus.OPTIMAL:
                d = res.point
                x_u = d[:self.n_xu]
                v = d[self.n_xu:]
                viol = float(np.max(self.A_d @ d - b_eff)) if self.b.size else 0.0
                diag = StepDiag("optimized", True, True,
                                self.cost_value(d, x_p, r), radius, viol)
                self._finish(st, x_p, x_u, v)
                return x_u, v, diag
            qp_ok = False
        else:
            qp_ok = False
        viol = float(np.max(self.A_d @ d_prev - b_eff)) if self.b.size else 0.0
        diag = StepDiag("fallback", member, qp_ok,
                        self.cost_value(d_prev, x_p, r), radius, viol)
        self._finish(st, x_p, xu_bar, v_prev)
        return xu_bar, v_prev, diag

    def _step_alg2(self, st: GovernorState, x_p, r):
        s = self.settings
        v_prev = st.v_prev
        if np.all(np.abs(v_prev - r) <= s.v_equal_tol):
            return self._step_alg1(st, x_p, r)
        # try pinning v = r over x_u (reduced QP); feasibility of
        # (x_p, x_u, r) in the set decides the jump
        b_eff = self.b - self.A_xp @ x_p
        H, f, _ = self.cost_data(x_p, r)
        if self.n_xu == 0:
            d = r.copy()
            ok = bool(np.all(self.A_d @ d - b_eff
                             <= s.qp_primal_tol * (1.0 + np.abs(self.b))))
            if ok:
                diag = StepDiag("jump", True, True,
                                self.cost_value(d, x_p, r), 0.0,
                                float(np.max(self.A_d @ d - b_eff)),
                                jump_feasible=True)
                self._finish(st, x_p, np.zeros(0), r)
                return np.zeros(0), r.copy(), diag
        else:
            A_q, b_q = self._screen(b_eff)
            Hff, f_red, A_red, b_red, free = _fix_coords(
                self.H, f, A_q, b_q, self.v_idx, r)
            sub = solve_qp(QpProblem(Hff, f_red, A_red, b_red), None, s)
            if sub.status is SolveStatus.OPTIMAL:
                x_u = sub.point
                d = np.concatenate([x_u, r])
                viol = float(np.max(self.A_d @ d - b_eff)) if self.b.size else 0.0
                diag = StepDiag("jump", True, True,
                                self.cost_value(d, x_p, r), 0.0, viol,
                                jump_feasible=True)
                self._finish(st, x_p, x_u, r)
                return x_u, r.copy(), diag
        x_u, v, diag = self._step_alg1(st, x_p, r)
        diag.jump_feasible = False
        return x_u, v, diag


def step_alg1(m: ClosedLoopModel, cfg: GovernorConfig, st: GovernorState,
              x_p, r, settings: NumericSettings = DEFAULT):
    """One Algorithm-1 step (engine built per call; prefer GovernorEngine in loops)."""
    eng = GovernorEngine(m, cfg, settings)
    return eng._step_alg1(st, np.asarray(x_p, dtype=float).ravel(),
                          np.asarray(r, dtype=float).ravel())


def step_alg2(m: ClosedLoopModel, cfg: GovernorConfig, st: GovernorState,
              x_p, r, settings: NumericSettings = DEFAULT):
    """One Algorithm-2 step (engine built per call; prefer GovernorEngine in loops)."""
    eng = GovernorEngine(m, cfg, settings)
    return eng._step_alg2(st, np.asarray(x_p, dtype=float).ravel(),
                          np.asarray(r, dtype=float).ravel())


def stability_diagnostics(m: ClosedLoopModel, cfg: GovernorConfig,
                          settings: NumericSettings = DEFAULT):
    """Noise floor mu, contraction rate alpha, and the mean-square bound.

    mu = trace(W Bw' P Bw); alpha is the largest value in (0, 1] with
    alpha ||z||_P^2 <= ||z||_Q^2 for all z (smallest generalized eigenvalue
    of (Q, P), found by bisection on definiteness); the returned bound maps
    (n, V(t_f)) to mu/alpha + (1-alpha)^n V(t_f).
    """
    P, Q = cfg.P, cfg.Q
    mu = float(np.trace(m.W @ (m.Bw_bar.T @ P @ m.Bw_bar)))

    def psd(alpha: float) -> bool:
        Mx = Q - alpha * P
        Mx = 0.5 * (Mx + Mx.T)
        shift = 1e-12 * max(1.0, float(np.max(np.abs(Mx))))
        return _chol_min_pivot(Mx + shift * np.eye(Mx.shape[0])) > 0.0

    lo, hi = 0.0, 1.0
    if psd(1.0):
        alpha = 1.0
    else:
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if psd(mid):
                lo = mid
            else:
                hi = mid
        alpha = lo

    def bound(n: int, v_tf: float = 0.0) -> float:
        return mu / alpha + (1.0 - alpha) ** n * v_tf if alpha > 0 else np.inf

    return mu, alpha, bound
