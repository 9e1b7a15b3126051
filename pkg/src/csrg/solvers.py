"""Dense convex solvers: LP, inequality QP, and QP with one ball constraint.

The LP (maximize c.d over halfspaces A d <= b, d free) is solved as a revised
simplex on its dual min b'y s.t. A'y = c, y >= 0. The dual basis has only
dim(d) columns, so pricing over many rows is a single mat-vec; the optimal
simplex multiplier vector is exactly the primal point. Entering choice is
most-negative reduced cost with lowest-index ties, switching to Bland's rule
after a degenerate stall, so results are deterministic.

The QP is a primal active-set method for PD Hessians (regularized if needed).
The single quadratic ball constraint of the governor is handled by bisection
on its Lagrange multiplier around the QP solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import CsrgError, DimensionMismatch
from .settings import DEFAULT, NumericSettings


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpResult:
    status: SolveStatus
    point: np.ndarray | None = None
    value: float | None = None
    dual: np.ndarray | None = None
    dual_residual: float = 0.0
    iterations: int = 0


@dataclass
class QpProblem:
    """min 0.5 d'Hd + f'd subject to rows a.d <= b."""

    H: np.ndarray
    f: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.f = np.asarray(self.f, dtype=float).ravel()
        self.A = np.asarray(self.A, dtype=float).reshape(-1, self.H.shape[0]) \
            if self.H.shape[0] else np.zeros((0, 0))
        self.b = np.asarray(self.b, dtype=float).ravel()
        n = self.H.shape[0]
        if self.H.shape != (n, n) or self.f.shape != (n,):
            raise DimensionMismatch("H/f dimensions inconsistent")
        if self.A.shape[0] != self.b.shape[0]:
            raise DimensionMismatch("A/b row counts differ")


@dataclass
class BallConstraint:
    """||v - center||_metric <= radius on the v-subvector of the decision."""

    center: np.ndarray
    radius: float
    metric: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).ravel()
        self.metric = np.asarray(self.metric, dtype=float)
        k = self.center.shape[0]
        if self.metric.shape != (k, k):
            raise DimensionMismatch("ball metric shape inconsistent with center")
        if self.radius < 0:
            raise ValueError("ball radius must be >= 0")


@dataclass
class QpResult:
    status: SolveStatus
    point: np.ndarray | None = None
    value: float | None = None
    multipliers: np.ndarray | None = None
    working_set: list[int] = field(default_factory=list)
    ball_multiplier: float = 0.0
    ball_active: bool = False
    iterations: int = 0


# ---------------------------------------------------------------- LP

_RATIO_EPS = 1e-11
_REFRESH = 64


def _simplex_min(A: np.ndarray, costs_struct: np.ndarray, rhs: np.ndarray,
                 tol: float, max_iter: int):
    """Revised simplex for min cost'y s.t. A'y = rhs, y >= 0.

    A is m x n (structural column j of the equality system is A[j]).
    Runs phase 1 with unit artificials, then phase 2 with the given costs.
    Returns (status, pi, y_struct, iters) where status is one of
    'optimal', 'dual_infeasible' (equalities unsolvable), 'unbounded'.
    pi is the simplex multiplier vector = complementary primal point.
    """
    m, n = A.shape
    sigma = np.where(rhs >= 0.0, 1.0, -1.0)
    basis = np.arange(m, m + n)           # artificial i has index m+i
    yB = np.abs(rhs).astype(float)
    Binv = np.diag(sigma)
    iters = 0

    def refresh():
        nonlocal Binv
        B = np.empty((n, n))
        for pos, j in enumerate(basis):
            B[:, pos] = A[j] if j < m else sigma[j - m] * _unit(n, j - m)
        Binv = np.linalg.inv(B)

    def _unit(k, i):
        e = np.zeros(k)
        e[i] = 1.0
        return e

    for phase in (1, 2):
        if phase == 1:
            cost = np.zeros(m + n)
            cost[m:] = 1.0
        else:
            cost = np.concatenate([costs_struct, np.zeros(n)])
        stall = 0
        bland = False
        while True:
            iters += 1
            if iters > max_iter:
                raise CsrgError("simplex iteration cap exceeded")
            if iters % _REFRESH == 0:
                refresh()
            cB = cost[basis]
            pi = Binv.T @ cB
            # reduced costs of structural columns only; artificials never re-enter
            red = costs_struct - A @ pi if phase == 2 else -(A @ pi)
            red_basic_mask = np.zeros(m, dtype=bool)
            struct_in_basis = basis[basis < m]
            red_basic_mask[struct_in_basis] = True
            red = np.where(red_basic_mask, np.inf, red)
            if bland:
                cand = np.nonzero(red < -tol)[0]
                enter = int(cand[0]) if cand.size else -1
            else:
                j = int(np.argmin(red)) if m else -1
                enter = j if (m and red[j] < -tol) else -1
            if enter < 0:
                break  # phase optimal
            d = Binv @ A[enter]
            art_rows = basis >= m
            # blocking: normal ratio test plus artificials pinned at zero
            block = d > _RATIO_EPS
            block_art = art_rows & (np.abs(d) > _RATIO_EPS) & (yB <= tol)
            ratios = np.full(n, np.inf)
            ratios[block] = yB[block] / d[block]
            ratios[block_art] = 0.0
            if not np.any(np.isfinite(ratios)):
                if phase == 1:
                    raise CsrgError("phase-1 subproblem unbounded")  # cannot happen
                return "unbounded", None, None, iters
            theta = float(np.min(ratios))
            leave_candidates = np.nonzero(ratios <= theta + _RATIO_EPS)[0]
            # Bland tie-break: lowest variable index among candidates
            leave_pos = int(min(leave_candidates, key=lambda p: basis[p]))
            if theta <= _RATIO_EPS:
                stall += 1
                if stall > 2 * (m + n):
                    bland = True
            else:
                stall = 0
            yB = yB - theta * d
            yB[yB < 0.0] = 0.0
            yB[leave_pos] = theta
            basis[leave_pos] = enter
            piv = d[leave_pos]
            row = Binv[leave_pos] / piv
            Binv = Binv - np.outer(d, row)
            Binv[leave_pos] = row
        if phase == 1:
            infeas = float(np.sum(yB[basis >= m]))
            if infeas > tol * (1.0 + float(np.max(np.abs(rhs)))):
                return "dual_infeasible", None, None, iters
    cB = np.concatenate([costs_struct, np.zeros(n)])[basis]
    pi = Binv.T @ cB
    y = np.zeros(m)
    mask = basis < m
    y[basis[mask]] = yB[mask]
    return "optimal", pi, y, iters


def solve_lp(c: np.ndarray, A: np.ndarray, b: np.ndarray,
             settings: NumericSettings = DEFAULT) -> LpResult:
    """Maximize c.d subject to A d <= b with d free.

    Statuses are exhaustive: OPTIMAL carries the point, value, and dual row
    multipliers; INFEASIBLE and UNBOUNDED carry nothing.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.shape[0]
    A = np.asarray(A, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float).ravel()
    m = A.shape[0]
    if b.shape[0] != m:
        raise DimensionMismatch("A/b row counts differ")
    tol = settings.lp_tol
    if m == 0:
        if np.all(np.abs(c) <= tol):
            return LpResult(SolveStatus.OPTIMAL, np.zeros(n), 0.0, np.zeros(0))
        return LpResult(SolveStatus.UNBOUNDED)

    max_iter = 50 * (m + n) + 200
    status, pi, y, iters = _simplex_min(A, b.copy(), c, tol, max_iter)
    if status == "unbounded":
        return LpResult(SolveStatus.INFEASIBLE, iterations=iters)
    if status == "dual_infeasible":
        # disambiguate: primal is unbounded if feasible, else infeasible
        feas = find_feasible_point(A, b, settings)
        if feas is None:
            return LpResult(SolveStatus.INFEASIBLE, iterations=iters)
        return LpResult(SolveStatus.UNBOUNDED, iterations=iters)
    resid = float(np.max(np.abs(A.T @ y - c))) if m else 0.0
    return LpResult(SolveStatus.OPTIMAL, pi, float(c @ pi), y, resid, iters)


def find_feasible_point(A: np.ndarray, b: np.ndarray,
                        settings: NumericSettings = DEFAULT) -> np.ndarray | None:
    """A point with A d <= b + lp_tol, or None if the rows are infeasible.

    Solves max -t s.t. A d - t <= b, -t <= 1; the auxiliary problem is always
    feasible and bounded, so it terminates with a certificate either way.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    m = A.shape[0]
    if m == 0:
        return np.zeros(A.shape[1] if A.ndim == 2 else 0)
    n = A.shape[1]
    Aa = np.hstack([np.vstack([A, np.zeros((1, n))]),
                    -np.ones((m + 1, 1))])
    ba = np.concatenate([b, [1.0]])
    ca = np.zeros(n + 1)
    ca[n] = -1.0
    res = solve_lp(ca, Aa, ba, settings)
    if res.status is not SolveStatus.OPTIMAL:
        return None
    t = res.point[n]
    if t > settings.lp_tol * (1.0 + float(np.max(np.abs(b)))):
        return None
    z = res.point[:n]
    # clean tiny positive t: the returned point satisfies A z <= b + t
    return z


# ---------------------------------------------------------------- QP

def _chol_min_pivot(H: np.ndarray) -> float:
    """Smallest Cholesky pivot of H, or -inf when a pivot fails."""
    n = H.shape[0]
    L = np.zeros_like(H)
    worst = np.inf
    for j in range(n):
        d = H[j, j] - L[j, :j] @ L[j, :j]
        if d <= 0.0:
            return -np.inf
        worst = min(worst, d)
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (H[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return worst


def _regularize(H: np.ndarray, settings: NumericSettings) -> np.ndarray:
    H = 0.5 * (H + H.T)
    reg = settings.qp_regularization
    if _chol_min_pivot(H) < reg:
        Hr = H + reg * np.eye(H.shape[0])
        while _chol_min_pivot(Hr) <= 0.0 and reg < 1e-4:
            reg *= 10.0
            Hr = H + reg * np.eye(H.shape[0])
        return Hr
    return H


def qp_kkt_residuals(H, f, A, b, d, lam) -> dict[str, float]:
    """KKT residuals of a candidate QP solution (for certification)."""
    grad = H @ d + f + (A.T @ lam if A.size else 0.0)
    slack = A @ d - b if A.size else np.zeros(0)
    return {
        "stationarity": float(np.max(np.abs(grad))) if grad.size else 0.0,
        "primal": float(max(0.0, np.max(slack))) if slack.size else 0.0,
        "complementarity": float(np.max(np.abs(lam * slack))) if slack.size else 0.0,
        "multiplier_min": float(np.min(lam)) if lam.size else 0.0,
    }


def _kkt_step(H: np.ndarray, g: np.ndarray, AW: np.ndarray):
    """Solve [[H, AW'], [AW, 0]] [p; lam] = [-g; 0]."""
    n = H.shape[0]
    k = AW.shape[0]
    if k == 0:
        return np.linalg.solve(H, -g), np.zeros(0)
    K = np.zeros((n + k, n + k))
    K[:n, :n] = H
    K[:n, n:] = AW.T
    K[n:, :n] = AW
    rhs = np.concatenate([-g, np.zeros(k)])
    sol = np.linalg.solve(K, rhs)
    return sol[:n], sol[n:]


def _qp_core(H, f, A, b, d0, W0, settings: NumericSettings):
    """Array-level primal active set for PD H from a feasible start.

    Returns (status, d, lam_over_rows, working_set); status "optimal" only.
    """
    n = H.shape[0]
    m = A.shape[0]
    d = d0
    W = _independent_subset(A, W0) if W0 else []
    in_w = np.zeros(m, dtype=bool)
    for j in W:
        in_w[j] = True

    max_iter = 50 * (m + n) + 100
    stall = 0
    bland_drop = False
    for it in range(max_iter):
        AW = A[W] if W else np.zeros((0, n))
        g = H @ d + f
        try:
            step, lamW = _kkt_step(H, g, AW)
        except np.linalg.LinAlgError:
            W = _independent_subset(A, W)
            in_w[:] = False
            for j in W:
                in_w[j] = True
            AW = A[W] if W else np.zeros((0, n))
            step, lamW = _kkt_step(H, g, AW)
        if float(np.max(np.abs(step))) <= 1e-11 * (1.0 + float(np.max(np.abs(d)))):
            if lamW.size == 0 or float(np.min(lamW)) >= -settings.qp_multiplier_tol:
                lam = np.zeros(m)
                for pos, j in enumerate(W):
                    lam[j] = max(lamW[pos], 0.0)
                return d, lam, list(W), it + 1
            if bland_drop:
                drop_pos = int(np.nonzero(lamW < -settings.qp_multiplier_tol)[0][0])
            else:
                neg = np.where(lamW < -settings.qp_multiplier_tol, lamW, np.inf)
                drop_pos = int(np.argmin(neg))
            in_w[W[drop_pos]] = False
            W.pop(drop_pos)
            stall += 1
            if stall > 2 * (m + n):
                bland_drop = True
            continue
        # ratio test over rows outside the working set
        alpha = 1.0
        blocker = -1
        if m:
            Ad = A @ step
            cand = ~in_w & (Ad > _RATIO_EPS)
            if np.any(cand):
                caps = np.full(m, np.inf)
                caps[cand] = (b[cand] - A[cand] @ d) / Ad[cand]
                caps[cand & (caps < 0.0)] = 0.0
                jmin = int(np.argmin(caps))   # lowest index on exact ties
                if caps[jmin] < alpha - 1e-12:
                    alpha = float(caps[jmin])
                    blocker = jmin
        d = d + alpha * step
        if blocker >= 0:
            trial = W + [blocker]
            if np.linalg.matrix_rank(A[trial]) == len(trial):
                W = trial
                in_w[blocker] = True
            else:
                W = _independent_subset(A, trial)
                in_w[:] = False
                for j in W:
                    in_w[j] = True
            stall = stall + 1 if alpha <= _RATIO_EPS else 0
            if stall > 2 * (m + n):
                bland_drop = True
        else:
            stall = 0
    raise CsrgError("active-set QP did not converge")


def solve_qp(p: QpProblem, warm: tuple[np.ndarray, list[int]] | None = None,
             settings: NumericSettings = DEFAULT, assume_pd: bool = False) -> QpResult:
    """Primal active-set QP. Returns OPTIMAL with KKT-consistent multipliers,
    or INFEASIBLE when phase 1 certifies the rows empty."""
    n = p.H.shape[0]
    if n == 0:
        raise DimensionMismatch("QP requires at least one decision variable")
    H = p.H if assume_pd else _regularize(p.H, settings)
    f, A, b = p.f, p.A, p.b
    m = A.shape[0]
    scale_b = 1.0 + (float(np.max(np.abs(b))) if m else 0.0)
    feas_tol = settings.qp_primal_tol * scale_b

    d = None
    W: list[int] = []
    if warm is not None:
        d0, W0 = warm
        d0 = np.asarray(d0, dtype=float).ravel()
        if d0.shape[0] == n and (m == 0 or float(np.max(A @ d0 - b)) <= feas_tol):
            d = d0.copy()
            act = (A @ d - b >= -1e-8 * scale_b) if m else np.zeros(0, dtype=bool)
            W = [j for j in W0 if 0 <= j < m and act[j]]
    if d is None:
        if m == 0:
            d = np.zeros(n)
        else:
            d = find_feasible_point(A, b, settings)
            if d is None:
                return QpResult(SolveStatus.INFEASIBLE)
            W = []
    d, lam, W, iters = _qp_core(H, f, A, b, d, W, settings)
    return QpResult(SolveStatus.OPTIMAL, d,
                    float(0.5 * d @ p.H @ d + p.f @ d), lam, W,
                    iterations=iters)


def _independent_subset(A: np.ndarray, idx: list[int]) -> list[int]:
    out: list[int] = []
    for j in idx:
        trial = out + [j]
        if np.linalg.matrix_rank(A[trial]) == len(trial):
            out = trial
    return out


def _fix_coords(H, f, A, b, fixed_idx, values):
    """Eliminate fixed coordinates from a QP; returns reduced data + free idx."""
    n = H.shape[0]
    free = np.array([i for i in range(n) if i not in set(fixed_idx)], dtype=int)
    fixed_idx = np.asarray(fixed_idx, dtype=int)
    values = np.asarray(values, dtype=float).ravel()
    Hff = H[np.ix_(free, free)]
    f_red = f[free] + H[np.ix_(free, fixed_idx)] @ values
    if A.size:
        A_red = A[:, free]
        b_red = b - A[:, fixed_idx] @ values
    else:
        A_red = np.zeros((0, free.size))
        b_red = b
    return Hff, f_red, A_red, b_red, free


def solve_qp_ball(p: QpProblem, ball: BallConstraint, v_idx: np.ndarray,
                  warm: tuple[np.ndarray, list[int]] | None = None,
                  settings: NumericSettings = DEFAULT,
                  assume_pd: bool = False) -> QpResult:
    """QP with one additional ball constraint on the v-subvector.

    For a multidimensional v the ball multiplier mu >= 0 is bisected: each
    trial solves the QP with H augmented by 2 mu R on the v-block and f
    shifted by -2 mu R center, until the ball residual meets
    ``ball_residual_tol`` or the base solution is interior. A scalar v is
    special-cased exactly: the R-norm ball is then the interval
    |v - c| <= radius / sqrt(R), two linear rows. radius = 0 pins v to the
    center and solves the reduced QP.
    """
    v_idx = np.asarray(v_idx, dtype=int).ravel()
    n = p.H.shape[0]
    R = ball.metric
    cen = ball.center
    m = p.A.shape[0]
    scale_b = 1.0 + (float(np.max(np.abs(p.b))) if m else 0.0)

    def vnorm(d):
        dv = d[v_idx] - cen
        return float(np.sqrt(max(dv @ R @ dv, 0.0)))

    if ball.radius <= 0.0:
        # exact pin takes priority over any near-miss interior optimum so a
        # converged reference is reproduced bit-for-bit
        return _solve_pinned(p, v_idx, cen, m, scale_b, warm, settings)

    # base solve (mu = 0)
    base = solve_qp(p, warm, settings, assume_pd)
    if base.status is SolveStatus.INFEASIBLE:
        return QpResult(SolveStatus.INFEASIBLE)
    if vnorm(base.point) <= ball.radius + settings.ball_residual_tol:
        base.ball_active = False
        return base

    if v_idx.size == 1:
        # exact reduction for a scalar v: the R-norm ball is the interval
        # |v - c| <= radius / sqrt(R). The cost partially minimized over the
        # other coordinates is convex in v, so with the rows-only optimum
        # outside the interval the constrained optimum pins v to the nearer
        # interval edge (a reduced equality solve, no phase 1 needed).
        half = ball.radius / math.sqrt(float(R[0, 0]))
        edge = cen[0] + math.copysign(half, float(base.point[v_idx[0]]) - cen[0])
        pinned = _solve_pinned(p, v_idx, np.array([edge]), m, scale_b,
                               (base.point, []), settings)
        if pinned.status is SolveStatus.OPTIMAL:
            d = pinned.point
            lam = pinned.multipliers
            grad_v = float((p.H @ d + p.f + (p.A.T @ lam if m else 0.0))[v_idx[0]])
            dv = d[v_idx[0]] - cen[0]
            mu = max(-grad_v / (2.0 * float(R[0, 0]) * dv), 0.0) \
                if abs(dv) > 1e-300 else 0.0
            return QpResult(SolveStatus.OPTIMAL, d, pinned.value, lam,
                            pinned.working_set, ball_multiplier=mu,
                            ball_active=True, iterations=pinned.iterations)
        # rows cannot support v at that edge: fall back to the generic
        # interval formulation (rare; needs its own feasible start)
        e = np.zeros(n)
        e[v_idx[0]] = 1.0
        A2 = np.vstack([p.A, e, -e]) if m else np.vstack([e, -e])
        b2 = np.concatenate([p.b, [cen[0] + half, -(cen[0] - half)]])
        res = solve_qp(QpProblem(p.H, p.f, A2, b2), None, settings, assume_pd)
        if res.status is not SolveStatus.OPTIMAL:
            return QpResult(SolveStatus.INFEASIBLE)
        lam = res.multipliers[:m]
        active = bool(res.multipliers[m:].max() > settings.qp_multiplier_tol) \
            if res.multipliers.size > m else False
        dv = abs(float(res.point[v_idx[0]] - cen[0]))
        mu = 0.0
        if active and dv > 1e-300:
            mu = float(np.max(res.multipliers[m:])) / (2.0 * float(R[0, 0]) * dv)
        return QpResult(SolveStatus.OPTIMAL, res.point, res.value, lam,
                        [w for w in res.working_set if w < m],
                        ball_multiplier=mu, ball_active=active,
                        iterations=res.iterations)

    # reachability: closest feasible v to the center
    Haux = np.zeros((n, n))
    Haux[np.ix_(v_idx, v_idx)] = 2.0 * R
    faux = np.zeros(n)
    faux[v_idx] = -2.0 * (R @ cen)
    aux = solve_qp(QpProblem(Haux, faux, p.A, p.b),
                   (base.point, base.working_set), settings)
    if aux.status is SolveStatus.INFEASIBLE or \
            vnorm(aux.point) > ball.radius + 10.0 * settings.qp_primal_tol * scale_b:
        return QpResult(SolveStatus.INFEASIBLE)

    def solve_mu(mu, warm_ws):
        Hm = p.H.copy()
        Hm[np.ix_(v_idx, v_idx)] += 2.0 * mu * R
        fm = p.f.copy()
        fm[v_idx] -= 2.0 * mu * (R @ cen)
        return solve_qp(QpProblem(Hm, fm, p.A, p.b), warm_ws, settings, assume_pd)

    # bracket the multiplier
    lo = 0.0
    mu = 1.0
    hi = None
    r_hi = None
    ws = (base.point, base.working_set)
    for _ in range(80):
        res = solve_mu(mu, ws)
        ws = (res.point, res.working_set)
        if vnorm(res.point) <= ball.radius:
            hi, r_hi = mu, res
            break
        lo = mu
        mu *= 4.0
    if hi is None:
        return QpResult(SolveStatus.INFEASIBLE)

    best = r_hi
    best_err = abs(vnorm(r_hi.point) - ball.radius)
    best_mu = hi
    for _ in range(200):
        if best_err <= settings.ball_residual_tol or hi - lo <= 1e-16 * max(hi, 1.0):
            break
        mid = 0.5 * (lo + hi)
        res = solve_mu(mid, ws)
        ws = (res.point, res.working_set)
        r = vnorm(res.point)
        err = abs(r - ball.radius)
        if r <= ball.radius:
            hi = mid
            if err < best_err:
                best, best_err, best_mu = res, err, mid
        else:
            lo = mid
            if err <= settings.ball_residual_tol and err < best_err:
                best, best_err, best_mu = res, err, mid
    return QpResult(SolveStatus.OPTIMAL, best.point,
                    float(0.5 * best.point @ p.H @ best.point + p.f @ best.point),
                    best.multipliers, best.working_set,
                    ball_multiplier=best_mu, ball_active=True,
                    iterations=best.iterations)


def _solve_pinned(p: QpProblem, v_idx, cen, m, scale_b, warm,
                  settings: NumericSettings) -> QpResult:
    """radius = 0: v fixed to the center, reduced QP over the rest."""
    n = p.H.shape[0]
    Hff, f_red, A_red, b_red, free = _fix_coords(p.H, p.f, p.A, p.b, v_idx, cen)
    d = np.zeros(n)
    d[v_idx] = cen
    if free.size == 0:
        viol = float(np.max(p.A @ d - p.b)) if m else 0.0
        if viol > settings.qp_primal_tol * scale_b:
            return QpResult(SolveStatus.INFEASIBLE)
        lam = np.zeros(m)
        return QpResult(SolveStatus.OPTIMAL, d,
                        float(0.5 * d @ p.H @ d + p.f @ d), lam, [],
                        ball_active=True)
    sub_warm = None
    if warm is not None:
        w0 = np.asarray(warm[0], dtype=float).ravel()
        if w0.shape[0] == n:
            sub_warm = (w0[free], [])
    sub = solve_qp(QpProblem(Hff, f_red, A_red, b_red), sub_warm, settings)
    if sub.status is not SolveStatus.OPTIMAL:
        return QpResult(SolveStatus.INFEASIBLE)
    d[free] = sub.point
    return QpResult(SolveStatus.OPTIMAL, d,
                    float(0.5 * d @ p.H @ d + p.f @ d),
                    sub.multipliers, sub.working_set, ball_active=True)
