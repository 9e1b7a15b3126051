"""Finitely determined chance-tightened output admissible sets.

The set lives over the stacked variable z = (x_p, x_u, v). Stage t of the
recursion contributes, for each constraint column G_i, one halfspace

    G_i' Cbar Abar^t [x_p; x_u] + G_i' (Cbar sum_{k<t} Abar^k Bv + Dv) v <= c_i(t)

whose right-hand side is the chance-tightened bound: in individual and
risk-allocation modes c_i(t) = g_i - sqrt(2 s2) erfinv(2 b_i - 1), in
confidence-ellipsoid mode c_i(t) = g_i - sqrt(chi2_inv(b, n_y) s2), with
s2 = G_i' Sigma_y(t) G_i. The recursion stops at the first stage whose rows
are all redundant (per-row support LPs), which exists under the usual
observability/boundedness hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import probfuncs
from .errors import AssumptionViolated, DimensionMismatch, Infeasible, \
    NotFinitelyDetermined, Unbounded
from .linalg import Mat, as_matrix, lu_solve
from .model import ClosedLoopModel, steady_state_cov
from .settings import DEFAULT, NumericSettings
from .solvers import SolveStatus, solve_lp, find_feasible_point


class ConstraintMode(Enum):
    INDIVIDUAL = "individual"
    RISK_ALLOCATION = "ra"
    CONFIDENCE_ELLIPSOID = "ce"


class Recommendation(Enum):
    RISK_ALLOCATION = "ra"
    EQUAL = "equal"
    CONFIDENCE_ELLIPSOID = "ce"


def risk_allocate(beta: float, n_g: int) -> np.ndarray:
    """Equal risk split of a joint confidence level over n_g rows."""
    if not (0.5 < beta < 1.0):
        raise ValueError(f"beta must be in (0.5, 1), got {beta}")
    if n_g < 1:
        raise ValueError("n_g must be >= 1")
    return np.full(n_g, (beta + (n_g - 1)) / n_g)


def gamma_compare(n_y: int, n_g: int, beta: float) -> tuple[float, Recommendation]:
    """Conservativeness comparator between risk allocation and the
    confidence ellipsoid: negative favors risk allocation."""
    if n_y < 1 or n_g < 1:
        raise ValueError("n_y and n_g must be >= 1")
    beta_i = (beta + (n_g - 1)) / n_g
    gamma = math.sqrt(2.0) * probfuncs.erf_inv(2.0 * beta_i - 1.0) \
        - math.sqrt(probfuncs.chi2_inv(beta, n_y))
    if abs(gamma) < 1e-12:
        rec = Recommendation.EQUAL
    elif gamma < 0:
        rec = Recommendation.RISK_ALLOCATION
    else:
        rec = Recommendation.CONFIDENCE_ELLIPSOID
    return gamma, rec


@dataclass
class ChanceSpec:
    """Constraint columns G_i, bounds g_i, and the tightening mode."""

    G: Mat                      # n_y x n_g, column i is G_i
    g: np.ndarray               # n_g
    betas: np.ndarray           # per-row confidence levels (individual/RA)
    mode: ConstraintMode = ConstraintMode.INDIVIDUAL
    beta_joint: float | None = None

    def __post_init__(self):
        self.G = as_matrix(self.G)
        self.g = np.asarray(self.g, dtype=float).ravel()
        self.betas = np.asarray(self.betas, dtype=float).ravel()
        if self.G.shape[1] != self.g.shape[0]:
            raise DimensionMismatch("G columns and g length differ")
        if self.n_g < 1:
            raise ValueError("need at least one constraint row")
        if self.mode is not ConstraintMode.CONFIDENCE_ELLIPSOID:
            if self.betas.shape[0] != self.n_g:
                raise DimensionMismatch("betas length must match n_g")
            if np.any(self.betas <= 0.5) or np.any(self.betas >= 1.0):
                raise ValueError("each beta_i must lie in (0.5, 1)")
        if self.mode is not ConstraintMode.INDIVIDUAL:
            if self.beta_joint is None or not (0.5 < self.beta_joint < 1.0):
                raise ValueError("joint beta must lie in (0.5, 1)")

    @property
    def n_y(self) -> int:
        return self.G.shape[0]

    @property
    def n_g(self) -> int:
        return self.G.shape[1]

    @classmethod
    def individual(cls, G, g, betas) -> "ChanceSpec":
        betas = np.asarray(betas, dtype=float).ravel()
        if betas.size == 1:
            betas = np.full(np.asarray(g).size, betas.item())
        return cls(G, g, betas, ConstraintMode.INDIVIDUAL)

    @classmethod
    def joint_risk_allocation(cls, G, g, beta: float) -> "ChanceSpec":
        n_g = np.asarray(g).size
        return cls(G, g, risk_allocate(beta, n_g),
                   ConstraintMode.RISK_ALLOCATION, beta)

    @classmethod
    def joint_confidence_ellipsoid(cls, G, g, beta: float) -> "ChanceSpec":
        n_g = np.asarray(g).size
        return cls(G, g, np.full(n_g, beta),
                   ConstraintMode.CONFIDENCE_ELLIPSOID, beta)

    def quantile_factors(self) -> np.ndarray:
        """Per-row factor k_i so that c_i(t) = g_i - k_i * sigma_i(t)."""
        if self.mode is ConstraintMode.CONFIDENCE_ELLIPSOID:
            k = math.sqrt(probfuncs.chi2_inv(self.beta_joint, self.n_y))
            return np.full(self.n_g, k)
        return np.array([math.sqrt(2.0) * probfuncs.erf_inv(2.0 * b - 1.0)
                         for b in self.betas])


def tightened_rhs(spec: ChanceSpec, sigma_y_t: Mat, i: int,
                  settings: NumericSettings = DEFAULT) -> float:
    """Chance-tightened right-hand side for row i at output covariance
    sigma_y_t; variances below ``sigma_zero`` tighten by nothing."""
    Gi = spec.G[:, i]
    s2 = float(Gi @ sigma_y_t @ Gi)
    if s2 < settings.sigma_zero:
        return float(spec.g[i])
    return float(spec.g[i]) - spec.quantile_factors()[i] * math.sqrt(s2)


@dataclass
class Polyhedron:
    """Halfspace system a.z <= b over z = (x_p, x_u, v); rows unit-normalized."""

    A: Mat
    b: np.ndarray
    n_xp: int
    n_xu: int
    n_v: int
    stages: np.ndarray = field(default=None)  # stage per row; -1 = steady/box

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(-1, self.dim)
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.shape[0] != self.b.shape[0]:
            raise DimensionMismatch("A/b row counts differ")
        if self.stages is None:
            self.stages = np.full(self.A.shape[0], -1, dtype=int)
        else:
            self.stages = np.asarray(self.stages, dtype=int).ravel()
        if not np.all(np.isfinite(self.A)) or not np.all(np.isfinite(self.b)):
            raise ValueError("polyhedron rows must be finite")

    @property
    def dim(self) -> int:
        return self.n_xp + self.n_xu + self.n_v

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def contains(self, z, settings: NumericSettings = DEFAULT) -> bool:
        return membership(self, z, settings)

    def violation(self, z) -> float:
        return max_violation(self, z)


def membership(poly: Polyhedron, z, settings: NumericSettings = DEFAULT) -> bool:
    """True iff every row holds within the scaled tolerance."""
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != poly.dim:
        raise DimensionMismatch(f"point dim {z.shape[0]} != {poly.dim}")
    if poly.n_rows == 0:
        return True
    slack = poly.A @ z - poly.b
    return bool(np.all(slack <= settings.membership_tol * (1.0 + np.abs(poly.b))))


def max_violation(poly: Polyhedron, z) -> float:
    """max over rows of a.z - b (negative means strictly inside)."""
    z = np.asarray(z, dtype=float).ravel()
    if poly.n_rows == 0:
        return -np.inf
    return float(np.max(poly.A @ z - poly.b))


def fix_coordinates(poly: Polyhedron, idx: np.ndarray, values: np.ndarray,
                    n_xp: int, n_xu: int, n_v: int) -> Polyhedron:
    """Substitute fixed coordinates and drop them from the variable vector."""
    idx = np.asarray(idx, dtype=int).ravel()
    values = np.asarray(values, dtype=float).ravel()
    keep = np.array([i for i in range(poly.dim) if i not in set(idx.tolist())],
                    dtype=int)
    A = poly.A[:, keep]
    b = poly.b - poly.A[:, idx] @ values
    # renormalize and drop vacuous rows
    rows_a, rows_b, stages = [], [], []
    for i in range(A.shape[0]):
        nrm = float(np.linalg.norm(A[i]))
        if nrm <= 1e-12:
            if b[i] < -1e-9:
                raise Infeasible("fixing coordinates empties the set")
            continue
        rows_a.append(A[i] / nrm)
        rows_b.append(b[i] / nrm)
        stages.append(poly.stages[i])
    return Polyhedron(np.array(rows_a).reshape(-1, keep.size), np.array(rows_b),
                      n_xp, n_xu, n_v, np.array(stages, dtype=int))


@dataclass
class OinfResult:
    """Built admissible set plus the construction record."""

    set: Polyhedron
    t_star: int
    tilde_omega: Polyhedron
    tightening_table: Mat          # (t_star + 1) x n_g of c_i(t)
    mode: ConstraintMode
    v_box: Mat                     # n_v x 2 [lo, hi]
    eps_rel: float
    sigma_y_inf: Mat = None
    gamma: float | None = None     # joint modes only


class _StageRows:
    """Incremental generator of stage-t row data for the recursion."""

    def __init__(self, m: ClosedLoopModel, spec: ChanceSpec):
        self.m = m
        self.spec = spec
        self.Mt = m.Cbar.copy()                      # Cbar Abar^t
        self.Nt = m.Dv_bar.copy()                    # Cbar sum_{k<t} A^k Bv + Dv
        self.Sx = np.zeros((m.n_x, m.n_x))
        self.drive = m.Bw_bar @ m.W @ m.Bw_bar.T
        self.meas = m.Dw_bar @ m.W @ m.Dw_bar.T
        self.factors = spec.quantile_factors()
        self.t = 0

    def rows(self, settings: NumericSettings):
        """Rows (a_i over z, rhs c_i) at the current stage, unnormalized."""
        Sy = self.Mt0_cov()
        GtM = self.spec.G.T @ self.Mt       # n_g x n_x
        GtN = self.spec.G.T @ self.Nt       # n_g x n_v
        A = np.hstack([GtM, GtN])
        s2 = np.einsum("ij,jk,ik->i", self.spec.G.T, Sy, self.spec.G.T)
        c = np.where(s2 < settings.sigma_zero, self.spec.g,
                     self.spec.g - self.factors * np.sqrt(np.maximum(s2, 0.0)))
        return A, c

    def Mt0_cov(self) -> Mat:
        Sy = self.m.Cbar @ self.Sx @ self.m.Cbar.T + self.meas
        return 0.5 * (Sy + Sy.T)

    def advance(self):
        self.Nt = self.Nt + self.Mt @ self.m.Bv_bar
        self.Mt = self.Mt @ self.m.Abar
        self.Sx = self.m.Abar @ self.Sx @ self.m.Abar.T + self.drive
        self.Sx = 0.5 * (self.Sx + self.Sx.T)
        self.t += 1


def build_tilde_omega(m: ClosedLoopModel, spec: ChanceSpec, v_box: Mat,
                      eps_rel: float = 1e-3,
                      settings: NumericSettings = DEFAULT) -> Polyhedron:
    """Compact convex reference set strictly inside every steady halfspace.

    Intersects the user box with each nonzero steady-gain halfspace, the
    right-hand side pulled in by eps_rel times the slack at the box center.
    Zero-gain rows must have positive steady slack (standing assumption).
    """
    v_box = np.asarray(v_box, dtype=float).reshape(-1, 2)
    n_v = m.n_v
    if v_box.shape[0] != n_v:
        raise DimensionMismatch("v_box rows must match n_v")
    if not np.all(np.isfinite(v_box)) or np.any(v_box[:, 0] > v_box[:, 1]):
        raise Infeasible("v_box must be bounded and nonempty")
    if not (0.0 < eps_rel < 0.5):
        raise ValueError("eps_rel must lie in (0, 0.5)")

    _, Sy_inf = steady_state_cov(m, settings)
    Ysteady = m.Cbar @ lu_solve(np.eye(m.n_x) - m.Abar, m.Bv_bar, settings) + m.Dv_bar
    center = 0.5 * (v_box[:, 0] + v_box[:, 1])

    rows_a, rows_b = [], []
    for j in range(n_v):
        e = np.zeros(n_v)
        e[j] = 1.0
        rows_a.append(e.copy())
        rows_b.append(v_box[j, 1])
        rows_a.append(-e)
        rows_b.append(-v_box[j, 0])

    for i in range(spec.n_g):
        s = spec.G[:, i] @ Ysteady
        c_inf = tightened_rhs(spec, Sy_inf, i, settings)
        nrm = float(np.linalg.norm(s))
        if nrm <= settings.row_drop_norm:
            if c_inf <= 0.0:
                raise AssumptionViolated(
                    f"zero steady gain with nonpositive tightened slack on row {i}")
            continue
        slack_center = c_inf - float(s @ center)
        margin = eps_rel * (slack_center if slack_center > 0.0
                            else 1.0 + abs(c_inf))
        rows_a.append(s / nrm)
        rows_b.append((c_inf - margin) / nrm)

    A = np.array(rows_a).reshape(-1, n_v)
    b = np.array(rows_b)
    if find_feasible_point(A, b, settings) is None:
        raise Infeasible("shrunken steady set is empty")
    return Polyhedron(A, b, 0, 0, n_v)


def _box_upper_bound(a: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    return float(np.sum(np.where(a >= 0.0, a * hi, a * lo)))


class _SetAccumulator:
    """Mutable row store with redundancy tests against the current set."""

    def __init__(self, dim: int, settings: NumericSettings):
        self.dim = dim
        self.settings = settings
        self.A = np.zeros((0, dim))
        self.b = np.zeros(0)
        self.stages: list[int] = []
        self.box_lo = None
        self.box_hi = None

    def add(self, a: np.ndarray, bb: float, stage: int):
        self.A = np.vstack([self.A, a])
        self.b = np.append(self.b, bb)
        self.stages.append(stage)

    def try_box(self) -> bool:
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = 1.0
            r = solve_lp(e, self.A, self.b, self.settings)
            if r.status is not SolveStatus.OPTIMAL:
                return False
            hi[j] = r.value
            r = solve_lp(-e, self.A, self.b, self.settings)
            if r.status is not SolveStatus.OPTIMAL:
                return False
            lo[j] = -r.value
        self.box_lo, self.box_hi = lo, hi
        return True

    def is_redundant(self, a: np.ndarray, bb: float, stage_t: int,
                     allow_unbounded: bool) -> bool:
        tol = self.settings.redundancy_tol * (1.0 + abs(bb))
        if self.box_lo is not None and \
                _box_upper_bound(a, self.box_lo, self.box_hi) <= bb + tol:
            return True
        r = solve_lp(a, self.A, self.b, self.settings)
        if r.status is SolveStatus.OPTIMAL:
            return r.value <= bb + tol
        if r.status is SolveStatus.UNBOUNDED:
            if not allow_unbounded:
                raise Unbounded(
                    f"support LP unbounded at stage {stage_t}; "
                    "observability/boundedness hypotheses likely violated")
            return False
        raise Infeasible("admissible set became empty during construction")


def build_oinf(m: ClosedLoopModel, spec: ChanceSpec, v_box: Mat,
               eps_rel: float = 1e-3, t_max: int = 1000,
               settings: NumericSettings = DEFAULT) -> OinfResult:
    """Run the stage recursion until every next-stage row is redundant.

    Returns the finitely determined set, the determination index t_star, the
    compact steady reference set, and the per-stage tightening table.
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if spec.n_y != m.n_y:
        raise DimensionMismatch("spec G rows must match model outputs")

    tilde_omega = build_tilde_omega(m, spec, v_box, eps_rel, settings)
    dim = m.n_x + m.n_v
    acc = _SetAccumulator(dim, settings)
    # embed the v-only rows
    for i in range(tilde_omega.n_rows):
        a = np.zeros(dim)
        a[m.n_x:] = tilde_omega.A[i]
        acc.add(a, float(tilde_omega.b[i]), -1)

    gen = _StageRows(m, spec)
    table_rows = []
    t_star = None
    unbounded_grace = 2 * m.n_x

    # stage 0 rows seed the set together with tilde_omega
    A0, c0 = gen.rows(settings)
    table_rows.append(c0.copy())
    for i in range(spec.n_g):
        _consider_row(acc, A0[i], float(c0[i]), 0, settings,
                      allow_unbounded=True)
    gen.advance()

    for t in range(0, t_max):
        A_t, c_t = gen.rows(settings)     # candidate rows of stage t+1
        added_any = False
        pending = []
        for i in range(spec.n_g):
            a_raw = A_t[i]
            cc = float(c_t[i])
            nrm = float(np.linalg.norm(a_raw))
            if nrm <= settings.row_drop_norm:
                if cc < -settings.membership_tol:
                    raise Infeasible("vacuous row with negative bound")
                continue
            a = a_raw / nrm
            bb = cc / nrm
            if not acc.is_redundant(a, bb, t + 1,
                                    allow_unbounded=(t + 1) < unbounded_grace):
                pending.append((a, bb))
        if pending:
            for a, bb in pending:
                acc.add(a, bb, t + 1)
            added_any = True
            table_rows.append(c_t.copy())
        if not added_any:
            t_star = t
            break
        if acc.box_lo is None and (t + 1) % 8 == 0:
            acc.try_box()
        gen.advance()

    if t_star is None:
        raise NotFinitelyDetermined(f"no finite determination within t_max={t_max}")

    # final prune with the same LP test
    A, b, stages = acc.A, acc.b, np.array(acc.stages, dtype=int)
    keep = np.ones(A.shape[0], dtype=bool)
    for k in range(A.shape[0]):
        mask = keep.copy()
        mask[k] = False
        if not np.any(mask):
            continue
        tol = settings.redundancy_tol * (1.0 + abs(b[k]))
        r = solve_lp(A[k], A[mask], b[mask], settings)
        if r.status is SolveStatus.OPTIMAL and r.value <= b[k] + tol:
            keep[k] = False
    poly = Polyhedron(A[keep], b[keep], m.n_xp, m.n_xu, m.n_v, stages[keep])

    table = np.array(table_rows)  # stages 0..t_star (rows actually considered)
    gamma = None
    if spec.mode is not ConstraintMode.INDIVIDUAL:
        gamma, _ = gamma_compare(spec.n_y, spec.n_g, spec.beta_joint)
    return OinfResult(poly, t_star, tilde_omega, table, spec.mode,
                      np.asarray(v_box, dtype=float).reshape(-1, 2), eps_rel,
                      gen.Mt0_cov(), gamma)


def _consider_row(acc: _SetAccumulator, a_raw: np.ndarray, cc: float,
                  stage: int, settings: NumericSettings, allow_unbounded: bool):
    nrm = float(np.linalg.norm(a_raw))
    if nrm <= settings.row_drop_norm:
        if cc < -settings.membership_tol:
            raise Infeasible("vacuous row with negative bound")
        return
    a = a_raw / nrm
    bb = cc / nrm
    if not acc.is_redundant(a, bb, stage, allow_unbounded):
        acc.add(a, bb, stage)


def verify_finite_determination(m: ClosedLoopModel, spec: ChanceSpec,
                                result: OinfResult, extra_stages: int = 5,
                                settings: NumericSettings = DEFAULT) -> bool:
    """Post-hoc check that stages t_star+1 .. t_star+extra_stages add nothing."""
    gen = _StageRows(m, spec)
    for _ in range(result.t_star + 1):
        gen.advance()
    poly = result.set
    for _ in range(extra_stages):
        A_t, c_t = gen.rows(settings)
        for i in range(spec.n_g):
            nrm = float(np.linalg.norm(A_t[i]))
            if nrm <= settings.row_drop_norm:
                continue
            a = A_t[i] / nrm
            bb = float(c_t[i]) / nrm
            r = solve_lp(a, poly.A, poly.b, settings)
            if r.status is not SolveStatus.OPTIMAL:
                return False
            if r.value > bb + settings.redundancy_tol * (1.0 + abs(bb)):
                return False
        gen.advance()
    return True


# ---------------------------------------------------------------- projection

def _circle_directions(n: int) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(ang), np.sin(ang)])


def _sphere_directions(n: int) -> np.ndarray:
    """Deterministic Fibonacci spiral on the unit sphere."""
    k = np.arange(n, dtype=float) + 0.5
    phi = np.arccos(1.0 - 2.0 * k / n)
    theta = np.pi * (1.0 + math.sqrt(5.0)) * k
    return np.column_stack([np.sin(phi) * np.cos(theta),
                            np.sin(phi) * np.sin(theta),
                            np.cos(phi)])


def support_points(poly: Polyhedron, coords, n_dirs: int,
                   settings: NumericSettings = DEFAULT):
    """Support function samples of the projection onto the selected coords.

    Returns (directions, values, points) where points are the optimizers'
    projections; raises Unbounded if any direction LP is unbounded.
    """
    coords = np.asarray(coords, dtype=int).ravel()
    if coords.size == 2:
        dirs = _circle_directions(n_dirs)
    elif coords.size == 3:
        dirs = _sphere_directions(n_dirs)
    else:
        raise DimensionMismatch("projection supports 2 or 3 coordinates")
    vals = np.empty(n_dirs)
    pts = np.empty((n_dirs, coords.size))
    for k in range(n_dirs):
        c = np.zeros(poly.dim)
        c[coords] = dirs[k]
        r = solve_lp(c, poly.A, poly.b, settings)
        if r.status is SolveStatus.UNBOUNDED:
            raise Unbounded(f"projection direction {k} unbounded")
        if r.status is SolveStatus.INFEASIBLE:
            raise Infeasible("projection of an empty set")
        vals[k] = r.value
        pts[k] = r.point[coords]
    return dirs, vals, pts


def _hull_2d(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices in CCW order."""
    pts = sorted(set(map(tuple, np.round(points, 12))))
    if len(pts) <= 2:
        return np.array(pts).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def project(poly: Polyhedron, coords, n_dirs: int,
            settings: NumericSettings = DEFAULT) -> np.ndarray:
    """Inner polytopal approximation of the projection onto 2 or 3 coords:
    the convex hull of the support points over n_dirs spread directions."""
    coords = np.asarray(coords, dtype=int).ravel()
    _, _, pts = support_points(poly, coords, n_dirs, settings)
    if coords.size == 2:
        return _hull_2d(pts)
    from scipy.spatial import ConvexHull

    uniq = np.unique(np.round(pts, 12), axis=0)
    if uniq.shape[0] <= 3:
        return uniq
    try:
        hull = ConvexHull(uniq)
    except Exception:
        return uniq
    verts = uniq[np.sort(hull.vertices)]
    return verts
