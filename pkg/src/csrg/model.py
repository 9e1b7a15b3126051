"""Closed-loop model assembly, steady states, moment sequences, discretization.

The plant is x_p+ = A x_p + B_u u + B_w w, y = C x_p + D_u u + D_w w; the
dynamic controller is u = K_p x_p + K_u x_u + B_v v, x_u+ = A_p x_p + A_u x_u
+ D_v v. Assembly produces the compact loop over xbar = (x_p, x_u) driven by
the reference v and the disturbance w.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotPD, NotPSD, NotSchur, SingularMatrix
from .linalg import Mat, as_matrix, cholesky, is_schur, lu_solve, mat_exp, \
    solve_discrete_lyapunov
from .settings import DEFAULT, NumericSettings


def _check_psd(W: Mat, name: str) -> None:
    W = as_matrix(W)
    if W.shape[0] != W.shape[1]:
        raise DimensionMismatch(f"{name} must be square")
    scale = max(1.0, float(np.trace(W)) / max(W.shape[0], 1))
    try:
        cholesky(W + 1e-10 * scale * np.eye(W.shape[0]))
    except NotPD as exc:
        raise NotPSD(f"{name} is not positive semidefinite") from exc


@dataclass
class PlantModel:
    """Plant blocks of the discrete-time (or continuous, pre-ZOH) model."""

    A: Mat
    B_u: Mat
    B_w: Mat
    C: Mat
    D_u: Mat
    D_w: Mat

    def __post_init__(self):
        self.A = as_matrix(self.A)
        self.B_u = as_matrix(self.B_u)
        self.B_w = as_matrix(self.B_w)
        self.C = as_matrix(self.C)
        self.D_u = as_matrix(self.D_u)
        self.D_w = as_matrix(self.D_w)
        n = self.A.shape[0]
        if self.A.shape[1] != n:
            raise DimensionMismatch("A must be square")
        if self.B_u.shape[0] != n or self.B_w.shape[0] != n:
            raise DimensionMismatch("B_u/B_w row count must match A")
        if self.C.shape[1] != n:
            raise DimensionMismatch("C column count must match A")
        if self.D_u.shape != (self.C.shape[0], self.B_u.shape[1]):
            raise DimensionMismatch("D_u shape inconsistent with C and B_u")
        if self.D_w.shape != (self.C.shape[0], self.B_w.shape[1]):
            raise DimensionMismatch("D_w shape inconsistent with C and B_w")

    @property
    def n_xp(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B_u.shape[1]

    @property
    def n_w(self) -> int:
        return self.B_w.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]


@dataclass
class ControllerModel:
    """Dynamic-controller blocks: u = K_p x_p + K_u x_u + B_v v, x_u+ = A_p x_p + A_u x_u + D_v v."""

    K_p: Mat
    K_u: Mat
    B_v: Mat
    A_p: Mat
    A_u: Mat
    D_v: Mat

    def __post_init__(self):
        self.K_p = as_matrix(self.K_p)
        self.K_u = as_matrix(self.K_u)
        self.B_v = as_matrix(self.B_v)
        self.A_p = as_matrix(self.A_p)
        self.A_u = as_matrix(self.A_u)
        self.D_v = as_matrix(self.D_v)
        n_u, n_xp = self.K_p.shape
        n_xu = self.A_u.shape[0]
        if self.A_u.shape[1] != n_xu:
            raise DimensionMismatch("A_u must be square")
        if self.K_u.shape != (n_u, n_xu):
            raise DimensionMismatch("K_u shape inconsistent")
        if self.B_v.shape[0] != n_u:
            raise DimensionMismatch("B_v row count must match K_p")
        if self.A_p.shape != (n_xu, n_xp):
            raise DimensionMismatch("A_p shape inconsistent")
        if self.D_v.shape != (n_xu, self.B_v.shape[1]):
            raise DimensionMismatch("D_v shape inconsistent")

    @property
    def n_xu(self) -> int:
        return self.A_u.shape[0]

    @property
    def n_v(self) -> int:
        return self.B_v.shape[1]


@dataclass
class ClosedLoopModel:
    """Compact closed loop; immutable after assembly."""

    Abar: Mat
    Bv_bar: Mat
    Bw_bar: Mat
    Cbar: Mat
    Dv_bar: Mat
    Dw_bar: Mat
    W: Mat
    n_xp: int
    plant: PlantModel | None = None
    ctrl: ControllerModel | None = None
    settings: NumericSettings = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        self.Abar = as_matrix(self.Abar)
        self.Bv_bar = as_matrix(self.Bv_bar)
        self.Bw_bar = as_matrix(self.Bw_bar)
        self.Cbar = as_matrix(self.Cbar)
        self.Dv_bar = as_matrix(self.Dv_bar)
        self.Dw_bar = as_matrix(self.Dw_bar)
        self.W = as_matrix(self.W)
        n = self.Abar.shape[0]
        if not (0 <= self.n_xp <= n):
            raise DimensionMismatch("n_xp out of range")
        if self.Bv_bar.shape[0] != n or self.Bw_bar.shape[0] != n:
            raise DimensionMismatch("input block row counts must match Abar")
        if self.Cbar.shape[1] != n:
            raise DimensionMismatch("Cbar column count must match Abar")
        if self.Dv_bar.shape != (self.Cbar.shape[0], self.Bv_bar.shape[1]):
            raise DimensionMismatch("Dv_bar shape inconsistent")
        if self.Dw_bar.shape != (self.Cbar.shape[0], self.Bw_bar.shape[1]):
            raise DimensionMismatch("Dw_bar shape inconsistent")
        if self.W.shape != (self.Bw_bar.shape[1], self.Bw_bar.shape[1]):
            raise DimensionMismatch("W shape inconsistent with Bw_bar")
        _check_psd(self.W, "W")
        if not is_schur(self.Abar, self.settings):
            raise NotSchur("closed-loop Abar is not Schur")

    @property
    def n_x(self) -> int:
        return self.Abar.shape[0]

    @property
    def n_xu(self) -> int:
        return self.Abar.shape[0] - self.n_xp

    @property
    def n_v(self) -> int:
        return self.Bv_bar.shape[1]

    @property
    def n_y(self) -> int:
        return self.Cbar.shape[0]

    @property
    def n_w(self) -> int:
        return self.Bw_bar.shape[1]


def assemble(plant: PlantModel, ctrl: ControllerModel, W: Mat,
             settings: NumericSettings = DEFAULT) -> ClosedLoopModel:
    """Build the compact closed loop from plant and controller blocks."""
    if ctrl.K_p.shape[1] != plant.n_xp:
        raise DimensionMismatch("controller K_p must act on the plant state")
    if ctrl.K_p.shape[0] != plant.n_u:
        raise DimensionMismatch("controller output size must match plant input")
    n_xp, n_xu, n_v = plant.n_xp, ctrl.n_xu, ctrl.n_v
    n = n_xp + n_xu

    Abar = np.zeros((n, n))
    Abar[:n_xp, :n_xp] = plant.A + plant.B_u @ ctrl.K_p
    Abar[:n_xp, n_xp:] = plant.B_u @ ctrl.K_u
    Abar[n_xp:, :n_xp] = ctrl.A_p
    Abar[n_xp:, n_xp:] = ctrl.A_u

    Bv_bar = np.zeros((n, n_v))
    Bv_bar[:n_xp] = plant.B_u @ ctrl.B_v
    Bv_bar[n_xp:] = ctrl.D_v

    Bw_bar = np.zeros((n, plant.n_w))
    Bw_bar[:n_xp] = plant.B_w

    Cbar = np.zeros((plant.n_y, n))
    Cbar[:, :n_xp] = plant.C + plant.D_u @ ctrl.K_p
    Cbar[:, n_xp:] = plant.D_u @ ctrl.K_u

    Dv_bar = plant.D_u @ ctrl.B_v
    Dw_bar = plant.D_w.copy()

    return ClosedLoopModel(Abar, Bv_bar, Bw_bar, Cbar, Dv_bar, Dw_bar,
                           as_matrix(W), n_xp, plant, ctrl, settings)


def steady_state(m: ClosedLoopModel, r: np.ndarray,
                 settings: NumericSettings = DEFAULT) -> tuple[np.ndarray, np.ndarray]:
    """Steady state (xbar*, y*) under the constant reference r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    n = m.n_x
    xbar = lu_solve(np.eye(n) - m.Abar, m.Bv_bar @ r.reshape(-1, 1), settings).ravel()
    resid = float(np.max(np.abs(m.Abar @ xbar + m.Bv_bar @ r - xbar))) if n else 0.0
    if resid > 1e-9 * max(1.0, float(np.max(np.abs(xbar))) if n else 1.0):
        raise SingularMatrix(f"steady-state fixed-point residual {resid:.3e}")
    y = m.Cbar @ xbar + m.Dv_bar @ r
    return xbar, y


def output_mean_sequence(m: ClosedLoopModel, x0: np.ndarray, v: np.ndarray,
                         T: int) -> np.ndarray:
    """Mean outputs ybar(t), t = 0..T, under constant v, by state recursion."""
    if T < 0:
        raise ValueError("T must be >= 0")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    v = np.atleast_1d(np.asarray(v, dtype=float))
    out = np.empty((T + 1, m.n_y))
    for t in range(T + 1):
        out[t] = m.Cbar @ x + m.Dv_bar @ v
        x = m.Abar @ x + m.Bv_bar @ v
    return out


def output_cov_sequence(m: ClosedLoopModel, T: int,
                        settings: NumericSettings = DEFAULT) -> tuple[np.ndarray, Mat]:
    """Output covariances Sigma_y(t), t = 0..T (with Sigma_x(0) = 0), and the
    steady-state covariance from the transpose-form Lyapunov equation."""
    if T < 0:
        raise ValueError("T must be >= 0")
    n = m.n_x
    drive = m.Bw_bar @ m.W @ m.Bw_bar.T
    meas = m.Dw_bar @ m.W @ m.Dw_bar.T
    Sx = np.zeros((n, n))
    out = np.empty((T + 1, m.n_y, m.n_y))
    for t in range(T + 1):
        Sy = m.Cbar @ Sx @ m.Cbar.T + meas
        out[t] = 0.5 * (Sy + Sy.T)
        Sx = m.Abar @ Sx @ m.Abar.T + drive
        Sx = 0.5 * (Sx + Sx.T)
    Sx_inf = solve_discrete_lyapunov(m.Abar.T, drive, settings)
    Sy_inf = m.Cbar @ Sx_inf @ m.Cbar.T + meas
    return out, 0.5 * (Sy_inf + Sy_inf.T)


def steady_state_cov(m: ClosedLoopModel, settings: NumericSettings = DEFAULT) -> tuple[Mat, Mat]:
    """Steady-state covariances (Sigma_x_inf, Sigma_y_inf)."""
    drive = m.Bw_bar @ m.W @ m.Bw_bar.T
    Sx_inf = solve_discrete_lyapunov(m.Abar.T, drive, settings)
    Sy_inf = m.Cbar @ Sx_inf @ m.Cbar.T + m.Dw_bar @ m.W @ m.Dw_bar.T
    return 0.5 * (Sx_inf + Sx_inf.T), 0.5 * (Sy_inf + Sy_inf.T)


def discretize_zoh(A_c: Mat, B_cols: list[Mat], dt: float,
                   settings: NumericSettings = DEFAULT) -> tuple[Mat, list[Mat]]:
    """Exact zero-order-hold discretization of (A_c, [B...]) at step dt.

    All input columns are held constant over the sample, so the same
    quadrature applies to control and disturbance channels alike.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    A_c = as_matrix(A_c)
    n = A_c.shape[0]
    mats = [as_matrix(B) for B in B_cols]
    widths = [B.shape[1] for B in mats]
    m = sum(widths)
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A_c
    col = n
    for B in mats:
        if B.shape[0] != n:
            raise DimensionMismatch("B block row count must match A_c")
        M[:n, col:col + B.shape[1]] = B
        col += B.shape[1]
    E = mat_exp(dt * M, settings)
    A_d = E[:n, :n]
    out = []
    col = n
    for w in widths:
        out.append(E[:n, col:col + w])
        col += w
    return A_d, out
