"""Dense linear-algebra primitives.

Everything operates on plain ``numpy`` arrays (row-major, float64). Systems in
scope have at most ~10 states, so the algorithms are deliberately dense and
simple: partial-pivot LU, a doubling iteration for the discrete Lyapunov
equation, scaling-and-squaring for the matrix exponential, and an unpivoted
Cholesky factorization used both for sampling and for definiteness tests.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotPD, NotSchur, SingularMatrix
from .settings import DEFAULT, NumericSettings

Mat = np.ndarray


def as_matrix(a) -> Mat:
    """Coerce input to a 2-D float64 array without copying when possible."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def _require_square(a: Mat, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {a.shape}")


def _require_symmetric(a: Mat, name: str) -> None:
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    if a.size and float(np.max(np.abs(a - a.T))) > 1e-9 * scale:
        raise ValueError(f"{name} must be symmetric")


def lu_solve(A: Mat, B: Mat, settings: NumericSettings = DEFAULT) -> Mat:
    """Solve A X = B by LU with partial pivoting.

    Raises SingularMatrix when any pivot falls below
    ``lu_pivot_rel`` times the largest row norm of A.
    """
    A = as_matrix(A)
    B = as_matrix(B)
    _require_square(A, "A")
    n = A.shape[0]
    if B.shape[0] != n:
        raise DimensionMismatch(f"B has {B.shape[0]} rows, expected {n}")
    if n == 0:
        return np.zeros_like(B)

    lu = A.copy()
    x = B.astype(float, copy=True)
    tol = settings.lu_pivot_rel * max(float(np.max(np.abs(A).sum(axis=1))), 1e-300)
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= tol:
            raise SingularMatrix(f"pivot {abs(lu[p, k]):.3e} below tolerance {tol:.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            x[[k, p]] = x[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        factors = lu[k + 1:, k] / lu[k, k]
        lu[k + 1:, k] = factors
        lu[k + 1:, k + 1:] -= np.outer(factors, lu[k, k + 1:])
        x[k + 1:] -= np.outer(factors, x[k])
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - lu[k, k + 1:] @ x[k + 1:]) / lu[k, k]
    return x


def solve_discrete_lyapunov(A: Mat, Q: Mat, settings: NumericSettings = DEFAULT) -> Mat:
    """Solve A' P A - P + Q = 0 for Schur-stable A by the doubling iteration.

    P_{k+1} = P_k + A_k' P_k A_k with A_{k+1} = A_k^2, stopping when the
    increment drops below ``lyap_increment_rel * ||P||_inf``. For the
    "transpose form" X = A X A' + Q pass A transposed.
    """
    A = as_matrix(A)
    Q = as_matrix(Q)
    _require_square(A, "A")
    _require_symmetric(Q, "Q")
    if A.shape != Q.shape:
        raise DimensionMismatch(f"A {A.shape} and Q {Q.shape} differ")

    P = Q.astype(float, copy=True)
    Ak = A.copy()
    prev_incr = np.inf
    growth_streak = 0
    for _ in range(settings.lyap_max_doublings):
        with np.errstate(over="ignore", invalid="ignore"):
            incr = Ak.T @ P @ Ak
        if not np.all(np.isfinite(incr)):
            raise NotSchur("Lyapunov doubling iteration diverged")
        P = P + incr
        incr_norm = float(np.max(np.abs(incr))) if incr.size else 0.0
        p_norm = float(np.max(np.abs(P))) if P.size else 0.0
        if incr_norm <= settings.lyap_increment_rel * max(p_norm, 1e-300):
            return 0.5 * (P + P.T)
        growth_streak = growth_streak + 1 if incr_norm >= prev_incr else 0
        if growth_streak >= 25:
            raise NotSchur("Lyapunov increment not decreasing; A is not Schur")
        prev_incr = incr_norm
        with np.errstate(over="ignore", invalid="ignore"):
            Ak = Ak @ Ak
    raise NotSchur("Lyapunov doubling iteration stalled")


def cholesky(S: Mat, settings: NumericSettings = DEFAULT) -> Mat:
    """Lower-triangular L with L L' = S; raises NotPD on a failing pivot.

    Pivot threshold is ``chol_pivot_rel * trace(S) / n``.
    """
    S = as_matrix(S)
    _require_square(S, "S")
    _require_symmetric(S, "S")
    n = S.shape[0]
    if n == 0:
        return S.copy()
    tol = settings.chol_pivot_rel * max(float(np.trace(S)) / n, 1e-300)
    L = np.zeros_like(S)
    for j in range(n):
        d = S[j, j] - L[j, :j] @ L[j, :j]
        if d <= tol:
            raise NotPD(f"Cholesky pivot {d:.3e} at index {j} below {tol:.3e}")
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (S[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def is_schur(A: Mat, settings: NumericSettings = DEFAULT) -> bool:
    """Stability test: the Lyapunov solve for (A', I) converges to a PD matrix.

    Positive definiteness is asserted with an absolute pivot floor so
    marginally stable matrices are rejected rather than accepted.
    """
    A = as_matrix(A)
    _require_square(A, "A")
    n = A.shape[0]
    if n == 0:
        return True
    try:
        P = solve_discrete_lyapunov(A.T, np.eye(n), settings)
    except NotSchur:
        return False
    # direct pivot sweep with the absolute floor from the contract
    L = np.zeros_like(P)
    for j in range(n):
        d = P[j, j] - L[j, :j] @ L[j, :j]
        if d <= settings.schur_pivot_abs:
            return False
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (P[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return True


def mat_exp(M: Mat, settings: NumericSettings = DEFAULT) -> Mat:
    """Matrix exponential by scaling and squaring with an adaptive Taylor sum.

    The argument is scaled so ||M / 2^s||_inf <= 0.5, the series is summed
    until terms fall below the truncation target, then squared back.
    """
    M = as_matrix(M)
    _require_square(M, "M")
    n = M.shape[0]
    if n == 0:
        return M.copy()
    norm = float(np.max(np.abs(M).sum(axis=1)))
    s = 0
    if norm > 0.5:
        s = int(np.ceil(np.log2(norm / 0.5)))
    Ms = M / (2.0 ** s)
    E = np.eye(n)
    term = np.eye(n)
    for k in range(1, 60):
        term = term @ Ms / k
        E = E + term
        if float(np.max(np.abs(term))) < 0.25 * settings.expm_target:
            break
    for _ in range(s):
        E = E @ E
    return E
