"""Numeric tolerances used across the library.

A single frozen record holds every tolerance so call sites can override the
defaults coherently instead of sprinkling magic numbers.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericSettings:
    # linear algebra
    lu_pivot_rel: float = 1e-12        # pivot threshold relative to max row norm
    lyap_increment_rel: float = 1e-14  # doubling-iteration stop, relative to ||P||
    lyap_max_doublings: int = 200
    chol_pivot_rel: float = 1e-12      # pivot threshold relative to trace/n
    schur_pivot_abs: float = 1e-10     # positive-definiteness margin for stability test
    expm_target: float = 1e-12         # truncation target after scaling

    # polyhedra / set construction
    membership_tol: float = 1e-9       # a.z <= b + tol*(1+|b|)
    redundancy_tol: float = 1e-9       # same scaling as membership
    row_drop_norm: float = 1e-12       # rows with smaller ||a|| are vacuous/infeasible
    sigma_zero: float = 1e-14          # variance below this means no tightening

    # LP / QP
    lp_tol: float = 1e-9
    qp_stationarity_tol: float = 1e-8
    qp_primal_tol: float = 1e-9
    qp_complementarity_tol: float = 1e-8
    qp_multiplier_tol: float = 1e-10
    qp_regularization: float = 1e-10
    ball_residual_tol: float = 1e-8

    # governor
    v_equal_tol: float = 1e-12         # componentwise v == r test


DEFAULT = NumericSettings()
