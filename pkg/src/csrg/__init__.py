"""Chance-constrained controller state and reference governor toolkit."""

from .errors import (AssumptionViolated, CsrgError, DimensionMismatch,
                     DomainError, Infeasible, InitialStateInadmissible,
                     NotFinitelyDetermined, NotPD, NotPSD, NotSchur,
                     SingularMatrix, Unbounded)
from .settings import DEFAULT, NumericSettings
from .linalg import cholesky, is_schur, lu_solve, mat_exp, solve_discrete_lyapunov
from .probfuncs import chi2_cdf, chi2_inv, erf, erf_inv, normal_cdf, normal_quantile
from .model import (ClosedLoopModel, ControllerModel, PlantModel, assemble,
                    discretize_zoh, output_cov_sequence, output_mean_sequence,
                    steady_state, steady_state_cov)
from .solvers import (BallConstraint, LpResult, QpProblem, QpResult,
                      SolveStatus, find_feasible_point, qp_kkt_residuals,
                      solve_lp, solve_qp, solve_qp_ball)
from .oinf import (ChanceSpec, ConstraintMode, OinfResult, Polyhedron,
                   Recommendation, build_oinf, build_tilde_omega,
                   fix_coordinates, gamma_compare, max_violation, membership,
                   project, risk_allocate, support_points, tightened_rhs,
                   verify_finite_determination)
from .governor import (Algorithm, GovernorConfig, GovernorEngine,
                       GovernorState, StepDiag, cost_terms,
                       stability_diagnostics, step_alg1, step_alg2)
from .sim import (McReport, ReferenceProfile, RngStream, SimTrace,
                  monte_carlo, run_closed_loop, sample_gaussian)
from .aircraft import (BUILTIN, ExampleBundle, gtm_lateral, gtm_longitudinal,
                       lateral_spec_with_mode)

__version__ = "0.1.0"
