"""Built-in NASA GTM longitudinal and lateral flight-control examples.

Continuous-time models, stabilizing gains, constraint sets, disturbance
covariances, and governor weights are hard-coded to the printed values
(trim: 800 ft, 118.15 ft/s). State and input constraints are stacked into
the output map (y = [x_p; u]) so a single row set covers both; inputs reach
y through the feedback gains after closed-loop assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .governor import Algorithm, GovernorConfig
from .linalg import Mat, solve_discrete_lyapunov
from .model import ClosedLoopModel, ControllerModel, PlantModel, assemble, discretize_zoh
from .oinf import ChanceSpec, ConstraintMode, OinfResult, build_oinf, gamma_compare
from .settings import DEFAULT, NumericSettings
from .sim import ReferenceProfile


@dataclass
class ExampleBundle:
    """A complete, ready-to-run example configuration."""

    name: str
    plant_c: PlantModel               # continuous-time blocks (or discrete)
    ctrl: ControllerModel
    dt: float
    W: Mat
    spec: ChanceSpec
    Q: Mat
    R: Mat
    delta: float
    v_box: Mat
    profile: ReferenceProfile
    x0: tuple[np.ndarray, np.ndarray]
    output_names: list[str] = field(default_factory=list)
    continuous: bool = True
    _loop: ClosedLoopModel | None = field(default=None, repr=False)

    def closed_loop(self, settings: NumericSettings = DEFAULT) -> ClosedLoopModel:
        if self._loop is None:
            if self.continuous:
                A_d, (Bu_d, Bw_d) = discretize_zoh(
                    self.plant_c.A, [self.plant_c.B_u, self.plant_c.B_w],
                    self.dt, settings)
                plant_d = PlantModel(A_d, Bu_d, Bw_d, self.plant_c.C,
                                     self.plant_c.D_u, self.plant_c.D_w)
            else:
                plant_d = self.plant_c
            self._loop = assemble(plant_d, self.ctrl, self.W, settings)
        return self._loop

    def build_oinf(self, eps_rel: float = 1e-3, t_max: int = 1000,
                   settings: NumericSettings = DEFAULT) -> OinfResult:
        return build_oinf(self.closed_loop(settings), self.spec, self.v_box,
                          eps_rel, t_max, settings)

    def governor_config(self, oinf: OinfResult,
                        algorithm: Algorithm = Algorithm.ALG1,
                        settings: NumericSettings = DEFAULT) -> GovernorConfig:
        m = self.closed_loop(settings)
        P = solve_discrete_lyapunov(m.Abar, self.Q, settings)
        return GovernorConfig(P, self.Q, self.R, self.delta, algorithm, oinf)


def _bound_rows(n_y: int, bounds: list[tuple[float, float]]):
    """Rows +-e_i per two-sided bound; returns (G columns, g)."""
    cols = []
    g = []
    for i, (lo, hi) in enumerate(bounds):
        e = np.zeros(n_y)
        e[i] = 1.0
        cols.append(e.copy())
        g.append(hi)
        cols.append(-e)
        g.append(-lo)
    return np.array(cols).T, np.array(g)


def gtm_longitudinal() -> ExampleBundle:
    """Longitudinal flight-path-angle tracking with an integrator controller.

    Individual chance constraints at beta_i = 0.99 on states
    (airspeed, angle of attack, pitch rate, pitch angle) and inputs
    (elevator, throttle).
    """
    A = np.array([
        [-0.0665, -11.4608, 0.1439, -32.1740],
        [-0.0035, -2.4714, 0.9514, 0.0],
        [-0.0090, -43.9070, -3.4738, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
    B_u = np.array([
        [-0.0435, 0.1424],
        [-0.0043, -0.0001],
        [-0.7662, 0.0192],
        [0.0, 0.0],
    ])
    # the disturbance enters with a minus sign in front of the printed block
    B_w = -np.array([
        [-0.0665, -11.4608],
        [-0.0035, -2.4714],
        [-0.0090, -43.9070],
        [0.0, 0.0],
    ])
    C = np.vstack([np.eye(4), np.zeros((2, 4))])
    D_u = np.vstack([np.zeros((4, 2)), np.eye(2)])
    D_w = np.zeros((6, 2))
    plant = PlantModel(A, B_u, B_w, C, D_u, D_w)

    K_p = np.array([
        [-0.4735, -37.7045, 2.4948, 46.3031],
        [-2.4179, 38.5827, 0.2705, -33.6410],
    ])
    K_u = np.array([[2.2715], [-6.1106]])
    B_v = np.zeros((2, 1))
    A_p = np.array([[0.0, -1.0, 0.0, 1.0]])
    A_u = np.array([[1.0]])
    D_v = np.array([[-1.0]])
    ctrl = ControllerModel(K_p, K_u, B_v, A_p, A_u, D_v)

    bounds = [
        (-20.0, 20.0),
        (-math.pi / 32, math.pi / 24),
        (-math.pi / 12, math.pi / 12),
        (-math.pi / 6, math.pi / 6),
        (-math.pi / 6, math.pi / 6),
        (-25.0, 25.0),
    ]
    G, g = _bound_rows(6, bounds)
    spec = ChanceSpec.individual(G, g, 0.99)

    profile = ReferenceProfile([
        (0, [0.0]),
        (20, [0.10]),      # 2 s at dt = 0.1
        (400, [0.0]),      # 40 s
    ])
    return ExampleBundle(
        name="gtm-longitudinal",
        plant_c=plant,
        ctrl=ctrl,
        dt=0.1,
        W=np.diag([1e-2, 1e-4]),
        spec=spec,
        Q=np.eye(5),
        R=np.array([[1e4]]),
        delta=1e-6,
        v_box=np.array([[-math.pi / 4, math.pi / 4]]),
        profile=profile,
        x0=(np.zeros(4), np.zeros(1)),
        output_names=["dU", "dalpha", "dq", "dtheta", "ddelta_e", "ddelta_T"],
    )


def gtm_lateral() -> ExampleBundle:
    """Lateral roll-angle tracking; the twelve bounds are enforced jointly at
    beta = 0.98 with the mode picked by the conservativeness comparator
    (risk allocation here)."""
    A = np.array([
        [-0.5229, 0.0861, -0.9852, 0.2374],
        [-90.5885, -6.2736, 2.0861, 0.0],
        [29.1873, -0.4833, -1.4043, 0.0],
        [0.0, 1.0, 0.0857, 0.0],
    ])
    B_u = np.array([
        [-0.0002, 0.0031],
        [-0.9174, 0.2321],
        [-0.0523, -0.4436],
        [0.0, 0.0],
    ])
    B_w = -np.array([[-0.5229], [-90.5885], [29.1873], [0.0]])
    C = np.vstack([np.eye(4), np.zeros((2, 4))])
    D_u = np.vstack([np.zeros((4, 2)), np.eye(2)])
    D_w = np.zeros((6, 1))
    plant = PlantModel(A, B_u, B_w, C, D_u, D_w)

    K_p = np.array([
        [-1.4874, 0.3021, 0.8549, 2.1801],
        [-0.4431, 0.2363, 1.2214, 2.1289],
    ])
    K_u = np.array([[0.0680], [0.0684]])
    B_v = np.zeros((2, 1))
    A_p = np.array([[0.0, 0.0, 0.0, 1.0]])
    A_u = np.array([[1.0]])
    D_v = np.array([[-1.0]])
    ctrl = ControllerModel(K_p, K_u, B_v, A_p, A_u, D_v)

    bounds = [
        (-math.pi / 12, math.pi / 12),
        (-math.pi / 12, math.pi / 12),
        (-math.pi / 12, math.pi / 12),
        (-math.pi / 3, math.pi / 3),
        (-math.pi / 6, math.pi / 6),
        (-math.pi / 6, math.pi / 6),
    ]
    G, g = _bound_rows(6, bounds)
    beta = 0.98
    _, rec = gamma_compare(6, 12, beta)
    if rec.value == "ce":
        spec = ChanceSpec.joint_confidence_ellipsoid(G, g, beta)
    else:
        spec = ChanceSpec.joint_risk_allocation(G, g, beta)

    profile = ReferenceProfile([
        (0, [0.0]),
        (20, [0.5]),
        (400, [0.0]),
    ])
    return ExampleBundle(
        name="gtm-lateral",
        plant_c=plant,
        ctrl=ctrl,
        dt=0.1,
        W=np.array([[1e-5]]),
        spec=spec,
        Q=np.eye(5),
        R=np.array([[1e4]]),
        delta=1e-6,
        v_box=np.array([[-math.pi / 3, math.pi / 3]]),
        profile=profile,
        x0=(np.zeros(4), np.zeros(1)),
        output_names=["dbeta", "dp", "dr", "dphi", "ddelta_a", "ddelta_r"],
    )


BUILTIN = {
    "gtm-longitudinal": gtm_longitudinal,
    "gtm-lateral": gtm_lateral,
}


def lateral_spec_with_mode(mode: ConstraintMode, beta: float = 0.98) -> ChanceSpec:
    """Lateral constraint spec under an explicitly chosen joint mode."""
    bundle = gtm_lateral()
    G, g = bundle.spec.G, bundle.spec.g
    if mode is ConstraintMode.CONFIDENCE_ELLIPSOID:
        return ChanceSpec.joint_confidence_ellipsoid(G, g, beta)
    if mode is ConstraintMode.RISK_ALLOCATION:
        return ChanceSpec.joint_risk_allocation(G, g, beta)
    return ChanceSpec.individual(G, g, beta)
