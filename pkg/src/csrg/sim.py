"""Closed-loop Monte Carlo simulation with and without the governor.

Disturbances come from a counter-based generator (Philox keyed by
seed + lane index) through a Box-Muller transform, so lanes are reproducible
under any execution order and governor-on/off runs with the same seed see
identical noise. One draw per step feeds both the output equation and the
state update, as the plant equations prescribe.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CsrgError, DimensionMismatch, NotPD
from .governor import GovernorConfig, GovernorEngine
from .linalg import Mat, cholesky
from .model import ClosedLoopModel, steady_state
from .oinf import ChanceSpec
from .settings import DEFAULT, NumericSettings


class RngStream:
    """Counter-based stream: Philox keyed by seed + lane, Box-Muller normals."""

    def __init__(self, seed: int, lane: int = 0):
        self.seed = int(seed)
        self.lane = int(lane)
        self._gen = np.random.Generator(np.random.Philox(key=self.seed + self.lane))

    def normals(self, shape) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        pairs = (n + 1) // 2
        u1 = 1.0 - self._gen.random(pairs)      # (0, 1]
        u2 = self._gen.random(pairs)
        rad = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = rad * np.cos(2.0 * np.pi * u2)
        z[1::2] = rad * np.sin(2.0 * np.pi * u2)
        return z[:n].reshape(shape)


def sample_gaussian(W: Mat, rng: RngStream) -> np.ndarray:
    """One draw from N(0, W); PSD W accepted via a tiny diagonal lift."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if not np.any(W):
        return np.zeros(n)
    L = _gaussian_factor(W)
    return L @ rng.normals(n)


def _gaussian_factor(W: np.ndarray) -> np.ndarray:
    try:
        return cholesky(W)
    except NotPD:
        lift = 1e-14 * max(1.0, float(np.trace(W)) / max(W.shape[0], 1))
        return cholesky(W + lift * np.eye(W.shape[0]))


@dataclass
class ReferenceProfile:
    """Piecewise-constant command: list of (start_step, value) segments."""

    segments: list[tuple[int, np.ndarray]]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("profile needs at least one segment")
        segs = [(int(s), np.atleast_1d(np.asarray(v, dtype=float)))
                for s, v in self.segments]
        if segs[0][0] != 0:
            raise ValueError("first segment must start at step 0")
        starts = [s for s, _ in segs]
        if starts != sorted(starts) or len(set(starts)) != len(starts):
            raise ValueError("segments must be strictly time-ordered")
        dims = {v.shape[0] for _, v in segs}
        if len(dims) != 1:
            raise DimensionMismatch("segment values must share a dimension")
        self.segments = segs

    @property
    def n_v(self) -> int:
        return self.segments[0][1].shape[0]

    def value_at(self, step: int) -> np.ndarray:
        out = self.segments[0][1]
        for s, v in self.segments:
            if step >= s:
                out = v
            else:
                break
        return out

    def as_array(self, T: int) -> np.ndarray:
        out = np.empty((T, self.n_v))
        for t in range(T):
            out[t] = self.value_at(t)
        return out

    @property
    def final_value(self) -> np.ndarray:
        return self.segments[-1][1]

    @property
    def final_start(self) -> int:
        return self.segments[-1][0]


@dataclass
class SimTrace:
    """Per-step record of one closed-loop run."""

    x_p: np.ndarray
    x_u: np.ndarray
    v: np.ndarray
    r: np.ndarray
    u: np.ndarray
    y: np.ndarray
    branch: list[str]
    J: np.ndarray
    viol: np.ndarray          # T x n_g boolean, strict violations G_i'y > g_i
    dt: float = 1.0
    seed: int | None = None

    @property
    def T(self) -> int:
        return self.x_p.shape[0]


def run_closed_loop(m: ClosedLoopModel, cfg: GovernorConfig | None,
                    spec: ChanceSpec, profile: ReferenceProfile,
                    x0: tuple[np.ndarray, np.ndarray], T: int, rng: RngStream,
                    dt: float = 1.0, v_init: np.ndarray | None = None,
                    engine: GovernorEngine | None = None,
                    settings: NumericSettings = DEFAULT) -> SimTrace:
    """Simulate T steps; with cfg None the reference passes straight through.

    Per step: the governor (if any) resets (x_u, v) from the measured plant
    state; the control and output use the same fresh disturbance draw as the
    subsequent state update.
    """
    if m.ctrl is None or m.plant is None:
        raise CsrgError("simulation requires plant and controller blocks")
    plant, ctrl = m.plant, m.ctrl
    x_p = np.asarray(x0[0], dtype=float).ravel().copy()
    x_u = np.asarray(x0[1], dtype=float).ravel().copy()

    w_seq = rng.normals((T, m.n_w))
    if np.any(m.W):
        w_seq = w_seq @ _gaussian_factor(m.W).T
    else:
        w_seq = np.zeros((T, m.n_w))

    eng = None
    st = None
    if cfg is not None:
        eng = engine if engine is not None else GovernorEngine(m, cfg, settings)
        v0 = profile.value_at(0) if v_init is None else \
            np.atleast_1d(np.asarray(v_init, dtype=float))
        st = eng.init_state(x_p, x_u, v0)

    n_g = spec.n_g
    tr_xp = np.empty((T, m.n_xp))
    tr_xu = np.empty((T, m.n_xu))
    tr_v = np.empty((T, m.n_v))
    tr_r = np.empty((T, m.n_v))
    tr_u = np.empty((T, plant.n_u))
    tr_y = np.empty((T, m.n_y))
    tr_J = np.full(T, np.nan)
    branches: list[str] = []
    viol = np.zeros((T, n_g), dtype=bool)

    Gt = spec.G.T
    g = spec.g
    # strict violations only: decisions may ride a bound exactly, so the
    # indicator must not trip on round-off at the boundary
    g_eps = g + 1e-9 * (1.0 + np.abs(g))
    for t in range(T):
        r_t = profile.value_at(t)
        if eng is not None:
            x_u, v_t, diag = eng.step(st, x_p, r_t)
            branches.append(diag.branch)
            tr_J[t] = diag.J
        else:
            v_t = r_t
            branches.append("off")
        w_t = w_seq[t]
        u_t = ctrl.K_p @ x_p + ctrl.K_u @ x_u + ctrl.B_v @ v_t
        y_t = plant.C @ x_p + plant.D_u @ u_t + plant.D_w @ w_t
        tr_xp[t] = x_p
        tr_xu[t] = x_u
        tr_v[t] = v_t
        tr_r[t] = r_t
        tr_u[t] = u_t
        tr_y[t] = y_t
        viol[t] = (Gt @ y_t) > g_eps
        x_p = plant.A @ x_p + plant.B_u @ u_t + plant.B_w @ w_t
        x_u = ctrl.A_p @ tr_xp[t] + ctrl.A_u @ x_u + ctrl.D_v @ v_t
    return SimTrace(tr_xp, tr_xu, tr_v, tr_r, tr_u, tr_y, branches, tr_J,
                    viol, dt, rng.seed + rng.lane)


@dataclass
class McReport:
    """Aggregated Monte Carlo study over independent lanes."""

    n_runs: int
    T: int
    base_seed: int
    viol_counts: np.ndarray          # T x n_g
    t_f: np.ndarray                  # per run; -1 when never converged
    post_mean: np.ndarray            # per run; nan when no convergence window
    contraction_ok: np.ndarray       # per run (Alg1 monotone contraction)
    fallback_steps: np.ndarray       # per run
    mu_alpha: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def viol_freq(self) -> np.ndarray:
        return self.viol_counts / max(self.n_runs, 1)

    @property
    def max_viol_freq(self) -> float:
        return float(np.max(self.viol_freq)) if self.viol_counts.size else 0.0

    def converged_fraction(self) -> float:
        return float(np.mean(self.t_f >= 0)) if self.n_runs else 0.0


def _lane_summary(m, cfg, spec, profile, x0, T, dt, lane, base_seed,
                  burn, engine, settings):
    rng = RngStream(base_seed, lane)
    tr = run_closed_loop(m, cfg, spec, profile, x0, T, rng, dt,
                         engine=engine, settings=settings)
    r_s = profile.final_value
    conv = np.all(tr.v == r_s, axis=1)
    t_f = -1
    if conv.size and conv[-1]:
        idx = np.nonzero(~conv)[0]
        t_f = int(idx[-1] + 1) if idx.size else 0
    post_mean = np.nan
    if cfg is not None and t_f >= 0:
        start = min(t_f + burn, T)
        if start < T:
            xbar_star, _ = steady_state(m, r_s, settings)
            Z = np.hstack([tr.x_p[start:], tr.x_u[start:]]) - xbar_star
            post_mean = float(np.mean(np.einsum("ij,jk,ik->i", Z, cfg.P, Z)))
    contraction_ok = True
    if cfg is not None:
        delta = cfg.delta
        R = cfg.R
        for t in range(T):
            if tr.branch[t] != "optimized":
                continue
            dv = tr.v[t] - tr.r[t]
            prev_v = tr.v[t - 1] if t > 0 else tr.v[0]
            dv_prev = prev_v - tr.r[t]
            lhs = float(np.sqrt(max(dv @ R @ dv, 0.0)))
            rhs = max(float(np.sqrt(max(dv_prev @ R @ dv_prev, 0.0))) - delta, 0.0)
            if lhs > rhs + 1e-8:
                contraction_ok = False
                break
    fallbacks = sum(1 for b in tr.branch if b == "fallback")
    return tr.viol.astype(np.int64), t_f, post_mean, contraction_ok, fallbacks


def _mc_worker(payload):
    (m, cfg, spec, profile, x0, T, dt, lanes, base_seed, burn, settings) = payload
    engine = GovernorEngine(m, cfg, settings) if cfg is not None else None
    out = []
    for lane in lanes:
        out.append((lane, _lane_summary(m, cfg, spec, profile, x0, T, dt,
                                        lane, base_seed, burn, engine, settings)))
    return out


def max_workers_from_env() -> int:
    cap = os.environ.get("CSRG_NUM_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def monte_carlo(m: ClosedLoopModel, cfg: GovernorConfig | None,
                spec: ChanceSpec, profile: ReferenceProfile,
                x0: tuple[np.ndarray, np.ndarray], T: int, n_runs: int,
                base_seed: int, dt: float = 1.0, burn: int = 20,
                workers: int | None = None,
                settings: NumericSettings = DEFAULT) -> McReport:
    """Independent lanes with seeds base_seed + lane; order-independent reduce."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    workers = workers if workers is not None else max_workers_from_env()
    workers = max(1, min(workers, n_runs))

    results: dict[int, tuple] = {}
    if workers == 1:
        engine = GovernorEngine(m, cfg, settings) if cfg is not None else None
        for lane in range(n_runs):
            results[lane] = _lane_summary(m, cfg, spec, profile, x0, T, dt,
                                          lane, base_seed, burn, engine, settings)
    else:
        chunks = [list(range(w, n_runs, workers)) for w in range(workers)]
        payloads = [(m, cfg, spec, profile, x0, T, dt, chunk, base_seed,
                     burn, settings) for chunk in chunks if chunk]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_mc_worker, payloads):
                for lane, summ in part:
                    results[lane] = summ

    n_g = spec.n_g
    viol_counts = np.zeros((T, n_g), dtype=np.int64)
    t_f = np.empty(n_runs, dtype=np.int64)
    post_mean = np.empty(n_runs)
    contraction = np.empty(n_runs, dtype=bool)
    fallbacks = np.empty(n_runs, dtype=np.int64)
    for lane in range(n_runs):
        v, tf, pm, c_ok, fb = results[lane]
        viol_counts += v
        t_f[lane] = tf
        post_mean[lane] = pm
        contraction[lane] = c_ok
        fallbacks[lane] = fb
    return McReport(n_runs, T, base_seed, viol_counts, t_f, post_mean,
                    contraction, fallbacks,
                    meta={"burn": burn, "workers": workers})
