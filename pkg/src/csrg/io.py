"""File formats: set exports, trace CSVs, Monte Carlo reports, point lists,
gamma tables, and the JSON model/profile schema.

Every file starts with a versioned header carrying the tool version, a
config hash, and the seed where applicable. Floats are rendered with 17
significant digits so re-reading reproduces the in-memory values bit-exactly.
Writes go to a temporary file in the same directory followed by an atomic
rename, so readers never observe partial files.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from . import __version__ as _pkg_version
from .aircraft import ExampleBundle
from .errors import CsrgError
from .model import ControllerModel, PlantModel
from .oinf import ChanceSpec, ConstraintMode, OinfResult, Polyhedron
from .sim import McReport, ReferenceProfile, SimTrace

FORMAT_VERSION = 1


def f17(x: float) -> str:
    return format(float(x), ".17g")


def config_hash(obj) -> str:
    """Short stable hash of a JSON-serializable configuration record."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".csrg-tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(kind: str, chash: str, seed=None) -> list[str]:
    return [
        f"# csrg-{kind} v{FORMAT_VERSION}",
        f"# tool_version: {_pkg_version}",
        f"# config_hash: {chash}",
        f"# seed: {seed if seed is not None else '-'}",
    ]


def read_header(path: str, kind: str) -> dict:
    meta = {}
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != f"# csrg-{kind} v{FORMAT_VERSION}":
            raise CsrgError(f"{path}: expected header 'csrg-{kind} v{FORMAT_VERSION}'")
        for line in fh:
            if not line.startswith("# ") or ":" not in line:
                break
            key, _, val = line[2:].partition(":")
            meta[key.strip()] = val.strip()
    return meta


# ---------------------------------------------------------------- set files

def write_set(path: str, res: OinfResult, chash: str = "") -> None:
    lines = _header("set", chash)
    poly = res.set
    lines.append(f"dims {poly.n_xp} {poly.n_xu} {poly.n_v}")
    lines.append(f"mode {res.mode.value}")
    lines.append(f"t_star {res.t_star}")
    lines.append(f"eps_rel {f17(res.eps_rel)}")
    if res.gamma is not None:
        lines.append(f"gamma {f17(res.gamma)}")
    for j in range(res.v_box.shape[0]):
        lines.append(f"v_box {f17(res.v_box[j, 0])} {f17(res.v_box[j, 1])}")
    lines.append(f"rows {poly.n_rows}")
    for i in range(poly.n_rows):
        coeff = " ".join(f17(a) for a in poly.A[i])
        lines.append(f"row {poly.stages[i]} {coeff} {f17(poly.b[i])}")
    om = res.tilde_omega
    lines.append(f"omega_rows {om.n_rows}")
    for i in range(om.n_rows):
        coeff = " ".join(f17(a) for a in om.A[i])
        lines.append(f"orow {coeff} {f17(om.b[i])}")
    tt = res.tightening_table
    lines.append(f"tightening {tt.shape[0]} {tt.shape[1]}")
    for t in range(tt.shape[0]):
        lines.append("tight " + " ".join(f17(c) for c in tt[t]))
    atomic_write(path, "\n".join(lines) + "\n")


def read_set(path: str) -> OinfResult:
    read_header(path, "set")
    dims = None
    mode = None
    t_star = None
    eps_rel = None
    gamma = None
    v_box = []
    rows = []
    stages = []
    orows = []
    tight = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            if tok[0] == "dims":
                dims = (int(tok[1]), int(tok[2]), int(tok[3]))
            elif tok[0] == "mode":
                mode = ConstraintMode(tok[1])
            elif tok[0] == "t_star":
                t_star = int(tok[1])
            elif tok[0] == "eps_rel":
                eps_rel = float(tok[1])
            elif tok[0] == "gamma":
                gamma = float(tok[1])
            elif tok[0] == "v_box":
                v_box.append([float(tok[1]), float(tok[2])])
            elif tok[0] == "row":
                stages.append(int(tok[1]))
                vals = [float(x) for x in tok[2:]]
                rows.append(vals)
            elif tok[0] == "orow":
                orows.append([float(x) for x in tok[1:]])
            elif tok[0] == "tight":
                tight.append([float(x) for x in tok[1:]])
    if dims is None or t_star is None:
        raise CsrgError(f"{path}: malformed set file")
    n_xp, n_xu, n_v = dims
    dim = n_xp + n_xu + n_v
    A = np.array([r[:dim] for r in rows]).reshape(-1, dim)
    b = np.array([r[dim] for r in rows])
    poly = Polyhedron(A, b, n_xp, n_xu, n_v, np.array(stages, dtype=int))
    Ao = np.array([r[:n_v] for r in orows]).reshape(-1, n_v)
    bo = np.array([r[n_v] for r in orows])
    om = Polyhedron(Ao, bo, 0, 0, n_v)
    table = np.array(tight) if tight else np.zeros((0, 0))
    return OinfResult(poly, t_star, om, table, mode,
                      np.array(v_box).reshape(-1, 2), eps_rel, None, gamma)


# ---------------------------------------------------------------- trace CSV

def trace_columns(tr: SimTrace) -> list[str]:
    cols = ["step", "time_s"]
    cols += [f"x_p[{i}]" for i in range(tr.x_p.shape[1])]
    cols += [f"x_u[{i}]" for i in range(tr.x_u.shape[1])]
    cols += [f"v[{i}]" for i in range(tr.v.shape[1])]
    cols += [f"r[{i}]" for i in range(tr.r.shape[1])]
    cols += [f"u[{i}]" for i in range(tr.u.shape[1])]
    cols += [f"y[{i}]" for i in range(tr.y.shape[1])]
    cols += ["branch", "J"]
    cols += [f"viol[{i + 1}]" for i in range(tr.viol.shape[1])]
    return cols


def write_trace(path: str, tr: SimTrace, chash: str = "") -> None:
    lines = _header("trace", chash, tr.seed)
    lines.append(f"# dt: {f17(tr.dt)}")
    lines.append(",".join(trace_columns(tr)))
    for t in range(tr.T):
        parts = [str(t), f17(t * tr.dt)]
        for arr in (tr.x_p, tr.x_u, tr.v, tr.r, tr.u, tr.y):
            parts += [f17(x) for x in arr[t]]
        parts.append(tr.branch[t])
        parts.append(f17(tr.J[t]))
        parts += [str(int(x)) for x in tr.viol[t]]
        lines.append(",".join(parts))
    atomic_write(path, "\n".join(lines) + "\n")


def read_trace(path: str) -> SimTrace:
    meta = read_header(path, "trace")
    dt = float(meta.get("dt", 1.0))
    seed = None if meta.get("seed", "-") == "-" else int(meta["seed"])
    with open(path) as fh:
        data_lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header = data_lines[0].split(",")
    rows = [ln.split(",") for ln in data_lines[1:] if ln]

    def block(prefix):
        idx = [k for k, c in enumerate(header) if c.startswith(prefix + "[")]
        return idx

    ix_p, ix_u = block("x_p"), block("x_u")
    iv, ir, iu, iy = block("v"), block("r"), block("u"), block("y")
    iviol = block("viol")
    ibr = header.index("branch")
    iJ = header.index("J")
    T = len(rows)

    def take(idx):
        return np.array([[float(row[k]) for k in idx] for row in rows]) \
            .reshape(T, len(idx))

    tr = SimTrace(take(ix_p), take(ix_u), take(iv), take(ir), take(iu),
                  take(iy), [row[ibr] for row in rows],
                  np.array([float(row[iJ]) for row in rows]),
                  np.array([[row[k] == "1" for k in iviol] for row in rows])
                  .reshape(T, len(iviol)),
                  dt, seed)
    return tr


# ---------------------------------------------------------------- MC report

def write_mcreport(path: str, rep: McReport, chash: str = "") -> None:
    lines = _header("mcreport", chash, rep.base_seed)
    lines.append(f"runs {rep.n_runs}")
    lines.append(f"steps {rep.T}")
    if rep.mu_alpha is not None:
        lines.append(f"mu_alpha {f17(rep.mu_alpha[0])} {f17(rep.mu_alpha[1])}")
    lines.append("t_f " + " ".join(str(int(x)) for x in rep.t_f))
    lines.append("post_mean " + " ".join(f17(x) for x in rep.post_mean))
    lines.append("contraction " + " ".join(str(int(x)) for x in rep.contraction_ok))
    lines.append("fallbacks " + " ".join(str(int(x)) for x in rep.fallback_steps))
    finite = rep.t_f[rep.t_f >= 0]
    if finite.size:
        qs = np.percentile(finite, [50, 90, 100])
        lines.append("# t_f quantiles (50/90/100): " +
                     " ".join(str(int(q)) for q in qs))
    lines.append("# per-step violation counts; columns: step count_1..count_ng")
    for t in range(rep.T):
        lines.append(f"v {t} " + " ".join(str(int(c)) for c in rep.viol_counts[t]))
    atomic_write(path, "\n".join(lines) + "\n")


def read_mcreport(path: str) -> McReport:
    meta = read_header(path, "mcreport")
    seed = None if meta.get("seed", "-") == "-" else int(meta["seed"])
    runs = steps = None
    mu_alpha = None
    t_f = post = contr = fb = None
    counts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            if tok[0] == "runs":
                runs = int(tok[1])
            elif tok[0] == "steps":
                steps = int(tok[1])
            elif tok[0] == "mu_alpha":
                mu_alpha = (float(tok[1]), float(tok[2]))
            elif tok[0] == "t_f":
                t_f = np.array([int(x) for x in tok[1:]], dtype=np.int64)
            elif tok[0] == "post_mean":
                post = np.array([float(x) for x in tok[1:]])
            elif tok[0] == "contraction":
                contr = np.array([x == "1" for x in tok[1:]])
            elif tok[0] == "fallbacks":
                fb = np.array([int(x) for x in tok[1:]], dtype=np.int64)
            elif tok[0] == "v":
                counts.append([int(x) for x in tok[2:]])
    if runs is None or steps is None:
        raise CsrgError(f"{path}: malformed report")
    return McReport(runs, steps, seed if seed is not None else 0,
                    np.array(counts, dtype=np.int64), t_f, post, contr, fb,
                    mu_alpha)


# ---------------------------------------------------------------- points

def write_points(path: str, points: np.ndarray, coords: list[str],
                 chash: str = "", label: str = "") -> None:
    lines = _header("points", chash)
    if label:
        lines.append(f"# label: {label}")
    lines.append(",".join(coords))
    for p in np.atleast_2d(points):
        lines.append(",".join(f17(x) for x in p))
    atomic_write(path, "\n".join(lines) + "\n")


def read_points(path: str) -> tuple[list[str], np.ndarray]:
    read_header(path, "points")
    with open(path) as fh:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    names = rows[0].split(",")
    pts = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]])
    return names, pts.reshape(-1, len(names))


def write_gamma_table(path: str, table: list[tuple[int, int, float, str]],
                      beta: float, chash: str = "") -> None:
    lines = _header("gamma", chash)
    lines.append(f"# beta: {f17(beta)}")
    lines.append("n_y,n_g,gamma,recommendation")
    for n_y, n_g, gam, rec in table:
        lines.append(f"{n_y},{n_g},{f17(gam)},{rec}")
    atomic_write(path, "\n".join(lines) + "\n")


def read_gamma_table(path: str) -> list[tuple[int, int, float, str]]:
    read_header(path, "gamma")
    out = []
    with open(path) as fh:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    for ln in rows[1:]:
        a, b, c, d = ln.split(",")
        out.append((int(a), int(b), float(c), d))
    return out


# ---------------------------------------------------------------- model JSON

_PLANT_KEYS = {"A", "B_u", "B_w", "C", "D_u", "D_w"}
_CTRL_KEYS = {"K_p", "K_u", "B_v", "A_p", "A_u", "D_v"}
_CONSTR_KEYS = {"G", "g", "mode", "betas", "beta"}
_TOP_KEYS = {"name", "dt", "continuous", "plant", "controller", "W",
             "constraints", "governor", "v_box", "profile", "x0"}
_GOV_KEYS = {"Q", "R", "delta"}
_X0_KEYS = {"x_p", "x_u"}
_PROFILE_KEYS = {"segments"}
_SEG_KEYS = {"start_step", "value"}


def _check_keys(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise CsrgError(f"unknown keys {sorted(unknown)} in {where}")


def profile_from_dict(d: dict) -> ReferenceProfile:
    _check_keys(d, _PROFILE_KEYS, "profile")
    segs = []
    for s in d["segments"]:
        _check_keys(s, _SEG_KEYS, "profile segment")
        segs.append((int(s["start_step"]), np.asarray(s["value"], dtype=float)))
    return ReferenceProfile(segs)


def profile_to_dict(p: ReferenceProfile) -> dict:
    return {"segments": [{"start_step": int(s), "value": [float(x) for x in v]}
                         for s, v in p.segments]}


def load_profile(path: str) -> ReferenceProfile:
    with open(path) as fh:
        return profile_from_dict(json.load(fh))


def bundle_to_dict(b: ExampleBundle) -> dict:
    def mat(x):
        arr = np.asarray(x, dtype=float)
        if arr.size == 0:
            # preserve zero dimensions explicitly; [] loses the shape
            return {"shape": list(arr.shape)}
        return arr.tolist()

    spec = b.spec
    constraints = {"G": mat(spec.G), "g": mat(spec.g), "mode": spec.mode.value}
    if spec.mode is ConstraintMode.INDIVIDUAL:
        constraints["betas"] = mat(spec.betas)
    else:
        constraints["beta"] = float(spec.beta_joint)
    return {
        "name": b.name,
        "dt": float(b.dt),
        "continuous": bool(b.continuous),
        "plant": {k: mat(getattr(b.plant_c, k)) for k in
                  ("A", "B_u", "B_w", "C", "D_u", "D_w")},
        "controller": {k: mat(getattr(b.ctrl, k)) for k in
                       ("K_p", "K_u", "B_v", "A_p", "A_u", "D_v")},
        "W": mat(b.W),
        "constraints": constraints,
        "governor": {"Q": mat(b.Q), "R": mat(b.R), "delta": float(b.delta)},
        "v_box": mat(b.v_box),
        "profile": profile_to_dict(b.profile),
        "x0": {"x_p": mat(b.x0[0]), "x_u": mat(b.x0[1])},
    }


def bundle_from_dict(d: dict) -> ExampleBundle:
    _check_keys(d, _TOP_KEYS, "model")
    _check_keys(d["plant"], _PLANT_KEYS, "plant")
    _check_keys(d["controller"], _CTRL_KEYS, "controller")
    _check_keys(d["constraints"], _CONSTR_KEYS, "constraints")
    _check_keys(d["governor"], _GOV_KEYS, "governor")
    _check_keys(d["x0"], _X0_KEYS, "x0")

    def arr2(x):
        if isinstance(x, dict):
            return np.zeros(tuple(int(s) for s in x["shape"]))
        return np.atleast_2d(np.asarray(x, dtype=float))

    def vec(x):
        if isinstance(x, dict):
            return np.zeros(int(np.prod(x["shape"])))
        return np.asarray(x, dtype=float).ravel()

    plant = PlantModel(**{k: arr2(v) for k, v in d["plant"].items()})
    ctrl = ControllerModel(**{k: arr2(v) for k, v in d["controller"].items()})
    c = d["constraints"]
    mode = ConstraintMode(c.get("mode", "individual"))
    if mode is ConstraintMode.INDIVIDUAL:
        spec = ChanceSpec.individual(arr2(c["G"]), np.asarray(c["g"], dtype=float),
                                     np.asarray(c["betas"], dtype=float))
    elif mode is ConstraintMode.RISK_ALLOCATION:
        spec = ChanceSpec.joint_risk_allocation(
            arr2(c["G"]), np.asarray(c["g"], dtype=float), float(c["beta"]))
    else:
        spec = ChanceSpec.joint_confidence_ellipsoid(
            arr2(c["G"]), np.asarray(c["g"], dtype=float), float(c["beta"]))
    gov = d["governor"]
    return ExampleBundle(
        name=d.get("name", "model"),
        plant_c=plant,
        ctrl=ctrl,
        dt=float(d["dt"]),
        W=arr2(d["W"]),
        spec=spec,
        Q=arr2(gov["Q"]),
        R=arr2(gov["R"]),
        delta=float(gov["delta"]),
        v_box=np.asarray(d["v_box"], dtype=float).reshape(-1, 2),
        profile=profile_from_dict(d["profile"]),
        x0=(vec(d["x0"]["x_p"]), vec(d["x0"]["x_u"])),
        continuous=bool(d.get("continuous", True)),
    )


def save_model(path: str, b: ExampleBundle) -> None:
    atomic_write(path, json.dumps(bundle_to_dict(b), indent=2) + "\n")


def load_model(path: str) -> ExampleBundle:
    with open(path) as fh:
        return bundle_from_dict(json.load(fh))
