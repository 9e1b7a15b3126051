"""Command-line entry point.

Subcommands: build-set, simulate, montecarlo, project, compare-joint,
export-model. Outputs are deterministic given the configuration and seed;
every file carries a versioned header with the tool version, a config hash,
and the seed. CSRG_NUM_THREADS caps Monte Carlo parallelism.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io as cio
from .aircraft import BUILTIN, ExampleBundle
from .errors import CsrgError, Infeasible, NotFinitelyDetermined
from .governor import Algorithm, stability_diagnostics
from .oinf import ChanceSpec, fix_coordinates, gamma_compare, project
from .sim import RngStream, monte_carlo, run_closed_loop

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_NOT_FINITELY_DETERMINED = 2


def _load_bundle(args) -> ExampleBundle:
    name = args.model
    if name in BUILTIN:
        bundle = BUILTIN[name]()
    elif os.path.exists(name):
        bundle = cio.load_model(name)
    else:
        raise CsrgError(f"unknown model '{name}' "
                        f"(builtins: {', '.join(sorted(BUILTIN))})")
    mode = getattr(args, "mode", None)
    beta = getattr(args, "beta", None)
    if mode:
        G, g = bundle.spec.G, bundle.spec.g
        if mode == "individual":
            b = beta if beta is not None else float(np.min(bundle.spec.betas))
            bundle.spec = ChanceSpec.individual(G, g, b)
        elif mode == "ra":
            if beta is None:
                raise CsrgError("--mode ra requires --beta")
            bundle.spec = ChanceSpec.joint_risk_allocation(G, g, beta)
        elif mode == "ce":
            if beta is None:
                raise CsrgError("--mode ce requires --beta")
            bundle.spec = ChanceSpec.joint_confidence_ellipsoid(G, g, beta)
    if getattr(args, "vbox", None):
        rows = []
        for part in args.vbox.split(";"):
            lo, hi = part.split(",")
            rows.append([float(lo), float(hi)])
        bundle.v_box = np.array(rows)
    if getattr(args, "profile", None):
        bundle.profile = cio.load_profile(args.profile)
    return bundle


def _hash_args(args) -> str:
    d = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return cio.config_hash(d)


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_build_set(args) -> int:
    bundle = _load_bundle(args)
    chash = _hash_args(args)
    out = _outdir(args)
    try:
        res = bundle.build_oinf(eps_rel=args.eps_rel, t_max=args.tmax)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NotFinitelyDetermined as exc:
        print(f"not finitely determined: {exc}", file=sys.stderr)
        return EXIT_NOT_FINITELY_DETERMINED
    set_path = os.path.join(out, "set.txt")
    cio.write_set(set_path, res, chash)
    report = [
        f"model: {bundle.name}",
        f"mode: {res.mode.value}",
        f"t_star: {res.t_star}",
        f"rows: {res.set.n_rows}",
        f"eps_rel: {res.eps_rel}",
        f"t_max: {args.tmax}",
    ]
    if res.gamma is not None:
        report.append(f"gamma: {cio.f17(res.gamma)}")
    for j in range(res.v_box.shape[0]):
        report.append(f"v_box[{j}]: [{cio.f17(res.v_box[j, 0])}, "
                      f"{cio.f17(res.v_box[j, 1])}]")
    cio.atomic_write(os.path.join(out, "report.txt"),
                     "\n".join(cio._header("report", chash) + report) + "\n")
    print(f"wrote {set_path} (t*={res.t_star}, {res.set.n_rows} rows)")
    return EXIT_OK


def _governor_cfg(bundle, args, oinf):
    if args.governor == "off":
        return None
    alg = Algorithm.ALG1 if args.governor == "alg1" else Algorithm.ALG2
    return bundle.governor_config(oinf, alg)


def cmd_simulate(args) -> int:
    bundle = _load_bundle(args)
    chash = _hash_args(args)
    out = _outdir(args)
    m = bundle.closed_loop()
    cfg = None
    if args.governor != "off":
        oinf = bundle.build_oinf(t_max=tmax_or_default(args))
        cfg = _governor_cfg(bundle, args, oinf)
    rng = RngStream(args.seed, 0)
    tr = run_closed_loop(m, cfg, bundle.spec, bundle.profile, bundle.x0,
                         args.steps, rng, dt=bundle.dt)
    path = os.path.join(out, "trace.csv")
    cio.write_trace(path, tr, chash)
    print(f"wrote {path} ({tr.T} steps, "
          f"{int(tr.viol.any(axis=1).sum())} violation steps)")
    return EXIT_OK


def tmax_or_default(args):
    return getattr(args, "tmax", 1000) or 1000


def cmd_montecarlo(args) -> int:
    bundle = _load_bundle(args)
    chash = _hash_args(args)
    out = _outdir(args)
    m = bundle.closed_loop()
    cfg = None
    if args.governor != "off":
        oinf = bundle.build_oinf(t_max=tmax_or_default(args))
        cfg = _governor_cfg(bundle, args, oinf)
    rep = monte_carlo(m, cfg, bundle.spec, bundle.profile, bundle.x0,
                      args.steps, args.runs, args.seed, dt=bundle.dt,
                      burn=args.burn)
    if cfg is not None:
        mu, alpha, _ = stability_diagnostics(m, cfg)
        rep.mu_alpha = (mu, alpha)
    path = os.path.join(out, "mcreport.txt")
    cio.write_mcreport(path, rep, chash)
    print(f"wrote {path} (max violation frequency "
          f"{cio.f17(rep.max_viol_freq)}, converged "
          f"{cio.f17(rep.converged_fraction())})")
    return EXIT_OK


def _coord_indices(bundle, m, coords_arg: str) -> tuple[list[int], list[str]]:
    name_map = {}
    for i in range(m.n_xp):
        label = bundle.output_names[i] if i < len(bundle.output_names) else f"xp{i}"
        name_map[label.lstrip("d")] = i
        name_map[label] = i
    for j in range(m.n_v):
        name_map[f"v{j}"] = m.n_x + j
    name_map["v"] = m.n_x
    idx = []
    names = []
    for tokn in coords_arg.split(","):
        tokn = tokn.strip()
        if tokn.isdigit():
            idx.append(int(tokn))
            names.append(f"z{tokn}")
        elif tokn in name_map:
            idx.append(name_map[tokn])
            names.append(tokn)
        else:
            raise CsrgError(f"unknown coordinate '{tokn}' "
                            f"(known: {sorted(set(name_map))})")
    return idx, names


def cmd_project(args) -> int:
    bundle = _load_bundle(args)
    chash = _hash_args(args)
    out = _outdir(args)
    m = bundle.closed_loop()
    res = bundle.build_oinf(t_max=tmax_or_default(args))
    poly = res.set
    label = "full"
    if args.fix_xu0:
        xu_idx = np.arange(m.n_xp, m.n_x)
        poly = fix_coordinates(poly, xu_idx, np.zeros(m.n_xu),
                               m.n_xp, 0, m.n_v)
        label = "xu0"
    idx, names = _coord_indices(bundle, m, args.coords)
    if args.fix_xu0:
        idx = [i if i < m.n_xp else i - m.n_xu for i in idx]
    pts = project(poly, idx, args.dirs)
    path = os.path.join(out, f"points_{label}.csv")
    cio.write_points(path, pts, names, chash, label)
    print(f"wrote {path} ({pts.shape[0]} extreme points)")
    return EXIT_OK


def _parse_range(s: str) -> list[int]:
    if ".." in s:
        a, b = s.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(x) for x in s.split(",")]


def cmd_compare_joint(args) -> int:
    chash = _hash_args(args)
    out = _outdir(args)
    table = []
    for n_y in _parse_range(args.ny):
        for n_g in _parse_range(args.ng):
            gam, rec = gamma_compare(n_y, n_g, args.beta)
            table.append((n_y, n_g, gam, rec.value))
    path = os.path.join(out, "gamma.csv")
    cio.write_gamma_table(path, table, args.beta, chash)
    n_pos = sum(1 for row in table if row[2] > 0)
    print(f"wrote {path} ({len(table)} cells, {n_pos} favor the ellipsoid)")
    return EXIT_OK


def cmd_export_model(args) -> int:
    bundle = _load_bundle(args)
    out = _outdir(args)
    path = os.path.join(out, f"{bundle.name}.json")
    cio.save_model(path, bundle)
    print(f"wrote {path}")
    return EXIT_OK


def _add_common(p, model=True):
    if model:
        p.add_argument("--model", required=True,
                       help="builtin name (gtm-longitudinal, gtm-lateral) or JSON file")
        p.add_argument("--mode", choices=["individual", "ra", "ce"],
                       help="override the constraint mode")
        p.add_argument("--beta", type=float, help="joint confidence level")
        p.add_argument("--vbox", help="reference box override 'lo,hi[;lo,hi]'")
    p.add_argument("--out", default=".", help="output directory")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="csrg",
                                 description="chance-constrained controller "
                                             "state and reference governor")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-set", help="construct the admissible set")
    _add_common(p)
    p.add_argument("--tmax", type=int, default=1000)
    p.add_argument("--eps-rel", type=float, default=1e-3, dest="eps_rel")
    p.set_defaults(func=cmd_build_set)

    p = sub.add_parser("simulate", help="one closed-loop run")
    _add_common(p)
    p.add_argument("--governor", choices=["off", "alg1", "alg2"], default="alg1")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", help="JSON reference profile file")
    p.add_argument("--tmax", type=int, default=1000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", help="Monte Carlo study")
    _add_common(p)
    p.add_argument("--governor", choices=["off", "alg1", "alg2"], default="alg1")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", help="JSON reference profile file")
    p.add_argument("--burn", type=int, default=20)
    p.add_argument("--tmax", type=int, default=1000)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("project", help="projection of the admissible set")
    _add_common(p)
    p.add_argument("--coords", required=True,
                   help="2 or 3 comma-separated coordinate names or indices")
    p.add_argument("--dirs", type=int, default=720)
    p.add_argument("--fix-xu0", action="store_true", dest="fix_xu0",
                   help="restrict the controller state to zero first")
    p.add_argument("--tmax", type=int, default=1000)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("compare-joint", help="conservativeness comparator table")
    _add_common(p, model=False)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--ny", default="1..8")
    p.add_argument("--ng", default="1..20")
    p.set_defaults(func=cmd_compare_joint)

    p = sub.add_parser("export-model", help="write a builtin model as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_export_model)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except CsrgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE if isinstance(exc, Infeasible) else 3


if __name__ == "__main__":
    sys.exit(main())
