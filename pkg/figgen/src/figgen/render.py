"""Render publication-style figures from csrg CSV and point-list exports.

All math lives in the exporting tool; these scripts only read its versioned
files and draw. Styling defaults: dotted command, dash-dot modified
reference, solid response, dashed constraint lines. Output is a PNG rendered
through the Agg backend with fixed metadata, so identical inputs under one
matplotlib version produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FORMAT_VERSION = 1
KINDS = ("trace", "gamma-surface", "projection-2d", "projection-3d")

_SAVEFIG = dict(dpi=130, metadata={"Software": None})


class FiggenError(Exception):
    pass


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    output: str
    columns: list[str] = field(default_factory=list)   # trace: y-columns
    constraint_lines: list[float] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FiggenError(f"unknown figure kind '{self.kind}'")
        if not self.inputs:
            raise FiggenError("at least one input file is required")


def _check_header(path: str, kind: str) -> None:
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
    want = f"# csrg-{kind} v{FORMAT_VERSION}"
    if first != want:
        raise FiggenError(f"{path}: expected header '{want}', got '{first}'")


def _read_csvish(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path) as fh:
        rows = [ln.rstrip("\n") for ln in fh
                if ln.strip() and not ln.startswith("#")]
    header = rows[0].split(",")
    data = [r.split(",") for r in rows[1:]]
    return header, data


def _columns(path: str, header: list[str], wanted: list[str]) -> None:
    missing = [c for c in wanted if c not in header]
    if missing:
        raise FiggenError(f"{path}: missing columns {missing}; "
                          f"available: {header}")


def render_trace(spec: FigureSpec) -> None:
    path = spec.inputs[0]
    _check_header(path, "trace")
    header, rows = _read_csvish(path)
    cols = spec.columns or ["y[0]"]
    _columns(path, header, ["time_s", "r[0]", "v[0]"] + cols)
    t = np.array([float(r[header.index("time_s")]) for r in rows])
    r_cmd = np.array([float(r[header.index("r[0]")]) for r in rows])
    v_mod = np.array([float(r[header.index("v[0]")]) for r in rows])

    fig, axes = plt.subplots(1, len(cols), figsize=(4.6 * len(cols), 3.4),
                             squeeze=False)
    for k, col in enumerate(cols):
        ax = axes[0][k]
        y = np.array([float(r[header.index(col)]) for r in rows])
        ax.plot(t, y, "-", color="#1f77b4", lw=1.3, label=col)
        if k == 0:
            ax.plot(t, r_cmd, ":", color="#d62728", lw=1.4, label="command")
            ax.plot(t, v_mod, "-.", color="#2ca02c", lw=1.2,
                    label="modified reference")
        for g in spec.constraint_lines:
            ax.axhline(g, color="k", ls="--", lw=0.9)
        ax.set_xlabel("time [s]")
        ax.set_ylabel(col)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8, loc="best")
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    fig.savefig(spec.output, **_SAVEFIG)
    plt.close(fig)


def render_gamma_surface(spec: FigureSpec) -> None:
    path = spec.inputs[0]
    _check_header(path, "gamma")
    header, rows = _read_csvish(path)
    _columns(path, header, ["n_y", "n_g", "gamma"])
    ny = np.array([int(r[header.index("n_y")]) for r in rows])
    ng = np.array([int(r[header.index("n_g")]) for r in rows])
    gm = np.array([float(r[header.index("gamma")]) for r in rows])

    fig = plt.figure(figsize=(5.4, 4.4))
    ax = fig.add_subplot(111, projection="3d")
    pos = gm > 0
    ax.scatter(ny[~pos], ng[~pos], gm[~pos], c="#1f77b4", s=14,
               label="risk allocation less conservative")
    ax.scatter(ny[pos], ng[pos], gm[pos], c="#e6a000", s=14,
               label="confidence ellipsoid less conservative")
    try:
        n_y_vals = np.unique(ny)
        n_g_vals = np.unique(ng)
        if n_y_vals.size * n_g_vals.size == gm.size:
            grid = gm.reshape(n_y_vals.size, n_g_vals.size) \
                if np.all(ny.reshape(n_y_vals.size, n_g_vals.size)
                          == n_y_vals[:, None]) else None
            if grid is not None:
                Yv, Gv = np.meshgrid(n_g_vals, n_y_vals)
                ax.plot_wireframe(Gv, Yv, grid, color="0.6", lw=0.4)
    except Exception:
        pass
    ax.set_xlabel("n_y")
    ax.set_ylabel("n_g")
    ax.set_zlabel("Gamma")
    ax.legend(fontsize=7, loc="upper left")
    if spec.title:
        ax.set_title(spec.title)
    fig.savefig(spec.output, **_SAVEFIG)
    plt.close(fig)


def _load_points(path: str) -> tuple[list[str], np.ndarray]:
    _check_header(path, "points")
    header, rows = _read_csvish(path)
    pts = np.array([[float(x) for x in r] for r in rows])
    return header, pts.reshape(-1, len(header))


def _close_polygon(pts: np.ndarray) -> np.ndarray:
    # points come hull-ordered from the exporter; close the loop for drawing
    return np.vstack([pts, pts[:1]])


def render_projection_2d(spec: FigureSpec) -> None:
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    styles = [("-", "#1f77b4"), ("--", "#2ca02c"), ("-.", "#d62728"),
              (":", "#9467bd")]
    names = None
    for k, path in enumerate(spec.inputs):
        header, pts = _load_points(path)
        if pts.shape[1] != 2:
            raise FiggenError(f"{path}: projection-2d needs 2 columns, "
                              f"got {header}")
        names = header
        ls, color = styles[k % len(styles)]
        label = spec.labels[k] if k < len(spec.labels) else path
        loop = _close_polygon(pts)
        ax.plot(loop[:, 0], loop[:, 1], ls, color=color, lw=1.4, label=label)
        ax.fill(loop[:, 0], loop[:, 1], color=color, alpha=0.08)
    ax.set_xlabel(names[0])
    ax.set_ylabel(names[1])
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8, loc="best")
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    fig.savefig(spec.output, **_SAVEFIG)
    plt.close(fig)


def render_projection_3d(spec: FigureSpec) -> None:
    from mpl_toolkits.mplot3d.art3d import Poly3DCollection
    from scipy.spatial import ConvexHull

    fig = plt.figure(figsize=(5.4, 4.6))
    ax = fig.add_subplot(111, projection="3d")
    colors = ["#1f77b4", "#d62728", "#2ca02c"]
    names = None
    for k, path in enumerate(spec.inputs):
        header, pts = _load_points(path)
        if pts.shape[1] != 3:
            raise FiggenError(f"{path}: projection-3d needs 3 columns, "
                              f"got {header}")
        names = header
        color = colors[k % len(colors)]
        label = spec.labels[k] if k < len(spec.labels) else path
        if pts.shape[0] >= 4:
            hull = ConvexHull(pts)
            faces = [pts[s] for s in hull.simplices]
            coll = Poly3DCollection(faces, alpha=0.25, facecolor=color,
                                    edgecolor=color, linewidths=0.3)
            ax.add_collection3d(coll)
        ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], c=color, s=6, label=label)
    ax.set_xlabel(names[0])
    ax.set_ylabel(names[1])
    ax.set_zlabel(names[2])
    ax.legend(fontsize=7, loc="upper left")
    if spec.title:
        ax.set_title(spec.title)
    fig.savefig(spec.output, **_SAVEFIG)
    plt.close(fig)


_RENDERERS = {
    "trace": render_trace,
    "gamma-surface": render_gamma_surface,
    "projection-2d": render_projection_2d,
    "projection-3d": render_projection_3d,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    _RENDERERS[spec.kind](spec)
    return spec.output


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="figgen",
                                 description="figures from csrg exports")
    ap.add_argument("--kind", choices=KINDS, required=True)
    ap.add_argument("--input", action="append", required=True,
                    help="input export file (repeatable)")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--columns", default="",
                    help="trace: comma-separated column names, e.g. 'y[4]'")
    ap.add_argument("--lines", default="",
                    help="comma-separated constraint levels to draw")
    ap.add_argument("--labels", default="", help="comma-separated curve labels")
    ap.add_argument("--title", default="")
    args = ap.parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=args.input,
        output=args.out,
        columns=[c for c in args.columns.split(",") if c],
        constraint_lines=[float(x) for x in args.lines.split(",") if x],
        labels=[x for x in args.labels.split(",") if x],
        title=args.title,
    )
    try:
        render(spec)
    except FiggenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {spec.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
