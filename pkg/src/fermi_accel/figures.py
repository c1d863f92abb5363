"""Figure recipes drawn from the CSV files of a run directory."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import MissingInputError
from .model import diffusion_coefficient, windows_up_to
from .svgplot import PALETTE, Figure, limits

KINDS = ("fig1", "fig2", "fig3", "fig4")


def _points(out_dir: Path):
    path = out_dir / "manifest.json"
    if not path.is_file():
        raise MissingInputError(f"no manifest.json in {out_dir}", ["manifest.json"])
    m = json.loads(path.read_text(encoding="ascii"))
    return [(p["lambda"], p["label"]) for p in m["points"] if p["status"] == "ok"]


def _require(out_dir: Path, names):
    missing = [n for n in names if not (out_dir / n).is_file()]
    if missing:
        raise MissingInputError("missing inputs: " + ", ".join(missing), missing)


def _read(out_dir: Path, name: str) -> dict:
    from .runner import read_csv
    return read_csv(out_dir / name)


def fig_sweep_windows(out_dir: Path) -> str:
    """Final momentum spread and mean bounce count against lambda, windows shaded."""
    _require(out_dir, ["sweep.csv"])
    d = _read(out_dir, "sweep.csv")
    lam, dp, nb = d["lambda"], d["dp"], d["mean_bounces"]
    fig = Figure(720, 420)
    ax = fig.add_axes(80, 30, 560, 320, limits(lam, pad=0.02), limits(dp, include_zero=True),
                      xlabel="lambda", ylabel="Delta p")
    for w in windows_up_to(float(lam.max())):
        ax.band(w.lo, w.hi)
    ax.line(lam, dp, PALETTE[0], label="Delta p")
    if np.isfinite(nb).any():
        ax.ylim2 = limits(nb, include_zero=True)
        ax.ylabel2 = "<n>"
        ax.line(lam, nb, PALETTE[1], dash="5,3", label="<n>", secondary=True)
    return fig.to_svg()


def fig_mirrored_distributions(out_dir: Path) -> str:
    """Quantum P(p) upward and classical P(p) downward, one panel per lambda."""
    pts = _points(out_dir)
    need = []
    for _, lab in pts:
        need += [f"hist_lambda={lab}.csv", f"hist_classical_lambda={lab}.csv"]
    if not pts:
        raise MissingInputError("run has no completed points", ["points"])
    _require(out_dir, need)
    width = 360 * len(pts) + 60
    fig = Figure(width, 420)
    for k, (lam, lab) in enumerate(pts):
        q = _read(out_dir, f"hist_lambda={lab}.csv")
        c = _read(out_dir, f"hist_classical_lambda={lab}.csv")
        top = max(float(q["density"].max()), float(c["density"].max()))
        xl = limits(q["bin_center"], c["bin_center"], pad=0.0)
        ax = fig.add_axes(70 + 360 * k, 30, 300, 320, xl, (-1.05 * top, 1.05 * top),
                          xlabel="p", ylabel="P(p)", title=f"lambda = {lam:g}")
        ax.hline(0.0)
        ax.line(q["bin_center"], q["density"], PALETTE[0], width=1.0, label="quantum")
        ax.line(c["bin_center"], -c["density"], PALETTE[1], width=1.0, label="classical")
    return fig.to_svg()


def fig_sweep_diffusion(out_dir: Path) -> str:
    """Momentum spread against lambda with the scaled diffusion law overlaid."""
    _require(out_dir, ["sweep.csv"])
    d = _read(out_dir, "sweep.csv")
    lam, dp = d["lambda"], d["dp"]
    grid = np.linspace(max(float(lam.min()), 1e-3), float(lam.max()), 400)
    ratio = np.array([a / b for a, b in (diffusion_coefficient(x) for x in grid)])
    fig = Figure(720, 420)
    ax = fig.add_axes(80, 30, 560, 320, limits(lam, pad=0.02), limits(dp, include_zero=True),
                      xlabel="lambda", ylabel="Delta p")
    ax.ylim2 = limits(ratio, include_zero=True)
    ax.ylabel2 = "D / D0 (arb. units)"
    ax.line(lam, dp, PALETTE[0], label="Delta p")
    ax.line(grid, ratio, PALETTE[2], dash="4,3", label="D / D0", secondary=True)
    return fig.to_svg()


def fig_breathing(out_dir: Path) -> str:
    """Delta p squared and Delta z against time, one panel per lambda."""
    pts = _points(out_dir)
    if not pts:
        raise MissingInputError("run has no completed points", ["points"])
    _require(out_dir, [f"series_lambda={lab}.csv" for _, lab in pts])
    fig = Figure(720, 300 * len(pts) + 40)
    for k, (lam, lab) in enumerate(pts):
        s = _read(out_dir, f"series_lambda={lab}.csv")
        ax = fig.add_axes(80, 30 + 300 * k, 560, 230, limits(s["t"], pad=0.0),
                          limits(s["dp2"], include_zero=True), xlabel="t",
                          ylabel="Delta p^2", title=f"lambda = {lam:g}")
        ax.ylim2 = limits(s["dz"], include_zero=True)
        ax.ylabel2 = "Delta z"
        ax.line(s["t"], s["dp2"], PALETTE[0], label="Delta p^2")
        ax.line(s["t"], s["dz"], PALETTE[1], dash="5,3", label="Delta z", secondary=True)
    return fig.to_svg()


_RECIPES = {"fig1": fig_sweep_windows, "fig2": fig_mirrored_distributions,
            "fig3": fig_sweep_diffusion, "fig4": fig_breathing}


def emit_figure(kind: str, out_dir) -> str:
    """SVG text of figure ``kind`` built from the files in ``out_dir``."""
    if kind not in _RECIPES:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    return _RECIPES[kind](Path(out_dir))
