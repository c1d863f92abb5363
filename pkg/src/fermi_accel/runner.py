"""Run orchestration and deterministic persistence.

One work unit per lambda point.  Every output goes through a temp file
and ``os.replace`` so an interrupted run never leaves a truncated file,
and the manifest is rewritten after each completed point so it always
says which points are done.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, analysis, kernels
from .classical import EnsembleSpec, evolve_ensemble, standard_map_diffusion
from .config import RunConfig, build_config
from .errors import ConfigError, CoverageError, FermiAccelError, FitError, VerificationError
from .model import diffusion_coefficient
from .quantum import Absorber, PropagatorConfig, SpatialGrid, auto_grid, evolve_quantum, init_gaussian

MANIFEST = "manifest.json"
SWEEP_COLUMNS = ("lambda", "dp", "dz", "mean_bounces", "alpha", "comb_contrast")
SERIES_COLUMNS = ("t", "norm", "z_mean", "dz", "p_mean", "dp2", "absorbed")
HIST_COLUMNS = ("bin_center", "density")
DIFFUSION_COLUMNS = ("lambda", "K", "d_measured", "d_predicted", "d0")
CLASSICAL_HIST_WIDTH = 0.1
QUANTUM_HIST_WIDTH = 0.1


def fmt(x) -> str:
    """Shortest round-trip text for a number, independent of locale."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def csv_bytes(columns, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue().encode("ascii")


def read_csv(path) -> dict:
    """Columns of a CSV written by this module, as float arrays."""
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def atomic_write(path: Path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def lambda_labels(lambdas) -> list[str]:
    """File-name labels: three decimals unless that would collide."""
    short = [f"{x:.3f}" for x in lambdas]
    if len(set(short)) == len(short):
        return short
    return [repr(float(x)) for x in lambdas]


def fixed_width_histogram(values, width: float, bins: Optional[int] = None):
    """Density histogram on bins of ``width`` aligned to multiples of it.

    Returns ``(centers, density, noise)`` where ``noise`` is the counting
    uncertainty of each density value (one count for empty bins).
    """
    values = np.asarray(values, float)
    if values.size == 0:
        return np.array([0.0]), np.array([0.0]), np.array([0.0])
    if bins is not None:
        edges = np.histogram_bin_edges(values, int(bins))
    else:
        lo = math.floor(values.min() / width) - 1
        hi = math.ceil(values.max() / width) + 1
        edges = np.arange(lo, hi + 1) * width
    counts, edges = np.histogram(values, bins=edges)
    norm = values.size * np.diff(edges)
    return (0.5 * (edges[1:] + edges[:-1]), counts / norm,
            np.sqrt(np.maximum(counts, 1)) / norm)


def trimmed_density(p, dens, width: float, rel: float = 1e-12):
    """Average a fine momentum density onto ``width`` bins, dropping empty tails."""
    keep = np.flatnonzero(dens > rel * dens.max()) if dens.size and dens.max() > 0 else np.array([], int)
    if keep.size == 0:
        return p[:1], dens[:1]
    i0, i1 = keep[0], keep[-1] + 1
    x, y = analysis.rebin(p[i0:i1], dens[i0:i1], width)
    return x, y


@dataclass
class PointResult:
    lam: float
    label: str
    status: str = "pending"
    error: Optional[str] = None
    dp: float = float("nan")
    dz: float = float("nan")
    mean_bounces: float = float("nan")
    alpha: float = float("nan")
    comb_contrast: float = float("nan")
    details: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)


@dataclass
class RunResult:
    output_dir: Path
    manifest: dict
    points: list

    @property
    def ok(self) -> bool:
        return all(p.status == "ok" for p in self.points)


def _comb_stats(x, y, noise=None) -> dict:
    out = {"n_peaks": 0, "peak_spacing": float("nan"), "comb_contrast": 0.0}
    if len(x) < 32:
        return out
    peaks = analysis.detect_spikes(x, y, noise=noise)
    out["n_peaks"] = len(peaks)
    out["peak_spacing"] = analysis.peak_spacing(peaks)
    if len(peaks) >= 3:
        try:
            out["comb_contrast"] = analysis.fit_comb_model(x, y, peaks).contrast
        except FitError as exc:
            out["comb_contrast"] = exc.best.contrast if exc.best is not None else 0.0
            out["fit_error"] = str(exc)
    return out


def _alpha(t, dp2) -> float:
    mask = t > 0
    try:
        return analysis.fit_power_law(t[mask], dp2[mask]).alpha
    except FitError:
        return float("nan")


def _classical_point(cfg: RunConfig, lam: float, workers: int, mode: str):
    e = cfg.ensemble
    spec = EnsembleSpec(e.n, e.z_mean, e.p_mean, e.z_std, e.p_std, cfg.seed)
    s = evolve_ensemble(spec, cfg.params(lam), mode, cfg.t_final, n_samples=cfg.n_samples,
                        workers=workers, dt=cfg.classical_dt)
    t = s.sample_times
    n = len(t)
    series = np.column_stack([t, np.ones(n), s.z_mean, s.z_var, s.p_mean, s.p_var ** 2,
                              np.zeros(n)])
    hx, hy, hn = fixed_width_histogram(s.final_p, CLASSICAL_HIST_WIDTH, cfg.hist_bins)
    details = {"n_particles": int(len(s.final_p)), "n_excluded": s.n_excluded,
               "n_stuck": s.n_stuck, "n_rejected": s.n_rejected, "status_counts": s.status_counts}
    if mode == "soft":
        details.update(dt=s.dt, n_clamped=s.n_clamped)
    summary = dict(dp=float(s.p_var[-1]), dz=float(s.z_var[-1]),
                   mean_bounces=float(s.mean_bounces[-1]), alpha=_alpha(t, series[:, 5]))
    return series, (hx, hy, hn), summary, details


def _quantum_point(cfg: RunConfig, lam: float):
    q = cfg.quantum
    e = cfg.ensemble
    params = cfg.params(lam)
    if q.grid is not None:
        grid = SpatialGrid(q.grid.z_min, q.grid.z_max, q.grid.n_points)
    else:
        grid = auto_grid(params, e.z_mean, e.z_std, e.p_std, cfg.t_final,
                         absorber_frac=q.absorber_frac, seed=cfg.seed)
    absorber = Absorber(q.absorber_frac) if q.absorber_on else None
    pc = PropagatorConfig(dt=q.dt, absorber=absorber, sample_stride=q.sample_stride)
    psi = init_gaussian(grid, e.z_mean, e.p_mean, e.z_std, q.kbar)
    s = evolve_quantum(psi, params, pc, cfg.t_final)
    series = np.column_stack([s.sample_times, s.norm, s.z_mean, s.dz, s.p_mean, s.dp2,
                              s.absorbed])
    hx, hy = trimmed_density(s.momentum, s.momentum_density, QUANTUM_HIST_WIDTH)
    details = {"grid": {"z_min": grid.z_min, "z_max": grid.z_max, "n_points": grid.n_points},
               "absorbed": float(s.absorbed[-1]),
               "norm_plus_absorbed": float(s.norm[-1] + s.absorbed[-1]),
               "warnings": list(s.warnings)}
    try:
        details["breathing_r"] = analysis.breathing_correlation(
            s.sample_times, s.dp2, s.dz)
    except (FitError, ValueError) as exc:
        details["breathing_r"] = None
        details["breathing_error"] = str(exc)
    summary = dict(dp=float(math.sqrt(s.dp2[-1])), dz=float(s.dz[-1]),
                   mean_bounces=float("nan"), alpha=_alpha(s.sample_times, s.dp2))
    return series, (hx, hy, None), summary, details


class Runner:
    """Executes one configuration into its output directory."""

    def __init__(self, cfg: RunConfig, log=None):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.log = log or (lambda msg: None)
        self.lock = threading.Lock()
        labels = lambda_labels(cfg.lambdas)
        self.points = [PointResult(lam, lab) for lam, lab in zip(cfg.lambdas, labels)]
        self.files: dict[str, dict] = {}
        self.t0 = time.monotonic()

    # -- persistence
    def write(self, name: str, data: bytes):
        path = self.out / name
        with self.lock:
            atomic_write(path, data)
            self.files[name] = {"bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()}

    def manifest(self, finished: bool) -> dict:
        cfg = self.cfg
        derived = dict(cfg.derived)
        derived["lambdas"] = list(cfg.lambdas)
        derived["params"] = [cfg.params(lam).to_dict() for lam in cfg.lambdas]
        return {
            "version": __version__,
            "backend": kernels.BACKEND,
            "config": cfg.to_dict(),
            "derived": derived,
            "finished": finished,
            "wall_time": round(time.monotonic() - self.t0, 3),
            "points": [{"lambda": p.lam, "label": p.label, "status": p.status,
                        "error": p.error, "files": p.files, "details": p.details,
                        "summary": {"dp": p.dp, "dz": p.dz, "mean_bounces": p.mean_bounces,
                                    "alpha": p.alpha, "comb_contrast": p.comb_contrast}}
                       for p in self.points],
            "files": {k: self.files[k] for k in sorted(self.files)},
        }

    def save_manifest(self, finished: bool = False, analysis_report: Optional[dict] = None):
        with self.lock:
            m = self.manifest(finished)
            if analysis_report is not None:
                m["analysis"] = analysis_report
            text = json.dumps(_jsonable(m), indent=2, sort_keys=False, allow_nan=True) + "\n"
            atomic_write(self.out / MANIFEST, text.encode("ascii"))
        return m

    # -- work units
    def run_point(self, pt: PointResult, workers: int):
        cfg = self.cfg
        lab = pt.label
        try:
            if cfg.engine == "standard-map":
                k = 4.0 * pt.lam
                d = standard_map_diffusion(k, cfg.sm_particles, cfg.sm_steps, cfg.seed, workers)
                pred, d0 = diffusion_coefficient(pt.lam)
                pt.details = {"K": k, "d_measured": d, "d_predicted": pred, "d0": d0}
            else:
                if cfg.engine == "quantum":
                    series, hist, summary, details = _quantum_point(cfg, pt.lam)
                else:
                    mode = "hard" if cfg.engine == "classical-hard" else "soft"
                    series, hist, summary, details = _classical_point(cfg, pt.lam, workers, mode)
                comb = _comb_stats(*hist)
                details.update(n_peaks=comb["n_peaks"], peak_spacing=comb["peak_spacing"])
                pt.comb_contrast = comb["comb_contrast"]
                pt.dp, pt.dz = summary["dp"], summary["dz"]
                pt.mean_bounces, pt.alpha = summary["mean_bounces"], summary["alpha"]
                pt.details = details
                self.write(f"series_lambda={lab}.csv", csv_bytes(SERIES_COLUMNS, series))
                self.write(f"hist_lambda={lab}.csv", csv_bytes(HIST_COLUMNS, zip(*hist[:2])))
                pt.files = {"series": f"series_lambda={lab}.csv", "hist": f"hist_lambda={lab}.csv"}
                if cfg.figure == "fig2" and cfg.engine == "quantum":
                    _, chist, _, _ = _classical_point(cfg, pt.lam, workers, "hard")
                    name = f"hist_classical_lambda={lab}.csv"
                    self.write(name, csv_bytes(HIST_COLUMNS, zip(*chist[:2])))
                    pt.files["hist_classical"] = name
            pt.status = "ok"
        except FermiAccelError as exc:
            pt.status = "failed"
            pt.error = f"{type(exc).__name__}: {exc}"
        self.log(f"lambda={pt.label}: {pt.status}" + (f" ({pt.error})" if pt.error else ""))
        self.save_manifest()

    def run(self) -> RunResult:
        cfg = self.cfg
        self.out.mkdir(parents=True, exist_ok=True)
        if not os.access(self.out, os.W_OK):
            raise ConfigError(f"output directory not writable: {self.out}", key="output_dir")
        self.save_manifest()
        n_pts = len(self.points)
        outer = max(1, min(cfg.workers, n_pts))
        inner = max(1, cfg.workers // outer)
        if outer == 1:
            for pt in self.points:
                self.run_point(pt, inner)
        else:
            with ThreadPoolExecutor(max_workers=outer) as pool:
                list(pool.map(lambda p: self.run_point(p, inner), self.points))

        if cfg.engine == "standard-map":
            rows = [(p.lam, p.details.get("K", 4 * p.lam), p.details.get("d_measured", math.nan),
                     p.details.get("d_predicted", math.nan), p.details.get("d0", math.nan))
                    for p in self.points]
            self.write("diffusion.csv", csv_bytes(DIFFUSION_COLUMNS, rows))
        else:
            rows = [(p.lam, p.dp, p.dz, p.mean_bounces, p.alpha, p.comb_contrast)
                    for p in self.points]
            self.write("sweep.csv", csv_bytes(SWEEP_COLUMNS, rows))
        report = analyze_points(self.points)
        if cfg.figure is not None and all(p.status == "ok" for p in self.points):
            from .figures import emit_figure
            try:
                svg = emit_figure(cfg.figure, self.out)
                self.write(f"{cfg.figure}.svg", svg.encode("utf-8"))
            except FermiAccelError as exc:
                report["figure_error"] = str(exc)
        m = self.save_manifest(finished=True, analysis_report=report)
        return RunResult(self.out, m, self.points)


def analyze_points(points) -> dict:
    """Window report of a sweep plus per-point diagnostics."""
    good = [p for p in points if p.status == "ok"]
    report: dict = {"points": {p.label: {"dp": p.dp, "alpha": p.alpha,
                                         "comb_contrast": p.comb_contrast} for p in good}}
    if len(good) >= 3:
        try:
            rep = analysis.sweep_summary([(p.lam, p.dp) for p in good])
            report["windows"] = [vars(w) for w in rep.windows]
            report["local_maxima"] = rep.local_maxima
        except CoverageError as exc:
            report["windows_error"] = str(exc)
    return report


def run(cfg: RunConfig, log=None) -> RunResult:
    """Execute ``cfg`` and write every output under ``cfg.output_dir``."""
    return Runner(cfg, log).run()


def load_manifest(out_dir) -> dict:
    path = Path(out_dir) / MANIFEST
    if not path.is_file():
        raise VerificationError(f"no {MANIFEST} in {out_dir}")
    return json.loads(path.read_text(encoding="ascii"))


def config_from_manifest(manifest: dict) -> RunConfig:
    return build_config(manifest["config"])


def verify(out_dir) -> list[str]:
    """Problems found re-hashing the files listed in the manifest (empty if clean)."""
    out_dir = Path(out_dir)
    m = load_manifest(out_dir)
    problems = []
    for name, info in m.get("files", {}).items():
        path = out_dir / name
        if not path.is_file():
            problems.append(f"{name}: missing")
            continue
        size = path.stat().st_size
        if size != info["bytes"]:
            problems.append(f"{name}: {size} bytes, manifest says {info['bytes']}")
        elif sha256(path) != info["sha256"]:
            problems.append(f"{name}: sha256 mismatch")
    return problems


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
