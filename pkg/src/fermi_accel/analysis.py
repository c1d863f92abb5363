"""Diagnostics computed from simulated series and distributions.

Spike (comb) detection and the comb-model fit, power-law growth
exponents, the breathing correlation between momentum and position
spreads, and per-window summaries of modulation-strength sweeps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.ndimage import median_filter
from scipy.optimize import least_squares

from .errors import CoverageError, FitError
from .model import Window, windows_up_to

COMB_CONTRAST_THRESHOLD = 0.05


class Peak(NamedTuple):
    location: float
    height: float
    width: float


@dataclass
class CombFit:
    envelope_sigma: float
    spike_sigma: float
    spacing: float
    contrast: float
    residual: float
    envelope_center: float = 0.0
    offset: float = 0.0
    background_sigma: float = 0.0
    n_iterations: int = 0
    converged: bool = True


@dataclass
class DiffusionFit:
    alpha: float
    prefactor: float
    r_squared: float


def rebin(x, y, width):
    """Average a uniformly sampled density onto bins of ``width``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    step = x[1] - x[0]
    k = max(1, int(round(width / step)))
    m = (len(x) // k) * k
    return x[:m].reshape(-1, k).mean(axis=1), y[:m].reshape(-1, k).mean(axis=1)


def _background(values, window):
    return median_filter(values, size=window, mode="nearest")


def detect_spikes(centers, values, prominence: float = 3.0, window: Optional[int] = None,
                  min_relative_height: float = 0.005, noise=None,
                  significance: float = 5.0) -> list[Peak]:
    """Narrow local maxima standing out from a running-median background.

    A peak must exceed ``prominence`` times the local background and rise
    above it by at least ``min_relative_height`` of the global maximum.
    When a per-bin ``noise`` estimate is given (e.g. counting noise of a
    sampled histogram) the rise must also exceed ``significance`` times it.
    """
    x = np.asarray(centers, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(x) < 32:
        raise ValueError("need at least 32 bins")
    if np.any(y < 0):
        raise ValueError("density must be nonnegative")
    top = float(y.max()) if y.size else 0.0
    if not top > 0:
        return []
    if window is None:
        window = max(5, len(y) // 16) | 1
    bg = _background(y, window)
    floor = min_relative_height * top
    interior = np.arange(1, len(y) - 1)
    is_max = (y[interior] > y[interior - 1]) & (y[interior] >= y[interior + 1])
    cand = interior[is_max]
    ok = (y[cand] >= prominence * bg[cand]) & (y[cand] - bg[cand] >= floor)
    if noise is not None:
        sig = np.broadcast_to(np.asarray(noise, dtype=float), y.shape)
        ok &= y[cand] - bg[cand] >= significance * sig[cand]
    keep = cand[ok]
    peaks = []
    for i in keep:
        half = bg[i] + 0.5 * (y[i] - bg[i])
        lo = i
        while lo > 0 and y[lo] > half:
            lo -= 1
        hi = i
        while hi < len(y) - 1 and y[hi] > half:
            hi += 1
        xl = np.interp(half, [y[lo], y[lo + 1]], [x[lo], x[lo + 1]]) if y[lo + 1] != y[lo] else x[lo]
        xr = np.interp(half, [y[hi], y[hi - 1]], [x[hi], x[hi - 1]]) if y[hi - 1] != y[hi] else x[hi]
        peaks.append(Peak(float(x[i]), float(y[i]), float(xr - xl)))
    # merge maxima that share one half-prominence span
    merged: list[Peak] = []
    for pk in peaks:
        if merged and pk.location - merged[-1].location < 0.5 * max(pk.width, merged[-1].width):
            if pk.height > merged[-1].height:
                merged[-1] = pk
            continue
        merged.append(pk)
    return merged


def peak_spacing(peaks: Sequence[Peak]) -> float:
    """Median distance between neighbouring peaks (``nan`` for fewer than 2)."""
    if len(peaks) < 2:
        return float("nan")
    return float(np.median(np.diff([p.location for p in peaks])))


def comb_density(p, envelope_sigma, spike_sigma, spacing=math.pi, center=0.0, offset=0.0,
                 n_terms: Optional[int] = None):
    """Normalized comb density ``N exp(-p^2/4 D^2) sum_n exp(-(p - n a)^2/4 e^2)``.

    ``center`` shifts the envelope and ``offset`` the comb teeth.
    """
    p = np.asarray(p, float)
    if n_terms is None:
        n_terms = int(math.ceil(5.0 * envelope_sigma / spacing)) + 1
    base = center + offset
    n = np.arange(-n_terms, n_terms + 1)
    teeth = base + n * spacing
    comb = np.exp(-((p[:, None] - teeth[None, :]) ** 2) / (4.0 * spike_sigma ** 2)).sum(axis=1)
    dens = np.exp(-((p - center) ** 2) / (4.0 * envelope_sigma ** 2)) * comb
    area = np.trapezoid(dens, p) if len(p) > 1 else 1.0
    return dens / area if area > 0 else dens


def _mixture(theta, x, dx):
    center, env, spike, spacing, offset, contrast, bg_sigma = theta
    n_terms = int(math.ceil(5.0 * env / spacing)) + 1
    n_terms = min(n_terms, int(math.ceil((x[-1] - x[0]) / spacing)) + 2)
    n = np.arange(-n_terms, n_terms + 1)
    teeth = center + offset + n * spacing
    comb = np.exp(-((x[:, None] - teeth[None, :]) ** 2) / (4.0 * spike ** 2)).sum(axis=1)
    comb *= np.exp(-((x - center) ** 2) / (4.0 * env ** 2))
    s = comb.sum() * dx
    comb = comb / s if s > 0 else comb
    bg = np.exp(-0.5 * ((x - center) / bg_sigma) ** 2) / (bg_sigma * math.sqrt(2 * math.pi))
    return contrast * comb + (1.0 - contrast) * bg


def fit_comb_model(centers, values, peaks: Optional[Sequence[Peak]] = None,
                   max_iterations: int = 500, xtol: float = 1e-8) -> CombFit:
    """Least-squares fit of a spiky comb on a broad Gaussian background.

    The comb is the envelope-times-teeth density with free tooth spacing;
    ``contrast`` is its share of the total probability.  Requires at least
    three detected spikes for initialization.
    """
    x = np.asarray(centers, float)
    y = np.asarray(values, float)
    dx = float(x[1] - x[0])
    area = y.sum() * dx
    if not area > 0:
        raise FitError("density has no mass")
    y = y / area
    if peaks is None:
        peaks = detect_spikes(x, y)
    if len(peaks) < 3:
        raise FitError(f"need >= 3 spikes to initialize, found {len(peaks)}")
    mean = float((x * y).sum() * dx)
    std = float(math.sqrt(max(((x - mean) ** 2 * y).sum() * dx, dx * dx)))
    spacing = peak_spacing(peaks)
    locs = np.array([pk.location for pk in peaks])
    hts = np.array([pk.height for pk in peaks])
    # envelope from the spike heights, teeth phase from the tallest spike
    env_center = float((locs * hts).sum() / hts.sum())
    env_var = float(((locs - env_center) ** 2 * hts).sum() / hts.sum())
    env = max(math.sqrt(env_var / 2.0), spacing)
    spike = max(float(np.median([pk.width for pk in peaks])) / (4.0 * math.sqrt(math.log(2.0))), dx)
    spike = min(spike, 0.15 * spacing)
    tallest = float(locs[np.argmax(hts)])
    offset = (tallest - env_center + 0.5 * spacing) % spacing - 0.5 * spacing
    theta0 = np.array([env_center, env, spike, spacing, offset, 0.5, std])
    lo = np.array([x[0], dx, 0.25 * dx, 0.5 * spacing, -spacing, 0.0, dx])
    hi = np.array([x[-1], 10 * (x[-1] - x[0]), 0.2 * 1.5 * spacing, 1.5 * spacing, spacing, 1.0,
                   10 * (x[-1] - x[0])])
    theta0 = np.clip(theta0, lo + 1e-12, hi - 1e-12)

    def resid(theta):
        r = _mixture(theta, x, dx) - y
        # spike width must stay well below the tooth spacing
        excess = max(0.0, theta[2] - 0.2 * theta[3])
        return np.append(r, 1e3 * excess)

    sol = least_squares(resid, theta0, bounds=(lo, hi), xtol=xtol, ftol=1e-12, gtol=1e-12,
                        max_nfev=max_iterations, x_scale="jac")
    c, env, spike, spacing, offset, contrast, bg = sol.x
    rms = float(np.sqrt(np.mean((_mixture(sol.x, x, dx) - y) ** 2)))
    fit = CombFit(envelope_sigma=float(env), spike_sigma=float(spike), spacing=float(spacing),
                  contrast=float(contrast), residual=rms, envelope_center=float(c),
                  offset=float(offset), background_sigma=float(bg), n_iterations=int(sol.nfev),
                  converged=bool(sol.status > 0))
    if sol.status == 0:
        raise FitError(f"comb fit did not converge in {max_iterations} evaluations", best=fit)
    return fit


def comb_contrast(centers, values) -> float:
    """Comb contrast, or 0 when the density has too few spikes to fit."""
    try:
        return fit_comb_model(centers, values).contrast
    except FitError as exc:
        if exc.best is not None:
            return exc.best.contrast
        return 0.0


def fit_power_law(t, y, transient: float = 0.2) -> DiffusionFit:
    """Fit ``y = A t**alpha`` by least squares in log-log space.

    The first ``transient`` fraction of samples is discarded.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if len(t) < 20:
        raise FitError("need at least 20 samples")
    if np.any(np.diff(t) <= 0):
        raise FitError("times must be strictly increasing")
    start = int(math.floor(transient * len(t)))
    t, y = t[start:], y[start:]
    if np.any(t <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs positive times and variances")
    lt, ly = np.log(t), np.log(y)
    slope, intercept = np.polyfit(lt, ly, 1)
    pred = slope * lt + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DiffusionFit(alpha=float(slope), prefactor=float(math.exp(intercept)),
                        r_squared=float(min(max(r2, 0.0), 1.0)))


def _detrend(t, y, trend):
    if trend == "linear":
        coef = np.polyfit(t, y, 1)
        return y - np.polyval(coef, t)
    if trend == "power":
        if np.any(t <= 0) or np.any(y <= 0):
            raise FitError("power-law trend needs positive times and values")
        f = fit_power_law(t, y, transient=0.0)
        return y - f.prefactor * t ** f.alpha
    raise ValueError(f"unknown trend {trend!r}")


def breathing_correlation(t, p_var_sq, z_var, trend: str = "auto",
                          transient: float = 0.2) -> float:
    """Pearson correlation of the detrended Delta p^2 and Delta z series.

    ``trend="auto"`` removes a power law when both series are strictly
    positive at positive times and a straight line otherwise.  A straight
    line leaves the curvature of sub-linear growth in the residuals, which
    then correlates through the trends rather than the oscillations.  The
    first ``transient`` fraction of samples is dropped.
    """
    t = np.asarray(t, float)
    a = np.asarray(p_var_sq, float)
    b = np.asarray(z_var, float)
    if not (len(t) == len(a) == len(b)):
        raise ValueError("series must share one time grid")
    if len(t) < 50:
        raise ValueError("need at least 50 samples")
    start = int(math.floor(transient * len(t)))
    t, a, b = t[start:], a[start:], b[start:]
    if trend == "auto":
        positive = np.all(t > 0) and np.all(a > 0) and np.all(b > 0)
        trend = "power" if positive else "linear"
    ra = _detrend(t, a, trend)
    rb = _detrend(t, b, trend)
    sa, sb = float(np.std(ra)), float(np.std(rb))
    # residuals at rounding level mean the trend explains everything
    if sa <= 1e-12 * float(np.max(np.abs(a))) or sb <= 1e-12 * float(np.max(np.abs(b))):
        raise FitError("zero-variance residuals: correlation undefined")
    return float(np.mean((ra - ra.mean()) * (rb - rb.mean())) / (sa * sb))


@dataclass
class WindowReport:
    s: float
    lo: float
    hi: float
    center: float
    n_inside: int
    min_inside: Optional[float]
    max_outside: Optional[float]
    dip_ratio: Optional[float]
    has_dip: bool
    peak_lambda: Optional[float]
    peak_offset_steps: Optional[float]


@dataclass
class SweepReport:
    windows: list
    local_maxima: list = field(default_factory=list)
    grid_step: float = float("nan")


def local_maxima(lams, values) -> list[float]:
    lams = np.asarray(lams, float)
    v = np.asarray(values, float)
    out = []
    for i in range(1, len(v) - 1):
        if v[i] > v[i - 1] and v[i] >= v[i + 1]:
            out.append(float(lams[i]))
    return out


def sweep_summary(points, windows: Optional[Sequence[Window]] = None,
                  neighborhood: float = 0.3, min_points: int = 3) -> SweepReport:
    """Per-window dip ratios and dispersion maxima of a sweep.

    ``points`` is a sequence of ``(lambda, dp, ...)`` tuples sorted by
    lambda.  The dip ratio compares the sample nearest the window centre
    with the first sample at or beyond ``hi + 0.1``.  The dispersion peak
    is the largest sample within ``neighborhood`` of the window and is
    compared with the window centre in units of the grid step.
    """
    lams = np.array([float(p[0]) for p in points])
    dps = np.array([float(p[1]) for p in points])
    if len(lams) < 2:
        raise CoverageError("need at least two sweep points")
    step = float(np.median(np.diff(lams)))
    if windows is None:
        windows = windows_up_to(float(lams[-1]))
    windows = [w for w in windows if w.lo <= lams[-1] and w.hi >= lams[0]]
    sparse = [w for w in windows if np.sum((lams >= w.lo) & (lams < w.hi)) < min_points]
    if sparse:
        raise CoverageError(
            "under-sampled windows: " + ", ".join(f"s={w.s:g}" for w in sparse), sparse)
    reports = []
    for w in windows:
        inside = (lams >= w.lo) & (lams < w.hi)
        near = ((lams >= w.lo - neighborhood) & (lams < w.lo)) | \
               ((lams >= w.hi) & (lams < w.hi + neighborhood))
        i_center = int(np.argmin(np.abs(lams - w.center)))
        after = np.flatnonzero(lams >= w.hi + 0.1)
        before = np.flatnonzero(lams < w.lo)
        ratio = float(dps[i_center] / dps[after[0]]) if after.size and dps[after[0]] > 0 else None
        min_in = float(dps[inside].min())
        has_dip = bool(after.size and before.size
                       and min_in < dps[before[-1]] and min_in < dps[after[0]])
        hood = (lams >= w.lo - neighborhood) & (lams < w.hi + neighborhood)
        j = np.flatnonzero(hood)[np.argmax(dps[hood])]
        reports.append(WindowReport(
            s=w.s, lo=w.lo, hi=w.hi, center=w.center, n_inside=int(inside.sum()),
            min_inside=min_in,
            max_outside=float(dps[near].max()) if near.any() else None,
            dip_ratio=ratio, has_dip=has_dip,
            peak_lambda=float(lams[j]), peak_offset_steps=float((lams[j] - w.center) / step),
        ))
    return SweepReport(windows=reports, local_maxima=local_maxima(lams, dps), grid_step=step)


def localization_border(lams, quantum_dp, classical_dp, ratio: float = 0.5) -> Optional[float]:
    """Smallest sampled modulation above which quantum growth is not suppressed.

    A point counts as localized when its quantum momentum spread is
    below ``ratio`` times the classical spread at the same modulation.

    Returns
    -------
    float or None
        First sampled strength after the last localized point, or None
        when the largest sampled strength is still localized.
    """
    lams = np.asarray(lams, dtype=float)
    q = np.asarray(quantum_dp, dtype=float)
    c = np.asarray(classical_dp, dtype=float)
    if not (lams.shape == q.shape == c.shape) or lams.size == 0:
        raise ValueError("need equal-length, non-empty inputs")
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must lie in (0, 1]")
    order = np.argsort(lams)
    lams, q, c = lams[order], q[order], c[order]
    localized = np.flatnonzero(q < ratio * c)
    if localized.size == 0:
        return float(lams[0])
    last = int(localized[-1])
    return None if last == lams.size - 1 else float(lams[last + 1])
