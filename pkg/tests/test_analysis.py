import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermi_accel.analysis import (
    breathing_correlation, comb_contrast, comb_density, detect_spikes, fit_comb_model,
    fit_power_law, local_maxima, localization_border, peak_spacing, rebin, sweep_summary,
)
from fermi_accel.errors import CoverageError, FitError
from fermi_accel.model import window_center, windows_up_to
from fermi_accel.runner import _comb_stats, fixed_width_histogram

GRID = np.arange(-50.0, 50.0, 0.02)


def gaussian(x, s):
    return np.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2 * math.pi))


# spike detection

def test_synthetic_comb_spacing():
    peaks = detect_spikes(GRID, comb_density(GRID, 6.0, 0.15))
    assert len(peaks) >= 10
    assert peak_spacing(peaks) == pytest.approx(math.pi, rel=0.02)
    locs = [p.location for p in peaks]
    assert locs == sorted(locs)
    # half-prominence width of a tooth is about 2 sqrt(2 ln 2) * sqrt(2) * eps
    mid = min(peaks, key=lambda p: abs(p.location))
    assert mid.width == pytest.approx(4 * math.sqrt(math.log(2)) * 0.15, rel=0.2)


def test_gaussian_has_at_most_one_peak():
    assert len(detect_spikes(GRID, gaussian(GRID, 5.0))) <= 1


def test_empty_density_gives_no_peaks():
    assert detect_spikes(GRID, np.zeros_like(GRID)) == []


def test_detect_rejects_short_or_negative():
    with pytest.raises(ValueError):
        detect_spikes(np.arange(20.0), np.ones(20))
    y = np.ones(64)
    y[3] = -1
    with pytest.raises(ValueError):
        detect_spikes(np.arange(64.0), y)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-6, 1e6))
def test_detection_scale_invariant(c):
    y = comb_density(GRID, 5.0, 0.2)
    a = [p.location for p in detect_spikes(GRID, y)]
    b = [p.location for p in detect_spikes(GRID, c * y)]
    assert a == b


def test_noise_cut_suppresses_sampling_spikes():
    rng = np.random.default_rng(4)
    x, y, n = fixed_width_histogram(rng.normal(0, 3, 10_000), 0.1)
    assert len(detect_spikes(x, y, noise=n)) < len(detect_spikes(x, y))
    assert len(detect_spikes(x, y, noise=n)) <= 1


def test_noise_cut_keeps_real_comb():
    rng = np.random.default_rng(5)
    teeth = rng.normal(0, 6, 20_000)
    teeth = np.round(teeth / math.pi) * math.pi + rng.normal(0, 0.1, teeth.size)
    x, y, n = fixed_width_histogram(teeth, 0.1)
    peaks = detect_spikes(x, y, noise=n)
    assert len(peaks) >= 5
    assert peak_spacing(peaks) == pytest.approx(math.pi, rel=0.05)


# comb fit

@pytest.mark.parametrize("env", [4.0, 6.0, 8.0, 10.0])
@pytest.mark.parametrize("eps", [0.1, 0.2, 0.3])
def test_comb_fit_round_trip(env, eps):
    fit = fit_comb_model(GRID, comb_density(GRID, env, eps))
    assert fit.envelope_sigma == pytest.approx(env, rel=0.03)
    assert fit.spike_sigma == pytest.approx(eps, rel=0.03)
    assert fit.spacing == pytest.approx(math.pi, rel=0.03)
    assert fit.converged and fit.residual < 1e-6
    assert 0.0 <= fit.contrast <= 1.0
    assert fit.spike_sigma < fit.envelope_sigma


def test_comb_spacing_is_fitted():
    fit = fit_comb_model(GRID, comb_density(GRID, 6.0, 0.15, spacing=2.0))
    assert fit.spacing == pytest.approx(2.0, rel=0.02)


def test_comb_on_background_contrast():
    comb = comb_density(GRID, 6.0, 0.15)
    y = 0.4 * comb + 0.6 * gaussian(GRID, 6.0)
    fit = fit_comb_model(GRID, y)
    assert fit.contrast == pytest.approx(0.4, abs=0.02)


def test_fit_needs_three_spikes():
    with pytest.raises(FitError):
        fit_comb_model(GRID, gaussian(GRID, 5.0))
    assert comb_contrast(GRID, gaussian(GRID, 5.0)) == 0.0


def test_null_contrast_on_sampled_gaussians():
    contrasts = []
    for seed in range(20):
        v = np.random.default_rng(seed).normal(0, 3, 10_000)
        contrasts.append(_comb_stats(*fixed_width_histogram(v, 0.1))["comb_contrast"])
    assert np.percentile(contrasts, 99) < 0.03


def test_rebin_preserves_mass():
    x = np.arange(0, 10, 0.01)
    y = gaussian(x - 5, 1.0)
    xb, yb = rebin(x, y, 0.1)
    assert len(xb) == 100
    assert yb.sum() * 0.1 == pytest.approx(y.sum() * 0.01, rel=1e-12)


# growth exponents

def test_power_law_exact_linear():
    t = np.linspace(1, 500, 200)
    fit = fit_power_law(t, 3 * t)
    assert fit.alpha == pytest.approx(1.0, abs=0.02)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-9)
    assert fit.r_squared == pytest.approx(1.0)


@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.0])
def test_power_law_recovers_exponent(alpha):
    t = np.linspace(0.5, 300, 150)
    assert fit_power_law(t, 2.5 * t ** alpha).alpha == pytest.approx(alpha, rel=0.02)


def test_power_law_with_noise():
    rng = np.random.default_rng(0)
    t = np.linspace(1, 500, 300)
    y = t ** 0.7 * (1 + 0.01 * rng.standard_normal(t.size))
    fit = fit_power_law(t, y)
    assert fit.alpha == pytest.approx(0.7, abs=0.05)
    assert 0.0 <= fit.r_squared <= 1.0


@pytest.mark.parametrize("t,y", [
    (np.arange(10.0) + 1, np.arange(10.0) + 1),
    (np.arange(30.0)[::-1] + 1, np.arange(30.0) + 1),
    (np.arange(30.0) + 1, np.where(np.arange(30) == 25, 0.0, 1.0)),
])
def test_power_law_errors(t, y):
    with pytest.raises(FitError):
        fit_power_law(t, y)


# breathing correlation

def test_antiphase_is_minus_one():
    t = np.linspace(0, 50, 400)
    assert breathing_correlation(t, np.sin(t), -np.sin(t)) == pytest.approx(-1.0, abs=1e-9)


def test_antiphase_on_growing_trend():
    t = np.linspace(1, 500, 1000)
    a = 2 * t * (1 + 0.1 * np.sin(t))
    b = 5 * np.sqrt(t) * (1 - 0.1 * np.sin(t))
    assert breathing_correlation(t, a, b) < -0.9


def test_white_noise_uncorrelated():
    rng = np.random.default_rng(11)
    t = np.arange(500.0)
    r = breathing_correlation(t, rng.standard_normal(500), rng.standard_normal(500))
    assert abs(r) < 0.2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_correlation_symmetric_under_sign_flip(seed):
    rng = np.random.default_rng(seed)
    t = np.arange(100.0)
    a, b = rng.standard_normal(100), rng.standard_normal(100)
    r1 = breathing_correlation(t, a, b, trend="linear")
    r2 = breathing_correlation(t, -a, -b, trend="linear")
    assert r1 == pytest.approx(r2, abs=1e-12)
    assert -1.0 <= r1 <= 1.0


def test_correlation_errors():
    t = np.arange(100.0)
    with pytest.raises(FitError):
        breathing_correlation(t, t, 2 * t + 1, trend="linear")
    with pytest.raises(ValueError):
        breathing_correlation(t[:40], t[:40], t[:40])
    with pytest.raises(ValueError):
        breathing_correlation(t, t, t[:-1])


# sweep summaries

def synthetic_sweep(step=0.02, lam_max=5.0):
    lams = np.round(np.arange(0.05, lam_max + 1e-9, step), 10)
    dp = 1.0 + lams
    for w in windows_up_to(lam_max):
        inside = (lams >= w.lo) & (lams < w.hi)
        dp[inside] *= 0.3
    return lams, dp


def test_sweep_detects_dips():
    lams, dp = synthetic_sweep()
    rep = sweep_summary(list(zip(lams, dp)))
    assert [w.s for w in rep.windows] == [0.5, 1.0, 1.5]
    for w in rep.windows:
        assert w.has_dip and w.dip_ratio < 1


def test_monotone_sweep_has_no_dips():
    lams = np.arange(0.02, 5.0, 0.02)
    rep = sweep_summary(list(zip(lams, 1 + lams)))
    assert not any(w.has_dip for w in rep.windows)
    assert rep.local_maxima == []


def test_sweep_bookkeeping_matches_windows():
    lams, dp = synthetic_sweep()
    rep = sweep_summary(list(zip(lams, dp)))
    for got, want in zip(rep.windows, windows_up_to(lams[-1])):
        assert abs(got.lo - want.lo) <= 1e-12 and abs(got.hi - want.hi) <= 1e-12
        assert got.center == pytest.approx(window_center(want.s), abs=1e-12)


def test_sweep_peak_near_centre():
    lams = np.round(np.arange(1.0, 2.5, 0.05), 10)
    lm = window_center(0.5)
    dp = np.exp(-((lams - lm) / 0.2) ** 2)
    rep = sweep_summary(list(zip(lams, dp)))
    w = rep.windows[0]
    assert abs(w.peak_offset_steps) <= 1
    assert any(abs(m - lm) <= 0.05 for m in local_maxima(lams, dp))


def test_sweep_coverage_error():
    lams = np.arange(0.1, 5.0, 0.5)
    with pytest.raises(CoverageError) as err:
        sweep_summary(list(zip(lams, 1 + lams)))
    assert "s=0.5" in str(err.value)
    with pytest.raises(CoverageError):
        sweep_summary([(1.0, 1.0)])


# localization border

def test_localization_border():
    lams = [2.0, 1.0, 1.5, 2.5]
    classical = [4.0, 2.0, 3.0, 5.0]
    quantum = [3.5, 0.5, 0.6, 4.9]
    assert localization_border(lams, quantum, classical) == 2.0
    assert localization_border(lams, classical, classical) == 1.0
    assert localization_border(lams, [0.1] * 4, classical) is None
    with pytest.raises(ValueError):
        localization_border([1.0], [1.0, 2.0], [1.0])
