"""Acceptance criteria at their stated tolerances.

Each check appends a row to the session log; the terminal summary prints
one PASS/FAIL line per criterion.  The quantum reference runs (t = 500)
take roughly twenty minutes on one core and are shared across criteria.
"""
import math

import numpy as np
import pytest

from fermi_accel import analysis
from fermi_accel.classical import (
    ClassicalState, EnsembleSpec, evolve_ensemble, next_bounce, soft_step, standard_map_diffusion,
    sweep_dispersion,
)
from fermi_accel.config import build_config
from fermi_accel.model import (
    DimensionlessParams, diffusion_coefficient, in_window, window_center, windows_up_to,
)
from fermi_accel.quantum import (
    PropagatorConfig, SpatialGrid, auto_grid, evolve_quantum, init_gaussian,
)
from fermi_accel.runner import _classical_point, _comb_stats, fixed_width_histogram, run

pytestmark = pytest.mark.slow

FIG1 = dict(z_mean=0.0, p_mean=2 * math.pi ** 2, z_std=0.1, p_std=0.1)
BROAD = dict(z_mean=5.0, p_mean=0.0, z_std=1.0, p_std=0.5)


def check(log, crit, name, ok, detail):
    log.append((crit, name, bool(ok), detail))
    assert ok, detail


# 1. window arithmetic

def test_windows(acceptance_log):
    ws = windows_up_to(5.0)
    err = max(max(abs(w.lo - w.s * math.pi), abs(w.hi - math.sqrt(1 + (w.s * math.pi) ** 2)))
              for w in ws)
    membership = (getattr(in_window(1.7), "s", None), in_window(2.4),
                  getattr(in_window(1.5 * math.pi), "s", None))
    ok = len(ws) == 3 and err <= 1e-12 and membership == (0.5, None, 1.5)
    check(acceptance_log, 1, "windows_up_to(5)", ok,
          f"{len(ws)} windows, max bound error {err:.1e}, membership {membership}")


# 2. diffusion law

@pytest.mark.parametrize("K", [8.0, 12.0, 16.0])
def test_diffusion_law(acceptance_log, K):
    measured = standard_map_diffusion(K, 100_000, 500)
    predicted, d0 = diffusion_coefficient(K / 4.0)
    # the map ensemble is the oracle, the closed form the claim under test
    rel = abs(predicted - measured) / measured
    same_sign = (measured > d0 / 2) == (predicted > d0 / 2)
    check(acceptance_log, 2, f"K={K:g}", rel <= 0.25 and same_sign,
          f"D_map={measured:.3f} D_law={predicted:.3f} D0/2={d0 / 2:.1f} "
          f"error vs map {rel:.3f} (vs law {abs(measured - predicted) / predicted:.3f}), "
          f"same side of D0/2: {same_sign}")


# 3. classical window dips

def test_window_dips(acceptance_log):
    spec = EnsembleSpec(10_000, seed=0, **FIG1)
    ws = windows_up_to(5.0)
    lams = []
    for w in ws:
        lams += [window_center(w.s), w.hi + 0.15]
    pts = sweep_dispersion(spec, DimensionlessParams(1.0), "hard", 300.0, lams)
    parts = []
    ok = True
    for k, w in enumerate(ws):
        inside, after = pts[2 * k], pts[2 * k + 1]
        ok &= inside.dp < after.dp and math.isfinite(inside.mean_bounces)
        parts.append(f"s={w.s:g}: {inside.dp:.3f} < {after.dp:.3f} "
                     f"(<n> {inside.mean_bounces:.1f}, {after.mean_bounces:.1f})")
    check(acceptance_log, 3, "dp(centre) < dp(hi + 0.15)", ok, "; ".join(parts))


# 4. classical momentum comb

@pytest.mark.xfail(strict=True, reason="no accelerating island at the lower window edge")
def test_classical_comb(acceptance_log):
    spec = EnsembleSpec(10_000, seed=0, **FIG1)
    s = evolve_ensemble(spec, DimensionlessParams(1.5 * math.pi), "hard", 300.0)
    c = _comb_stats(*fixed_width_histogram(s.final_p, 0.1))
    ok = (c["n_peaks"] >= 3 and abs(c["peak_spacing"] / math.pi - 1) <= 0.05
          and c["comb_contrast"] > 0.05)
    check(acceptance_log, 4, "lambda=3pi/2 comb", ok,
          f"{c['n_peaks']} peaks, spacing {c['peak_spacing']:.3f}, "
          f"contrast {c['comb_contrast']:.3f}, final dp {s.p_var[-1]:.2f}")


# 5. quantum unitarity and convergence

def _ci_run(grid, dt):
    p = DimensionlessParams(1.7, 4.0, 1.0, 1.0)
    cfg = PropagatorConfig(dt=dt, sample_stride=int(round(0.5 / dt)))
    return evolve_quantum(init_gaussian(grid, 5.0, 0.0, 1.0, 1.0), p, cfg, 150.0)


@pytest.fixture(scope="session")
def convergence_runs():
    p = DimensionlessParams(1.7, 4.0, 1.0, 1.0)
    g = auto_grid(p, 5.0, 1.0, 0.5, 150.0)
    return {"base": _ci_run(g, 2e-3), "half_dt": _ci_run(g, 1e-3),
            "double_grid": _ci_run(SpatialGrid(g.z_min, g.z_max, 2 * g.n_points), 2e-3),
            "n_points": g.n_points}


def test_quantum_unitarity(acceptance_log, convergence_runs, reference_runs):
    worst = {}
    for name in ("base", "half_dt", "double_grid"):
        s = convergence_runs[name]
        worst[name] = float(np.max(np.abs(s.norm + s.absorbed - 1.0)))
    for lab, pt in reference_runs["points"].items():
        worst[f"t=500 lambda={lab}"] = float(np.max(np.abs(pt["norm"] + pt["absorbed"] - 1.0)))
    ok = max(worst.values()) <= 1e-6 and convergence_runs["n_points"] >= 2 ** 14
    check(acceptance_log, 5, "norm + absorbed", ok,
          ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_quantum_convergence(acceptance_log, convergence_runs):
    dp = {k: math.sqrt(convergence_runs[k].dp2[-1]) for k in ("base", "half_dt", "double_grid")}
    r_dt = abs(dp["half_dt"] / dp["base"] - 1)
    r_grid = abs(dp["double_grid"] / dp["base"] - 1)
    check(acceptance_log, 5, "dt and grid refinement", r_dt < 0.01 and r_grid < 0.01,
          f"dp(150)={dp['base']:.5f} on {convergence_runs['n_points']} points; "
          f"half dt {r_dt:.1e}, double grid {r_grid:.1e}")


# 6-8. reference quantum runs

@pytest.fixture(scope="session")
def reference_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("reference") / "fig2"
    cfg = build_config({"engine": "quantum", "lambda": [1.7, 2.4], "t_final": 500.0,
                        "figure": "fig2", "output_dir": str(out)})
    res = run(cfg)
    from fermi_accel.runner import read_csv
    points = {}
    for p in res.points:
        assert p.status == "ok", p.error
        s = read_csv(out / p.files["series"])
        points[p.label] = {"point": p, "norm": s["norm"], "absorbed": s["absorbed"]}
    return {"cfg": cfg, "result": res, "points": points}


@pytest.fixture(scope="session")
def broad_classical(reference_runs):
    cfg = reference_runs["cfg"]
    out = {}
    for lam in (1.7, 2.4):
        _, hist, _, _ = _classical_point(cfg, lam, 1, "hard")
        out[lam] = _comb_stats(*hist)
    return out


def test_quantum_comb_dichotomy(acceptance_log, reference_runs):
    a = reference_runs["points"]["1.700"]["point"]
    b = reference_runs["points"]["2.400"]["point"]
    n, sp = a.details["n_peaks"], a.details["peak_spacing"]
    ok = n >= 4 and abs(sp / math.pi - 1) <= 0.05 and a.comb_contrast > 0.05
    check(acceptance_log, 6, "quantum lambda=1.7 comb", ok,
          f"{n} peaks, spacing {sp:.3f}, contrast {a.comb_contrast:.3f}")
    check(acceptance_log, 6, "quantum lambda=2.4 no comb", b.comb_contrast < 0.05,
          f"contrast {b.comb_contrast:.3f}")


def test_classical_comb_dichotomy(acceptance_log, broad_classical, reference_runs):
    a, b = broad_classical[1.7], broad_classical[2.4]
    ok = a["comb_contrast"] > 0.05 and b["comb_contrast"] < 0.05
    check(acceptance_log, 6, "classical broad-data dichotomy", ok,
          f"contrast {a['comb_contrast']:.3f} ({a['n_peaks']} peaks, spacing "
          f"{a['peak_spacing']:.3f}) vs {b['comb_contrast']:.3f} ({b['n_peaks']} peaks)")
    assert (reference_runs["result"].output_dir / "fig2.svg").is_file()


def test_breathing(acceptance_log, reference_runs):
    ra = reference_runs["points"]["1.700"]["point"].details["breathing_r"]
    rb = reference_runs["points"]["2.400"]["point"].details["breathing_r"]
    check(acceptance_log, 7, "antiphase in window", ra < -0.5, f"r(1.7) = {ra:.3f}")
    check(acceptance_log, 7, "no breathing outside", abs(rb) < 0.3, f"r(2.4) = {rb:.3f}")


def test_growth_exponents(acceptance_log, reference_runs):
    aa = reference_runs["points"]["1.700"]["point"].alpha
    ab = reference_runs["points"]["2.400"]["point"].alpha
    check(acceptance_log, 8, "linear growth in window", abs(aa - 1) <= 0.1, f"alpha(1.7) = {aa:.3f}")
    check(acceptance_log, 8, "sub-linear outside", ab < 1, f"alpha(2.4) = {ab:.3f}")


# 9. dispersion maxima

def test_dispersion_maxima(acceptance_log):
    step = 0.05
    lams = list(np.round(np.arange(1.2, 3.7 + 1e-9, step), 10))
    spec = EnsembleSpec(10_000, seed=0, **BROAD)
    pts = sweep_dispersion(spec, DimensionlessParams(1.0), "hard", 500.0, lams)
    dp = [p.dp for p in pts]
    rep = analysis.sweep_summary(list(zip(lams, dp)), windows=windows_up_to(3.7))
    maxima = rep.local_maxima
    for w in rep.windows:
        lm = window_center(w.s)
        nearest = min(maxima, key=lambda m: abs(m - lm))
        off = abs(nearest - lm) / step
        ok = off <= 2 and abs(w.peak_offset_steps) <= 2
        check(acceptance_log, 9, f"s={w.s:g}", ok,
              f"lambda_m={lm:.4f}, nearest local max {nearest:.2f} ({off:.1f} steps), "
              f"largest nearby {w.peak_lambda:.2f}")


# 10. oracles and invariants

def _bounce_map(lam, t, w):
    p = lam * math.cos(t) + math.sqrt(2 * w)
    _, s = next_bounce(ClassicalState(lam * math.sin(t), p, t), lam, stride=0.01)
    return np.array([s.t, 0.5 * (s.p - lam * math.cos(s.t)) ** 2])


def test_impact_map_jacobian(acceptance_log):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        lam, t0, p0 = rng.uniform(0.5, 3.0), rng.uniform(0, 2 * math.pi), rng.uniform(1, 8)
        w0 = 0.5 * (p0 - lam * math.cos(t0)) ** 2
        h = 1e-6
        jac = np.column_stack([(_bounce_map(lam, t0 + h, w0) - _bounce_map(lam, t0 - h, w0)),
                               (_bounce_map(lam, t0, w0 + h) - _bounce_map(lam, t0, w0 - h))])
        worst = max(worst, abs(np.linalg.det(jac / (2 * h)) - 1))
    check(acceptance_log, 10, "impact-map Jacobian", worst <= 1e-4, f"max |det - 1| = {worst:.1e}")


def test_free_flight_energy(acceptance_log):
    worst = 0.0
    lam = 1.7
    for z0, p0, t0 in [(3.0, 2.0, 0.1), (10.0, -1.0, 2.0), (0.5, 15.0, 4.0)]:
        ev, _ = next_bounce(ClassicalState(z0, p0, t0), lam)
        e0 = p0 ** 2 / 2 + z0
        # energy at the located impact: wall height at the root, incoming momentum
        e1 = ev.p_before ** 2 / 2 + lam * math.sin(ev.t_impact)
        worst = max(worst, abs(e1 - e0) / max(1.0, abs(e0)))
    check(acceptance_log, 10, "free-flight energy", worst <= 1e-10, f"max error {worst:.1e}")


def test_free_packet_law(acceptance_log):
    g = SpatialGrid(-100.0, 100.0, 4096)
    cfg = PropagatorConfig(dt=0.01, absorber=None, sample_stride=100, gravity=False)
    s = evolve_quantum(init_gaussian(g, 0.0, 0.0, 1.0, 1.0), DimensionlessParams(0.0, 4.0, 0.0, 1.0),
                       cfg, 20.0)
    err = float(np.max(np.abs(s.dz / np.sqrt(1 + (s.sample_times / 2) ** 2) - 1)))
    check(acceptance_log, 10, "free-packet spreading", err < 0.005, f"max relative error {err:.1e}")


@pytest.mark.xfail(strict=True, reason="momentum spread of the narrow packet smears each bounce")
def test_ehrenfest_tracking(acceptance_log):
    p = DimensionlessParams(1.7, 4.0, 1.0, 0.1)
    g = SpatialGrid(-5.0, 35.0, 8192)
    dt, stride = 1e-3, 100
    s = evolve_quantum(init_gaussian(g, 5.0, 0.0, 0.1, 0.1), p,
                       PropagatorConfig(dt=dt, absorber=None, sample_stride=stride), 20.0)
    st = ClassicalState(float(s.z_mean[0]), float(s.p_mean[0]), 0.0)
    zc, pc = [st.z], [st.p]
    for _ in range(len(s.sample_times) - 1):
        for _ in range(stride):
            st = soft_step(st, p, dt)
        zc.append(st.z)
        pc.append(st.p)
    zc, pc = np.array(zc), np.array(pc)
    ez = float(np.max(np.abs(s.z_mean - zc)) / np.ptp(zc))
    ep = float(np.max(np.abs(s.p_mean - pc)) / np.ptp(pc))
    check(acceptance_log, 10, "Ehrenfest tracking", ez <= 0.05 and ep <= 0.05,
          f"max deviation / range: z {ez:.3f}, p {ep:.3f}")


def test_comb_round_trip(acceptance_log):
    x = np.arange(-50.0, 50.0, 0.02)
    worst = 0.0
    for env in (4.0, 6.0, 10.0):
        for eps in (0.1, 0.15, 0.3):
            f = analysis.fit_comb_model(x, analysis.comb_density(x, env, eps))
            worst = max(worst, abs(f.envelope_sigma / env - 1), abs(f.spike_sigma / eps - 1),
                        abs(f.spacing / math.pi - 1))
    check(acceptance_log, 10, "comb-fit round trip", worst <= 0.03, f"max relative error {worst:.1e}")


def test_deterministic_reruns(acceptance_log, tmp_path):
    def files(out):
        return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix == ".csv"}

    outputs = []
    for workers in (1, 2, 4):
        cfg = build_config({"engine": "classical-hard", "lambda": [1.0, 1.7, 2.4, 4.0],
                            "t_final": 100.0, "ensemble": {"n": 2000}, "workers": workers,
                            "output_dir": str(tmp_path / f"w{workers}")})
        outputs.append(files(run(cfg).output_dir))
    same = all(o == outputs[0] for o in outputs[1:])
    sm = {standard_map_diffusion(10.0, 20_000, 200, workers=w) for w in (1, 3)}
    check(acceptance_log, 10, "byte-identical reruns", same and len(sm) == 1,
          f"{len(outputs[0])} CSV files identical for 1, 2, 4 workers: {same}; "
          f"standard map identical: {len(sm) == 1}")
