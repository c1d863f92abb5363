import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermi_accel.classical import EnsembleSpec, evolve_ensemble
from fermi_accel.errors import GridTooSmallError, InstabilityError, ParameterError
from fermi_accel.model import DimensionlessParams
from fermi_accel.quantum import (
    Absorber, Propagator, PropagatorConfig, SpatialGrid, Wavefunction, auto_grid,
    evolve_quantum, init_gaussian, momentum_density, observables, potential, split_step,
)


def params(lam=1.7, kbar=1.0, v0=1.0, kappa=4.0):
    return DimensionlessParams(lam, kappa, v0, kbar)


# grid

def test_grid_spacing_and_nodes():
    g = SpatialGrid(-10.0, 10.0, 1024)
    assert g.dz == pytest.approx(20.0 / 1024)
    assert g.z[0] == -10.0 and g.z[-1] == pytest.approx(10.0 - g.dz)
    p = g.momentum_nodes(0.5)
    assert p[0] == 0.0 and p.min() == pytest.approx(-g.p_max(0.5))
    assert np.allclose(np.sort(np.diff(np.sort(p))), 0.5 * 2 * math.pi / 20.0)


@pytest.mark.parametrize("args", [(1.0, 1.0, 1024), (0.0, 1.0, 1000), (0.0, 1.0, 128)])
def test_grid_rejects_invalid(args):
    with pytest.raises(ParameterError):
        SpatialGrid(*args)


# initial state

@pytest.mark.parametrize("z_std,kbar", [(1.0, 1.0), (0.1, 0.1), (2.0, 0.5)])
def test_gaussian_is_minimum_uncertainty(z_std, kbar):
    g = SpatialGrid(-40.0, 40.0, 8192)
    psi = init_gaussian(g, 3.0, 1.5, z_std, kbar)
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    o = observables(psi, kbar)
    assert o.z_mean == pytest.approx(3.0, abs=1e-9)
    assert o.p_mean == pytest.approx(1.5, abs=1e-9)
    assert o.dz == pytest.approx(z_std, rel=0.01)
    assert math.sqrt(o.dp2) == pytest.approx(kbar / (2 * z_std), rel=0.01)


def test_gaussian_too_close_to_edge():
    g = SpatialGrid(-5.0, 5.0, 1024)
    with pytest.raises(GridTooSmallError):
        init_gaussian(g, 4.0, 0.0, 1.0, 1.0)


# potential

def test_potential_examples():
    p = DimensionlessParams(0.0, 1.0, 1.0, 1.0)
    assert potential(np.array([0.0]), 0.0, p)[0] == pytest.approx(1.0, abs=1e-15)
    v = potential(np.array([60.0]), 0.3, params())
    assert v[0] == pytest.approx(60.0, abs=1e-12)


def test_potential_clamped_below_mirror():
    v = potential(np.array([-1e3]), 0.0, params(), clamp=50.0)
    assert np.isfinite(v).all()
    assert v[0] == pytest.approx(-1e3 + math.exp(50.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 20), st.floats(0, 50), st.floats(0, 4))
def test_potential_periodic_in_time(z, t, lam):
    p = params(lam)
    a = potential(np.array([z]), t, p)[0]
    b = potential(np.array([z]), t + 2 * math.pi, p)[0]
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


def test_gravity_switch():
    z = np.linspace(0, 5, 11)
    p = params(v0=0.0)
    assert np.allclose(potential(z, 0.0, p), z)
    assert np.allclose(potential(z, 0.0, p, gravity=False), 0.0)


# propagation

def test_free_packet_spreading():
    g = SpatialGrid(-100.0, 100.0, 4096)
    psi = init_gaussian(g, 0.0, 0.0, 1.0, 1.0)
    cfg = PropagatorConfig(dt=0.01, absorber=None, sample_stride=100, gravity=False)
    s = evolve_quantum(psi, params(v0=0.0), cfg, 20.0)
    expect = np.sqrt(1.0 + (s.sample_times / 2.0) ** 2)
    assert np.max(np.abs(s.dz / expect - 1.0)) < 0.005


def test_linear_potential_ehrenfest_exact():
    g = SpatialGrid(-80.0, 20.0, 4096)
    psi = init_gaussian(g, 0.0, 0.0, 1.0, 1.0)
    cfg = PropagatorConfig(dt=0.01, absorber=None, sample_stride=50)
    s = evolve_quantum(psi, params(v0=0.0), cfg, 10.0)
    assert np.max(np.abs(s.p_mean + s.sample_times)) < 1e-6
    assert np.max(np.abs(s.z_mean + s.sample_times ** 2 / 2)) < 1e-5


def test_unitarity_per_step():
    g = SpatialGrid(-8.0, 40.0, 2048)
    p = params(1.7)
    cfg = PropagatorConfig(absorber=None)
    prop = Propagator(g, p, cfg)
    psi = init_gaussian(g, 5.0, 0.0, 1.0, 1.0)
    prev = psi.norm()
    worst = 0.0
    for _ in range(500):
        psi = split_step(psi, p, cfg, prop)
        now = psi.norm()
        worst = max(worst, abs(now - prev))
        prev = now
    assert worst <= 1e-10


@pytest.mark.slow
def test_unitarity_long_run():
    g = SpatialGrid(-8.0, 40.0, 512)
    p = params(1.7)
    cfg = PropagatorConfig(dt=0.01, absorber=None)
    psi = init_gaussian(g, 5.0, 0.0, 1.0, 1.0)
    out = Propagator(g, p, cfg).run(psi, 100_000)
    assert abs(out.norm() - 1.0) <= 1e-6


def test_periodic_drive_bit_identical():
    g = SpatialGrid(-8.0, 40.0, 1024)
    p = params(1.7)
    cfg = PropagatorConfig(absorber=None)
    psi = init_gaussian(g, 5.0, 0.0, 1.0, 1.0)
    n = int(round(2 * math.pi / cfg.dt))
    a = Propagator(g, p, cfg).run(psi.copy(), n)
    shifted = psi.copy()
    shifted.t = 2 * math.pi
    b = Propagator(g, p, cfg).run(shifted, n)
    assert np.array_equal(a.amplitudes, b.amplitudes)


def test_instability_on_nonfinite_amplitudes():
    g = SpatialGrid(-8.0, 40.0, 256)
    psi = init_gaussian(g, 5.0, 0.0, 1.0, 1.0)
    psi.amplitudes[10] = np.nan
    with pytest.raises(InstabilityError):
        split_step(psi, params(), PropagatorConfig(absorber=None))


def test_absorber_bookkeeping_and_warning():
    # fast packet leaves through the upper edge
    g = SpatialGrid(-5.0, 40.0, 2048)
    psi = init_gaussian(g, 15.0, 12.0, 1.0, 1.0)
    cfg = PropagatorConfig(dt=5e-3, absorber=Absorber(0.1), sample_stride=50)
    with pytest.warns(RuntimeWarning):
        s = evolve_quantum(psi, params(v0=0.0), cfg, 6.0)
    assert s.absorbed[-1] > 0.2 and s.warnings
    assert np.max(np.abs(s.norm + s.absorbed - 1.0)) < 1e-6
    assert np.all(np.diff(s.absorbed) >= -1e-15)


def test_momentum_density_integrates_to_norm():
    g = SpatialGrid(-20.0, 20.0, 1024)
    psi = init_gaussian(g, 0.0, 2.0, 1.0, 1.0)
    psi.amplitudes *= math.sqrt(0.7)
    p, dens = momentum_density(psi, 1.0)
    assert np.all(np.diff(p) > 0)
    assert np.sum(dens) * (p[1] - p[0]) == pytest.approx(0.7, rel=1e-10)
    assert p[np.argmax(dens)] == pytest.approx(2.0, abs=p[1] - p[0])


def test_evolve_rejects_bad_time():
    g = SpatialGrid(-8.0, 40.0, 256)
    with pytest.raises(ParameterError):
        evolve_quantum(init_gaussian(g, 5.0, 0.0, 1.0, 1.0), params(), PropagatorConfig(), 0.0)


def test_auto_grid_contains_packet():
    p = params(1.7)
    g = auto_grid(p, 5.0, 1.0, 0.5, 100.0)
    assert g.z_min < -1.0 and g.z_max > 5.0 + 10.0
    assert g.p_max(1.0) > 20.0
    init_gaussian(g, 5.0, 0.0, 1.0, 1.0)


def test_quantum_means_follow_classical_ensemble():
    # Wigner function of a Gaussian is the classical Gaussian ensemble
    p = params(0.3, kbar=0.1)
    g = SpatialGrid(-5.0, 25.0, 4096)
    s = evolve_quantum(init_gaussian(g, 5.0, 0.0, 0.1, 0.1), p,
                       PropagatorConfig(dt=2e-3, absorber=None, sample_stride=250), 20.0)
    e = evolve_ensemble(EnsembleSpec(5000, 5.0, 0.0, 0.1, 0.5, seed=3), p, "soft", 20.0,
                        len(s.sample_times), dt=2e-3)
    assert np.allclose(e.sample_times, s.sample_times)
    assert np.max(np.abs(s.z_mean - e.z_mean)) < 0.05 * np.ptp(e.z_mean)
    assert np.max(np.abs(s.p_mean - e.p_mean)) < 0.05 * np.ptp(e.p_mean)
