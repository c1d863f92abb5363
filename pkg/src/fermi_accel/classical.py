"""Classical trajectories and ensembles.

Ensembles are propagated along characteristics: every particle evolves
independently, either under the exact hard-wall bounce map (wall at
``lam*sin(t)``) or by leapfrog integration of the smooth exponential
mirror.  The standard map provides an independent check of the
large-modulation diffusion law.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import kernels, rng
from .errors import BlowupError, DegenerateEnsembleError, EscapeError, ParameterError
from .model import DimensionlessParams

DEFAULT_HORIZON = 1e6
DEFAULT_MAX_BOUNCES = 10 ** 6
DEFAULT_SOFT_DT = 1e-3
EXPONENT_CLAMP = 50.0
MODES = ("hard", "soft")


def default_stride(period: float = 2.0 * math.pi) -> float:
    return min(0.05, period / 128.0)


@dataclass(frozen=True)
class ClassicalState:
    z: float
    p: float
    t: float = 0.0


@dataclass(frozen=True)
class BounceEvent:
    t_impact: float
    p_before: float
    p_after: float
    wall_velocity: float


@dataclass(frozen=True)
class EnsembleSpec:
    """Independent Gaussian marginals in position and momentum at ``t = 0``."""

    n_particles: int
    z_mean: float = 0.0
    p_mean: float = 0.0
    z_std: float = 0.0
    p_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n_particles) < 1:
            raise ParameterError("n_particles must be >= 1")
        if self.z_std < 0 or self.p_std < 0:
            raise ParameterError("standard deviations must be >= 0")


@dataclass
class Ensemble:
    z: np.ndarray
    p: np.ndarray
    n_rejected: int = 0

    @property
    def states(self) -> list[ClassicalState]:
        return [ClassicalState(float(a), float(b), 0.0) for a, b in zip(self.z, self.p)]

    def __len__(self):
        return len(self.z)


@dataclass
class EnsembleSeries:
    """Ensemble statistics on a uniform time grid.

    ``p_var`` and ``z_var`` hold the standard deviations (Delta p,
    Delta z); histograms are ``(edges, densities)`` pairs.
    """

    lam: float
    mode: str
    sample_times: np.ndarray
    p_var: np.ndarray
    z_var: np.ndarray
    p_mean: np.ndarray
    z_mean: np.ndarray
    mean_bounces: np.ndarray
    final_p_hist: tuple
    final_z_hist: tuple
    final_p: np.ndarray
    final_z: np.ndarray
    n_excluded: int = 0
    n_stuck: int = 0
    n_rejected: int = 0
    n_clamped: int = 0
    dt: Optional[float] = None
    status_counts: dict = field(default_factory=dict)


class SweepPoint(NamedTuple):
    lam: float
    dp: float
    mean_bounces: float
    dz: float
    series: Optional[EnsembleSeries] = None


def _normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def sample_ensemble(spec: EnsembleSpec, hard_wall: bool = False,
                    max_attempts: int = 64) -> Ensemble:
    """Draw the initial ensemble.

    In hard-wall mode particles starting below the wall (at ``z = 0`` when
    ``t = 0``) are re-drawn.  The ensemble is rejected outright when the
    Gaussian puts more than half of its mass below the wall.
    """
    n = int(spec.n_particles)
    if hard_wall:
        if spec.z_std > 0:
            below = _normal_cdf(-spec.z_mean / spec.z_std)
        else:
            below = 1.0 if spec.z_mean < 0 else 0.0
        if below > 0.5:
            raise DegenerateEnsembleError(
                f"{below:.1%} of the initial distribution lies below the mirror")
    idx = np.arange(n, dtype=np.uint64)
    gz, gp = rng.normal_pair(spec.seed, idx, 0)
    z = spec.z_mean + spec.z_std * gz
    p = spec.p_mean + spec.p_std * gp
    n_rejected = 0
    if hard_wall:
        bad = np.flatnonzero(z < 0.0)
        attempt = 0
        while bad.size:
            n_rejected += bad.size
            attempt += 1
            if attempt > max_attempts:
                raise DegenerateEnsembleError(
                    f"{bad.size} particles still below the mirror after {max_attempts} redraws")
            gz, gp = rng.normal_pair(spec.seed, bad.astype(np.uint64), attempt)
            z[bad] = spec.z_mean + spec.z_std * gz
            p[bad] = spec.p_mean + spec.p_std * gp
            bad = bad[z[bad] < 0.0]
    return Ensemble(z=np.ascontiguousarray(z), p=np.ascontiguousarray(p), n_rejected=n_rejected)


def next_bounce(state: ClassicalState, lam: float, stride: Optional[float] = None,
                horizon: float = DEFAULT_HORIZON, backend=None):
    """Advance a hard-wall trajectory to its next impact and reflect it.

    Returns ``(BounceEvent, ClassicalState)``; the state sits on the wall
    with the reflected momentum ``2*u - p_before``.
    """
    impl = backend or kernels.impl
    stride = default_stride() if stride is None else stride
    status, tau = impl.next_bounce(float(state.z), float(state.p), float(state.t),
                                   float(lam), float(stride), float(horizon), False)
    if status == kernels.STATUS_ESCAPED:
        raise EscapeError(f"no impact within horizon {horizon:g} (trajectory keeps rising)")
    t_hit = state.t + tau
    p_before = state.p - tau
    u = lam * math.cos(t_hit)
    p_after = 2.0 * u - p_before
    event = BounceEvent(t_impact=t_hit, p_before=p_before, p_after=p_after, wall_velocity=u)
    return event, ClassicalState(z=lam * math.sin(t_hit), p=p_after, t=t_hit)


def soft_force(z: float, t: float, params: DimensionlessParams,
               clamp: float = EXPONENT_CLAMP) -> float:
    arg = min(-params.kappa * (z - params.lam * math.sin(t)), clamp)
    return -1.0 + params.kappa * params.v0 * math.exp(arg)


def soft_energy(state: ClassicalState, params: DimensionlessParams) -> float:
    arg = min(-params.kappa * (state.z - params.lam * math.sin(state.t)), EXPONENT_CLAMP)
    return 0.5 * state.p * state.p + state.z + params.v0 * math.exp(arg)


def soft_step(state: ClassicalState, params: DimensionlessParams, dt: float,
              clamp: float = EXPONENT_CLAMP) -> ClassicalState:
    """One kick-drift-kick step in the smooth mirror potential."""
    if not dt > 0:
        raise ParameterError("dt must be > 0")
    if not params.v0 > 0:
        raise ParameterError("soft mode requires v0 > 0")
    h = 0.5 * dt
    try:
        p = state.p + h * soft_force(state.z, state.t, params, clamp)
        z = state.z + dt * p
        t = state.t + dt
        p = p + h * soft_force(z, t, params, clamp)
    except OverflowError:
        z = p = math.inf
    if not (math.isfinite(z) and math.isfinite(p)):
        raise BlowupError("non-finite state in soft integration", last_state=state)
    return ClassicalState(z=z, p=p, t=t)


def _chunks(n, workers):
    workers = max(1, int(workers))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_chunks(fn, n, workers):
    parts = _chunks(n, workers)
    if len(parts) == 1:
        fn(*parts[0])
        return
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        for fut in [pool.submit(fn, a, b) for a, b in parts]:
            fut.result()


def _soft_trajectories(z0, p0, params, sample_times, dt, clamp, workers, impl):
    n, ns = len(z0), len(sample_times)
    z_out = np.zeros((n, ns))
    p_out = np.zeros((n, ns))
    n_out = np.zeros((n, ns), dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    clamped = np.zeros(n, dtype=np.int64)

    def work(i0, i1):
        impl.evolve_soft(z0, p0, params.lam, params.kappa, params.v0, float(sample_times[0]),
                         dt, clamp, sample_times, z_out, p_out, n_out, status, clamped, i0, i1)

    _run_chunks(work, n, workers)
    return z_out, p_out, n_out, status, clamped


def calibrate_soft_dt(params: DimensionlessParams, z0: float, p0: float,
                      dt: float = DEFAULT_SOFT_DT, t_check: float = 100.0,
                      tol: float = 1e-6, min_dt: float = 1e-6, backend=None) -> float:
    """Halve ``dt`` until a ``lam = 0`` flight conserves energy to ``tol``.

    Energy is read at unit-spaced times, skipping samples taken in the
    middle of a reflection.
    """
    impl = backend or kernels.impl
    static = params.with_lambda(0.0)
    z0 = float(max(z0, 1.0))
    p0 = float(p0)
    times = np.arange(0.0, t_check + 0.5, 1.0)
    e0 = 0.5 * p0 * p0 + z0 + static.v0 * math.exp(-static.kappa * z0)
    while True:
        zs, ps, _, st, _ = _soft_trajectories(
            np.array([z0]), np.array([p0]), static, times, dt, EXPONENT_CLAMP, 1, impl)
        if st[0] == kernels.STATUS_OK:
            z, p = zs[0], ps[0]
            mirror = static.v0 * np.exp(-static.kappa * z)
            clear = mirror < 1e-3
            energy = 0.5 * p * p + z + mirror
            if clear.any() and np.max(np.abs(energy[clear] - e0)) <= tol:
                return dt
        if dt / 2 < min_dt:
            return dt
        dt /= 2


def _moments(x, valid):
    v = x[valid]
    if v.shape[0] == 0:
        nan = np.full(x.shape[1], np.nan)
        return nan, nan
    mean = v.mean(axis=0)
    std = np.sqrt(((v - mean) ** 2).mean(axis=0))
    return mean, std


def evolve_ensemble(spec: EnsembleSpec, params: DimensionlessParams, mode: str = "hard",
                    t_final: float = 300.0, n_samples: int = 101, workers: int = 1,
                    dt: Optional[float] = None, stride: Optional[float] = None,
                    horizon: float = DEFAULT_HORIZON, max_bounces: int = DEFAULT_MAX_BOUNCES,
                    hist_bins="fd", backend=None) -> EnsembleSeries:
    """Evolve every particle to ``t_final`` and reduce to ensemble statistics.

    Escaped, runaway-bounce and blown-up trajectories are dropped from the
    statistics and counted in ``n_excluded``.
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if not t_final > 0:
        raise ParameterError("t_final must be > 0")
    if n_samples < 2:
        raise ParameterError("n_samples must be >= 2")
    impl = backend or kernels.impl
    ens = sample_ensemble(spec, hard_wall=(mode == "hard"))
    times = np.linspace(0.0, float(t_final), int(n_samples))
    n = len(ens)
    n_clamped = 0
    if mode == "hard":
        stride = default_stride() if stride is None else stride
        z_out = np.zeros((n, len(times)))
        p_out = np.zeros((n, len(times)))
        n_out = np.zeros((n, len(times)), dtype=np.int64)
        status = np.zeros(n, dtype=np.int8)

        def work(i0, i1):
            impl.evolve_hard(ens.z, ens.p, float(params.lam), 0.0, times, float(stride),
                             float(horizon), int(max_bounces), z_out, p_out, n_out,
                             status, i0, i1)

        _run_chunks(work, n, workers)
    else:
        if not params.v0 > 0:
            raise ParameterError("soft mode requires v0 > 0")
        if dt is None:
            dt = calibrate_soft_dt(params, spec.z_mean, spec.p_mean, backend=impl)
        # samples must sit on the step lattice
        steps = np.round(times / dt)
        times = steps * dt
        z_out, p_out, n_out, status, clamped = _soft_trajectories(
            ens.z, ens.p, params, times, float(dt), EXPONENT_CLAMP, workers, impl)
        n_clamped = int(clamped.sum())

    valid = (status == kernels.STATUS_OK) | (status == kernels.STATUS_STUCK)
    p_mean, p_std = _moments(p_out, valid)
    z_mean, z_std = _moments(z_out, valid)
    nb = n_out[valid].mean(axis=0) if valid.any() else np.full(len(times), np.nan)
    final_p = p_out[valid, -1].copy()
    final_z = z_out[valid, -1].copy()
    counts = {kernels.STATUS_NAMES[k]: int(c) for k, c in enumerate(np.bincount(status, minlength=5)) if c}
    return EnsembleSeries(
        lam=float(params.lam), mode=mode, sample_times=times,
        p_var=p_std, z_var=z_std, p_mean=p_mean, z_mean=z_mean, mean_bounces=nb,
        final_p_hist=histogram(final_p, hist_bins), final_z_hist=histogram(final_z, hist_bins),
        final_p=final_p, final_z=final_z,
        n_excluded=int((~valid).sum()), n_stuck=int((status == kernels.STATUS_STUCK).sum()),
        n_rejected=ens.n_rejected, n_clamped=n_clamped, dt=dt, status_counts=counts,
    )


def histogram(values, bins="fd"):
    """Density histogram ``(edges, densities)``; Freedman-Diaconis by default."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.array([0.0, 1.0]), np.array([0.0])
    if np.ptp(values) == 0:
        c = float(values[0])
        return np.array([c - 0.5, c + 0.5]), np.array([1.0])
    dens, edges = np.histogram(values, bins=bins, density=True)
    return edges, dens


def sweep_dispersion(spec: EnsembleSpec, params: DimensionlessParams, mode: str,
                     t_final: float, lambdas: Sequence[float], workers: int = 1,
                     keep_series: bool = False, **kwargs) -> list[SweepPoint]:
    """Final momentum spread and mean bounce count for each ``lambda``.

    Each point is an independent :func:`evolve_ensemble` with the same
    seed; points run concurrently on ``workers`` threads.
    """
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise ParameterError("lambdas must be non-empty")
    if any(b < a for a, b in zip(lambdas, lambdas[1:])):
        raise ParameterError("lambdas must be ascending")

    def one(lam):
        s = evolve_ensemble(spec, params.with_lambda(lam), mode, t_final, workers=1, **kwargs)
        return SweepPoint(lam, float(s.p_var[-1]), float(s.mean_bounces[-1]),
                          float(s.z_var[-1]), s if keep_series else None)

    if workers <= 1 or len(lambdas) == 1:
        return [one(lam) for lam in lambdas]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, lambdas))


def standard_map_diffusion(K: float, n_particles: int = 100_000, n_steps: int = 500,
                           seed: int = 0, workers: int = 1, backend=None) -> float:
    """Measured diffusion rate ``<(p_N - p_0)**2> / (2N)`` of the standard map.

    Initial angles and momenta are uniform on ``[0, 2 pi)``.
    """
    if K < 0:
        raise ParameterError("K must be >= 0")
    if n_steps < 100:
        raise ParameterError("n_steps must be >= 100")
    impl = backend or kernels.impl
    idx = np.arange(int(n_particles), dtype=np.uint64)
    theta = 2.0 * np.pi * (1.0 - rng.uniform(seed, idx, 0, 0))
    p0 = 2.0 * np.pi * (1.0 - rng.uniform(seed, idx, 0, 1))
    p = p0.copy()

    def work(i0, i1):
        th = np.ascontiguousarray(theta[i0:i1])
        pp = np.ascontiguousarray(p[i0:i1])
        impl.standard_map(th, pp, float(K), int(n_steps))
        p[i0:i1] = pp

    _run_chunks(work, len(p), workers)
    dp = p - p0
    return float(np.mean(dp * dp) / (2.0 * n_steps))
