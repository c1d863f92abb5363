"""Split-operator propagation of a wavepacket above the modulated mirror.

The wavefunction lives on a uniform periodic grid.  Each step applies
half a potential phase, the exact kinetic phase in the Fourier
representation, and the second half of the potential phase (Strang
splitting with the drive evaluated at the step midpoint).  Optional
absorbing layers at the grid edges remove outgoing probability, which is
book-kept in ``absorbed_norm``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft

from .errors import GridTooSmallError, InstabilityError, ParameterError
from .model import DimensionlessParams

TWO_PI = 2.0 * math.pi
DEFAULT_DT = 2e-3
EXPONENT_CLAMP = 50.0
ABSORBED_WARNING = 0.2


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on ``[z_min, z_max)``."""

    z_min: float
    z_max: float
    n_points: int

    def __post_init__(self):
        if not self.z_max > self.z_min:
            raise ParameterError("z_max must exceed z_min")
        n = int(self.n_points)
        if n < 256 or n & (n - 1):
            raise ParameterError("n_points must be a power of two >= 256")

    @property
    def length(self) -> float:
        return self.z_max - self.z_min

    @property
    def dz(self) -> float:
        return self.length / self.n_points

    @property
    def z(self) -> np.ndarray:
        return self.z_min + self.dz * np.arange(self.n_points)

    def momentum_nodes(self, kbar: float) -> np.ndarray:
        """Momenta in FFT (signed aliasing) order."""
        return kbar * TWO_PI * np.fft.fftfreq(self.n_points, d=self.dz)

    def p_max(self, kbar: float) -> float:
        return kbar * math.pi / self.dz


@dataclass
class Wavefunction:
    amplitudes: np.ndarray
    grid: SpatialGrid
    t: float = 0.0
    absorbed_norm: float = 0.0

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dz)

    def copy(self) -> "Wavefunction":
        return replace(self, amplitudes=self.amplitudes.copy())


@dataclass(frozen=True)
class Absorber:
    """Smooth edge mask ``cos(pi x / 2) ** (1/8)`` over a fraction of the grid."""

    frac: float = 0.05
    power: float = 0.125

    def __post_init__(self):
        if not 0.0 < self.frac < 0.5:
            raise ParameterError("absorber width fraction must lie in (0, 0.5)")


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float = DEFAULT_DT
    exponent_clamp: float = EXPONENT_CLAMP
    absorber: Optional[Absorber] = field(default_factory=Absorber)
    sample_stride: int = 250
    gravity: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be > 0")
        if int(self.sample_stride) < 1:
            raise ParameterError("sample_stride must be >= 1")


@dataclass
class QuantumSeries:
    sample_times: np.ndarray
    norm: np.ndarray
    z_mean: np.ndarray
    dz: np.ndarray
    p_mean: np.ndarray
    dp2: np.ndarray
    absorbed: np.ndarray
    momentum: np.ndarray
    momentum_density: np.ndarray
    final: Wavefunction
    warnings: list = field(default_factory=list)


def potential(z, t, params: DimensionlessParams, clamp: float = EXPONENT_CLAMP,
              gravity: bool = True):
    """Gravity plus the modulated exponential mirror.

    The mirror exponent ``-kappa (z - lam sin t)`` is capped at ``clamp``.
    """
    arg = np.minimum(-params.kappa * (np.asarray(z, dtype=float) - params.lam * np.sin(t)), clamp)
    v = params.v0 * np.exp(arg)
    if gravity:
        v = v + z
    return v if np.ndim(v) else float(v)


def init_gaussian(grid: SpatialGrid, z_mean: float, p_mean: float, z_std: float,
                  kbar: float) -> Wavefunction:
    """Minimum-uncertainty Gaussian with position spread ``z_std``."""
    if not z_std > 0:
        raise ParameterError("z_std must be > 0")
    if z_mean - 5 * z_std < grid.z_min or z_mean + 5 * z_std > grid.z_max:
        raise GridTooSmallError(
            f"packet z={z_mean}+-5*{z_std} does not fit in [{grid.z_min}, {grid.z_max}]")
    z = grid.z
    psi = np.exp(-((z - z_mean) ** 2) / (4.0 * z_std ** 2) + 1j * p_mean * (z - z_mean) / kbar)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dz)
    return Wavefunction(amplitudes=psi.astype(np.complex128), grid=grid, t=0.0)


@dataclass
class Observables:
    norm: float
    z_mean: float
    dz: float
    p_mean: float
    dp2: float


def momentum_density(psi: Wavefunction, kbar: float):
    """``(p, density)`` sorted by momentum; integrates to the surviving norm."""
    g = psi.grid
    phi = scipy.fft.fft(psi.amplitudes)
    dp = kbar * TWO_PI / g.length
    dens = np.abs(phi) ** 2 * g.dz / (g.n_points * dp)
    p = g.momentum_nodes(kbar)
    order = np.argsort(p, kind="stable")
    return p[order], dens[order]


def observables(psi: Wavefunction, kbar: float) -> Observables:
    g = psi.grid
    rho = np.abs(psi.amplitudes) ** 2 * g.dz
    norm = float(rho.sum())
    z = g.z
    zm = float((rho * z).sum() / norm)
    vz = float((rho * (z - zm) ** 2).sum() / norm)
    p, dens = momentum_density(psi, kbar)
    w = dens * (kbar * TWO_PI / g.length)
    pm = float((w * p).sum() / w.sum())
    vp = float((w * (p - pm) ** 2).sum() / w.sum())
    return Observables(norm, zm, math.sqrt(vz), pm, vp)


class Propagator:
    """Cached phase factors for repeated split-operator steps."""

    def __init__(self, grid: SpatialGrid, params: DimensionlessParams, cfg: PropagatorConfig):
        self.grid, self.params, self.cfg = grid, params, cfg
        dt, kbar = cfg.dt, params.kbar
        z = grid.z
        self._z = z
        self._half = 0.5 * dt / kbar
        p = grid.momentum_nodes(kbar)
        self._kinetic = np.exp(-1j * (p * p / 2.0) * dt / kbar)
        self._gravity = np.exp(-1j * z * self._half) if cfg.gravity else np.ones_like(z, dtype=complex)
        # mirror phase is below rounding beyond this height
        if params.v0 > 0:
            reach = math.log(max(params.v0 * self._half, 1e-300) / 1e-18)
            z_cut = params.lam + max(reach, 0.0) / params.kappa
            self._ncut = int(np.searchsorted(z, z_cut, side="right"))
        else:
            self._ncut = 0
        self._mask_lo = self._mask_hi = None
        if cfg.absorber is not None:
            n = grid.n_points
            width = max(1, int(round(cfg.absorber.frac * n)))
            x = (np.arange(width) + 1.0) / width
            prof = np.cos(0.5 * math.pi * x) ** cfg.absorber.power
            self._mask_hi = prof
            self._mask_lo = prof[::-1].copy()
            self._width = width

    def _half_phase(self, psi, t_mid):
        n = self._ncut
        psi[n:] *= self._gravity[n:]
        if n:
            prm = self.params
            zc = self._z[:n]
            arg = np.minimum(-prm.kappa * (zc - prm.lam * math.sin(t_mid)), self.cfg.exponent_clamp)
            v = prm.v0 * np.exp(arg)
            if self.cfg.gravity:
                v = v + zc
            psi[:n] *= np.exp(-1j * self._half * v)

    def _absorb(self, psi):
        if self._mask_hi is None:
            return 0.0
        w = self._width
        lo, hi = psi[:w], psi[-w:]
        before = np.sum(np.abs(lo) ** 2) + np.sum(np.abs(hi) ** 2)
        lo *= self._mask_lo
        hi *= self._mask_hi
        after = np.sum(np.abs(lo) ** 2) + np.sum(np.abs(hi) ** 2)
        return float(before - after) * self.grid.dz

    def run(self, psi: Wavefunction, n_steps: int) -> Wavefunction:
        """Advance ``n_steps`` steps; returns a new wavefunction."""
        dt = self.cfg.dt
        amp = psi.amplitudes.copy()
        absorbed = psi.absorbed_norm
        # the drive only sees the phase of the start time, so t and t + 2 pi
        # produce identical step sequences
        phase0 = math.fmod(psi.t, TWO_PI)
        for k in range(n_steps):
            t_mid = phase0 + (k + 0.5) * dt
            self._half_phase(amp, t_mid)
            amp = scipy.fft.fft(amp, overwrite_x=True)
            amp *= self._kinetic
            amp = scipy.fft.ifft(amp, overwrite_x=True)
            self._half_phase(amp, t_mid)
            absorbed += self._absorb(amp)
        return Wavefunction(amplitudes=amp, grid=psi.grid, t=psi.t + n_steps * dt,
                            absorbed_norm=absorbed)


def split_step(psi: Wavefunction, params: DimensionlessParams, cfg: PropagatorConfig,
               propagator: Optional[Propagator] = None) -> Wavefunction:
    """One Strang step of the Schrodinger equation."""
    prop = propagator or Propagator(psi.grid, params, cfg)
    before = psi.norm() + psi.absorbed_norm
    out = prop.run(psi, 1)
    if cfg.absorber is None and not abs(out.norm() - before) <= 1e-6:
        raise InstabilityError(f"norm jumped by {out.norm() - before:.3e} in one step")
    return out


def evolve_quantum(psi0: Wavefunction, params: DimensionlessParams, cfg: PropagatorConfig,
                   t_final: float, observables_stride: Optional[int] = None) -> QuantumSeries:
    """Propagate to ``t_final``, sampling observables every stride steps."""
    if not t_final > 0:
        raise ParameterError("t_final must be > 0")
    stride = int(observables_stride or cfg.sample_stride)
    n_total = int(round(t_final / cfg.dt))
    prop = Propagator(psi0.grid, params, cfg)
    kbar = params.kbar
    rows = []
    psi = psi0
    done = 0

    def record(w):
        ob = observables(w, kbar)
        rows.append((w.t, ob.norm, ob.z_mean, ob.dz, ob.p_mean, ob.dp2, w.absorbed_norm))
        return ob

    last = record(psi)
    while done < n_total:
        m = min(stride, n_total - done)
        psi = prop.run(psi, m)
        done += m
        ob = record(psi)
        total = ob.norm + psi.absorbed_norm
        prev = last.norm + rows[-2][6]
        if cfg.absorber is None and not abs(total - prev) <= 1e-6 * m:
            raise InstabilityError(f"norm drifted by {total - prev:.3e} over {m} steps")
        last = ob
    arr = np.array(rows)
    notes = []
    if psi.absorbed_norm > ABSORBED_WARNING:
        msg = f"absorbed norm {psi.absorbed_norm:.3f} exceeds {ABSORBED_WARNING}; grid too small"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    p, dens = momentum_density(psi, kbar)
    return QuantumSeries(sample_times=arr[:, 0], norm=arr[:, 1], z_mean=arr[:, 2], dz=arr[:, 3],
                         p_mean=arr[:, 4], dp2=arr[:, 5], absorbed=arr[:, 6],
                         momentum=p, momentum_density=dens, final=psi, warnings=notes)


def auto_grid(params: DimensionlessParams, z_mean: float, z_std: float, p_std: float,
              t_final: float, min_points: int = 2 ** 14, n_probe: int = 2000,
              absorber_frac: float = 0.05, seed: int = 0) -> SpatialGrid:
    """Size a grid from a hard-wall classical estimate of the packet's reach.

    The top must clear the highest classical excursion and the momentum
    cut-off must exceed the fastest impact momentum, both with margin.
    """
    from .classical import EnsembleSpec, evolve_ensemble

    spec = EnsembleSpec(n_probe, max(z_mean, 5 * z_std), 0.0, z_std, max(p_std, 1e-12), seed)
    s = evolve_ensemble(spec, params, "hard", t_final, n_samples=max(201, int(t_final)))
    z_reach = max(float(np.max(s.z_mean + 4 * s.z_var)), z_mean + 6 * z_std)
    z_top = 1.1 * z_reach + 20.0
    z_bot = -params.lam - 6.0 / params.kappa - 2.0
    length = (z_top - z_bot) / (1.0 - 2.0 * absorber_frac)
    z_min = z_bot - absorber_frac * length
    z_max = z_min + length
    p_need = 1.5 * (math.sqrt(2.0 * max(z_top, 1.0)) + 2.0 * params.lam)
    n = min_points
    while params.kbar * math.pi * n / length < p_need:
        n *= 2
    return SpatialGrid(z_min, z_max, n)
