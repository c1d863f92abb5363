"""Dimensionless model of the modulated evanescent-wave mirror.

Unit scaling between laboratory and dimensionless variables, the
acceleration-window arithmetic, integer-order Bessel functions and the
large-modulation diffusion law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

from .errors import DomainError, ParameterError

HBAR = 1.054571817e-34  # J s, CODATA 2018

CLASSICAL_THRESHOLD = 0.24

_BESSEL_SERIES_MAX = 10.0
_BESSEL_X_MAX = 1e4


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory parameters of the atom and the modulated mirror (SI units)."""

    mass: float
    gravity: float
    omega: float
    decay_k: float
    rabi_eff: float
    epsilon: float

    def __post_init__(self):
        for name in ("mass", "gravity", "omega", "decay_k", "rabi_eff"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be strictly positive, got {value!r}")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon!r}")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DimensionlessParams:
    """The scaled system consumed by every engine.

    ``lam`` is the modulation strength, ``kappa`` the mirror steepness,
    ``v0`` the mirror intensity and ``kbar`` the effective Planck constant.
    """

    lam: float
    kappa: float = 4.0
    v0: float = 1.0
    kbar: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ParameterError(f"lambda must be >= 0, got {self.lam!r}")
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise ParameterError(f"kappa must be > 0, got {self.kappa!r}")
        if not (math.isfinite(self.v0) and self.v0 >= 0):
            raise ParameterError(f"v0 must be >= 0, got {self.v0!r}")
        if not (math.isfinite(self.kbar) and self.kbar > 0):
            raise ParameterError(f"kbar must be > 0, got {self.kbar!r}")

    def with_lambda(self, lam: float) -> "DimensionlessParams":
        return DimensionlessParams(lam=lam, kappa=self.kappa, v0=self.v0, kbar=self.kbar)

    def to_dict(self):
        return {"lambda": self.lam, "kappa": self.kappa, "v0": self.v0, "kbar": self.kbar}


def scale_params(phys: PhysicalParams) -> DimensionlessParams:
    """Convert laboratory parameters to the dimensionless model."""
    if not isinstance(phys, PhysicalParams):
        raise ParameterError("expected PhysicalParams")
    m, g, w, k = phys.mass, phys.gravity, phys.omega, phys.decay_k
    return DimensionlessParams(
        lam=w * w * phys.epsilon / (2.0 * k * g),
        kappa=2.0 * k * g / (w * w),
        v0=HBAR * w * w * phys.rabi_eff / (4.0 * m * g * g),
        kbar=HBAR * w ** 3 / (m * g * g),
    )


def scale_state(phys: PhysicalParams, z_phys: float, p_phys: float, t_phys: float):
    """Laboratory (m, kg m/s, s) to dimensionless ``(z, p, t)``."""
    m, g, w = phys.mass, phys.gravity, phys.omega
    return z_phys * w * w / g, p_phys * w / (m * g), w * t_phys


def unscale_state(phys: PhysicalParams, z: float, p: float, t: float):
    """Inverse of :func:`scale_state`."""
    m, g, w = phys.mass, phys.gravity, phys.omega
    return z * g / (w * w), p * m * g / w, t / w


@dataclass(frozen=True)
class Window:
    """Acceleration window ``lo <= lambda < hi`` with half-integer index ``s``."""

    s: float
    lo: float
    hi: float
    center: float

    @classmethod
    def from_index(cls, s: float) -> "Window":
        if s <= 0 or (2 * s) != int(2 * s):
            raise ParameterError(f"window index must be a positive half-integer, got {s!r}")
        lo = s * math.pi
        hi = math.sqrt(1.0 + lo * lo)
        return cls(s=float(s), lo=lo, hi=hi, center=0.5 * (lo + hi))

    def __contains__(self, lam: float) -> bool:
        return self.lo <= lam < self.hi


def window_center(s: float) -> float:
    """Modulation strength at the centre of window ``s``."""
    return Window.from_index(s).center


def windows_up_to(lambda_max: float) -> list[Window]:
    """All windows whose lower edge does not exceed ``lambda_max``."""
    if not lambda_max > 0:
        raise ParameterError("lambda_max must be > 0")
    out = []
    k = 1
    while True:
        w = Window.from_index(k / 2)
        if w.lo > lambda_max:
            return out
        out.append(w)
        k += 1


def in_window(lam: float) -> Optional[Window]:
    """The window containing ``lam``, or ``None``."""
    if lam < 0:
        raise ParameterError("lambda must be >= 0")
    k = int(math.floor(2.0 * lam / math.pi))
    for kk in (k - 1, k, k + 1):
        if kk >= 1:
            w = Window.from_index(kk / 2)
            if lam in w:
                return w
    return None


def classical_threshold() -> float:
    """Modulation strength above which classical diffusion becomes global."""
    return CLASSICAL_THRESHOLD


def _bessel_series(x: float, nmax: int) -> list[float]:
    half = 0.5 * x
    q = -half * half
    out = []
    lead = 1.0
    for n in range(nmax + 1):
        if n:
            lead *= half / n
        term = lead
        total = term
        k = 0
        while True:
            k += 1
            term *= q / (k * (n + k))
            total += term
            if abs(term) < 1e-17 * max(abs(total), 1e-300) or k > 200:
                break
        out.append(total)
    return out


def _bessel_miller(x: float, nmax: int) -> list[float]:
    # downward recurrence from well above max(n, x), normalized with
    # J0 + 2 * sum J_2k = 1
    start = 2 * ((max(nmax, int(x)) + 20 + int(math.sqrt(40.0 * max(nmax, x)))) // 2)
    vals = [0.0] * (nmax + 1)
    b_next, b = 0.0, 1e-30
    norm = 0.0
    for n in range(start, 0, -1):
        b_prev = (2.0 * n / x) * b - b_next
        b_next, b = b, b_prev
        m = n - 1
        if abs(b) > 1e250:
            b *= 1e-250
            b_next *= 1e-250
            norm *= 1e-250
            vals = [v * 1e-250 for v in vals]
        if m <= nmax:
            vals[m] = b
        if m and m % 2 == 0:
            norm += b
    norm = 2.0 * norm + b
    return [v / norm for v in vals]


def bessel_j_all(x: float, nmax: int = 4) -> list[float]:
    """``[J_0(x), ..., J_nmax(x)]`` for real ``x`` with ``|x| <= 1e4``."""
    if not math.isfinite(x) or abs(x) > _BESSEL_X_MAX:
        raise DomainError(f"|x| must be <= {_BESSEL_X_MAX:g}, got {x!r}")
    ax = abs(x)
    if ax == 0.0:
        return [1.0] + [0.0] * nmax
    vals = _bessel_series(ax, nmax) if ax <= _BESSEL_SERIES_MAX else _bessel_miller(ax, nmax)
    if x < 0:
        vals = [v if n % 2 == 0 else -v for n, v in enumerate(vals)]
    return vals


def bessel_j(order: int, x: float) -> float:
    """Bessel function of the first kind for orders 0 to 3."""
    if order not in (0, 1, 2, 3):
        raise DomainError(f"order must be 0..3, got {order!r}")
    return bessel_j_all(x, 3)[order]


def diffusion_coefficient(lam: float) -> tuple[float, float]:
    """Return ``(D_lambda, D0)`` for modulation strength ``lam``.

    With ``K = 4*lam`` and ``D0 = K**2/2``,
    ``D_lambda = D0 * (1/2 - J2(K) - J1(K)**2 + J2(K)**2 + J3(K)**2)``.
    """
    if not lam > 0:
        raise ParameterError("lambda must be > 0")
    K = 4.0 * lam
    _, j1, j2, j3 = bessel_j_all(K, 3)
    d0 = 0.5 * K * K
    return d0 * (0.5 - j2 - j1 * j1 + j2 * j2 + j3 * j3), d0
