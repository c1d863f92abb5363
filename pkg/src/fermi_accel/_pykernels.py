"""Pure-Python trajectory kernels.

Same algorithms and call signatures as the compiled ``_kernels`` module;
used when the extension is not built or ``FERMI_ACCEL_PURE_PYTHON=1``.
"""
from math import asin, cos, floor, isfinite, sin, sqrt
from math import exp as _exp

import numpy as np

TWO_PI = 6.283185307179586
RESIDUAL_TOL = 1e-12
GRAZE_TOL = 1e-10
MAX_REFINE = 200

OK, STUCK, ESCAPED, TOO_MANY, BLOWUP = 0, 1, 2, 3, 4


def exp(x):
    # C semantics: overflow gives inf instead of raising
    try:
        return _exp(x)
    except OverflowError:
        return float("inf")


def _gap(z0, p0, t0, lam, tau):
    return z0 + p0 * tau - 0.5 * tau * tau - lam * sin(t0 + tau)


def _refine(z0, p0, t0, lam, lo, hi):
    for _ in range(MAX_REFINE):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _gap(z0, p0, t0, lam, mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9 * (1.0 + hi):
            break
    tau = hi
    for _ in range(MAX_REFINE):
        f = _gap(z0, p0, t0, lam, tau)
        if abs(f) <= RESIDUAL_TOL:
            return tau
        if f > 0.0:
            lo = tau
        else:
            hi = tau
        df = p0 - tau - lam * cos(t0 + tau)
        step = f / df if df != 0.0 else 0.0
        if df != 0.0 and lo < tau - step < hi:
            tau = tau - step
        else:
            tau = 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * (1.0 + hi):
            return hi
    return hi


def _refine_contact(z0, p0, t0, lam, hi):
    lo = 0.0
    for _ in range(MAX_REFINE):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _gap(z0, p0, t0, lam, mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9 * (1.0 + hi):
            break
    if lo == 0.0:
        return hi
    return _refine(z0, p0, t0, lam, lo, hi)


def _scan(z0, p0, t0, lam, stride, start, stop, from_contact):
    lo = start
    if not from_contact:
        if _gap(z0, p0, t0, lam, lo) <= 0.0 and lo > 0.0:
            return lo
    k = 0
    while lo < stop:
        k += 1
        hi = start + k * stride
        if hi > stop:
            hi = stop
        if _gap(z0, p0, t0, lam, hi) <= 0.0:
            if from_contact and lo == 0.0:
                return _refine_contact(z0, p0, t0, lam, hi)
            return _refine(z0, p0, t0, lam, lo, hi)
        lo = hi
    return None


def _flight(z0, p0, t0, lam, stride, horizon, on_wall):
    alam = abs(lam)
    from_contact = on_wall
    disc = p0 * p0 + 2.0 * (z0 + alam)
    if disc < 0.0:
        disc = 0.0
    t_floor = p0 + sqrt(disc)
    if t_floor > horizon:
        return ESCAPED, 0.0

    lo = 0.0
    flo = 0.0 if on_wall else _gap(z0, p0, t0, lam, 0.0)
    if not on_wall and flo <= 0.0:
        if flo > -GRAZE_TOL and p0 - lam * cos(t0) > 0.0:
            from_contact = True
        else:
            return OK, 0.0

    if z0 <= alam and p0 > 0.0:
        disc = p0 * p0 - 2.0 * (alam - z0)
        if disc > 0.0:
            t_enter = p0 - sqrt(disc)
            tau = _scan(z0, p0, t0, lam, stride, 0.0, t_enter, from_contact)
            if tau is not None:
                return OK, tau
            from_contact = False
            lo = p0 + sqrt(disc)
    elif z0 > alam:
        disc = p0 * p0 + 2.0 * (z0 - alam)
        lo = p0 + sqrt(disc)
        from_contact = False
    tau = _scan(z0, p0, t0, lam, stride, lo, t_floor, from_contact)
    if tau is not None:
        return OK, tau
    return OK, t_floor


def next_bounce(z, p, t, lam, stride, horizon, on_wall=False):
    """Time of flight to the next wall contact, as ``(status, tau)``."""
    return _flight(z, p, t, lam, stride, horizon, on_wall)


def _release_time(t, lam):
    a = asin(1.0 / lam)
    if lam * sin(t) >= 1.0:
        return t
    cand = TWO_PI * floor(t / TWO_PI) + a
    while cand < t:
        cand += TWO_PI
    return cand


def evolve_hard(z0, p0, lam, t_start, sample_times, stride, horizon,
                max_bounces, z_out, p_out, n_out, status, i0, i1):
    ns = len(sample_times)
    samples = [float(x) for x in sample_times]
    for i in range(i0, i1):
        z = float(z0[i])
        p = float(p0[i])
        t = t_start
        nb = 0
        s = 0
        on_wall = False
        st = OK
        zrow, prow, nrow = z_out[i], p_out[i], n_out[i]
        while s < ns:
            st, tau = _flight(z, p, t, lam, stride, horizon, on_wall)
            if st != OK:
                break
            t_hit = t + tau
            while s < ns and samples[s] < t_hit:
                ts = samples[s] - t
                zrow[s] = z + p * ts - 0.5 * ts * ts
                prow[s] = p - ts
                nrow[s] = nb
                s += 1
            if s >= ns:
                break
            pb = p - tau
            u = lam * cos(t_hit)
            t = t_hit
            z = lam * sin(t_hit)
            p = 2.0 * u - pb
            nb += 1
            on_wall = True
            if nb > max_bounces:
                st = TOO_MANY
                break
            if p - u < GRAZE_TOL:
                t_rel = samples[ns - 1] + 1.0 if lam <= 1.0 else _release_time(t, lam)
                while s < ns and samples[s] < t_rel:
                    zrow[s] = lam * sin(samples[s])
                    prow[s] = lam * cos(samples[s])
                    nrow[s] = nb
                    s += 1
                if s >= ns:
                    st = STUCK
                    break
                t = t_rel
                z = lam * sin(t)
                p = lam * cos(t)
        status[i] = st


def evolve_soft(z0, p0, lam, kappa, v0, t_start, dt, clamp, sample_times,
                z_out, p_out, n_out, status, clamped, i0, i1):
    h = 0.5 * dt
    kv = kappa * v0
    samples = [float(x) for x in sample_times]
    for i in range(i0, i1):
        z = float(z0[i])
        p = float(p0[i])
        nb = 0
        nclamp = 0
        k = 0
        st = OK
        for s, ts in enumerate(samples):
            k_next = int((ts - t_start) / dt + 0.5)
            while k < k_next:
                t = t_start + k * dt
                arg = -kappa * (z - lam * sin(t))
                if arg > clamp:
                    arg = clamp
                    nclamp += 1
                p_prev = p
                p = p + h * (-1.0 + kv * exp(arg))
                z = z + dt * p
                t = t_start + (k + 1) * dt
                arg = -kappa * (z - lam * sin(t))
                if arg > clamp:
                    arg = clamp
                    nclamp += 1
                p = p + h * (-1.0 + kv * exp(arg))
                if p_prev < 0.0 and p >= 0.0:
                    nb += 1
                k += 1
            if not (isfinite(z) and isfinite(p)):
                st = BLOWUP
                break
            z_out[i, s] = z
            p_out[i, s] = p
            n_out[i, s] = nb
        status[i] = st
        clamped[i] = nclamp


def standard_map(theta, p, K, n_steps):
    # vectorized over particles; a per-particle loop is far too slow here
    th = np.array(theta, dtype=np.float64)
    pp = np.array(p, dtype=np.float64)
    for _ in range(n_steps):
        pp = pp + K * np.sin(th)
        th = th + pp
        th = th - TWO_PI * np.floor(th / TWO_PI)
    theta[:] = th
    p[:] = pp
