# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory kernels.

Mirrors :mod:`fermi_accel._pykernels` operation for operation; both must
produce identical floating-point results for the same inputs.
"""
from libc.math cimport sin, cos, sqrt, exp, asin, fabs, floor, isfinite

cdef double TWO_PI = 6.283185307179586
cdef double RESIDUAL_TOL = 1e-12
cdef double GRAZE_TOL = 1e-10
cdef int MAX_REFINE = 200

# status codes, shared with the pure-Python path
cdef enum:
    OK = 0
    STUCK = 1
    ESCAPED = 2
    TOO_MANY = 3
    BLOWUP = 4


cdef inline double _gap(double z0, double p0, double t0, double lam, double tau) noexcept nogil:
    return z0 + p0 * tau - 0.5 * tau * tau - lam * sin(t0 + tau)


cdef inline double _gap_slope(double p0, double t0, double lam, double tau) noexcept nogil:
    return p0 - tau - lam * cos(t0 + tau)


cdef double _refine(double z0, double p0, double t0, double lam,
                    double lo, double hi) noexcept nogil:
    # root of the gap in (lo, hi] given gap(lo) > 0 >= gap(hi)
    cdef double mid, fm, f, df, step, tau
    cdef int it
    for it in range(MAX_REFINE):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = _gap(z0, p0, t0, lam, mid)
        if fm > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9 * (1.0 + hi):
            break
    # safeguarded Newton polish inside the bracket
    tau = hi
    for it in range(MAX_REFINE):
        f = _gap(z0, p0, t0, lam, tau)
        if fabs(f) <= RESIDUAL_TOL:
            return tau
        if f > 0.0:
            lo = tau
        else:
            hi = tau
        df = _gap_slope(p0, t0, lam, tau)
        step = f / df if df != 0.0 else 0.0
        if df != 0.0 and lo < tau - step < hi:
            tau = tau - step
        else:
            tau = 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * (1.0 + hi):
            return hi
    return hi


cdef int _flight(double z0, double p0, double t0, double lam, double stride,
                 double horizon, bint on_wall, double *tau_out) noexcept nogil:
    """Earliest tau > 0 at which the free parabola meets the wall."""
    cdef double alam = fabs(lam)
    cdef double disc, t_enter, t_floor, lo, flo
    cdef bint from_contact = on_wall

    # below the lower wall excursion the crossing has certainly happened
    disc = p0 * p0 + 2.0 * (z0 + alam)
    if disc < 0.0:
        disc = 0.0
    t_floor = p0 + sqrt(disc)
    if t_floor > horizon:
        return ESCAPED

    lo = 0.0
    flo = 0.0 if on_wall else _gap(z0, p0, t0, lam, 0.0)
    if not on_wall and flo <= 0.0:
        if flo > -GRAZE_TOL and p0 - lam * cos(t0) > 0.0:
            # touching the wall but already moving away from it
            from_contact = True
        else:
            tau_out[0] = 0.0
            return OK

    # first window: the rising arc before it leaves the band z <= |lam|
    if z0 <= alam and p0 > 0.0:
        disc = p0 * p0 - 2.0 * (alam - z0)
        if disc > 0.0:
            t_enter = p0 - sqrt(disc)
            if _scan(z0, p0, t0, lam, stride, 0.0, t_enter, from_contact, tau_out):
                return OK
            from_contact = False
            lo = p0 + sqrt(disc)
        # apex inside the band: scan straight through to the floor
    elif z0 > alam:
        disc = p0 * p0 + 2.0 * (z0 - alam)
        lo = p0 + sqrt(disc)
        from_contact = False
    if _scan(z0, p0, t0, lam, stride, lo, t_floor, from_contact, tau_out):
        return OK
    # floating-point corner: the floor itself is the crossing
    tau_out[0] = t_floor
    return OK


cdef bint _scan(double z0, double p0, double t0, double lam, double stride,
                double start, double stop, bint from_contact,
                double *tau_out) noexcept nogil:
    cdef double lo = start, hi, fhi, flo
    cdef long k = 0
    if not from_contact:
        flo = _gap(z0, p0, t0, lam, lo)
        if flo <= 0.0 and lo > 0.0:
            tau_out[0] = lo
            return True
    while lo < stop:
        k += 1
        hi = start + k * stride
        if hi > stop:
            hi = stop
        fhi = _gap(z0, p0, t0, lam, hi)
        if fhi <= 0.0:
            if from_contact and lo == 0.0:
                tau_out[0] = _refine_contact(z0, p0, t0, lam, hi)
            else:
                tau_out[0] = _refine(z0, p0, t0, lam, lo, hi)
            return True
        lo = hi
    return False


cdef double _refine_contact(double z0, double p0, double t0, double lam,
                            double hi) noexcept nogil:
    # gap(0) == 0: bisect on gap(tau)/tau, positive near 0 for a departing particle
    cdef double lo = 0.0, mid
    cdef int it
    for it in range(MAX_REFINE):
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


def next_bounce(double z, double p, double t, double lam,
                double stride, double horizon, bint on_wall=False):
    """Time of flight to the next wall contact.

    Returns ``(status, tau)``.
    """
    cdef double tau = 0.0
    cdef int status
    with nogil:
        status = _flight(z, p, t, lam, stride, horizon, on_wall, &tau)
    return status, tau


cdef inline double _release_time(double t, double lam) noexcept nogil:
    # first time >= t with lam*sin(t) >= 1, i.e. the wall decelerates faster than gravity
    cdef double a = asin(1.0 / lam)
    cdef double base, cand
    if lam * sin(t) >= 1.0:
        return t
    base = TWO_PI * floor(t / TWO_PI)
    cand = base + a
    while cand < t:
        cand += TWO_PI
    return cand


def evolve_hard(double[::1] z0, double[::1] p0, double lam, double t_start,
                double[::1] sample_times, double stride, double horizon,
                long max_bounces, double[:, ::1] z_out, double[:, ::1] p_out,
                long long[:, ::1] n_out, signed char[::1] status,
                Py_ssize_t i0, Py_ssize_t i1):
    """Event-driven hard-wall evolution of particles ``i0 .. i1 - 1``.

    Writes positions, momenta and cumulative bounce counts at every sample
    time into row ``i`` of the output arrays.
    """
    cdef Py_ssize_t i, s, ns = sample_times.shape[0]
    cdef double z, p, t, tau, t_hit, ts, pb, u, t_rel
    cdef long long nb
    cdef int st
    cdef bint on_wall
    with nogil:
        for i in range(i0, i1):
            z = z0[i]
            p = p0[i]
            t = t_start
            nb = 0
            s = 0
            on_wall = False
            st = OK
            while s < ns:
                st = _flight(z, p, t, lam, stride, horizon, on_wall, &tau)
                if st != OK:
                    break
                t_hit = t + tau
                while s < ns and sample_times[s] < t_hit:
                    ts = sample_times[s] - t
                    z_out[i, s] = z + p * ts - 0.5 * ts * ts
                    p_out[i, s] = p - ts
                    n_out[i, s] = nb
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
                    # no separation: ride the wall until it out-decelerates gravity
                    if lam <= 1.0:
                        t_rel = sample_times[ns - 1] + 1.0
                    else:
                        t_rel = _release_time(t, lam)
                    while s < ns and sample_times[s] < t_rel:
                        z_out[i, s] = lam * sin(sample_times[s])
                        p_out[i, s] = lam * cos(sample_times[s])
                        n_out[i, s] = nb
                        s += 1
                    if s >= ns:
                        st = STUCK
                        break
                    t = t_rel
                    z = lam * sin(t)
                    p = lam * cos(t)
            status[i] = st


def evolve_soft(double[::1] z0, double[::1] p0, double lam, double kappa,
                double v0, double t_start, double dt, double clamp,
                double[::1] sample_times, double[:, ::1] z_out,
                double[:, ::1] p_out, long long[:, ::1] n_out,
                signed char[::1] status, long long[::1] clamped,
                Py_ssize_t i0, Py_ssize_t i1):
    """Kick-drift-kick leapfrog in the exponential mirror potential.

    Sample times must lie on the step lattice ``t_start + k*dt`` (nearest
    step is used).
    """
    cdef Py_ssize_t i, s, ns = sample_times.shape[0]
    cdef double z, p, p_prev, t, arg, f, h = 0.5 * dt, kv = kappa * v0
    cdef long long nb, k, k_next, nclamp
    cdef int st
    with nogil:
        for i in range(i0, i1):
            z = z0[i]
            p = p0[i]
            nb = 0
            nclamp = 0
            k = 0
            st = OK
            for s in range(ns):
                k_next = <long long>((sample_times[s] - t_start) / dt + 0.5)
                while k < k_next:
                    t = t_start + k * dt
                    arg = -kappa * (z - lam * sin(t))
                    if arg > clamp:
                        arg = clamp
                        nclamp += 1
                    f = -1.0 + kv * exp(arg)
                    p_prev = p
                    p = p + h * f
                    z = z + dt * p
                    t = t_start + (k + 1) * dt
                    arg = -kappa * (z - lam * sin(t))
                    if arg > clamp:
                        arg = clamp
                        nclamp += 1
                    f = -1.0 + kv * exp(arg)
                    p = p + h * f
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


def standard_map(double[::1] theta, double[::1] p, double K, long n_steps):
    """Iterate the standard map in place; theta is kept in [0, 2 pi)."""
    cdef Py_ssize_t i, n = theta.shape[0]
    cdef long k
    cdef double th, pp
    # steps outermost: independent particles overlap in the pipeline
    with nogil:
        for k in range(n_steps):
            for i in range(n):
                pp = p[i] + K * sin(theta[i])
                th = theta[i] + pp
                theta[i] = th - TWO_PI * floor(th / TWO_PI)
                p[i] = pp
