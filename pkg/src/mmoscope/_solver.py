"""Compiled adaptive integrator.

Explicit Dormand-Prince 5(4) with PI step control and the 4th-order continuous
extension; a linearly implicit, L-stable Rosenbrock method of order 2 (ROS2)
takes over for a block of steps whenever the explicit step has been pinned at
``h_min`` for ``COLLAPSE_COUNT`` consecutive steps.

Along the way the kernel locates extrema of component 0 (roots of its
derivative) and crossings of the section ``y[0] = section`` on the dense
output, so that event times are accurate to ``EVENT_TOL`` in time.
"""

import math

import numba as nb
import numpy as np

COLLAPSE_COUNT = 20
IMPLICIT_BLOCK = 2000
EVENT_TOL = 1e-12

STATUS_OK = 0
STATUS_MAX_STEPS = 1
STATUS_NONFINITE = 2

# Dormand-Prince coefficients
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)
D1, D3, D4, D5, D6, D7 = (-12715105075 / 11282082432, 87487479700 / 32700410799,
                          -10690763975 / 1880347072, 701980252875 / 199316789632,
                          -1453857185 / 822651844, 69997945 / 29380423)

GAMMA_ROS2 = 1.0 + 1.0 / math.sqrt(2.0)


@nb.njit(cache=True)
def _dense(rc, theta, out):
    # rc rows: y0, ydiff, bspl, rc4, rc5 (rc5 = 0 for Hermite steps)
    t1 = 1.0 - theta
    for i in range(out.shape[0]):
        out[i] = rc[0, i] + theta * (rc[1, i] + t1 * (rc[2, i] + theta * (
            rc[3, i] + t1 * rc[4, i])))


@nb.njit(cache=True)
def _grow(a, n):
    if n < a.shape[0]:
        return a
    shape = (2 * a.shape[0],) + a.shape[1:]
    b = np.empty(shape, dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@nb.njit(cache=True)
def _locate(rhs, p, rc, t0, h, which, target, g0, tmp, ftmp):
    """Root in theta of the event function on one step (bisection/Illinois).

    which == 0: derivative of component 0; which == 1: y0 - target.
    """
    lo, hi = 0.0, 1.0
    glo = g0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _dense(rc, mid, tmp)
        if which == 0:
            rhs(p, tmp, ftmp)
            gm = ftmp[0]
        else:
            gm = tmp[0] - target
        if gm == 0.0:
            return mid
        if (gm > 0.0) == (glo > 0.0):
            lo = mid
            glo = gm
        else:
            hi = mid
        if (hi - lo) * h < EVENT_TOL:
            break
    return 0.5 * (lo + hi)


@nb.njit(cache=True)
def _err_norm(err, y0, y1, rtol, atol):
    s = 0.0
    n = y0.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y0[i]), abs(y1[i]))
        s += (err[i] / sc) ** 2
    return math.sqrt(s / n)


@nb.njit(cache=True)
def integrate_kernel(rhs, jac, p, y0, t0, t1, rtol, atol, h_init, h_max, h_min,
                     max_steps, stride, section, use_section):
    n = y0.shape[0]
    cap = 1024
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    hs = np.empty(cap)
    ns = 0
    ecap = 256
    ev_t = np.empty(ecap)
    ev_y = np.empty((ecap, n))
    ev_kind = np.empty(ecap, dtype=np.int64)  # +1 max, -1 min
    ne = 0
    scap = 64
    sc_t = np.empty(scap)
    sc_y = np.empty((scap, n))
    sc_dir = np.empty(scap, dtype=np.int64)
    nsec = 0
    n_implicit = 0
    n_rejected = 0

    y = y0.copy()
    t = t0
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    yt = np.empty(n)
    ynew = np.empty(n)
    err = np.empty(n)
    rc = np.zeros((5, n))
    tmp = np.empty(n)
    ftmp = np.empty(n)
    J = np.empty((n, n))
    M = np.empty((n, n))

    rhs(p, y, k1)
    ts[0] = t
    ys[0] = y
    hs[0] = 0.0
    ns = 1

    h = h_init
    if h <= 0.0:
        # Hairer's starting-step heuristic, first-order version
        d0 = 0.0
        d1 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            d0 += (y[i] / sc) ** 2
            d1 += (k1[i] / sc) ** 2
        d0 = math.sqrt(d0 / n)
        d1 = math.sqrt(d1 / n)
        if d0 < 1e-5 or d1 < 1e-5:
            h = 1e-6
        else:
            h = 0.01 * d0 / d1
    h = min(h, h_max)
    h = max(h, h_min)

    facold = 1e-4
    status = STATUS_OK
    collapsed = 0
    implicit_left = 0
    steps = 0
    last_h = h
    while t < t1:
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        steps += 1
        if t + h > t1:
            h = t1 - t
        if implicit_left > 0:
            # ---- ROS2 step
            jac(p, y, J)
            for i in range(n):
                for j in range(n):
                    M[i, j] = -GAMMA_ROS2 * h * J[i, j]
                M[i, i] += 1.0
            for i in range(n):
                k2[i] = k1[i]
            a1 = np.linalg.solve(M, k2)
            for i in range(n):
                yt[i] = y[i] + h * a1[i]
            rhs(p, yt, k3)
            for i in range(n):
                k3[i] = k3[i] - 2.0 * a1[i]
            a2 = np.linalg.solve(M, k3)
            for i in range(n):
                ynew[i] = y[i] + 1.5 * h * a1[i] + 0.5 * h * a2[i]
                err[i] = 0.5 * h * (a1[i] + a2[i])
            e = _err_norm(err, y, ynew, rtol, atol)
            if not math.isfinite(e):
                e = 1e10
            fac = max(0.2, min(5.0, 0.9 / math.sqrt(max(e, 1e-10))))
            if e > 1.0 and h > h_min:
                h = max(h * fac, h_min)
                n_rejected += 1
                continue
            rhs(p, ynew, k7)
            # cubic Hermite for dense output
            for i in range(n):
                rc[0, i] = y[i]
                rc[1, i] = ynew[i] - y[i]
                rc[2, i] = h * k1[i] - rc[1, i]
                rc[3, i] = rc[1, i] - h * k7[i] - rc[2, i]
                rc[4, i] = 0.0
            n_implicit += 1
            implicit_left -= 1
            h_next = min(h * fac, h_max)
        else:
            # ---- Dormand-Prince step
            for i in range(n):
                yt[i] = y[i] + h * A21 * k1[i]
            rhs(p, yt, k2)
            for i in range(n):
                yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            rhs(p, yt, k3)
            for i in range(n):
                yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            rhs(p, yt, k4)
            for i in range(n):
                yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i]
                                    + A54 * k4[i])
            rhs(p, yt, k5)
            for i in range(n):
                yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                    + A64 * k4[i] + A65 * k5[i])
            rhs(p, yt, k6)
            for i in range(n):
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                      + A75 * k5[i] + A76 * k6[i])
            rhs(p, ynew, k7)
            for i in range(n):
                err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                              + E6 * k6[i] + E7 * k7[i])
            e = _err_norm(err, y, ynew, rtol, atol)
            if not math.isfinite(e):
                e = 1e10
            fac11 = e ** 0.17
            fac = fac11 / facold ** 0.04
            fac = max(0.1, min(5.0, fac / 0.9))
            if e > 1.0:
                if h > h_min:
                    h = max(h / min(5.0, fac11 / 0.9), h_min)
                    n_rejected += 1
                    collapsed = 0
                    continue
                # pinned at h_min: accept and count towards the collapse switch
                collapsed += 1
                if collapsed >= COLLAPSE_COUNT:
                    implicit_left = IMPLICIT_BLOCK
                    collapsed = 0
            else:
                collapsed = 0
                facold = max(e, 1e-4)
            for i in range(n):
                ydiff = ynew[i] - y[i]
                bspl = h * k1[i] - ydiff
                rc[0, i] = y[i]
                rc[1, i] = ydiff
                rc[2, i] = bspl
                rc[3, i] = ydiff - h * k7[i] - bspl
                rc[4, i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i]
                                + D6 * k6[i] + D7 * k7[i])
            h_next = min(h / fac, h_max)

        finite = True
        for i in range(n):
            if not math.isfinite(ynew[i]):
                finite = False
        if not finite:
            status = STATUS_NONFINITE
            break

        # ---- events on the accepted step
        g0 = k1[0]
        g1 = k7[0]
        if (g0 > 0.0 and g1 <= 0.0) or (g0 < 0.0 and g1 >= 0.0):
            th = _locate(rhs, p, rc, t, h, 0, 0.0, g0, tmp, ftmp)
            _dense(rc, th, tmp)
            ev_t = _grow(ev_t, ne)
            ev_y = _grow(ev_y, ne)
            ev_kind = _grow(ev_kind, ne)
            ev_t[ne] = t + th * h
            ev_y[ne] = tmp
            ev_kind[ne] = 1 if g0 > 0.0 else -1
            ne += 1
        if use_section:
            s0 = y[0] - section
            s1 = ynew[0] - section
            if (s0 > 0.0 and s1 <= 0.0) or (s0 < 0.0 and s1 >= 0.0):
                th = _locate(rhs, p, rc, t, h, 1, section, s0, tmp, ftmp)
                _dense(rc, th, tmp)
                sc_t = _grow(sc_t, nsec)
                sc_y = _grow(sc_y, nsec)
                sc_dir = _grow(sc_dir, nsec)
                sc_t[nsec] = t + th * h
                sc_y[nsec] = tmp
                sc_dir[nsec] = -1 if s0 > 0.0 else 1
                nsec += 1

        t = t + h
        for i in range(n):
            y[i] = ynew[i]
            k1[i] = k7[i]
        last_h = h
        if steps % stride == 0 or t >= t1:
            ts = _grow(ts, ns)
            ys = _grow(ys, ns)
            hs = _grow(hs, ns)
            ts[ns] = t
            ys[ns] = y
            hs[ns] = last_h
            ns += 1
        h = max(h_next, h_min)

    return (ts[:ns], ys[:ns], hs[:ns], ev_t[:ne], ev_y[:ne], ev_kind[:ne],
            sc_t[:nsec], sc_y[:nsec], sc_dir[:nsec], status, steps,
            n_rejected, n_implicit)


def disable_kernel_cache() -> None:
    """Stop the solver kernel from writing to the on-disk cache."""
    from numba.core.caching import NullCache

    integrate_kernel._cache = NullCache()


def python_kernel():
    """Uncompiled copy of :func:`integrate_kernel` for Python callbacks.

    Each compiled helper is swapped for its ``py_func`` in a private globals
    table, so plain Python ``rhs``/``jac`` callables are accepted throughout.
    """
    import types

    g = dict(globals())
    names = ("_dense", "_grow", "_locate", "_err_norm", "integrate_kernel")
    for name in names:
        f = globals()[name].py_func
        g[name] = types.FunctionType(f.__code__, g, name, f.__defaults__, f.__closure__)
    return g["integrate_kernel"]
