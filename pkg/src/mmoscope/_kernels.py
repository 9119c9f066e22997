"""Compiled right-hand sides, Jacobians and HH rate functions.

Every system is a pair ``rhs(p, y, out)`` / ``jac(p, y, out)`` acting on a flat
float parameter vector so that the integrator kernel can take them as
first-class arguments.  Parameter layouts:

normal      [f2, f3, alpha, beta, mu, eps, delta, c0, cx, cy, cz]
koper       [k, lambda, eps_hat, delta]
koper_sym   [k, lambda, eps_hat, delta]
hh          [Ibar, eps, delta, tau_n, g_k, g_l, E_na, E_k, E_l, v_scale]
"""

import math

import numba as nb
import numpy as np

# Half-width (mV) of the series branch around the removable singularities.
_SERIES_BAND = 1e-4


@nb.njit(cache=True)
def _x_over_1m_exp(u):
    # u / (1 - exp(-u)), removable singularity at u = 0
    if abs(u) < _SERIES_BAND / 10.0:
        return 1.0 + u / 2.0 + u * u / 12.0
    return u / (-math.expm1(-u))


@nb.njit(cache=True)
def alpha_m(V):
    return _x_over_1m_exp((V + 40.0) / 10.0)


@nb.njit(cache=True)
def beta_m(V):
    return 4.0 * math.exp(-(V + 65.0) / 18.0)


@nb.njit(cache=True)
def alpha_h(V):
    return 0.07 * math.exp(-(V + 65.0) / 20.0)


@nb.njit(cache=True)
def beta_h(V):
    return 1.0 / (1.0 + math.exp(-(V + 35.0) / 10.0))


@nb.njit(cache=True)
def alpha_n(V):
    return 0.1 * _x_over_1m_exp((V + 55.0) / 10.0)


@nb.njit(cache=True)
def beta_n(V):
    return 0.125 * math.exp(-(V + 65.0) / 80.0)


@nb.njit(cache=True)
def m_inf(V):
    a = alpha_m(V)
    return a / (a + beta_m(V))


@nb.njit(cache=True)
def n_inf(V):
    a = alpha_n(V)
    return a / (a + beta_n(V))


@nb.njit(cache=True)
def h_inf(V):
    a = alpha_h(V)
    return a / (a + beta_h(V))


@nb.njit(cache=True)
def inv_t_n(V):
    return alpha_n(V) + beta_n(V)


@nb.njit(cache=True)
def inv_t_h(V):
    return alpha_h(V) + beta_h(V)


# ---------------------------------------------------------------- normal form


@nb.njit(cache=True)
def normal_rhs(p, y, out):
    f2, f3, a, b, mu, eps, delta = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    x, yy, z = y[0], y[1], y[2]
    out[0] = (-yy + f2 * x * x + f3 * x * x * x) / eps
    out[1] = a * x + b * yy - z
    out[2] = delta * (mu + p[7] + p[8] * x + p[9] * yy + p[10] * z)


@nb.njit(cache=True)
def normal_jac(p, y, out):
    f2, f3, a, b, eps, delta = p[0], p[1], p[2], p[3], p[5], p[6]
    x = y[0]
    out[0, 0] = (2.0 * f2 * x + 3.0 * f3 * x * x) / eps
    out[0, 1] = -1.0 / eps
    out[0, 2] = 0.0
    out[1, 0] = a
    out[1, 1] = b
    out[1, 2] = -1.0
    out[2, 0] = delta * p[8]
    out[2, 1] = delta * p[9]
    out[2, 2] = delta * p[10]


# ---------------------------------------------------------------------- Koper


@nb.njit(cache=True)
def koper_rhs(p, y, out):
    k, lam, eh, delta = p[0], p[1], p[2], p[3]
    x, yy, z = y[0], y[1], y[2]
    out[0] = (k * yy + 3.0 * x - x * x * x - lam) / eh
    out[1] = x - 2.0 * yy + z
    out[2] = delta * (yy - z)


@nb.njit(cache=True)
def koper_jac(p, y, out):
    k, eh, delta = p[0], p[2], p[3]
    x = y[0]
    out[0, 0] = (3.0 - 3.0 * x * x) / eh
    out[0, 1] = k / eh
    out[0, 2] = 0.0
    out[1, 0] = 1.0
    out[1, 1] = -2.0
    out[1, 2] = 1.0
    out[2, 0] = 0.0
    out[2, 1] = delta
    out[2, 2] = -delta


@nb.njit(cache=True)
def koper_sym_rhs(p, y, out):
    k, lam, eh, delta = p[0], p[1], p[2], p[3]
    x, yy, z = y[0], y[1], y[2]
    out[0] = (yy - x * x * x + 3.0 * x) / eh
    out[1] = k * x - 2.0 * (yy + lam) + z
    out[2] = delta * (lam + yy - z)


@nb.njit(cache=True)
def koper_sym_jac(p, y, out):
    k, eh, delta = p[0], p[2], p[3]
    x = y[0]
    out[0, 0] = (3.0 - 3.0 * x * x) / eh
    out[0, 1] = 1.0 / eh
    out[0, 2] = 0.0
    out[1, 0] = k
    out[1, 1] = -2.0
    out[1, 2] = 1.0
    out[2, 0] = 0.0
    out[2, 1] = delta
    out[2, 2] = -delta


# ------------------------------------------------------------- Hodgkin-Huxley


@nb.njit(cache=True)
def hh_v_dot_eps(p, v, n, h):
    """eps * dv/dt, i.e. the fast nullcline function V(v, n, h)."""
    Ibar, g_k, g_l, E_na, E_k, E_l, vs = p[0], p[4], p[5], p[6], p[7], p[8], p[9]
    m = m_inf(vs * v)
    return (Ibar - (v - E_na) * m * m * m * h - g_k * (v - E_k) * n ** 4
            - g_l * (v - E_l))


@nb.njit(cache=True)
def hh_rhs(p, y, out):
    eps, delta, tau_n, vs = p[1], p[2], p[3], p[9]
    v, n, h = y[0], y[1], y[2]
    V = vs * v
    out[0] = hh_v_dot_eps(p, v, n, h) / eps
    out[1] = inv_t_n(V) * (n_inf(V) - n) / tau_n
    out[2] = delta * inv_t_h(V) * (h_inf(V) - h)


@nb.njit(cache=True)
def hh_jac(p, y, out):
    eps, delta, tau_n, g_k, E_na, E_k, vs = p[1], p[2], p[3], p[4], p[6], p[7], p[9]
    v, n, h = y[0], y[1], y[2]
    V = vs * v
    m = m_inf(V)
    # v-derivatives of the rate terms by central differences (smooth in v)
    dv = 1e-6
    fp = np.empty(3)
    fm = np.empty(3)
    yp = np.array([v + dv, n, h])
    ym = np.array([v - dv, n, h])
    hh_rhs(p, yp, fp)
    hh_rhs(p, ym, fm)
    for i in range(3):
        out[i, 0] = (fp[i] - fm[i]) / (2.0 * dv)
    out[0, 1] = -4.0 * g_k * (v - E_k) * n ** 3 / eps
    out[0, 2] = -(v - E_na) * m * m * m / eps
    out[1, 1] = -inv_t_n(V) / tau_n
    out[1, 2] = 0.0
    out[2, 1] = 0.0
    out[2, 2] = -delta * inv_t_h(V)
