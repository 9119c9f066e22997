"""Independent reference values frozen into the unit tests.

Nothing here imports :mod:`mmoscope`; every number is recomputed from the
model equations with scipy's QUADPACK, Brent and LSODA/Radau routines so that
the tests compare two separate code paths.  Run ``python tools/derive_oracles.py``
to print the values.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, fsolve


def koper_nf(k, lam, eps_hat=0.01):
    a = abs(k)
    return dict(f2=3 / a, f3=-1 / a, alpha=1.0, beta=-2.0,
                mu=(k + lam + 2) / k, eps=eps_hat / a)


def layer(p, x):
    """Trace and discriminant of the layer Jacobian on M2."""
    dF = 2 * p["f2"] * x + 3 * p["f3"] * x * x
    tr = dF + p["eps"] * p["beta"]
    det = p["eps"] * (p["beta"] * dF + p["alpha"])
    return tr, tr * tr - 4 * det


def hopf_and_nodes(p):
    x_dh = brentq(lambda x: layer(p, x)[0], -0.5, 0.5, xtol=1e-15)
    r = math.sqrt(p["eps"]) / p["f2"]
    dn_m = brentq(lambda x: layer(p, x)[1], x_dh - 3 * r, x_dh, xtol=1e-15)
    dn_p = brentq(lambda x: layer(p, x)[1], x_dh, x_dh + 3 * r, xtol=1e-15)
    return x_dh, dn_m, dn_p


def re_nu_weak(p, x):
    tr, disc = layer(p, x)
    return 0.5 * (tr + math.sqrt(disc)) if disc > 0 else 0.5 * tr


def entry_exit_const(p, x_in):
    x_dh = hopf_and_nodes(p)[0]
    base = quad(lambda x: re_nu_weak(p, x), x_in, x_dh, epsabs=1e-16, epsrel=1e-13)[0]
    return brentq(lambda b: base + quad(lambda x: re_nu_weak(p, x), x_dh, b,
                                        epsabs=1e-16, epsrel=1e-13)[0],
                  x_dh, x_dh + 10 * (x_dh - x_in), xtol=1e-15)


def koper_drift_pieces(k):
    """phi-weighted and plain drift integrals over the two sheet segments at z0 = 0."""
    a = abs(k)
    F = lambda s: (3 * s * s - s**3) / a
    dF = lambda s: (6 * s - 3 * s * s) / a
    G = lambda s: s - 2 * F(s)
    num = den = 0.0
    for lo, hi in ((-1.0, 0.0), (3.0, 2.0)):
        num += quad(lambda s: dF(s) * (-F(s)) / G(s), lo, hi, epsabs=1e-15, epsrel=1e-13)[0]
        den += quad(lambda s: dF(s) / G(s), lo, hi, epsabs=1e-15, epsrel=1e-13)[0]
    return num, den


def lambda_r_minus(k):
    num, den = koper_drift_pieces(k)
    return k * (-num / den) - k - 2


def return_drift(k, lam):
    num, den = koper_drift_pieces(k)
    mu = (k + lam + 2) / k
    return mu * den + num


def strong_graph(k, lam, delta, x):
    a = abs(k)
    mu = (k + lam + 2) / k
    F = lambda s: (3 * s * s - s**3) / a
    # s cancels between F' and G at z0 = 0
    f = lambda s: (6 - 3 * s) / a * (mu - F(s)) / (1 - 2 * (3 * s - s * s) / a)
    return delta * quad(f, 0.0, x, epsabs=1e-15, epsrel=1e-13)[0]


def koper_rhs(k, lam, eh, dl):
    def f(t, u):
        x, y, z = u
        return [(k * y + 3 * x - x**3 - lam) / eh, x - 2 * y + z, dl * (y - z)]
    return f


def koper_equilibrium(k, lam, eh=0.01, dl=0.01):
    f = koper_rhs(k, lam, eh, dl)
    # y = z and x = y on the equilibrium set, so x solves k x + 3x - x^3 = lam
    x = brentq(lambda x: (k + 3) * x - x**3 - lam, -3, 3)
    u = fsolve(lambda u: f(0, u), [x, x, x], xtol=1e-14)
    J = np.array([[(3 - 3 * u[0] ** 2) / eh, k / eh, 0.0],
                  [1.0, -2.0, 1.0], [0.0, dl, -dl]])
    return u, np.linalg.eigvals(J)


def lambda_sh_full(k, eh=0.01):
    """lambda at which a complex pair of the full Koper equilibrium crosses zero."""
    def re_pair(lam):
        ev = koper_equilibrium(k, lam, eh)[1]
        cpx = ev[np.abs(ev.imag) > 1e-12]
        return float(np.max(cpx.real))
    return brentq(re_pair, -(2 + k) - 0.05, -(2 + k) + 0.02, xtol=1e-12)


def relaxation_period(k=-5.4, lam=1.5):
    f = koper_rhs(k, lam, 0.01, 0.01)
    sec = 0.0  # koper x midway between the folds

    def ev(t, u):
        return u[0] - sec
    ev.direction = -1
    sol = solve_ivp(f, (0, 400), [-2.0, 0.1, -0.6], method="Radau", rtol=1e-10,
                    atol=1e-12, events=ev)
    te = sol.t_events[0]
    return float(np.mean(np.diff(te[-10:])))


def hh_rates():
    a_h = 0.07 * math.exp(0.0)
    a_m = 0.1 * 10.0  # limit of (v+40)/10 / (1 - exp(-(v+40)/10)) at v = -40
    return a_h, a_m


if __name__ == "__main__":
    p4 = koper_nf(-4.0, 0.0)
    print("k=-4 x_DH, x_DN-, x_DN+:", [repr(v) for v in hopf_and_nodes(p4)])
    p = koper_nf(-4.0, 0.0)
    p0 = dict(p, mu=0.5)
    for d in (1e-3, 2e-2):
        xdh = hopf_and_nodes(p0)[0]
        print(f"entry-exit phi=0 x_in=x_DH-{d}:", repr(entry_exit_const(p0, xdh - d)))
    print("lambda_r-(-4.5):", repr(lambda_r_minus(-4.5)))
    print("lambda_r-(-5.0):", repr(lambda_r_minus(-5.0)))
    print("return drift (-4.5, 1.5):", repr(return_drift(-4.5, 1.5)))
    print("strong graph (-4.5, 1.5, 0.01, -0.5):", repr(strong_graph(-4.5, 1.5, 0.01, -0.5)))
    u, ev = koper_equilibrium(-2.2, 1.5)
    print("k=-2.2 equilibrium:", u.tolist(), "eigs:", ev.tolist())
    print("lambda_SH full k=-4.4:", repr(lambda_sh_full(-4.4)))
    print("relaxation period k=-5.4:", repr(relaxation_period()))
    print("HH alpha_h(-65), alpha_m(-40):", hh_rates())
