"""Slow drift accumulated along the attracting sheets and its consequences.

A trajectory that moves along ``S^a`` from ``x0`` to ``x1`` at (roughly)
constant ``z0`` picks up a displacement ``delta * G(x0, x1; z0; mu)`` in ``z``
with::

    G(x0, x1; z0; mu) = int_{x0}^{x1} F'(s) (mu + phi(s, F(s), z0))
                                      / (alpha s + beta F(s) - z0) ds

Balancing the drift collected on the two attracting sheets over one large
excursion gives the value ``mu_r`` separating single-epoch MMOs from
relaxation oscillation; the same drift counts how many large excursions
separate two epochs of small oscillations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .geometry import Config, classify_relative_config, drift_endpoints
from .local import reflect
from .model import KoperParams, ModelError, NormalFormParams, koper_to_normal_form
from .quadrature import adaptive_gk15

__all__ = [
    "DriftError",
    "DriftEndpoints",
    "DriftValue",
    "RelaxationFlag",
    "RELAXATION",
    "endpoints",
    "g_drift",
    "strong_manifold_graph",
    "return_drift",
    "mu_r_minus",
    "mu_r_plus",
    "mu_r_minus_root",
    "lambda_r",
    "lao_count",
    "drift_integrand",
]

PRESCAN_POINTS = 4096


class DriftError(ModelError):
    """Drift quadrature or boundary value not defined."""


@dataclass(frozen=True)
class DriftEndpoints:
    x_max: float
    x_star_max: float
    x_0: float


@dataclass(frozen=True)
class DriftValue:
    value: float
    x0: float
    x1: float
    z0: float
    mu: float
    error: float


class RelaxationFlag:
    """Sentinel returned by :func:`lao_count` when no return to small oscillations occurs."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "RELAXATION"


RELAXATION = RelaxationFlag()


def endpoints(p: NormalFormParams) -> DriftEndpoints:
    return DriftEndpoints(*drift_endpoints(p))


def _phi_on_sheet(p: NormalFormParams, s, z0: float):
    s = np.asarray(s, dtype=float)
    if p.phi.is_affine:
        ph = p.phi
        return ph.c0 + ph.cx * s + ph.cy * p.F(s) + ph.cz * z0
    return np.array([p.phi(si, p.F(si), z0) for si in np.ravel(s)]).reshape(s.shape)


def drift_integrand(p: NormalFormParams, z0: float, weight: str = "full"):
    """Integrand of the drift integral as a vectorised callable.

    ``weight`` selects ``"full"`` (``F' (mu + phi) / den``), ``"phi"``
    (``F' phi / den``) or ``"one"`` (``F' / den``); the last two are the
    numerator and denominator pieces of the closed form for ``mu_r``.  At
    ``z0 = 0`` the common factor ``s`` is cancelled analytically so that the
    removable singularity at ``s = 0`` disappears.
    """
    a, b, f2, f3, mu = p.alpha, p.beta, p.f2, p.f3, p.mu

    if z0 == 0.0:
        def base(s):
            return (2 * f2 + 3 * f3 * s) / (a + b * f2 * s + b * f3 * s * s)
    else:
        def base(s):
            return (2 * f2 * s + 3 * f3 * s * s) / (a * s + b * (f2 * s * s + f3 * s**3) - z0)

    if weight == "one":
        return lambda s: base(np.asarray(s, dtype=float))
    if weight == "phi":
        return lambda s: base(np.asarray(s, dtype=float)) * _phi_on_sheet(p, s, z0)
    if weight == "full":
        return lambda s: base(np.asarray(s, dtype=float)) * (mu + _phi_on_sheet(p, s, z0))
    raise ValueError(f"unknown weight {weight!r}")


def _prescan(p: NormalFormParams, x0: float, x1: float, z0: float) -> None:
    s = np.linspace(min(x0, x1), max(x0, x1), PRESCAN_POINTS)
    if z0 == 0.0:
        den = p.alpha + p.beta * p.f2 * s + p.beta * p.f3 * s * s
    else:
        den = p.alpha * s + p.beta * p.F(s) - z0
    if np.any(den == 0) or np.any(np.sign(den[1:]) != np.sign(den[:-1])):
        raise DriftError("drift integrand pole")


def _integrate(p, x0, x1, z0, weight, rel_tol):
    if x0 == x1:
        return 0.0, 0.0
    _prescan(p, x0, x1, z0)
    r = adaptive_gk15(drift_integrand(p, z0, weight), x0, x1,
                      rel_tol=rel_tol, abs_tol=1e-15)
    return r.value, r.error


def g_drift(p: NormalFormParams, x0: float, x1: float, z0: float = 0.0,
            rel_tol: float = 1e-12) -> DriftValue:
    """Drift integral from ``x0`` to ``x1`` at level ``z0``.

    Raises
    ------
    DriftError
        ``"drift integrand pole"`` if ``alpha s + beta F(s) - z0`` vanishes on
        the segment (detected on a 4096-point grid).
    """
    v, e = _integrate(p, x0, x1, z0, "full", rel_tol)
    return DriftValue(v, x0, x1, z0, p.mu, e)


def strong_manifold_graph(p: NormalFormParams, x: float) -> float:
    """Leading-order ``z`` on the strong fibre through the origin, ``delta * G(0, x; 0)``."""
    return p.delta * g_drift(p, 0.0, x, 0.0).value


def return_drift(p: NormalFormParams, mu: float | None = None) -> float:
    """Drift collected over one large excursion at level ``z = 0`` (without ``delta``)."""
    q = p if mu is None else p.replace(mu=mu)
    e = endpoints(q)
    return (g_drift(q, e.x_0, e.x_max).value
            + g_drift(q, e.x_star_max, 0.0).value)


def _require_remote(p: NormalFormParams) -> None:
    if classify_relative_config(p).kind is not Config.REMOTE:
        raise DriftError("mu_r defined only for remote singularities")


def mu_r_minus(p: NormalFormParams) -> float:
    """Balance value ``mu_r`` for the lower fold, as a ratio of integrals.

    The return drift is affine in ``mu``, so its root is minus the
    ``phi``-weighted integrals over the plain ones, both taken over the two
    sheet segments ``(x_0 -> x_max)`` and ``(x*_max -> 0)``.
    """
    _require_remote(p)
    e = endpoints(p)
    num = (_integrate(p, e.x_star_max, 0.0, 0.0, "phi", 1e-13)[0]
           + _integrate(p, e.x_0, e.x_max, 0.0, "phi", 1e-13)[0])
    den = (_integrate(p, e.x_star_max, 0.0, 0.0, "one", 1e-13)[0]
           + _integrate(p, e.x_0, e.x_max, 0.0, "one", 1e-13)[0])
    return -num / den


def mu_r_minus_root(p: NormalFormParams, bracket: tuple[float, float] | None = None) -> float:
    """Same value as :func:`mu_r_minus`, by root-finding the return drift in ``mu``."""
    _require_remote(p)
    if bracket is None:
        lo, hi = -1.0, 1.0
        f_lo, f_hi = return_drift(p, lo), return_drift(p, hi)
        while f_lo * f_hi > 0:
            lo, hi = 2 * lo, 2 * hi
            f_lo, f_hi = return_drift(p, lo), return_drift(p, hi)
            if hi > 1e8:
                raise DriftError("cannot bracket the return-drift root")
    else:
        lo, hi = bracket
    return brentq(lambda m: return_drift(p, m), lo, hi, xtol=1e-14, rtol=1e-15)


def mu_r_plus(p: NormalFormParams) -> float:
    """Balance value for the upper fold, from the reflected system."""
    return -mu_r_minus(reflect(p))


def lambda_r(kp: KoperParams, side: str = "minus", via: str = "symmetry") -> float:
    """Koper ``lambda`` on the boundary between single-epoch MMOs and relaxation.

    ``via="symmetry"`` negates the lower value for the upper side;
    ``via="reflection"`` computes the upper side directly from the reflected
    normal form, which gives an independent route to the same number.
    """
    if not kp.k < -4:
        raise DriftError("lambda_r needs k < -4 (remote singularities)")
    p = koper_to_normal_form(kp)
    if side == "minus":
        return kp.k * mu_r_minus(p) - kp.k - 2.0
    if side != "plus":
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    if via == "symmetry":
        return -(kp.k * mu_r_minus(p) - kp.k - 2.0)
    if via == "reflection":
        return kp.k * mu_r_plus(p) - kp.k - 2.0
    raise ValueError(f"via must be 'symmetry' or 'reflection', got {via!r}")


def lao_count(p: NormalFormParams, z_in: float, z_out: float):
    """Number of large excursions between two epochs of small oscillations below.

    Returns an ``int``, or :data:`RELAXATION` when the drift never brings the
    trajectory back below the lower folded singularity.
    """
    if z_in < 0:
        return 1
    if z_in >= z_out:
        return RELAXATION
    if not z_out > 0:
        raise DriftError("z_out must be positive")
    _require_remote(p)
    s = return_drift(p)
    if s >= 0:
        return RELAXATION
    return 1 + int(math.floor(z_out / (p.delta * abs(s))))
