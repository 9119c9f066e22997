"""Local analysis of the fast-intermediate layer along ``M2`` near the folds.

Near the lower fold the two-dimensional layer problem (``x, y`` with ``z``
frozen) linearised about ``M2`` has the Jacobian::

    J(x) = [[F'(x),      -1    ],
            [eps*alpha,  eps*beta]]

whose eigenvalues pass through a Hopf point (zero trace) flanked by two
degenerate nodes (zero discriminant).  Landmarks near the upper fold are
obtained by applying the same machinery to the reflected system
``X = x_max - x``, ``Y = y_q+ - y``, ``Z = z_q+ - z``, which is again in
normal form with identical ``f2, f3, alpha, beta``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .geometry import m2_fold_points
from .model import KoperParams, ModelError, NormalFormParams, PhiSpec, koper_to_normal_form
from .quadrature import adaptive_gk15

__all__ = [
    "LocalAnalysisError",
    "EigenPair",
    "LocalLandmarks",
    "EntryExitResult",
    "HopfType",
    "reflect",
    "jacobian_eigenvalues",
    "landmarks",
    "hopf_criticality",
    "mu_sh",
    "lambda_sh",
    "lambda_sh_numeric",
    "entry_exit",
    "sector_exit",
    "canard_coefficient",
    "m2_abscissa",
]


class LocalAnalysisError(ModelError):
    """A local landmark or exit point could not be determined."""


# ---------------------------------------------------------------- reflection


def reflect(p: NormalFormParams) -> NormalFormParams:
    """Normal form seen from the upper fold.

    The change ``(x, y, z) -> (x_max - x, y_q+ - y, z_q+ - z)`` maps the upper
    folded singularity to the origin and keeps ``f2, f3, alpha, beta, eps`` and
    ``delta``; the slow flow picks up a sign, so ``mu -> -mu`` and ``phi`` is
    replaced by ``-phi`` evaluated at the preimage.
    """
    xm = -2 * p.f2 / (3 * p.f3)
    ym = p.F(xm)
    zm = p.G(xm)
    ph = p.phi
    if ph.is_affine:
        c0 = -(ph.c0 + ph.cx * xm + ph.cy * ym + ph.cz * zm)
        new_phi = PhiSpec(c0, ph.cx, ph.cy, ph.cz)
    else:
        f = ph.func
        new_phi = PhiSpec(func=lambda X, Y, Z: -f(xm - X, ym - Y, zm - Z))
    return p.replace(mu=-p.mu, phi=new_phi)


def _side_params(p: NormalFormParams, side: str) -> NormalFormParams:
    if side == "minus":
        return p
    if side == "plus":
        return reflect(p)
    raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")


def _to_side(p: NormalFormParams, side: str, x, z):
    """Map local (reflected) coordinates back to the original ones."""
    if side == "minus":
        return x, z
    xm = -2 * p.f2 / (3 * p.f3)
    return xm - x, p.G(xm) - z


# ---------------------------------------------------------------- eigenvalues


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalues of the layer Jacobian on ``M2``.

    ``nu1`` takes the principal square root with the ``+`` sign, so its real
    part is the larger one: the weak direction while attracting and the strong
    one while repelling.
    """

    nu1: complex
    nu2: complex
    trace: float
    det: float

    @property
    def discriminant(self) -> float:
        return self.trace**2 - 4 * self.det


def _trace_det(p: NormalFormParams, x: float) -> tuple[float, float]:
    dF = p.dF(x)
    return p.beta * p.eps + dF, p.eps * (p.alpha + p.beta * dF)


def jacobian_eigenvalues(p: NormalFormParams, x: float) -> EigenPair:
    tr, det = _trace_det(p, x)
    root = cmath.sqrt(tr * tr - 4 * det)
    return EigenPair(0.5 * (tr + root), 0.5 * (tr - root), tr, det)


def _re_nu1(p: NormalFormParams, x):
    """Vectorised real part of ``nu1``."""
    x = np.asarray(x, dtype=float)
    dF = 2 * p.f2 * x + 3 * p.f3 * x * x
    tr = p.beta * p.eps + dF
    disc = tr * tr - 4 * p.eps * (p.alpha + p.beta * dF)
    return 0.5 * (tr + np.sqrt(np.maximum(disc, 0.0)))


# ---------------------------------------------------------------- landmarks


class HopfType(enum.Enum):
    SUPERCRITICAL = "Supercritical"
    SUBCRITICAL = "Subcritical"
    DEGENERATE = "Degenerate"


def canard_coefficient(p: NormalFormParams) -> float:
    """Coefficient ``c`` in ``z_CN - z_DH = c * eps`` at leading order."""
    return (p.alpha * p.beta * (5 * p.f2 - 3 * (1 - p.alpha * p.f3))
            / (4 * (1 + p.f2) * p.f2))


def hopf_criticality(p: NormalFormParams, tol: float = 1e-12) -> HopfType:
    """Criticality of the Hopf point on the lower attracting branch of ``M2``."""
    s = p.f2 - 0.6 * (1 - p.alpha * p.f3)
    if abs(s) <= tol:
        return HopfType.DEGENERATE
    return HopfType.SUPERCRITICAL if s < 0 else HopfType.SUBCRITICAL


@dataclass(frozen=True)
class LocalLandmarks:
    """Hopf, degenerate-node and canard positions on one attracting branch.

    Coordinates are in the original frame.  The ``interval_*`` properties give
    the nodal, spiral and canard ranges of ``z`` as ``(lo, hi)``; on the plus
    side the slow drift runs towards decreasing ``z``, so the nodal range is
    unbounded above there.
    """

    side: str
    mode: str
    x_DH: float
    z_DH: float
    x_DN_minus: float
    z_DN_minus: float
    x_DN_plus: float
    z_DN_plus: float
    x_CN: float
    z_CN: float

    @property
    def interval_nodal(self) -> tuple[float, float]:
        if self.side == "minus":
            return (-math.inf, self.z_DN_minus)
        return (self.z_DN_minus, math.inf)

    @property
    def interval_spiral(self) -> tuple[float, float]:
        return tuple(sorted((self.z_DN_minus, self.z_DH)))

    @property
    def interval_canard(self) -> tuple[float, float]:
        return (min(self.z_DH, self.z_CN), max(self.z_DH, self.z_CN))

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "side", "mode", "x_DH", "z_DH", "x_DN_minus", "z_DN_minus",
            "x_DN_plus", "z_DN_plus", "x_CN", "z_CN")}
        d["interval_nodal"] = list(self.interval_nodal)
        d["interval_spiral"] = list(self.interval_spiral)
        d["interval_canard"] = list(self.interval_canard)
        return d


def _asymptotic_local(p: NormalFormParams) -> dict:
    a, b, f2, f3, e = p.alpha, p.beta, p.f2, p.f3, p.eps
    if a < 0:
        raise LocalAnalysisError("degenerate nodes need alpha >= 0")
    x_dh = -b * e / (2 * f2)
    z_dh = -a * b * e / (2 * f2)
    root = math.sqrt(a * e) / f2
    shift = b * e / (2 * f2) - 3 * f3 * a * e / (2 * f2**3)
    zs = a**1.5 * math.sqrt(e) / f2
    zshift = a * (3 * b / (2 * f2) - 3 * f3 * a / (2 * f2**3)) * e
    z_cn = z_dh + canard_coefficient(p) * e
    return dict(x_DH=x_dh, z_DH=z_dh,
                x_DN_minus=-root + shift, z_DN_minus=-zs + zshift,
                x_DN_plus=root + shift, z_DN_plus=zs + zshift,
                x_CN=z_cn / a if a else 0.0, z_CN=z_cn)


def _bisect(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12,
            what: str = "root") -> float:
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise LocalAnalysisError(
            f"cannot bracket {what} on [{a:.6g}, {b:.6g}]: values {fa:.3g}, {fb:.3g}")
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b, fb = m, fm
    return 0.5 * (a + b)


def _numeric_local(p: NormalFormParams) -> dict:
    asym = _asymptotic_local(p)
    trace = lambda x: _trace_det(p, x)[0]
    x_dh_a = asym["x_DH"]
    lo, hi = sorted((0.0, 4 * x_dh_a))
    x_dh = _bisect(trace, lo, hi, what="Hopf point (zero trace)")

    def disc(x):
        tr, det = _trace_det(p, x)
        return tr * tr - 4 * det

    if disc(x_dh) >= 0:
        raise LocalAnalysisError("no focal range around the Hopf point")
    # walk outwards from the Hopf point until the discriminant turns positive
    out = {}
    for key, sgn in (("minus", -1.0), ("plus", 1.0)):
        step = max(abs(asym[f"x_DN_{key}"] - x_dh), 1e-8)
        far = x_dh + sgn * step
        tries = 0
        while disc(far) < 0:
            step *= 1.5
            far = x_dh + sgn * step
            tries += 1
            if tries > 200:
                raise LocalAnalysisError(f"cannot bracket degenerate node ({key})")
        out[key] = brentq(disc, *sorted((x_dh, far)), xtol=1e-15, rtol=1e-15)
    z_dh = float(p.G(x_dh))
    z_cn = z_dh + canard_coefficient(p) * p.eps
    x_cn = m2_abscissa(p, z_cn, x_dh)
    return dict(x_DH=x_dh, z_DH=z_dh,
                x_DN_minus=out["minus"], z_DN_minus=float(p.G(out["minus"])),
                x_DN_plus=out["plus"], z_DN_plus=float(p.G(out["plus"])),
                x_CN=x_cn, z_CN=z_cn)


def m2_abscissa(p: NormalFormParams, z: float, near: float) -> float:
    """Abscissa on the ``M2`` branch through the origin with ``G(x) = z``."""
    step = max(abs(z / p.alpha) if p.alpha else 1e-3, 1e-12)
    a, b = near - step, near + step
    g = lambda x: p.G(x) - z
    for _ in range(200):
        if g(a) * g(b) <= 0:
            return brentq(g, a, b, xtol=1e-15)
        step *= 2
        a, b = near - step, near + step
    raise LocalAnalysisError("cannot invert G near the fold")


def landmarks(p: NormalFormParams, side: str = "minus",
              mode: str = "numeric") -> LocalLandmarks:
    """Hopf point, degenerate nodes and canard plane on one side.

    ``mode="asymptotic"`` evaluates leading-order expansions in ``eps``;
    ``mode="numeric"`` refines the Hopf point (zero trace, bisection to
    1e-12) and the degenerate nodes (zero discriminant).  The canard plane has
    no numeric refinement and is placed at the leading-order offset from the
    refined Hopf point.
    """
    if not p.eps > 0:
        raise LocalAnalysisError("landmarks need eps > 0")
    q = _side_params(p, side)
    if mode == "asymptotic":
        d = _asymptotic_local(q)
    elif mode == "numeric":
        d = _numeric_local(q)
    else:
        raise ValueError(f"mode must be 'asymptotic' or 'numeric', got {mode!r}")
    vals = {}
    for tag in ("DH", "DN_minus", "DN_plus", "CN"):
        x, z = _to_side(p, side, d[f"x_{tag}"], d[f"z_{tag}"])
        vals[f"x_{tag}"] = float(x)
        vals[f"z_{tag}"] = float(z)
    return LocalLandmarks(side=side, mode=mode, **vals)


# ---------------------------------------------------------------- Hopf values


def mu_sh(p: NormalFormParams, side: str = "minus",
          order: str = "singular") -> float:
    """Value of ``mu`` at which the equilibrium passes a fold-side Hopf point.

    ``order="singular"`` places the equilibrium at the folded singularity;
    ``order="eps_corrected"`` at the leading-order Hopf point of the layer
    problem.
    """
    q = _side_params(p, side)
    if order == "singular":
        x, y, z = 0.0, 0.0, 0.0
    elif order == "eps_corrected":
        x = -q.beta * q.eps / (2 * q.f2)
        y = q.beta**2 * q.eps**2 / (4 * q.f2)
        z = -q.alpha * q.beta * q.eps / (2 * q.f2)
    else:
        raise ValueError(f"order must be 'singular' or 'eps_corrected', got {order!r}")
    val = -float(q.phi(x, y, z))
    return val + 0.0 if side == "minus" else -val + 0.0


def lambda_sh(kp: KoperParams, side: str = "minus") -> float:
    """Koper ``lambda`` at the singular Hopf bifurcation, to first order in eps.

    With the Hopf point of the layer problem substituted into the
    equilibrium condition, ``mu = eps_hat / 3`` on the lower side, hence
    ``lambda = -(2 + k) - |k| eps_hat / 3``; the upper side is the mirror image.
    """
    if not kp.k < 0:
        raise ModelError("Koper requires k < 0")
    lam = -(2.0 + kp.k) - abs(kp.k) * kp.eps_hat / 3.0
    if side == "minus":
        return lam
    if side == "plus":
        return -lam
    raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")


def lambda_sh_numeric(kp: KoperParams, side: str = "minus",
                      half_width: float = 0.5) -> float:
    """Hopf value of ``lambda`` of the full Koper equilibrium, by root-finding
    the largest real part of its eigenvalues around :func:`lambda_sh`."""
    from .integrate import find_equilibrium
    from .model import normal_state_to_koper

    def growth(lam):
        kk = kp.replace(lam=lam)
        nf = koper_to_normal_form(kk)
        xf = 0.0 if side == "minus" else -2 * nf.f2 / (3 * nf.f3)
        guess = normal_state_to_koper(kk, np.array([xf, nf.F(xf), nf.G(xf)]))
        rep = find_equilibrium(kk, guess)
        return float(np.max(rep.eigenvalues.real))

    c = lambda_sh(kp, side)
    return brentq(growth, c - half_width, c + half_width, xtol=1e-12)


# ---------------------------------------------------------------- exits


@dataclass(frozen=True)
class EntryExitResult:
    x_in: float
    x_out: float
    residual: float
    branch: str = "nu1"


def _slow_on_m2(p: NormalFormParams, x):
    x = np.asarray(x, dtype=float)
    return p.mu + p.phi(x, p.F(x), p.G(x))


def entry_exit(p: NormalFormParams, x_in: float, side: str = "minus",
               tol: float = 1e-12) -> EntryExitResult:
    """Exit abscissa balancing contraction before and expansion after the Hopf point.

    Solves ``integral_{x_in}^{x_out} Re(nu1(x)) / (mu + phi(x, F(x), G(x))) dx = 0``
    for ``x_out`` beyond the Hopf point, with ``nu1`` the weak eigenvalue
    branch on the attracting side.  On the plus side ``x_in`` and ``x_out``
    are in original coordinates.

    Raises
    ------
    LocalAnalysisError
        ``"slow flow vanishes on path"`` when ``mu + phi`` changes sign
        before the balance is reached, ``"no balanced exit"`` when the
        accumulated integral never returns to zero.
    """
    q = _side_params(p, side)
    xm = -2 * p.f2 / (3 * p.f3)
    xi = x_in if side == "minus" else xm - x_in
    lm = _numeric_local(q)
    x_dh = lm["x_DH"]
    if xi > x_dh:
        raise LocalAnalysisError("entry point lies beyond the Hopf point")
    if xi == x_dh:
        return EntryExitResult(x_in, x_in, 0.0)

    # the branch of M2 through the fold ends at the first M2 fold point or
    # at the far fold of M1, whichever comes first
    edge = -2 * q.f2 / (3 * q.f3)
    fps = m2_fold_points(q)
    for pt in fps.points:
        if x_dh < pt[0] < edge:
            edge = float(pt[0])

    slow_in = float(_slow_on_m2(q, xi))
    if slow_in == 0:
        raise LocalAnalysisError("slow flow vanishes on path")

    def integrand(x):
        return _re_nu1(q, x) / _slow_on_m2(q, x)

    def check_path(a, b):
        xs = np.linspace(a, b, 257)
        s = _slow_on_m2(q, xs)
        if np.any(np.sign(s) != np.sign(slow_in)) or np.any(s == 0):
            raise LocalAnalysisError("slow flow vanishes on path")

    check_path(xi, x_dh)
    base = adaptive_gk15(integrand, xi, x_dh, rel_tol=1e-13, abs_tol=1e-16).value
    # march beyond the Hopf point until the expansion has paid back the contraction
    width = max(x_dh - xi, 1e-9)
    a, acc = x_dh, base
    while True:
        b = min(a + width, edge)
        check_path(a, b)
        piece = adaptive_gk15(integrand, a, b, rel_tol=1e-13, abs_tol=1e-16).value
        if (acc + piece) * acc <= 0:
            break
        acc += piece
        a = b
        if b >= edge:
            raise LocalAnalysisError("no balanced exit")
        width *= 1.5

    a0, acc0 = a, acc

    def accumulated(x):
        return acc0 + adaptive_gk15(integrand, a0, x, rel_tol=1e-14,
                                    abs_tol=1e-17).value

    x_out = brentq(accumulated, a0, b, xtol=tol, rtol=1e-15)
    res = accumulated(x_out)
    xo = x_out if side == "minus" else xm - x_out
    return EntryExitResult(x_in, float(xo), float(res))


def sector_exit(p: NormalFormParams, side: str = "minus") -> float:
    """Exit level ``z`` for trajectories entering through the canard interval."""
    return landmarks(p, side, "numeric").z_CN
