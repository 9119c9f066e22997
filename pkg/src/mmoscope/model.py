"""Three-timescale vector fields: the cubic normal form, the Koper model and the
reduced Hodgkin-Huxley equations, plus the parameter and state maps between
the Koper model and the normal form.

All right-hand sides are written in the intermediate time ``t``::

    eps x' = -y + f2 x^2 + f3 x^3
        y' = alpha x + beta y - z
        z' = delta (mu + phi(x, y, z))
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import _kernels as K

__all__ = [
    "ModelError",
    "PhiSpec",
    "NormalFormParams",
    "KoperParams",
    "HHParams",
    "State3",
    "normal_form_rhs",
    "normal_form_jacobian",
    "koper_to_normal_form",
    "koper_state_to_normal",
    "normal_state_to_koper",
    "koper_rhs",
    "koper_symmetric_rhs",
    "koper_params_for_mu",
    "hh_rhs",
    "alpha_m",
    "beta_m",
    "alpha_h",
    "beta_h",
    "alpha_n",
    "beta_n",
    "m_inf",
    "n_inf",
    "h_inf",
]


class ModelError(ValueError):
    """Invalid parameters or state for one of the model families."""


class State3(NamedTuple):
    x: float
    y: float
    z: float


def _state(s: Sequence[float]) -> np.ndarray:
    arr = np.asarray(s, dtype=float)
    if arr.shape != (3,):
        raise ModelError(f"expected a 3-component state, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError("non-finite state")
    return arr


@dataclass(frozen=True)
class PhiSpec:
    """Slow-flow function ``phi(x, y, z)``.

    The affine form ``c0 + cx*x + cy*y + cz*z`` is the default; passing
    ``func`` replaces it by an arbitrary smooth scalar function.
    """

    c0: float = 0.0
    cx: float = 0.0
    cy: float = 0.0
    cz: float = 0.0
    func: Callable[[float, float, float], float] | None = field(
        default=None, compare=False
    )

    @classmethod
    def koper(cls) -> "PhiSpec":
        return cls(0.0, 0.0, -1.0, -1.0)

    @property
    def is_affine(self) -> bool:
        return self.func is None

    def __call__(self, x, y, z):
        if self.func is not None:
            return self.func(x, y, z)
        return self.c0 + self.cx * x + self.cy * y + self.cz * z

    def gradient(self, x: float, y: float, z: float) -> np.ndarray:
        if self.func is None:
            return np.array([self.cx, self.cy, self.cz])
        h = 1e-6
        g = np.empty(3)
        base = np.array([x, y, z], dtype=float)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            g[i] = (self.func(*(base + e)) - self.func(*(base - e))) / (2 * h)
        return g


@dataclass(frozen=True)
class NormalFormParams:
    f2: float
    f3: float
    alpha: float
    beta: float
    mu: float
    eps: float
    delta: float
    phi: PhiSpec = field(default_factory=PhiSpec)

    def __post_init__(self):
        if not self.f2 > 0:
            raise ModelError("f2 must be positive")
        if not self.f3 < 0:
            raise ModelError("f3 must be negative")
        if self.eps < 0 or self.delta < 0:
            raise ModelError("eps and delta must be non-negative")

    def replace(self, **changes) -> "NormalFormParams":
        return replace(self, **changes)

    def check_simulable(self) -> None:
        if not (self.eps > 0 and self.delta > 0):
            raise ModelError("eps and delta must be positive for simulation")

    def as_array(self) -> np.ndarray:
        """Flat parameter vector for the compiled kernels (affine phi only)."""
        if not self.phi.is_affine:
            raise ModelError("compiled kernels support affine phi only")
        ph = self.phi
        return np.array([self.f2, self.f3, self.alpha, self.beta, self.mu,
                         self.eps, self.delta, ph.c0, ph.cx, ph.cy, ph.cz])

    # cubic shorthands used throughout
    def F(self, x):
        return self.f2 * x**2 + self.f3 * x**3

    def dF(self, x):
        return 2 * self.f2 * x + 3 * self.f3 * x**2

    def G(self, x):
        return self.alpha * x + self.beta * self.F(x)

    def dG(self, x):
        return self.alpha + self.beta * self.dF(x)

    def slow(self, x, y, z):
        """``mu + phi(x, y, z)``."""
        return self.mu + self.phi(x, y, z)


@dataclass(frozen=True)
class KoperParams:
    k: float
    lam: float
    eps_hat: float = 0.01
    delta: float = 0.01

    def __post_init__(self):
        if not self.k < 0:
            raise ModelError("Koper requires k < 0")
        if self.eps_hat < 0 or self.delta < 0:
            raise ModelError("eps_hat and delta must be non-negative")

    def replace(self, **changes) -> "KoperParams":
        return replace(self, **changes)

    def as_array(self) -> np.ndarray:
        return np.array([self.k, self.lam, self.eps_hat, self.delta])


@dataclass(frozen=True)
class HHParams:
    """Reduced Hodgkin-Huxley parameters (voltage scaled by ``v_scale`` mV)."""

    I: float
    tau_h: float = 45.0
    tau_n: float = 1.0
    eps: float = 0.0073
    g_k: float = 0.3
    g_l: float = 0.0025
    E_na: float = 0.5
    E_k: float = -0.77
    E_l: float = -0.544
    k_scale: float = 120.0 * 100.0
    v_scale: float = 100.0

    def __post_init__(self):
        if self.tau_h <= 0 or self.tau_n <= 0:
            raise ModelError("time constants must be positive")
        if self.g_k <= 0 or self.g_l <= 0:
            raise ModelError("conductances must be positive")
        if self.eps <= 0:
            raise ModelError("eps must be positive")

    @property
    def delta(self) -> float:
        return 1.0 / self.tau_h

    @property
    def I_bar(self) -> float:
        return self.I / self.k_scale

    def replace(self, **changes) -> "HHParams":
        return replace(self, **changes)

    def as_array(self) -> np.ndarray:
        return np.array([self.I_bar, self.eps, self.delta, self.tau_n, self.g_k,
                         self.g_l, self.E_na, self.E_k, self.E_l, self.v_scale])


# ------------------------------------------------------------------ normal form


def normal_form_rhs(p: NormalFormParams, s: Sequence[float]) -> np.ndarray:
    """Vector field of the normal form in intermediate time."""
    x, y, z = _state(s)
    if not (p.eps > 0 and p.delta > 0):
        raise ModelError("eps and delta must be positive")
    f = -y + p.f2 * x * x + p.f3 * x**3
    g = p.alpha * x + p.beta * y - z
    h = p.mu + p.phi(x, y, z)
    return np.array([f / p.eps, g, p.delta * h])


def normal_form_jacobian(p: NormalFormParams, s: Sequence[float]) -> np.ndarray:
    x, y, z = _state(s)
    dphi = p.phi.gradient(x, y, z)
    return np.array([
        [p.dF(x) / p.eps, -1.0 / p.eps, 0.0],
        [p.alpha, p.beta, -1.0],
        p.delta * dphi,
    ])


# ----------------------------------------------------------------------- Koper


def koper_to_normal_form(kp: KoperParams) -> NormalFormParams:
    """Normal-form parameters equivalent to the Koper model."""
    if not kp.k < 0:
        raise ModelError("Koper requires k < 0")
    ak = abs(kp.k)
    return NormalFormParams(
        f2=3.0 / ak,
        f3=-1.0 / ak,
        alpha=1.0,
        beta=-2.0,
        mu=(kp.k + kp.lam + 2.0) / kp.k,
        eps=kp.eps_hat / ak,
        delta=kp.delta,
        phi=PhiSpec.koper(),
    )


def _koper_shift(kp: KoperParams) -> float:
    return (2.0 + kp.lam) / abs(kp.k)


def koper_state_to_normal(kp: KoperParams, s) -> np.ndarray:
    """Affine change taking Koper coordinates to normal-form coordinates.

    ``X = x + 1``, ``Y = y + (2 + lam)/|k|``, ``Z = 1 - 2(2 + lam)/|k| - z``;
    the lower fold ``x = -1`` of the Koper cubic lands on ``X = 0``.
    Accepts a single state or an ``(n, 3)`` array.
    """
    s = np.asarray(s, dtype=float)
    c = _koper_shift(kp)
    out = np.empty_like(s)
    out[..., 0] = s[..., 0] + 1.0
    out[..., 1] = s[..., 1] + c
    out[..., 2] = 1.0 - 2.0 * c - s[..., 2]
    return out


def normal_state_to_koper(kp: KoperParams, S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    c = _koper_shift(kp)
    out = np.empty_like(S)
    out[..., 0] = S[..., 0] - 1.0
    out[..., 1] = S[..., 1] - c
    out[..., 2] = 1.0 - 2.0 * c - S[..., 2]
    return out


def koper_rhs(kp: KoperParams, s: Sequence[float]) -> np.ndarray:
    """The Koper model in its original coordinates."""
    y = _state(s)
    if not (kp.eps_hat > 0):
        raise ModelError("eps_hat must be positive")
    out = np.empty(3)
    K.koper_rhs(kp.as_array(), y, out)
    return out


def koper_symmetric_rhs(kp: KoperParams, s: Sequence[float]) -> np.ndarray:
    """The odd-symmetric form of the Koper model."""
    y = _state(s)
    if not (kp.eps_hat > 0):
        raise ModelError("eps_hat must be positive")
    out = np.empty(3)
    K.koper_sym_rhs(kp.as_array(), y, out)
    return out


# ------------------------------------------------------------- Hodgkin-Huxley


def _vectorize(fn):
    def wrapped(V):
        if np.ndim(V) == 0:
            return fn(float(V))
        V = np.asarray(V, dtype=float)
        return np.array([fn(v) for v in V.ravel()]).reshape(V.shape)

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = f"HH rate function ``{fn.__name__}`` of the voltage in mV."
    return wrapped


alpha_m = _vectorize(K.alpha_m)
beta_m = _vectorize(K.beta_m)
alpha_h = _vectorize(K.alpha_h)
beta_h = _vectorize(K.beta_h)
alpha_n = _vectorize(K.alpha_n)
beta_n = _vectorize(K.beta_n)
m_inf = _vectorize(K.m_inf)
n_inf = _vectorize(K.n_inf)
h_inf = _vectorize(K.h_inf)


def hh_rhs(hp: HHParams, s: Sequence[float]) -> np.ndarray:
    """Reduced Hodgkin-Huxley field for the state ``(v, n, h)``, v scaled."""
    y = _state(s)
    out = np.empty(3)
    K.hh_rhs(hp.as_array(), y, out)
    return out


def hh_fast_nullcline(hp: HHParams, v: float, n: float, h: float) -> float:
    return K.hh_v_dot_eps(hp.as_array(), float(v), float(n), float(h))


def koper_params_for_mu(k: float, mu: float, eps_hat: float = 0.01,
                        delta: float = 0.01) -> KoperParams:
    """Koper parameters whose normal-form ``mu`` equals the given value."""
    return KoperParams(k, k * mu - k - 2.0, eps_hat, delta)
