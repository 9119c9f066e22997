"""Adaptive integration, equilibria and transient removal.

The systems from :mod:`mmoscope.model` are wrapped in a :class:`System`
that pairs a flat parameter vector with compiled ``rhs``/``jac`` kernels.
Non-affine slow flows in the normal form fall back to plain Python callables
run through the uncompiled kernel.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import _kernels as K
from . import _solver
from .model import (
    HHParams,
    KoperParams,
    ModelError,
    NormalFormParams,
    koper_state_to_normal,
    normal_state_to_koper,
)

__all__ = [
    "IntegrationError",
    "IntegratorConfig",
    "System",
    "Trajectory",
    "EquilibriumReport",
    "as_system",
    "integrate",
    "find_equilibrium",
    "transient_strip",
    "default_initial_state",
    "default_horizon",
    "trajectory_from_samples",
]


class IntegrationError(RuntimeError):
    """Integration stopped early; ``partial`` holds the trajectory so far."""

    def __init__(self, message: str, partial: "Trajectory | None" = None):
        super().__init__(message)
        self.partial = partial

    @property
    def last_state(self):
        if self.partial is None or len(self.partial.t) == 0:
            return None
        return self.partial.y[-1]


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 1.0
    min_step: float = 1e-12
    max_steps: int = 20_000_000
    stride: int = 1
    initial_step: float = 0.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.min_step <= self.max_step):
            raise ValueError("need 0 < min_step <= max_step")
        if self.stride < 1 or self.max_steps < 1:
            raise ValueError("stride and max_steps must be at least 1")

    def replace(self, **changes) -> "IntegratorConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class System:
    """A vector field ready for the integrator.

    ``kind`` is one of ``normal``, ``koper``, ``koper_sym`` or ``hh``;
    ``params`` keeps the originating parameter object.
    """

    kind: str
    params: object
    p: np.ndarray
    rhs: Callable
    jac: Callable
    compiled: bool = True

    @property
    def delta(self) -> float:
        return float(self.params.delta)

    def f(self, s) -> np.ndarray:
        out = np.empty(3)
        self.rhs(self.p, np.asarray(s, dtype=float), out)
        return out

    def J(self, s) -> np.ndarray:
        out = np.zeros((3, 3))
        self.jac(self.p, np.asarray(s, dtype=float), out)
        return out


def _python_normal(params: NormalFormParams):
    phi = params.phi

    def rhs(p, y, out):
        x, yy, z = y[0], y[1], y[2]
        out[0] = (-yy + params.F(x)) / params.eps
        out[1] = params.alpha * x + params.beta * yy - z
        out[2] = params.delta * (params.mu + phi(x, yy, z))

    def jac(p, y, out):
        x, yy, z = y[0], y[1], y[2]
        out[0, 0] = params.dF(x) / params.eps
        out[0, 1] = -1.0 / params.eps
        out[0, 2] = 0.0
        out[1, 0] = params.alpha
        out[1, 1] = params.beta
        out[1, 2] = -1.0
        out[2, :] = params.delta * phi.gradient(x, yy, z)

    return rhs, jac


def as_system(params, symmetric: bool = False) -> System:
    """Wrap a parameter object from :mod:`mmoscope.model` as a :class:`System`.

    ``symmetric=True`` selects the odd-symmetric form of the Koper model.
    """
    if isinstance(params, System):
        return params
    if isinstance(params, NormalFormParams):
        params.check_simulable()
        if params.phi.is_affine:
            return System("normal", params, params.as_array(), K.normal_rhs,
                          K.normal_jac)
        rhs, jac = _python_normal(params)
        return System("normal", params, np.zeros(1), rhs, jac, compiled=False)
    if isinstance(params, KoperParams):
        if not (params.eps_hat > 0 and params.delta > 0):
            raise ModelError("eps_hat and delta must be positive for simulation")
        if symmetric:
            return System("koper_sym", params, params.as_array(), K.koper_sym_rhs,
                          K.koper_sym_jac)
        return System("koper", params, params.as_array(), K.koper_rhs, K.koper_jac)
    if isinstance(params, HHParams):
        return System("hh", params, params.as_array(), K.hh_rhs, K.hh_jac)
    raise TypeError(f"unsupported system {type(params).__name__}")


@dataclass
class Trajectory:
    """Sampled solution with located events.

    ``extrema_kind`` is +1 for maxima and -1 for minima of the first
    component; ``section_dir`` is +1 for upward crossings of the section.
    """

    t: np.ndarray
    y: np.ndarray
    step: np.ndarray
    extrema_t: np.ndarray = field(default_factory=lambda: np.empty(0))
    extrema_y: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    extrema_kind: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64))
    section_value: float | None = None
    section_t: np.ndarray = field(default_factory=lambda: np.empty(0))
    section_y: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    section_dir: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64))
    system: System | None = None
    n_steps: int = 0
    n_rejected: int = 0
    n_implicit: int = 0

    def __len__(self) -> int:
        return len(self.t)

    @property
    def span(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self.t) else 0.0

    def terminal_speed(self, tail: float = 10.0) -> float:
        """Mean speed over the last ``tail`` time units (chord length over time).

        The vector field itself at the final sample is dominated by the
        ``O(atol / eps)`` fast residual of a state that sits within tolerance
        of the slow manifold, so the chord is the better convergence measure.
        """
        if len(self.t) < 2:
            raise ValueError("terminal speed needs at least two samples")
        j = int(np.searchsorted(self.t, self.t[-1] - tail, side="right")) - 1
        j = min(max(j, 0), len(self.t) - 2)
        dt = self.t[-1] - self.t[j]
        return float(np.linalg.norm(self.y[-1] - self.y[j]) / dt)

    def window(self, t0: float, t1: float = math.inf) -> "Trajectory":
        """Restriction of samples and events to ``t0 <= t <= t1``."""
        m = (self.t >= t0) & (self.t <= t1)
        me = (self.extrema_t >= t0) & (self.extrema_t <= t1)
        ms = (self.section_t >= t0) & (self.section_t <= t1)
        return replace(
            self,
            t=self.t[m], y=self.y[m], step=self.step[m],
            extrema_t=self.extrema_t[me], extrema_y=self.extrema_y[me],
            extrema_kind=self.extrema_kind[me],
            section_t=self.section_t[ms], section_y=self.section_y[ms],
            section_dir=self.section_dir[ms],
        )


@dataclass(frozen=True)
class EquilibriumReport:
    location: np.ndarray
    eigenvalues: np.ndarray
    stable: bool
    residual: float
    iterations: int


def integrate(system, s0: Sequence[float], t_span: tuple[float, float],
              cfg: IntegratorConfig | None = None, *,
              section: float | None = None) -> Trajectory:
    """Integrate ``system`` from ``s0`` over ``t_span``.

    Extrema of the first component are always located; crossings of
    ``y[0] = section`` are recorded when ``section`` is given.

    Raises
    ------
    IntegrationError
        If the step budget is exhausted or the state stops being finite.
        The partial trajectory is attached.
    """
    cfg = cfg or IntegratorConfig()
    sys_ = as_system(system)
    y0 = np.asarray(s0, dtype=float)
    if y0.shape != (3,) or not np.all(np.isfinite(y0)):
        raise ModelError("initial state must be 3 finite numbers")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    kernel = _solver.integrate_kernel
    if not sys_.compiled:
        kernel = _solver.python_kernel()
    use_sec = section is not None
    args = (sys_.rhs, sys_.jac, sys_.p, y0, t0, t1, cfg.rel_tol,
            cfg.abs_tol, cfg.initial_step, cfg.max_step, cfg.min_step,
            cfg.max_steps, cfg.stride, float(section or 0.0), use_sec)
    try:
        out = kernel(*args)
    except ReferenceError:
        # numba cannot always pickle a signature that carries compiled
        # functions when it refreshes a stale on-disk cache; compile in memory
        _solver.disable_kernel_cache()
        out = kernel(*args)
    (ts, ys, hs, et, ey, ek, st, sy, sd, status, steps, nrej, nimp) = out
    traj = Trajectory(ts, ys, hs, et, ey, ek, section if use_sec else None,
                      st, sy, sd, sys_, int(steps), int(nrej), int(nimp))
    if status == _solver.STATUS_MAX_STEPS:
        raise IntegrationError(f"max_steps exceeded at t={ts[-1]:.6g}", traj)
    if status == _solver.STATUS_NONFINITE:
        raise IntegrationError(f"non-finite state at t={ts[-1]:.6g}", traj)
    return traj


def find_equilibrium(system, guess: Sequence[float], max_iter: int = 200,
                     tol: float = 1e-12) -> EquilibriumReport:
    """Damped Newton iteration on the vector field.

    Raises
    ------
    ModelError
        If the iteration fails to reach a residual of ``tol``.
    """
    sys_ = as_system(system)
    x = np.asarray(guess, dtype=float).copy()
    r = sys_.f(x)
    res = float(np.linalg.norm(r))
    it = 0
    for it in range(1, max_iter + 1):
        if res <= tol:
            break
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(sys_.J(x))
        except (ValueError, np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            raise ModelError(f"singular Jacobian, residual {res:.3e}") from None
        dx = scipy.linalg.lu_solve(lu, -r)
        dx_norm = float(np.linalg.norm(dx))
        # natural monotonicity test: the field is badly scaled (1/eps rows),
        # so the Newton-corrected step length serves as the merit function
        lam = 1.0
        while True:
            xn = x + lam * dx
            rn = sys_.f(xn)
            rn_norm = float(np.linalg.norm(rn))
            if rn_norm <= tol:
                break
            if np.isfinite(rn_norm):
                dxb = float(np.linalg.norm(scipy.linalg.lu_solve(lu, -rn)))
                if dxb <= (1.0 - 0.5 * lam) * dx_norm or lam < 1e-8:
                    break
            lam *= 0.5
            if lam < 1e-12:
                break
        x, r, res = xn, rn, rn_norm
    if not res <= tol:
        raise ModelError(f"equilibrium search diverged, residual {res:.3e}")
    ev = np.linalg.eigvals(sys_.J(x))
    ev = ev[np.argsort(-ev.real)]
    return EquilibriumReport(x, ev, bool(np.all(ev.real < 0)), res, it)


def transient_strip(traj: Trajectory, fraction: float | None = 0.3, *,
                    time: float | None = None) -> Trajectory:
    """Drop the initial part of a trajectory.

    Either a ``fraction`` of the time span or an absolute ``time`` is removed.

    Raises
    ------
    ValueError
        If nothing would be left.
    """
    if time is None:
        if fraction is None or not 0 <= fraction <= 1:
            raise ValueError("fraction must lie in [0, 1]")
        if fraction == 0:
            return traj
        time = fraction * traj.span
    if time <= 0:
        return traj
    cut = traj.t[0] + time
    if cut >= traj.t[-1]:
        raise ValueError("transient strip leaves an empty tail")
    return traj.window(cut)


# ------------------------------------------------------------- run defaults


def default_initial_state(params) -> np.ndarray:
    """Normal-form point ``(-1, F(-1), 0.1)`` expressed in the system's coordinates.

    For HH the analogous point sits on the lower attracting branch of the
    fast nullcline at rest-like gating values.
    """
    if isinstance(params, System):
        params = params.params
    if isinstance(params, NormalFormParams):
        return np.array([-1.0, params.F(-1.0), 0.1])
    if isinstance(params, KoperParams):
        from .model import koper_to_normal_form

        nf = koper_to_normal_form(params)
        return normal_state_to_koper(params, np.array([-1.0, nf.F(-1.0), 0.1]))
    if isinstance(params, HHParams):
        return np.array([-0.7, 0.3, 0.6])
    raise TypeError(f"unsupported system {type(params).__name__}")


def default_horizon(params) -> float:
    """Fifty slow time units, ``50 / delta``."""
    if isinstance(params, System):
        params = params.params
    return 50.0 / float(params.delta)


def to_normal_coordinates(system: System, y: np.ndarray) -> np.ndarray:
    """Koper samples in normal-form coordinates; other systems unchanged."""
    if system.kind == "koper":
        return koper_state_to_normal(system.params, y)
    return np.asarray(y)


def trajectory_from_samples(system, t: np.ndarray, y: np.ndarray, *,
                            section: float | None = None) -> Trajectory:
    """Rebuild a :class:`Trajectory` from stored samples (for example a CSV).

    Without the dense output, extrema of the first component are taken at
    sign changes of its increments and refined by the vertex of the
    parabola through the three neighbouring samples; section crossings are
    interpolated linearly.
    """
    sys_ = as_system(system)
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] != 3 or len(t) != len(y):
        raise ValueError("samples must be an (n, 3) array matching t")
    x = y[:, 0]
    d = np.diff(x)
    idx = np.flatnonzero(d[:-1] * d[1:] < 0) + 1
    et = np.empty(len(idx))
    ey = np.empty((len(idx), 3))
    ek = np.where(d[idx - 1] > 0, 1, -1).astype(np.int64)
    for j, i in enumerate(idx):
        t0, t1, t2 = t[i - 1], t[i], t[i + 1]
        c = np.polyfit([t0 - t1, 0.0, t2 - t1], x[i - 1:i + 2], 2)
        tv = -c[1] / (2 * c[0]) if c[0] != 0 else 0.0
        tv = min(max(tv, t0 - t1), t2 - t1)
        et[j] = t1 + tv
        ey[j] = y[i]
        ey[j, 0] = np.polyval(c, tv)
    if section is None:
        st, sy, sd = np.empty(0), np.empty((0, 3)), np.empty(0, dtype=np.int64)
    else:
        g = x - section
        cr = np.flatnonzero(g[:-1] * g[1:] < 0)
        w = g[cr] / (g[cr] - g[cr + 1])
        st = t[cr] + w * (t[cr + 1] - t[cr])
        sy = y[cr] + w[:, None] * (y[cr + 1] - y[cr])
        sd = np.where(g[cr + 1] > g[cr], 1, -1).astype(np.int64)
    step = np.concatenate([np.diff(t), [0.0]]) if len(t) > 1 else np.zeros(len(t))
    return Trajectory(t, y, step, et, ey, ek, section, st, sy, sd, sys_, len(t), 0, 0)
