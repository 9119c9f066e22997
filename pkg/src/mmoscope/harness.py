"""Parameter sweeps over the Koper plane and HH currents, and diagram output."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import Classification, ClassifierConfig, classify_trajectory, frame_for
from .drift import lambda_r
from .integrate import (IntegrationError, IntegratorConfig, default_horizon,
                        default_initial_state, integrate)
from .local import lambda_sh
from .model import HHParams, KoperParams, ModelError

__all__ = [
    "GridSpec",
    "PointResult",
    "SweepResult",
    "HHPointResult",
    "simulate_and_classify",
    "sweep_koper",
    "sweep_hh",
    "boundary_curves",
    "emit_diagram",
    "DIAGRAM_COLUMNS",
]

DIAGRAM_COLUMNS = ("k", "lambda", "regime", "farey")
FAILED = "Failed"


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid in ``(k, lambda)`` with fixed ``eps_hat`` and ``delta``."""

    k_min: float
    k_max: float
    k_step: float
    lam_min: float
    lam_max: float
    lam_step: float
    eps_hat: float = 0.01
    delta: float = 0.01
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    # None selects the default horizon of 50 / delta
    horizon: float | None = None

    def __post_init__(self):
        if not (self.k_step > 0 and self.lam_step > 0):
            raise ValueError("grid steps must be positive")
        if self.k_max < self.k_min or self.lam_max < self.lam_min:
            raise ValueError("grid ranges must be nonempty")
        if self.k_max >= 0:
            raise ValueError("Koper sweeps need k < 0")

    @property
    def k_values(self) -> np.ndarray:
        return _axis(self.k_min, self.k_max, self.k_step)

    @property
    def lam_values(self) -> np.ndarray:
        return _axis(self.lam_min, self.lam_max, self.lam_step)

    def points(self) -> list[tuple[float, float]]:
        return [(float(k), float(lam)) for k in self.k_values for lam in self.lam_values]


@dataclass(frozen=True)
class PointResult:
    k: float
    lam: float
    regime: str
    farey: str
    runtime: float
    error: str | None = None


@dataclass
class SweepResult:
    grid: GridSpec | None
    points: list[PointResult]
    overlays: dict

    def labels(self) -> dict[tuple[float, float], str]:
        return {(p.k, p.lam): p.regime for p in self.points}


@dataclass(frozen=True)
class HHPointResult:
    current: float
    regime: str
    farey: str
    runtime: float
    error: str | None = None


def simulate_and_classify(params, *, cfg: IntegratorConfig | None = None,
                          horizon: float | None = None, y0=None,
                          classifier: ClassifierConfig | None = None) -> Classification:
    """Integrate from the default (or given) state and classify the tail."""
    frame = frame_for(params)
    T = default_horizon(params) if horizon is None else horizon
    s0 = default_initial_state(params) if y0 is None else np.asarray(y0, dtype=float)
    traj = integrate(params, s0, (0.0, T), cfg, section=frame.section)
    return classify_trajectory(traj, frame, classifier)


def _run_koper_point(args) -> PointResult:
    k, lam, eps_hat, delta, cfg, horizon = args
    t0 = time.perf_counter()
    try:
        c = simulate_and_classify(KoperParams(k, lam, eps_hat, delta),
                                  cfg=cfg, horizon=horizon)
        return PointResult(k, lam, c.regime.value, c.farey, time.perf_counter() - t0)
    except (IntegrationError, ModelError, ValueError) as exc:
        return PointResult(k, lam, FAILED, "", time.perf_counter() - t0, str(exc))


def _map(fn, jobs: list, workers: int | None):
    workers = workers or os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so results line up with the grid
        return list(pool.map(fn, jobs, chunksize=1))


def boundary_curves(k_values: Sequence[float], eps_hat: float = 0.01) -> dict:
    """Analytic overlay curves sampled at ``k_values``.

    ``lambda_r`` exists only for ``k < -4`` and is NaN elsewhere; the
    divider between single and double epochs sits at ``k = -4``.
    """
    ks = [float(k) for k in k_values]
    sh_m = [lambda_sh(KoperParams(k, 0.0, eps_hat), "minus") for k in ks]
    r_m = []
    for k in ks:
        r_m.append(lambda_r(KoperParams(k, 0.0, eps_hat), "minus") if k < -4 else math.nan)
    return {
        "k": ks,
        "lambda_sh_minus": sh_m,
        "lambda_sh_plus": [-v for v in sh_m],
        "lambda_r_minus": r_m,
        "lambda_r_plus": [-v for v in r_m],
        "divider_k": -4.0,
    }


def sweep_koper(grid: GridSpec, workers: int | None = None) -> SweepResult:
    """Simulate and classify every grid point; failures are recorded, not raised."""
    jobs = [(k, lam, grid.eps_hat, grid.delta, grid.integrator, grid.horizon)
            for k, lam in grid.points()]
    points = _map(_run_koper_point, jobs, workers)
    return SweepResult(grid, points, boundary_curves(grid.k_values, grid.eps_hat))


def _run_hh_point(args) -> HHPointResult:
    hp, cfg, horizon = args
    t0 = time.perf_counter()
    try:
        c = simulate_and_classify(hp, cfg=cfg, horizon=horizon)
        return HHPointResult(hp.I, c.regime.value, c.farey, time.perf_counter() - t0)
    except (IntegrationError, ModelError, ValueError) as exc:
        return HHPointResult(hp.I, FAILED, "", time.perf_counter() - t0, str(exc))


def sweep_hh(currents: Sequence[float], hp: HHParams | None = None, *,
             cfg: IntegratorConfig | None = None, horizon: float | None = None,
             workers: int | None = None) -> list[HHPointResult]:
    """Regime label of the reduced HH model for each applied current."""
    base = hp or HHParams(0.0)
    jobs = [(base.replace(I=float(I)), cfg, horizon) for I in currents]
    return _map(_run_hh_point, jobs, workers)


def emit_diagram(res: SweepResult, path) -> tuple[Path, Path]:
    """Write the diagram CSV and a companion ``.overlays.json``.

    Returns the two paths written.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAGRAM_COLUMNS)
        for p in res.points:
            w.writerow([repr(p.k), repr(p.lam), p.regime, p.farey])
    side = path.with_suffix(".overlays.json")
    payload = dict(res.overlays)
    payload["failures"] = [{"k": p.k, "lambda": p.lam, "error": p.error}
                           for p in res.points if p.error]
    side.write_text(json.dumps(_json_safe(payload), indent=2))
    return path, side


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj
