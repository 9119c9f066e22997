"""Singular geometry of the normal form in the double limit ``eps = delta = 0``.

The critical manifold ``M1`` is the cubic surface ``y = F(x)``; inside it the
supercritical manifold ``M2`` is the curve ``z = G(x)``.  This module locates
the fold lines of ``M1``, the folded singularities where ``M2`` meets them,
the fold points of ``M2`` itself, and decides whether the two folded
singularities are remote, aligned or connected.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import ModelError, NormalFormParams

__all__ = [
    "GeometryError",
    "CubicF",
    "CubicG",
    "FoldedSingularity",
    "M2FoldPoints",
    "Config",
    "RelativeConfig",
    "BranchStability",
    "FoldPointSide",
    "CycleSegment",
    "GeometryReport",
    "fold_lines",
    "folded_singularities",
    "m2_fold_points",
    "branch_stability",
    "fold_point_side",
    "classify_relative_config",
    "singular_cycle",
    "geometry_report",
    "drift_endpoints",
]


class GeometryError(ModelError):
    """Raised when a geometric object does not exist for the given parameters."""


@dataclass(frozen=True)
class CubicF:
    f2: float
    f3: float

    def __post_init__(self):
        if self.f3 == 0:
            raise GeometryError("degenerate cubic")

    def __call__(self, x):
        return self.f2 * x**2 + self.f3 * x**3

    def deriv(self, x):
        return 2 * self.f2 * x + 3 * self.f3 * x**2

    @property
    def x_fold(self) -> float:
        """Nonzero root of ``F'``, the x-position of the upper fold line."""
        return -2.0 * self.f2 / (3.0 * self.f3)


@dataclass(frozen=True)
class CubicG:
    alpha: float
    beta: float
    F: CubicF

    def __call__(self, x):
        return self.alpha * x + self.beta * self.F(x)

    def deriv(self, x):
        return self.alpha + self.beta * self.F.deriv(x)

    def limit(self, sign: int) -> float:
        """Limit of ``G(x)`` as ``x -> sign * inf``."""
        if self.beta != 0:
            # dominated by beta f3 x^3
            return math.copysign(math.inf, self.beta * self.F.f3 * sign)
        if self.alpha != 0:
            return math.copysign(math.inf, self.alpha * sign)
        return 0.0

    def range_on(self, lo: float, hi: float) -> tuple[float, float]:
        """Infimum and supremum of ``G`` over the open interval ``(lo, hi)``.

        Interval ends may be infinite; interior extrema come from the
        fold points of ``M2``.
        """
        vals = [self.limit(-1) if lo == -math.inf else self(lo),
                self.limit(1) if hi == math.inf else self(hi)]
        for xc in _g_critical_points(self):
            if lo < xc < hi:
                vals.append(self(xc))
        return min(vals), max(vals)


def _g_critical_points(G: CubicG) -> list[float]:
    a = 3 * G.beta * G.F.f3
    b = 2 * G.beta * G.F.f2
    c = G.alpha
    if a == 0:
        return [] if b == 0 else [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    r = math.sqrt(disc)
    return sorted({(-b - r) / (2 * a), (-b + r) / (2 * a)})


def _cubics(p: NormalFormParams) -> tuple[CubicF, CubicG]:
    F = CubicF(p.f2, p.f3)
    return F, CubicG(p.alpha, p.beta, F)


@dataclass(frozen=True)
class FoldedSingularity:
    location: np.ndarray
    which: str  # "minus" or "plus"

    @property
    def x(self) -> float:
        return float(self.location[0])

    @property
    def z(self) -> float:
        return float(self.location[2])


@dataclass(frozen=True)
class M2FoldPoints:
    count: int
    points: tuple[np.ndarray, ...]
    discriminant: float
    note: str = ""


class Config(enum.Enum):
    REMOTE = "Remote"
    ALIGNED = "Aligned"
    CONNECTED = "Connected"


@dataclass(frozen=True)
class RelativeConfig:
    """Relative position of the folded singularities.

    ``minus_plane_meets_plus`` records whether the plane ``z = z_q-`` cuts
    the attracting outer branch of ``M2`` on the upper sheet, and
    ``plus_plane_meets_minus`` the converse.  ``algebraic`` is the result of
    the closed-form ratio test, kept as an independent check on the range test.
    """

    kind: Config
    z_q_minus: float
    z_q_plus: float
    z_range_minus_branch: tuple[float, float]
    z_range_plus_branch: tuple[float, float]
    minus_plane_meets_plus: bool
    plus_plane_meets_minus: bool
    algebraic: Config

    @property
    def name(self) -> str:
        return self.kind.value


class BranchStability(enum.Enum):
    ATTRACTING_OUTER = "outer attracting, middle repelling"
    REPELLING_OUTER = "outer repelling, middle attracting"


class FoldPointSide(enum.Enum):
    BOTH_ON_SR = "BothOnSr"
    ON_SA_MINUS_PLUS = "OnSaMinusPlus"
    ON_FOLD_LINES = "OnFoldLines"


@dataclass(frozen=True)
class CycleSegment:
    """Polyline piece of a singular cycle; ``scale`` is fast, intermediate or slow."""

    scale: str
    points: np.ndarray

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]


@dataclass(frozen=True)
class GeometryReport:
    fold_minus: tuple[float, float]
    fold_plus: tuple[float, float]
    q_minus: FoldedSingularity
    q_plus: FoldedSingularity
    fold_points: M2FoldPoints
    stability: BranchStability | None
    fold_side: FoldPointSide | None
    config: RelativeConfig
    sheets: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        """Fold-to-fold x distance, the natural amplitude scale."""
        return self.fold_plus[0] - self.fold_minus[0]

    def as_dict(self) -> dict:
        fp = self.fold_points
        return {
            "fold_lines": {"minus": list(self.fold_minus),
                           "plus": list(self.fold_plus)},
            "folded_singularities": {"minus": self.q_minus.location.tolist(),
                                     "plus": self.q_plus.location.tolist()},
            "m2_fold_points": {"count": fp.count,
                               "discriminant": fp.discriminant,
                               "points": [q.tolist() for q in fp.points],
                               "note": fp.note},
            "branch_stability": self.stability.value if self.stability else None,
            "fold_point_side": self.fold_side.value if self.fold_side else None,
            "relative_config": {
                "kind": self.config.name,
                "z_q_minus": self.config.z_q_minus,
                "z_q_plus": self.config.z_q_plus,
                "minus_plane_meets_plus_branch": self.config.minus_plane_meets_plus,
                "plus_plane_meets_minus_branch": self.config.plus_plane_meets_minus,
            },
            "sheets": self.sheets,
        }


# ---------------------------------------------------------------- operations


def fold_lines(p: NormalFormParams) -> tuple[tuple[float, float], tuple[float, float]]:
    """x and y coordinates of the lower and upper fold lines of ``M1``."""
    F, _ = _cubics(p)
    xf = F.x_fold
    return (0.0, 0.0), (xf, 4 * p.f2**3 / (27 * p.f3**2))


def folded_singularities(p: NormalFormParams) -> tuple[FoldedSingularity,
                                                       FoldedSingularity]:
    F, G = _cubics(p)
    xf = F.x_fold
    qm = FoldedSingularity(np.zeros(3), "minus")
    qp = FoldedSingularity(np.array([xf, F(xf), G(xf)]), "plus")
    return qm, qp


def m2_fold_points(p: NormalFormParams) -> M2FoldPoints:
    """Points of ``M2`` where ``G'(x) = 0``, ordered by x."""
    F, G = _cubics(p)
    disc = p.beta**2 * p.f2**2 - 3 * p.alpha * p.beta * p.f3
    if p.beta == 0:
        return M2FoldPoints(0, (), disc, "no fold points (beta=0)")
    # exact zero is a double root; tiny negative values from rounding are too
    scale = max(p.beta**2 * p.f2**2, abs(3 * p.alpha * p.beta * p.f3), 1e-300)
    if abs(disc) <= 1e-14 * scale:
        xs = [-p.f2 / (3 * p.f3)]
        disc_out = 0.0
    elif disc < 0:
        return M2FoldPoints(0, (), disc)
    else:
        r = math.sqrt(disc)
        xs = sorted([(-p.beta * p.f2 + r) / (3 * p.beta * p.f3),
                     (-p.beta * p.f2 - r) / (3 * p.beta * p.f3)])
        disc_out = disc
    pts = tuple(np.array([x, F(x), G(x)]) for x in xs)
    return M2FoldPoints(len(pts), pts, disc_out)


def branch_stability(p: NormalFormParams) -> BranchStability:
    """Stability of the three ``M2`` branches split by the two fold points."""
    if m2_fold_points(p).count < 2:
        raise GeometryError("no branch decomposition")
    if p.beta < 0:
        return BranchStability.ATTRACTING_OUTER
    return BranchStability.REPELLING_OUTER


def fold_point_side(p: NormalFormParams) -> FoldPointSide:
    """Sheet of ``M1`` carrying the two ``M2`` fold points."""
    if m2_fold_points(p).count < 2:
        raise GeometryError("no branch decomposition")
    ab = p.alpha * p.beta
    if ab < 0:
        return FoldPointSide.BOTH_ON_SR
    if ab > 0:
        return FoldPointSide.ON_SA_MINUS_PLUS
    return FoldPointSide.ON_FOLD_LINES


def alignment_tolerance(z_q_plus: float) -> float:
    return 1e-9 * max(1.0, abs(z_q_plus))


def _algebraic_config(p: NormalFormParams, z_q_plus: float) -> Config:
    if p.beta == 0:
        return Config.REMOTE
    if p.alpha * p.beta >= 0:
        return Config.CONNECTED
    if abs(z_q_plus) <= alignment_tolerance(z_q_plus):
        return Config.ALIGNED
    ratio = p.alpha / p.beta
    crit = 2 * p.f2**2 / (9 * p.f3)
    return Config.CONNECTED if ratio > crit else Config.REMOTE


def classify_relative_config(p: NormalFormParams) -> RelativeConfig:
    """Remote, aligned or connected, by intersecting normal planes with ``M2``.

    The outer branches considered are the parts of ``M2`` over the attracting
    sheets of ``M1``: ``x < 0`` and ``x > x_fold``.
    """
    if p.alpha == 0 and p.beta == 0:
        raise GeometryError("degenerate intermediate flow")
    F, G = _cubics(p)
    xf = F.x_fold
    zm, zp = 0.0, float(G(xf))
    lo_minus, hi_minus = G.range_on(-math.inf, 0.0)
    lo_plus, hi_plus = G.range_on(xf, math.inf)
    # open ranges: the endpoint value itself belongs to the fold, not the branch
    meets_plus = lo_plus < zm < hi_plus
    meets_minus = lo_minus < zp < hi_minus
    if abs(zm - zp) <= alignment_tolerance(zp):
        kind = Config.ALIGNED
    elif meets_plus and meets_minus:
        kind = Config.CONNECTED
    else:
        kind = Config.REMOTE
    return RelativeConfig(kind, zm, zp, (lo_minus, hi_minus), (lo_plus, hi_plus),
                          meets_plus, meets_minus, _algebraic_config(p, zp))


def drift_endpoints(p: NormalFormParams) -> tuple[float, float, float]:
    """``(x_max, x_star_max, x_0)``: upper fold, its jump target, and the jump
    target of the lower fold."""
    F, _ = _cubics(p)
    return F.x_fold, p.f2 / (3 * p.f3), -p.f2 / p.f3


def _on_m1(F: CubicF, x0: float, x1: float, z, n: int) -> np.ndarray:
    xs = np.linspace(x0, x1, n)
    zs = np.broadcast_to(np.asarray(z, dtype=float), xs.shape)
    return np.column_stack([xs, F(xs), zs])


def _fast(x0: float, x1: float, y: float, z: float, n: int) -> np.ndarray:
    xs = np.linspace(x0, x1, n)
    return np.column_stack([xs, np.full(n, y), np.full(n, z)])


def singular_cycle(p: NormalFormParams, z_level: float = 0.0,
                   n: int = 200) -> list[CycleSegment]:
    """Singular cycle of the double limit as an ordered list of segments.

    For remote singularities ``z_level`` selects a member of the family of
    planar two-scale cycles; for aligned and connected singularities the cycle
    is unique and ``z_level`` is ignored.

    Raises
    ------
    GeometryError
        If the sign assumptions ``alpha > 0 > beta`` fail, or if
        ``z_level`` lies outside the remote family.
    """
    if not (p.alpha > 0 and p.beta < 0):
        raise GeometryError("singular cycles need alpha > 0 and beta < 0")
    F, G = _cubics(p)
    cfg = classify_relative_config(p)
    x_max, x_star, x0 = drift_endpoints(p)
    y_max = F(x_max)
    zq = cfg.z_q_plus

    def planar(c):
        return [
            CycleSegment("intermediate", _on_m1(F, x_star, 0.0, c, n)),
            CycleSegment("fast", _fast(0.0, x0, 0.0, c, n)),
            CycleSegment("intermediate", _on_m1(F, x0, x_max, c, n)),
            CycleSegment("fast", _fast(x_max, x_star, y_max, c, n)),
        ]

    if cfg.kind is Config.ALIGNED:
        return planar(0.0)
    if cfg.kind is Config.REMOTE:
        lo, hi = min(0.0, zq), max(0.0, zq)
        if not (lo <= z_level <= hi):
            raise GeometryError("no singular cycle at this level")
        return planar(z_level)

    # connected: slow passages along both attracting outer branches of M2
    x_a = brentq(G, x_max, x0, xtol=1e-14)
    x_b = _root_left(G, zq, 0.0)
    xs_up = np.linspace(x_a, x_max, n)
    xs_dn = np.linspace(x_b, 0.0, n)
    return [
        CycleSegment("fast", _fast(0.0, x0, 0.0, 0.0, n)),
        CycleSegment("intermediate", _on_m1(F, x0, x_a, 0.0, n)),
        CycleSegment("slow", np.column_stack([xs_up, F(xs_up), G(xs_up)])),
        CycleSegment("fast", _fast(x_max, x_star, y_max, zq, n)),
        CycleSegment("intermediate", _on_m1(F, x_star, x_b, zq, n)),
        CycleSegment("slow", np.column_stack([xs_dn, F(xs_dn), G(xs_dn)])),
    ]


def _root_left(G: CubicG, level: float, start: float) -> float:
    # G is increasing on x < 0 under alpha > 0 > beta; step left to bracket
    a = start
    step = 1.0
    while G(a) > level:
        a -= step
        step *= 2
        if step > 1e12:
            raise GeometryError("cannot bracket M2 branch")
    return brentq(lambda x: G(x) - level, a, start, xtol=1e-14)


def geometry_report(p: NormalFormParams) -> GeometryReport:
    Lm, Lp = fold_lines(p)
    qm, qp = folded_singularities(p)
    fp = m2_fold_points(p)
    stab = branch_stability(p) if fp.count == 2 else None
    side = fold_point_side(p) if fp.count == 2 else None
    sheets = {"S_a_minus": [None, 0.0], "S_r": [0.0, Lp[0]], "S_a_plus": [Lp[0], None]}
    return GeometryReport(Lm, Lp, qm, qp, fp, stab, side,
                          classify_relative_config(p), sheets)
