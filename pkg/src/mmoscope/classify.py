"""From trajectories to epochs of small oscillations, Farey strings and regime labels.

A trajectory is read through a :class:`ClassifierFrame`, which supplies the
fast coordinate measured from the lower fold, the fold-to-fold width ``W``
used as amplitude scale, and a distance to the supercritical manifold.
Swings of the fast coordinate between consecutive extrema are large when
they exceed ``theta_lao * W`` and small below ``theta_sao * W``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import _kernels as K
from .geometry import CubicF, CubicG
from .integrate import System, Trajectory, as_system
from .model import HHParams, KoperParams, NormalFormParams, koper_state_to_normal, koper_to_normal_form

__all__ = [
    "Regime",
    "OscillationEvent",
    "FareySegment",
    "EpochSplit",
    "ClassifierFrame",
    "ClassifierConfig",
    "Classification",
    "frame_for",
    "detect_events",
    "split_epochs",
    "classify_regime",
    "farey_string",
    "parse_farey",
    "detect_period",
    "classify_trajectory",
    "mirror_label",
]


class Regime(enum.Enum):
    STEADY_STATE = "SteadyState"
    MMO_SINGLE_ABOVE = "MmoSingleAbove"
    MMO_SINGLE_BELOW = "MmoSingleBelow"
    MMO_DOUBLE = "MmoDouble"
    RELAXATION_TWO_SCALE = "RelaxationTwoScale"
    RELAXATION_THREE_SCALE = "RelaxationThreeScale"
    EXOTIC = "Exotic"

    @property
    def is_single(self) -> bool:
        return self in (Regime.MMO_SINGLE_ABOVE, Regime.MMO_SINGLE_BELOW)

    @property
    def is_relaxation(self) -> bool:
        return self in (Regime.RELAXATION_TWO_SCALE, Regime.RELAXATION_THREE_SCALE)


def mirror_label(r: Regime) -> Regime:
    """Label expected after the symmetry ``lambda -> -lambda`` of the Koper model."""
    if r is Regime.MMO_SINGLE_ABOVE:
        return Regime.MMO_SINGLE_BELOW
    if r is Regime.MMO_SINGLE_BELOW:
        return Regime.MMO_SINGLE_ABOVE
    return r


@dataclass(frozen=True)
class ClassifierConfig:
    theta_lao: float = 0.75
    theta_sao: float = 0.25
    # swings below this fraction of W are treated as integration noise
    noise_floor: float = 1e-6
    steady_speed: float = 1e-8
    # a tail inside this ball around a stable equilibrium also counts as
    # converged; explicit steps leave O(1e-7) chatter near a stiff focus
    steady_radius: float = 1e-5
    steady_tail: float = 10.0
    dwell_radius: float = 0.1
    dwell_speed_factor: float = 5.0
    # a dwell must last this many slow time units (1/delta) to count
    dwell_min_slow_time: float = 0.05
    transient_fraction: float = 0.3
    periods_kept: int = 3

    def scaled(self, factor: float) -> "ClassifierConfig":
        """Copy with both amplitude thresholds multiplied by ``factor``."""
        return ClassifierConfig(**{**self.__dict__,
                                   "theta_lao": self.theta_lao * factor,
                                   "theta_sao": self.theta_sao * factor})


# ---------------------------------------------------------------- frames


@dataclass(frozen=True)
class ClassifierFrame:
    """Coordinates in which oscillations are measured.

    ``coord(y)`` returns the fast coordinate with the lower fold at 0 and
    the upper fold at ``width``; ``m2_distance(y)`` the distance to the
    supercritical manifold in the (fast, slow) projection.  ``section`` is
    the Poincare section value in the system's own first coordinate.
    """

    width: float
    coord: Callable[[np.ndarray], np.ndarray]
    m2_distance: Callable[[np.ndarray], np.ndarray]
    delta: float
    section: float

    @property
    def midpoint(self) -> float:
        return 0.5 * self.width


def _curve_distance(px: np.ndarray, pz: np.ndarray, tree: cKDTree) -> np.ndarray:
    """Distance from points to the nearest vertex of a densely sampled curve."""
    if px.size == 0:
        return np.empty(0)
    return tree.query(np.column_stack([px, pz]))[0]


def _normal_frame(p: NormalFormParams, to_normal: Callable[[np.ndarray], np.ndarray],
                  section: float) -> ClassifierFrame:
    F = CubicF(p.f2, p.f3)
    G = CubicG(p.alpha, p.beta, F)
    xm = F.x_fold
    # attracting outer branches of M2, sampled generously beyond the folds
    xs = np.concatenate([np.linspace(-1.5 * xm, 0.0, 2000),
                         np.linspace(xm, 2.5 * xm, 2000)])
    tree = cKDTree(np.column_stack([xs, G(xs)]))

    def coord(y):
        return to_normal(np.atleast_2d(y))[:, 0]

    def dist(y):
        n = to_normal(np.atleast_2d(y))
        return _curve_distance(n[:, 0], n[:, 2], tree)

    return ClassifierFrame(xm, coord, dist, p.delta, section)


def _hh_m2_h(hp: HHParams, v: np.ndarray) -> np.ndarray:
    """``h`` on the supercritical manifold as a function of scaled voltage."""
    V = hp.v_scale * v
    m = np.array([K.m_inf(Vi) for Vi in V])
    n = np.array([K.n_inf(Vi) for Vi in V])
    num = hp.I_bar - hp.g_k * (v - hp.E_k) * n**4 - hp.g_l * (v - hp.E_l)
    return num / ((v - hp.E_na) * m**3)


def hh_fold_voltages(hp: HHParams, n_grid: int = 4000) -> tuple[float, float]:
    """Voltages of the two points where ``M2`` crosses the fold set of ``M1``."""
    p = hp.as_array()

    def dVdv(v):
        h = _hh_m2_h(hp, np.array([v]))[0]
        n = K.n_inf(hp.v_scale * v)
        d = 1e-7
        return (K.hh_v_dot_eps(p, v + d, n, h) - K.hh_v_dot_eps(p, v - d, n, h)) / (2 * d)

    vs = np.linspace(hp.E_k + 1e-3, hp.E_na - 1e-3, n_grid)
    hs = _hh_m2_h(hp, vs)
    ok = (hs > 0) & (hs < 1)
    vals = np.array([dVdv(v) if o else np.nan for v, o in zip(vs, ok)])
    roots = []
    for i in range(n_grid - 1):
        a, b = vals[i], vals[i + 1]
        if np.isfinite(a) and np.isfinite(b) and a * b < 0:
            roots.append(brentq(dVdv, vs[i], vs[i + 1], xtol=1e-12))
    if len(roots) < 2:
        raise ValueError("could not locate two fold crossings of M2")
    return roots[0], roots[-1]


def _hh_frame(hp: HHParams) -> ClassifierFrame:
    v_lo, v_hi = hh_fold_voltages(hp)
    width = v_hi - v_lo
    vs = np.linspace(hp.E_k + 1e-3, hp.E_na - 1e-3, 4000)
    hs = _hh_m2_h(hp, vs)
    ok = (hs > 0) & (hs < 1) & ((vs < v_lo) | (vs > v_hi))
    tree = cKDTree(np.column_stack([vs[ok] / width, hs[ok]]))

    def coord(y):
        return np.atleast_2d(y)[:, 0] - v_lo

    def dist(y):
        y = np.atleast_2d(y)
        # v and h carry comparable O(1) scales once v is measured in fold widths
        return _curve_distance(y[:, 0] / width, y[:, 2], tree)

    return ClassifierFrame(width, coord, dist, hp.delta, 0.5 * (v_lo + v_hi))


def frame_for(system) -> ClassifierFrame:
    """Classifier frame for a normal-form, Koper or HH system."""
    sys_ = as_system(system) if not isinstance(system, System) else system
    params = sys_.params
    if isinstance(params, NormalFormParams):
        xm = -2 * params.f2 / (3 * params.f3)
        return _normal_frame(params, lambda y: np.asarray(y, dtype=float), 0.5 * xm)
    if isinstance(params, KoperParams):
        nf = koper_to_normal_form(params)
        if sys_.kind == "koper_sym":
            raise ValueError("classify the Koper model in its original form")
        xm = -2 * nf.f2 / (3 * nf.f3)
        # normal-form x = koper x + 1
        return _normal_frame(nf, lambda y: koper_state_to_normal(params, y),
                             0.5 * xm - 1.0)
    if isinstance(params, HHParams):
        return _hh_frame(params)
    raise TypeError(f"no classifier frame for {type(params).__name__}")


# ---------------------------------------------------------------- events


@dataclass(frozen=True)
class OscillationEvent:
    """Extremum of the fast coordinate.

    ``amplitude`` is the larger of the two swings adjacent to the extremum;
    ``side`` is ``"upper"`` or ``"lower"`` relative to the fold midpoint.
    """

    time: float
    kind: str  # "max" or "min"
    value: float
    amplitude: float
    side: str


def _clean_extrema(t: np.ndarray, x: np.ndarray, kinds: np.ndarray,
                   floor: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Alternating extrema with swings below ``floor`` removed."""
    T, X, Kd = list(t), list(x), list(kinds)
    changed = True
    while changed and len(X) > 1:
        changed = False
        # enforce alternation: merge repeated kinds, keep the more extreme one
        i = 0
        while i < len(X) - 1:
            if Kd[i] == Kd[i + 1]:
                keep_first = (X[i] >= X[i + 1]) if Kd[i] > 0 else (X[i] <= X[i + 1])
                j = i + 1 if keep_first else i
                del T[j], X[j], Kd[j]
                changed = True
            else:
                i += 1
        # drop the smallest sub-floor swing, then re-alternate
        if len(X) > 1:
            sw = np.abs(np.diff(X))
            j = int(np.argmin(sw))
            if sw[j] < floor:
                del T[j:j + 2], X[j:j + 2], Kd[j:j + 2]
                changed = True
    return np.array(T), np.array(X), np.array(Kd, dtype=int)


def detect_events(traj: Trajectory, frame: ClassifierFrame | None = None,
                  cfg: ClassifierConfig | None = None) -> list[OscillationEvent]:
    """Strict local extrema of the fast coordinate, located on the dense output."""
    cfg = cfg or ClassifierConfig()
    if frame is None:
        frame = frame_for(traj.system)
    if len(traj.extrema_t) == 0:
        return []
    x = frame.coord(traj.extrema_y)
    t, x, kinds = _clean_extrema(traj.extrema_t, x, traj.extrema_kind,
                                 cfg.noise_floor * frame.width)
    return events_from_arrays(t, x, kinds, frame.width)


def events_from_arrays(t, x, kinds, width: float) -> list[OscillationEvent]:
    """Build events from alternating extrema given as arrays."""
    t, x = np.asarray(t, dtype=float), np.asarray(x, dtype=float)
    out = []
    n = len(x)
    for i in range(n):
        left = abs(x[i] - x[i - 1]) if i > 0 else 0.0
        right = abs(x[i + 1] - x[i]) if i < n - 1 else 0.0
        out.append(OscillationEvent(float(t[i]), "max" if kinds[i] > 0 else "min",
                                    float(x[i]), max(left, right),
                                    "upper" if x[i] > 0.5 * width else "lower"))
    return out


# ---------------------------------------------------------------- epochs


@dataclass(frozen=True)
class FareySegment:
    """``L`` large excursions followed by ``s`` small oscillations above or below."""

    L: int
    s: int
    position: str  # "above" or "below"

    def __post_init__(self):
        if self.L < 0 or self.s < 0:
            raise ValueError("L and s must be nonnegative")
        if self.position not in ("above", "below"):
            raise ValueError("position must be 'above' or 'below'")

    def render(self) -> str:
        mark = "^" if self.position == "above" else "_"
        return f"{self.L}{mark}{self.s}"


@dataclass(frozen=True)
class EpochSplit:
    segments: list[FareySegment]
    ambiguous: list[float] = field(default_factory=list)
    # number of large swings in the window
    large_only: int = 0
    # (first, last) extremum times of every bounded epoch; the first entry is
    # the anchoring epoch, so segment i sits between entries i and i + 1
    epoch_spans: list[tuple[float, float]] = field(default_factory=list)

    @property
    def ambiguity_flag(self) -> bool:
        return bool(self.ambiguous)


def _drop_shoulders(t: np.ndarray, x: np.ndarray, big: float) -> tuple[np.ndarray, np.ndarray]:
    """Remove a short swing lying inside one monotone large excursion.

    A swing flanked by two large swings running the same way (for example
    a brief plateau on the downstroke of a spike) is a shoulder of that
    excursion rather than an oscillation; its two extrema are dropped.
    """
    keep = np.ones(len(x), dtype=bool)
    i = 1
    while i + 2 < len(x):
        d_prev, d_mid, d_next = x[i] - x[i - 1], x[i + 1] - x[i], x[i + 2] - x[i + 1]
        if (abs(d_prev) >= big and abs(d_next) >= big and abs(d_mid) < big
                and d_prev * d_next > 0):
            keep[i] = keep[i + 1] = False
            i += 2
        else:
            i += 1
    return t[keep], x[keep]


def split_epochs(events: Sequence[OscillationEvent], width: float,
                 cfg: ClassifierConfig | None = None) -> EpochSplit:
    """Group swings into runs of large excursions and epochs of small oscillations.

    Only epochs bounded by large swings on both sides are reported; the
    first epoch anchors the count and is not itself emitted, since the large
    excursions before it are cut off by the window.
    """
    cfg = cfg or ClassifierConfig()
    if len(events) == 0:
        raise ValueError("no events to split")
    big = cfg.theta_lao * width
    t, x = _drop_shoulders(np.array([e.time for e in events]),
                           np.array([e.value for e in events]), big)
    sw = np.abs(np.diff(x))
    small = cfg.theta_sao * width
    kind = np.where(sw >= big, 1, np.where(sw <= small, 0, -1))  # -1 ambiguous
    ambiguous = [float(t[i]) for i in np.flatnonzero(kind == -1)]

    # runs of large swings separated by runs of non-large swings
    runs = []  # (is_large, start, stop) over swing indices
    i = 0
    while i < len(kind):
        j = i
        lg = kind[i] == 1
        while j < len(kind) and (kind[j] == 1) == lg:
            j += 1
        runs.append((lg, i, j))
        i = j
    n_large_total = int(np.sum(kind == 1))
    segments = []
    spans = []
    seen_first = False
    for r_idx, (lg, s, e) in enumerate(runs):
        if lg:
            continue
        bounded = 0 < r_idx < len(runs) - 1
        if not bounded:
            continue
        spans.append((float(t[s]), float(t[e])))
        if not seen_first:
            seen_first = True
            continue
        n_large = runs[r_idx - 1][2] - runs[r_idx - 1][1]
        # extrema visited inside the epoch: from swing s's end to swing e's start
        inner = x[s:e + 1]
        side = "above" if np.mean(inner) > 0.5 * width else "below"
        n_small = e - s
        segments.append(FareySegment(int(math.ceil(n_large / 2)), n_small // 2, side))
    return EpochSplit(segments, ambiguous, n_large_total, spans)


def farey_string(segments: Sequence[FareySegment]) -> str:
    """Render segments as ``"1^3 1_2"``; an empty list renders ``"{L^0}"``."""
    if not segments:
        return "{L^0}"
    return " ".join(s.render() for s in segments)


_SEG_RE = re.compile(r"^(\d+)([\^_])(\d+)$")


def parse_farey(text: str) -> list[FareySegment]:
    """Inverse of :func:`farey_string`."""
    text = text.strip()
    if text == "{L^0}":
        return []
    out = []
    for tok in text.split():
        m = _SEG_RE.match(tok)
        if not m:
            raise ValueError(f"bad Farey token {tok!r}")
        out.append(FareySegment(int(m.group(1)), int(m.group(3)),
                                "above" if m.group(2) == "^" else "below"))
    return out


# ---------------------------------------------------------------- periods


def detect_period(traj: Trajectory, rel_tol: float = 1e-5) -> float | None:
    """Period from recurrence of downward section crossings, or ``None``.

    A candidate period of ``m`` crossings is accepted when every crossing in
    the second half of the window returns to the crossing ``m`` steps
    earlier within ``rel_tol`` times the range of each coordinate over the
    trajectory.  Coordinates are scaled separately because the slow one
    may vary far less than the fast one.
    """
    if traj.section_value is None:
        return None
    m = traj.section_dir < 0
    pts = traj.section_y[m]
    ts = traj.section_t[m]
    n = len(pts)
    if n < 4:
        return None
    scale = np.ptp(traj.y, axis=0)
    scale[scale == 0] = 1.0
    half = pts[n // 2:] / scale
    for per in range(1, n // 2):
        prev = pts[n // 2 - per: n - per] / scale
        if np.max(np.abs(half - prev)) <= rel_tol:
            return float(ts[-1] - ts[-1 - per])
    return None


# ---------------------------------------------------------------- regimes


@dataclass
class Classification:
    regime: Regime
    farey: str
    segments: list[FareySegment]
    ambiguity_flags: list[float]
    period: float | None = None
    window: tuple[float, float] = (0.0, 0.0)
    split: EpochSplit | None = None

    def as_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "farey": self.farey,
            "segments": [{"L": s.L, "s": s.s, "position": s.position}
                         for s in self.segments],
            "ambiguity_flags": self.ambiguity_flags,
            "period": self.period,
        }


def _dwell_sides(traj: Trajectory, frame: ClassifierFrame,
                 cfg: ClassifierConfig) -> tuple[bool, bool]:
    """Whether the trajectory creeps along ``M2`` on the lower and upper sides."""
    if len(traj.t) < 3:
        return False, False
    # mean speed over each accepted step, attributed to its left sample
    y = traj.y[:-1]
    speed = np.linalg.norm(np.diff(traj.y, axis=0), axis=1) / np.diff(traj.t)
    x = frame.coord(y)
    slow = speed < cfg.dwell_speed_factor * frame.delta
    if np.any(slow):
        slow[slow] = frame.m2_distance(y[slow]) < cfg.dwell_radius
    min_len = cfg.dwell_min_slow_time / frame.delta
    found = [False, False]
    i = 0
    n = len(slow)
    while i < n:
        if not slow[i]:
            i += 1
            continue
        j = i
        while j < n and slow[j]:
            j += 1
        if traj.t[j - 1] - traj.t[i] >= min_len:
            upper = np.mean(x[i:j]) > frame.midpoint
            found[int(upper)] = True
        i = j
    return found[0], found[1]


def _settled(traj: Trajectory, cfg: ClassifierConfig) -> bool:
    """Whether the run has converged to a stable equilibrium.

    Either the terminal speed is below ``steady_speed``, or the last
    ``steady_tail`` time units stay within ``steady_radius`` of a stable
    equilibrium found by Newton iteration from the final state.
    """
    if traj.system is None or len(traj.t) < 2:
        return False
    if traj.terminal_speed(cfg.steady_tail) <= cfg.steady_speed:
        return True
    from .integrate import find_equilibrium
    from .model import ModelError

    try:
        eq = find_equilibrium(traj.system, traj.y[-1])
    except ModelError:
        return False
    if not eq.stable:
        return False
    tail = traj.y[traj.t >= traj.t[-1] - cfg.steady_tail]
    return bool(np.max(np.abs(tail - eq.location)) <= cfg.steady_radius)


def classify_regime(split: EpochSplit | None, traj: Trajectory, frame: ClassifierFrame,
                    cfg: ClassifierConfig | None = None) -> Regime:
    cfg = cfg or ClassifierConfig()
    if _settled(traj, cfg):
        return Regime.STEADY_STATE
    if split is None or (not split.segments and split.large_only == 0):
        # no large excursions at all: small persistent oscillation
        return Regime.EXOTIC
    segs = [s for s in split.segments if s.s > 0]
    sides = {s.position for s in segs}
    if not sides:
        lower, upper = _dwell_sides(traj, frame, cfg)
        if lower and upper:
            return Regime.RELAXATION_THREE_SCALE
        return Regime.RELAXATION_TWO_SCALE
    if len(sides) == 1:
        return Regime.MMO_SINGLE_ABOVE if "above" in sides else Regime.MMO_SINGLE_BELOW
    if all(s.L <= 1 for s in split.segments):
        return Regime.MMO_DOUBLE
    return Regime.EXOTIC


def classify_trajectory(traj: Trajectory, frame: ClassifierFrame | None = None,
                        cfg: ClassifierConfig | None = None,
                        strip: bool = True) -> Classification:
    """Full pipeline: transient strip, period window, events, epochs, label."""
    from .integrate import transient_strip

    cfg = cfg or ClassifierConfig()
    if frame is None:
        frame = frame_for(traj.system)
    tail = transient_strip(traj, cfg.transient_fraction) if strip else traj
    period = detect_period(tail)
    window = tail
    if period is not None and period > 0:
        # two extra periods: the first epoch in the window only anchors the
        # count and the last one is cut off by the end of the run
        t0 = tail.t[-1] - (cfg.periods_kept + 2) * period
        if t0 > tail.t[0]:
            window = tail.window(t0)
    events = detect_events(window, frame, cfg)
    split = split_epochs(events, frame.width, cfg) if events else None
    regime = classify_regime(split, window, frame, cfg)
    segs = split.segments if split else []
    flags = split.ambiguous if split else []
    farey = farey_string(segs)
    if regime is Regime.STEADY_STATE:
        # no oscillation at all, so no Farey word either
        segs, flags, farey = [], [], ""
    return Classification(regime, farey, segs, flags, period,
                          window=(float(window.t[0]), float(window.t[-1])), split=split)
