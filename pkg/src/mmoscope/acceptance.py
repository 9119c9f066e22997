"""The ten acceptance checks, shared by ``mmo-scope verify`` and the test suite.

Each ``criterion_N`` returns a :class:`CriterionResult`.  Budgets are wall
clock limits; a check that is numerically right but over budget fails.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classify import (ClassifierConfig, Regime, classify_trajectory, detect_period,
                       frame_for)
from .drift import RELAXATION, g_drift, lambda_r, lao_count
from .geometry import Config, classify_relative_config, drift_endpoints, m2_fold_points
from .harness import simulate_and_classify, sweep_hh
from .integrate import (as_system, default_horizon, default_initial_state, integrate,
                        to_normal_coordinates, transient_strip)
from .local import entry_exit, lambda_sh, landmarks, m2_abscissa, canard_coefficient
from .model import KoperParams, NormalFormParams, PhiSpec, koper_to_normal_form
from .quadrature import simpson

__all__ = ["CriterionResult", "CRITERIA", "run_all", "format_table"]

SEED = 20240611


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    runtime: float = 0.0
    budget: float = math.inf
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return (f"[{mark}] {self.number:>2} {self.name:<28} "
                f"{self.runtime:8.2f}s  {self.detail}")


def _timed(number: int, name: str, budget: float):
    """Decorator filling in runtime and applying the wall-clock budget."""
    def wrap(fn: Callable[[], tuple[bool, str, dict]]):
        def run() -> CriterionResult:
            t0 = time.perf_counter()
            ok, detail, data = fn()
            dt = time.perf_counter() - t0
            if dt >= budget:
                ok = False
                detail += f"; over budget ({dt:.1f}s >= {budget:.0f}s)"
            return CriterionResult(number, name, bool(ok), detail, dt, budget, data)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


def _short(farey: str, n: int = 6) -> str:
    toks = farey.split()
    return farey if len(toks) <= n else " ".join(toks[:n]) + f" ... ({len(toks)} segments)"


def _nf(k: float, lam: float = 0.0, eps_hat: float = 0.01, delta: float = 0.01):
    return koper_to_normal_form(KoperParams(k, lam, eps_hat, delta))


# ---------------------------------------------------------------- geometry


@_timed(1, "geometry trichotomy", 1.0)
def criterion_1():
    """Connected for -4 < k < 0, aligned at -4, remote below."""
    connected = [round(-3.9 - 0.05 * j, 10) for j in range(-77, 2)]
    remote = [-4.1, -4.5, -5.0]
    bad = []
    for k in connected:
        if classify_relative_config(_nf(k)).kind is not Config.CONNECTED:
            bad.append(k)
    for k in remote:
        if classify_relative_config(_nf(k)).kind is not Config.REMOTE:
            bad.append(k)
    rc = classify_relative_config(_nf(-4.0))
    gap = abs(rc.z_q_minus - rc.z_q_plus)
    aligned = rc.kind is Config.ALIGNED and gap <= 1e-9
    ok = not bad and aligned
    return ok, (f"{len(connected) + len(remote)} k values, mismatches {bad}; "
                f"k=-4 {rc.name} |dz|={gap:.1e}"), {"mismatch": bad, "gap": gap}


@_timed(2, "M2 fold points", 1.0)
def criterion_2():
    counts = {k: m2_fold_points(_nf(k)).count for k in (-4.5, -5.9, -6.0, -7.0)}
    ok_counts = [counts[k] for k in (-4.5, -5.9, -6.0, -7.0)] == [2, 2, 1, 0]
    xs = sorted(float(pt[0]) for pt in m2_fold_points(_nf(-4.5)).points)
    err_x = max(abs(xs[0] - 0.5), abs(xs[1] - 1.5)) if len(xs) == 2 else math.inf
    disc = m2_fold_points(_nf(-6.0)).discriminant
    ok = ok_counts and err_x <= 1e-12 and abs(disc) <= 1e-12
    return ok, (f"counts {counts}; x err {err_x:.1e}; disc(-6)={disc:.1e}"), \
        {"counts": counts, "x_error": err_x, "discriminant": disc}


# ---------------------------------------------------------------- local analysis


@_timed(3, "landmark asymptotics", 5.0)
def criterion_3():
    errs = []
    for eh in (0.01, 0.005):
        p = _nf(-4.4, 1.5, eh)
        num = landmarks(p, "minus", "numeric").x_DH
        asy = landmarks(p, "minus", "asymptotic").x_DH
        errs.append(abs(num - asy))
    ratio = errs[0] / errs[1] if errs[1] > 0 else math.inf
    p4 = _nf(-4.0, 0.0, 0.01)
    coeff = canard_coefficient(p4) * p4.eps
    ok = 3.0 <= ratio <= 5.0 and abs(coeff) <= 1e-3 * p4.eps
    return ok, (f"x_DH error ratio {ratio:.3f}; canard offset at k=-4 {coeff:.1e}"), \
        {"ratio": ratio, "errors": errs, "canard_offset": coeff}


def _entry_exit_constant_flow() -> tuple[float, list]:
    # Koper-like cubic at k = -4 with phi = 0 and a positive constant slow flow
    base = _nf(-4.0, 0.0, 0.01)
    p = base.replace(phi=PhiSpec(), mu=0.5)
    x_dh = landmarks(p, "minus", "numeric").x_DH
    worst, rows = 0.0, []
    for d in np.geomspace(1e-5, 1e-3, 10):
        r = entry_exit(p, x_dh - d)
        # symmetric about the Hopf point: x_out - x_DH = x_DH - x_in
        dev = abs((r.x_out - x_dh) - (x_dh - r.x_in))
        worst = max(worst, dev)
        rows.append((float(r.x_in), float(r.x_out), dev))
    return worst, rows


def _simulated_exits(kp: KoperParams) -> list[tuple[float, float, float]]:
    """``(x_in, x_out_sim, x_out_pred)`` for every bounded lower epoch."""
    p = koper_to_normal_form(kp)
    x_dh = landmarks(p, "minus", "numeric").x_DH
    sys_ = as_system(kp)
    frame = frame_for(sys_)
    traj = integrate(sys_, default_initial_state(kp), (0.0, default_horizon(kp)),
                     section=frame.section)
    c = classify_trajectory(traj, frame)
    if c.split is None:
        return []
    Y = to_normal_coordinates(sys_, traj.extrema_y)
    out = []
    for t0, t1 in c.split.epoch_spans:
        i0 = int(np.argmin(np.abs(traj.extrema_t - t0)))
        i1 = int(np.argmin(np.abs(traj.extrema_t - t1)))
        if np.mean(Y[i0:i1 + 1, 0]) > 0.5 * (-2 * p.f2 / (3 * p.f3)):
            continue
        z_in, z_out = Y[i0, 2], Y[i1, 2]
        x_in = m2_abscissa(p, z_in, x_dh)
        x_out = m2_abscissa(p, z_out, x_dh)
        if x_in >= x_dh:
            continue
        pred = entry_exit(p, x_in).x_out
        out.append((x_in, x_out, pred))
    return out


@_timed(4, "entry-exit", 120.0)
def criterion_4():
    worst, rows = _entry_exit_constant_flow()
    kp = KoperParams(-4.4, 1.5, 0.01, 0.01)
    eps = koper_to_normal_form(kp).eps
    tol = 3 * math.sqrt(eps)
    exits = _simulated_exits(kp)
    sim_err = max((abs(a - b) for _, a, b in exits), default=math.inf)
    ok = worst <= 1e-6 and sim_err <= tol
    return ok, (f"phi=0 worst {worst:.1e}; {len(exits)} simulated exits, "
                f"worst {sim_err:.3g} vs 3*sqrt(eps)={tol:.3g}"), \
        {"constant_flow": rows, "simulated": exits}


# ---------------------------------------------------------------- regimes


def _ball(rng: np.random.Generator, radius: float) -> np.ndarray:
    v = rng.normal(size=3)
    return radius * rng.random() ** (1 / 3) * v / np.linalg.norm(v)


def _label_ok(expected: str, regime: Regime) -> bool:
    if expected == "single":
        return regime.is_single
    return regime.value == expected


LAMBDA_15_POINTS = ((-2.2, "SteadyState"), (-3.6, "MmoDouble"), (-4.4, "single"),
         (-5.4, "RelaxationTwoScale"))


@_timed(5, "regime reproduction", 300.0)
def criterion_5():
    rng = np.random.default_rng(SEED)
    bad, summary = [], {}
    for k, expected in LAMBDA_15_POINTS:
        kp = KoperParams(k, 1.5, 0.01, 0.01)
        sys_ = as_system(kp)
        frame = frame_for(sys_)
        s0 = default_initial_state(kp)
        T = default_horizon(kp)
        traj = integrate(sys_, s0, (0.0, T), section=frame.section)
        labels = [classify_trajectory(traj, frame).regime]
        for f in (0.8, 1.2):
            labels.append(classify_trajectory(traj, frame, ClassifierConfig().scaled(f)).regime)
        for _ in range(10):
            tj = integrate(sys_, s0 + _ball(rng, 0.05), (0.0, T), section=frame.section)
            labels.append(classify_trajectory(tj, frame).regime)
        summary[k] = sorted({r.value for r in labels})
        if not all(_label_ok(expected, r) for r in labels):
            bad.append(k)
        # a single-epoch label must not flip sides between runs
        if expected == "single" and len({r for r in labels}) > 1:
            bad.append(k)
    return not bad, f"labels {summary}; unstable/mismatched {bad}", {"labels": summary}


def _side_pattern(segs, position: str) -> bool:
    return bool(segs) and all(s.position == position and s.L >= 1 and s.s >= 1 for s in segs)


def _alternating(segs) -> bool:
    if len(segs) < 2:
        return False
    if any(s.L != 1 or s.s < 1 for s in segs):
        return False
    return all(a.position != b.position for a, b in zip(segs, segs[1:]))


@_timed(6, "Farey patterns", 300.0)
def criterion_6():
    cases = {(-4.5, -2.0): lambda c: _side_pattern(c.segments, "above"),
             (-4.5, 2.0): lambda c: _side_pattern(c.segments, "below"),
             (-4.0, 0.0): lambda c: _alternating(c.segments),
             (-4.5, 0.0): lambda c: c.farey == "{L^0}" and c.regime.is_relaxation}
    got, bad = {}, []
    for (k, lam), check in cases.items():
        c = simulate_and_classify(KoperParams(k, lam, 0.01, 0.01))
        got[(k, lam)] = _short(c.farey)
        if not check(c):
            bad.append((k, lam))
    return not bad, f"farey {got}; mismatched {bad}", {"farey": got}


# ---------------------------------------------------------------- boundaries


def _oscillating(kp: KoperParams) -> bool:
    """Amplitude persistence: late amplitude at least half the mid-run amplitude."""
    T = default_horizon(kp)
    traj = integrate(kp, default_initial_state(kp), (0.0, T))
    x, t = traj.y[:, 0], traj.t

    def amp(a, b):
        m = (t >= a * T) & (t <= b * T)
        return float(np.ptp(x[m])) if np.any(m) else 0.0

    late, mid = amp(0.9, 1.0), amp(0.45, 0.55)
    return late > 1e-6 and late >= 0.5 * mid


def _is_mmo(kp: KoperParams) -> bool:
    r = simulate_and_classify(kp).regime
    return r.is_single or r is Regime.MMO_DOUBLE


def _bisect(pred, lo: float, hi: float, steps: int = 8) -> tuple[float, bool]:
    """Bisection for the switch of ``pred`` between ``lo`` and ``hi``."""
    p_lo, p_hi = pred(lo), pred(hi)
    if p_lo == p_hi:
        return math.nan, False
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if pred(mid) == p_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), True


@_timed(7, "boundary curves", 600.0)
def criterion_7():
    eh = dl = 0.01
    k_a = -4.4
    sh = lambda_sh(KoperParams(k_a, 0.0, eh, dl), "minus")
    onset, ok_a = _bisect(lambda lam: _oscillating(KoperParams(k_a, lam, eh, dl)), 1.5, 3.0)
    err_a = abs(onset - sh) if ok_a else math.inf
    k_b = -4.5
    lr = lambda_r(KoperParams(k_b, 0.0, eh, dl), "minus")
    trans, ok_b = _bisect(lambda lam: _is_mmo(KoperParams(k_b, lam, eh, dl)), 0.5, 1.5)
    err_b = abs(trans - lr) if ok_b else math.inf
    pass_a = err_a <= 5 * eh + 5 * dl
    pass_b = err_b <= 5 * dl
    detail = (f"onset {onset:.4f} vs lambda_SH {sh:.4f} ({'ok' if pass_a else 'off'}); "
              f"MMO/relaxation {trans:.4f} vs lambda_r {lr:.4f} "
              f"(|d|={err_b:.3f}, tol {5 * dl:.2f}, {'ok' if pass_b else 'off'})")
    return pass_a and pass_b, detail, {"onset": onset, "lambda_sh": sh,
                                       "transition": trans, "lambda_r": lr,
                                       "pass_onset": pass_a, "pass_transition": pass_b}


# ---------------------------------------------------------------- LAO counts


def lao_runs(kp: KoperParams) -> list[dict]:
    """Measured and predicted LAO run lengths for each lower-to-lower segment.

    ``z_out`` is the normal-form ``z`` at the last extremum of the epoch
    before the run; ``z_in`` at the first lower minimum after that epoch.
    """
    p = koper_to_normal_form(kp)
    sys_ = as_system(kp)
    frame = frame_for(sys_)
    traj = integrate(sys_, default_initial_state(kp), (0.0, default_horizon(kp)),
                     section=frame.section)
    c = classify_trajectory(traj, frame)
    if c.split is None or not c.segments:
        return []
    Y = to_normal_coordinates(sys_, traj.extrema_y)
    xm = -2 * p.f2 / (3 * p.f3)
    spans = c.split.epoch_spans
    rows = []
    for i, seg in enumerate(c.segments):
        t_end = spans[i][1]
        i1 = int(np.argmin(np.abs(traj.extrema_t - t_end)))
        z_out = float(Y[i1, 2])
        after = np.flatnonzero((traj.extrema_t > t_end) & (traj.extrema_kind < 0)
                               & (Y[:, 0] < 0.5 * xm))
        if len(after) == 0:
            continue
        z_in = float(Y[after[0], 2])
        try:
            pred = lao_count(p, z_in, z_out)
        except ValueError as exc:
            pred = f"error: {exc}"
        rows.append({"L": seg.L, "position": seg.position, "z_in": z_in,
                     "z_out": z_out, "predicted": pred if pred is not RELAXATION
                     else "relaxation"})
    return rows


@_timed(8, "LAO-count scaling", 600.0)
def criterion_8():
    res, ok = {}, True
    for dl in (0.01, 0.001):
        rows = lao_runs(KoperParams(-4.5, 1.5, 0.01, dl))
        match = bool(rows) and all(isinstance(r["predicted"], int)
                                   and abs(r["L"] - r["predicted"]) <= 1 for r in rows)
        ok &= match
        res[dl] = {"rows": rows, "match": match,
                   "mean_L": float(np.mean([r["L"] for r in rows])) if rows else math.nan}
    grows = res[0.001]["mean_L"] > res[0.01]["mean_L"]
    ok &= grows

    def brief(dl):
        r = res[dl]
        pairs = ", ".join(f"{x['L']}/{x['predicted']}" for x in r["rows"][:6])
        return f"delta={dl}: measured/predicted {pairs} ({'ok' if r['match'] else 'off'})"

    return ok, f"{brief(0.01)}; {brief(0.001)}; mean L grows {grows}", res


# ---------------------------------------------------------------- HH


HH_EXPECTED = ((23.0, "MmoDouble"), (26.25, "single"), (27.0, "relaxation"))


@_timed(9, "HH transitions", 600.0)
def criterion_9():
    currents = [I for I, _ in HH_EXPECTED] + [25.6]
    res = {r.current: r for r in sweep_hh(currents, workers=1)}
    bad = []
    for I, exp in HH_EXPECTED:
        r = Regime(res[I].regime) if res[I].error is None else None
        if r is None:
            bad.append(I)
        elif exp == "relaxation":
            if not r.is_relaxation:
                bad.append(I)
        elif not _label_ok(exp, r):
            bad.append(I)
    # the exotic current is logged, never failed
    r256 = res[25.6]
    note = "" if r256.regime in ("Exotic", "MmoDouble") else " (25.6 mismatch logged)"
    labels = {I: f"{res[I].regime} {_short(res[I].farey)}".strip() for I in currents}
    return not bad, f"labels {labels}; mismatched {bad}{note}", {"labels": labels}


# ---------------------------------------------------------------- oracles


def _raw_drift(p: NormalFormParams, z0: float):
    """Drift integrand written out directly from ``F``, ``phi`` and ``G``."""
    def f(s):
        y = p.F(s)
        return p.dF(s) * (p.mu + p.phi(s, y, z0)) / (p.G(s) - z0)
    return f


def drift_oracle_cases(n: int = 20, seed: int = SEED) -> list[dict]:
    """Random remote-regime segments on the attracting sheets, with both values."""
    rng = np.random.default_rng(seed)
    rows = []
    while len(rows) < n:
        k = rng.uniform(-7.0, -4.2)
        lam = rng.uniform(-1.0, 3.0)
        p = _nf(k, lam)
        if classify_relative_config(p).kind is not Config.REMOTE:
            continue
        x_max, x_star, x_0 = drift_endpoints(p)
        if rng.random() < 0.5:
            a, b = sorted(rng.uniform(x_star, 0.0, size=2))
        else:
            a, b = sorted(rng.uniform(x_max, x_0, size=2))
        z0 = rng.uniform(-0.05, 0.05)
        try:
            v = g_drift(p, a, b, z0).value
        except ValueError:
            continue
        ref = simpson(_raw_drift(p, z0), a, b, 1_000_000)
        rows.append({"k": k, "lam": lam, "a": a, "b": b, "z0": z0,
                     "gk15": v, "simpson": ref})
    return rows


def mirror_deviation(k: float = -4.5, lam: float = 2.0) -> tuple[float, float | None]:
    """Sup-norm of ``x(t) + x_mirror(t)`` for the odd-symmetric Koper form, over one period."""
    kp = KoperParams(k, lam, 0.01, 0.01)
    km = kp.replace(lam=-lam)
    s0 = default_initial_state(kp)
    T = default_horizon(kp)
    a = integrate(as_system(kp, symmetric=True), s0, (0.0, T), section=0.0)
    b = integrate(as_system(km, symmetric=True), -s0, (0.0, T), section=0.0)
    per = detect_period(transient_strip(a, 0.3))
    if per is None:
        return math.inf, None
    m = a.t >= a.t[-1] - per
    ta = a.t[m]
    yb = np.column_stack([np.interp(ta, b.t, b.y[:, i]) for i in range(3)])
    return float(np.max(np.abs(a.y[m] + yb))), per


@_timed(10, "oracle equivalence", 120.0)
def criterion_10():
    rows = drift_oracle_cases()
    worst = max(abs(r["gk15"] - r["simpson"]) for r in rows)
    dev, per = mirror_deviation()
    ok = worst <= 1e-8 and dev <= 1e-6
    per_s = "none" if per is None else f"{per:.2f}"
    return ok, (f"drift vs Simpson worst {worst:.1e} on {len(rows)} segments; "
                f"mirror sup {dev:.1e} over period {per_s}"), \
        {"drift_worst": worst, "mirror": dev, "period": per}


CRITERIA = {i: fn for i, fn in enumerate(
    (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
     criterion_6, criterion_7, criterion_8, criterion_9, criterion_10), start=1)}


def run_all(selected=None, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    out = []
    for n, fn in CRITERIA.items():
        if selected and n not in selected:
            continue
        r = fn()
        if echo:
            echo(r.line())
        out.append(r)
    return out


def format_table(results: list[CriterionResult]) -> str:
    lines = [r.line() for r in results]
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} criteria passed")
    return "\n".join(lines)
