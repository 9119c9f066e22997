"""Command-line entry point ``mmo-scope``.

Every subcommand accepts ``--config FILE``, either a JSON object or plain
``key = value`` lines, whose keys are option names (dashes or underscores).
The entries become defaults, so explicit flags still override them.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .acceptance import CRITERIA, format_table, run_all
from .classify import ClassifierConfig, classify_trajectory, frame_for
from .geometry import geometry_report
from .harness import GridSpec, boundary_curves, emit_diagram, sweep_hh, sweep_koper
from .integrate import (IntegrationError, IntegratorConfig, default_horizon,
                        default_initial_state, integrate, trajectory_from_samples)
from .local import landmarks
from .model import (HHParams, KoperParams, ModelError, NormalFormParams, PhiSpec,
                    koper_to_normal_form)

TRAJ_COLUMNS = {"hh": ("t", "v", "n", "h", "step")}
DEFAULT_COLUMNS = ("t", "x", "y", "z", "step")
BOUNDARY_COLUMNS = ("k", "lambda_sh_minus", "lambda_sh_plus", "lambda_r_minus",
                    "lambda_r_plus")


# ---------------------------------------------------------------- arguments


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _add_model(p: argparse.ArgumentParser, systems=("normal", "koper", "hh")) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--system", choices=systems, default="koper")
    g.add_argument("--k", type=float, default=-4.4)
    g.add_argument("--lam", type=float, default=1.5)
    g.add_argument("--eps-hat", type=float, default=0.01)
    g.add_argument("--delta", type=float, default=0.01)
    g.add_argument("--f2", type=float, help="normal form; default from the Koper map")
    g.add_argument("--f3", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--mu", type=float)
    g.add_argument("--eps", type=float, help="normal form eps, or HH eps")
    g.add_argument("--phi", type=_floats, metavar="C0,CX,CY,CZ",
                   help="affine phi coefficients (normal form)")
    if "hh" in systems:
        g.add_argument("--current", "-I", dest="current", type=float, default=26.25)
        g.add_argument("--tau-h", type=float, default=45.0)


def _model(args):
    if args.system == "hh":
        hp = HHParams(args.current, tau_h=args.tau_h)
        return hp.replace(eps=args.eps) if args.eps is not None else hp
    kp = KoperParams(args.k, args.lam, args.eps_hat, args.delta)
    if args.system == "koper":
        return kp
    # normal form: start from the Koper image and override given fields
    nf = koper_to_normal_form(kp)
    changes = {f: getattr(args, f) for f in ("f2", "f3", "alpha", "beta", "mu", "eps")
               if getattr(args, f) is not None}
    if args.phi is not None:
        if len(args.phi) != 4:
            raise SystemExit("--phi needs four coefficients")
        changes["phi"] = PhiSpec(*args.phi)
    return nf.replace(**changes) if changes else nf


def _normal(args) -> NormalFormParams:
    m = _model(args)
    if isinstance(m, HHParams):
        raise SystemExit("this command needs the normal form or the Koper model")
    return koper_to_normal_form(m) if isinstance(m, KoperParams) else m


def _write_json(obj, out) -> None:
    text = json.dumps(_clean(obj), indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------- commands


def cmd_geometry(args) -> int:
    _write_json(geometry_report(_normal(args)).as_dict(), args.out)
    return 0


def cmd_landmarks(args) -> int:
    p = _normal(args)
    sides = ("minus", "plus") if args.side == "both" else (args.side,)
    _write_json({s: landmarks(p, s, args.mode).as_dict() for s in sides}, args.out)
    return 0


def cmd_boundaries(args) -> int:
    ks = np.round(np.arange(args.k_min, args.k_max + 0.5 * args.k_step, args.k_step), 12)
    b = boundary_curves(ks, args.eps_hat)
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(BOUNDARY_COLUMNS)
        for i in range(len(b["k"])):
            w.writerow([_cell(b[c][i]) for c in BOUNDARY_COLUMNS])
    return 0


def _cell(v: float) -> str:
    return "" if not math.isfinite(v) else repr(float(v))


class _open_out:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w", newline="") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()


def cmd_simulate(args) -> int:
    m = _model(args)
    cfg = IntegratorConfig(rel_tol=args.rtol, abs_tol=args.atol, stride=args.stride)
    y0 = np.array(args.y0) if args.y0 else default_initial_state(m)
    t_end = args.t_end if args.t_end is not None else default_horizon(m)
    try:
        traj = integrate(m, y0, (0.0, t_end), cfg)
        status = 0
    except IntegrationError as exc:
        print(f"mmo-scope: {exc}", file=sys.stderr)
        traj, status = exc.partial, 1
    cols = TRAJ_COLUMNS.get(args.system, DEFAULT_COLUMNS)
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for t, y, h in zip(traj.t, traj.y, traj.step):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in y), repr(float(h))])
    return status


def _read_traj(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return header, body


def cmd_classify(args) -> int:
    header, data = _read_traj(args.input)
    if tuple(header[:4]) == TRAJ_COLUMNS["hh"][:4]:
        args.system = "hh"
    m = _model(args)
    frame = frame_for(m)
    traj = trajectory_from_samples(m, data[:, 0], data[:, 1:4], section=frame.section)
    cfg = ClassifierConfig(theta_lao=args.theta_lao, theta_sao=args.theta_sao)
    c = classify_trajectory(traj, frame, cfg)
    d = c.as_dict()
    _write_json({k: d[k] for k in ("regime", "farey", "segments", "ambiguity_flags")},
                args.out)
    return 0


def cmd_sweep(args) -> int:
    grid = GridSpec(args.k_min, args.k_max, args.k_step, args.lam_min, args.lam_max,
                    args.lam_step, args.eps_hat, args.delta)
    res = sweep_koper(grid, workers=args.workers)
    csv_path, side = emit_diagram(res, args.out)
    n_fail = sum(p.error is not None for p in res.points)
    print(f"wrote {csv_path} and {side} ({len(res.points)} points, {n_fail} failed)")
    return 0


def cmd_hh(args) -> int:
    base = HHParams(0.0, tau_h=args.tau_h)
    if args.eps is not None:
        base = base.replace(eps=args.eps)
    res = sweep_hh(args.currents, base, workers=args.workers)
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(("I", "regime", "farey"))
        for r in res:
            w.writerow([repr(r.current), r.regime, r.farey])
    return 0


def cmd_verify(args) -> int:
    results = run_all(args.only, echo=lambda s: print(s, flush=True))
    print(format_table(results).splitlines()[-1])
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmo-scope",
                                 description="Three-timescale MMO analysis toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="option defaults, as JSON or key = value lines")
        p.set_defaults(func=fn)
        return p

    p = command("geometry", cmd_geometry, "critical manifolds, folds and configuration")
    _add_model(p, ("normal", "koper"))
    p.add_argument("--out")

    p = command("landmarks", cmd_landmarks, "Hopf point, degenerate nodes, canard plane")
    _add_model(p, ("normal", "koper"))
    p.add_argument("--side", choices=("minus", "plus", "both"), default="both")
    p.add_argument("--mode", choices=("numeric", "asymptotic"), default="numeric")
    p.add_argument("--out")

    p = command("boundaries", cmd_boundaries, "singular Hopf and relaxation curves")
    p.add_argument("--k-min", type=float, default=-7.0)
    p.add_argument("--k-max", type=float, default=-2.0)
    p.add_argument("--k-step", type=float, default=0.1)
    p.add_argument("--eps-hat", type=float, default=0.01)
    p.add_argument("--out")

    p = command("simulate", cmd_simulate, "integrate one trajectory to CSV")
    _add_model(p)
    p.add_argument("--t-end", type=float, help="default 50/delta")
    p.add_argument("--rtol", type=float, default=1e-8)
    p.add_argument("--atol", type=float, default=1e-10)
    p.add_argument("--stride", type=int, default=1, help="keep every n-th step")
    p.add_argument("--y0", type=_floats, help="initial state (three numbers)")
    p.add_argument("--out")

    p = command("classify", cmd_classify, "label a trajectory CSV")
    _add_model(p)
    p.add_argument("input", help="trajectory CSV written by simulate")
    p.add_argument("--theta-lao", type=float, default=ClassifierConfig.theta_lao)
    p.add_argument("--theta-sao", type=float, default=ClassifierConfig.theta_sao)
    p.add_argument("--out")

    p = command("sweep", cmd_sweep, "regime diagram over a (k, lambda) grid")
    p.add_argument("--k-min", type=float, default=-6.0)
    p.add_argument("--k-max", type=float, default=-2.0)
    p.add_argument("--k-step", type=float, default=0.2)
    p.add_argument("--lam-min", type=float, default=-3.0)
    p.add_argument("--lam-max", type=float, default=3.0)
    p.add_argument("--lam-step", type=float, default=0.5)
    p.add_argument("--eps-hat", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)

    p = command("hh", cmd_hh, "regime labels of the reduced HH model")
    p.add_argument("--currents", type=_floats, default=[23.0, 25.6, 26.25, 27.0])
    p.add_argument("--tau-h", type=float, default=45.0)
    p.add_argument("--eps", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")

    p = command("verify", cmd_verify, "run the acceptance suite")
    p.add_argument("--only", type=lambda s: [int(v) for v in _floats(s)],
                   help=f"subset of criteria 1..{len(CRITERIA)}")
    return ap


def _scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_config(path: Path) -> dict:
    """Option defaults from a JSON object or from ``key = value`` lines.

    In the plain-text form ``#`` starts a comment and values are read as
    numbers when they parse as such; ``--phi`` and list options take
    comma-separated numbers.
    """
    text = path.read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise SystemExit("--config must hold a JSON object")
        return data
    data = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        data[key] = _floats(val) if "," in val else _scalar(val)
    return data


def _apply_config(ap: argparse.ArgumentParser, argv) -> None:
    """Load ``--config`` and install its entries as subparser defaults."""
    pre, _ = ap.parse_known_args(argv)
    path = getattr(pre, "config", None)
    if path is None:
        return
    data = read_config(Path(path))
    sub = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[pre.command]
    known = {a.dest for a in sp._actions}
    defaults = {}
    for key, val in data.items():
        dest = key.replace("-", "_")
        if dest == "I":
            dest = "current"
        if dest not in known:
            raise SystemExit(f"unknown config key {key!r} for {pre.command}")
        defaults[dest] = val
    sp.set_defaults(**defaults)


def main(argv=None) -> int:
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    _apply_config(ap, argv)
    args = ap.parse_args(argv)
    try:
        return int(args.func(args))
    except (ModelError, ValueError) as exc:
        print(f"mmo-scope: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
