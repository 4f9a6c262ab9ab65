"""Command line front end: ``tshobam {check,solve,simulate,stability,diagnose} CONFIG``.

Exit codes: 0 pass, 1 analytic failure, 2 usage or configuration error.
Outputs are deterministic for a fixed configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from .config import ExperimentConfig, load_config
from .errors import ConfigError, EmptyWindow, ParseError, TshobamError
from .simulate import (
    StepanovParams, WeightFunction, history_from_functions, random_history, simulate,
    stepanov_norm, wpaa0_profile,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays become lists, non-finite floats strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


class _Run:
    def __init__(self, args, cfg: ExperimentConfig):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def write_json(self, name, command, payload):
        doc = {"command": command, "manifest": self.cfg.manifest(__version__), **payload}
        text = json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"
        (self.out / name).write_text(text)

    def write_text(self, name, text):
        with open(self.out / name, "w", newline="") as fh:
            fh.write(text)

    def bounds(self, ts=None):
        cfg = self.cfg
        return an.scan_bounds(cfg.network, ts or cfg.timescale, cfg.scan_window, cfg.density,
                              effective_delays=bool(cfg.analysis["effective_delays"]))

    def seeds(self):
        if self.args.seed is not None:
            return [self.args.seed, self.args.seed + 1]
        seeds = [int(s) for s in self.cfg.run["seeds"]]
        if len(seeds) < 2:
            raise ConfigError("run.seeds needs two entries")
        return seeds[:2]

    def random(self, seed):
        rng = np.random.default_rng(seed)
        return random_history(self.cfg.timescale, self.cfg.network, rng,
                              amplitude=float(self.cfg.run["random_amplitude"]))

    def initial(self):
        """The configured initial history, or a random one from the first seed."""
        cfg, run = self.cfg, self.cfg.run
        net, ts = cfg.network, cfg.timescale
        hist = run["initial_history"]
        if hist is None:
            return self.random(self.seeds()[0])
        try:
            xs, ys = hist["x"], hist["y"]
        except (KeyError, TypeError):
            raise ConfigError("run.initial_history needs x and y lists") from None
        if len(xs) != net.n or len(ys) != net.m:
            raise ConfigError("run.initial_history: wrong number of functions")
        return history_from_functions(ts, net.delays.theta, xs, ys, hist.get("dx"),
                                      hist.get("dy"), derive_delta=bool(run["derive_init_delta"]))


def cmd_check(run: _Run):
    cfg = run.cfg
    rep = an.check_h3(cfg.network, cfg.timescale, cfg.r, run.bounds())
    run.write_json("check.json", "check", {"report": rep.to_dict()})
    for name, flag in rep.flags.items():
        print(f"{name.upper()}: {'pass' if flag['pass'] else 'FAIL'}  {flag['note']}")
    print(f"kappa = {rep.kappa:.6g}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_solve(run: _Run):
    cfg, a = run.cfg, run.cfg.analysis
    rep = an.check_h3(cfg.network, cfg.timescale, cfg.r, run.bounds())
    res = an.picard_solve(cfg.timescale, cfg.network, cfg.r, tol=float(a["tol"]),
                          max_iter=int(a["max_iter"]), window=tuple(a["picard_window"]),
                          tail_tol=float(a["tail_tol"]), lower_cutoff=a["cutoff"], report=rep)
    run.write_text("solution.csv", res.trajectory.to_csv())
    run.write_json("solve.json", "solve", {"picard": res.to_dict()})
    for k, d in enumerate(res.diffs, 1):
        print(f"iteration {k}: sup difference {d:.6e}")
    print(f"kappa = {res.kappa:.6g}; converged after {res.iterations} iterations")
    return EXIT_OK


def _summary(traj, r):
    sup = float(np.max(np.abs(np.hstack([traj.x, traj.y]))))
    return {"points": len(traj), "t_end": traj.upper_bound, "sup_state": sup,
            "within_r": bool(sup <= r), "final_x": traj.x[-1], "final_y": traj.y[-1]}


def cmd_simulate(run: _Run):
    cfg = run.cfg
    traj = simulate(cfg.timescale, cfg.network, run.initial(), float(cfg.run["horizon"]))
    run.write_text("trajectory.csv", traj.to_csv())
    summary = _summary(traj, cfg.r)
    run.write_json("simulate.json", "simulate", {"summary": summary})
    print(f"{summary['points']} points to t = {summary['t_end']:g}; sup |state| = {summary['sup_state']:.6g}")
    return EXIT_OK


def cmd_stability(run: _Run):
    cfg, a = run.cfg, run.cfg.analysis
    ts, net = cfg.timescale, cfg.network
    bounds = run.bounds()
    beta = a["beta"]
    if beta is not None:
        beta = (np.asarray(beta[0], dtype=float), np.asarray(beta[1], dtype=float))
    cert = an.decay_certificate(bounds, net.activation, cfg.r, ts,
                                float(a["safety_fraction"]), beta)
    s1, s2 = run.seeds()
    horizon = float(cfg.run["horizon"])
    ta = simulate(ts, net, run.random(s1), horizon)
    tb = simulate(ts, net, run.random(s2), horizon)
    env = an.envelope_check(ta, tb, cert, ts, 0.0)
    lyap = an.lyapunov_series(ta, tb, net, ts, bounds, symmetrize=bool(a["symmetrize"]),
                              inner_limits=a["lyapunov_inner"])
    tol = 1e-6 * lyap.V[0]
    nonincr = float(np.mean(np.diff(lyap.V) <= tol)) if len(lyap.V) > 1 else 1.0
    run.write_text("envelope.csv", env.to_csv())
    run.write_text("lyapunov.csv", lyap.to_csv())
    run.write_json("stability.json", "stability", {
        "certificate": cert.to_dict(), "envelope": env.to_dict(), "seeds": [s1, s2],
        "lyapunov": {"inner_limits": a["lyapunov_inner"], "symmetrize": bool(a["symmetrize"]),
                     "V0": float(lyap.V[0]), "nonincreasing_fraction": nonincr},
    })
    print(f"gamma = {cert.gamma:.6g}, a = {cert.a:.6g}, K = {cert.K:.6g}")
    for w in cert.warnings:
        print(f"warning: {w}")
    print(f"envelope holds at {100 * env.fraction:.2f}% of points; fitted rate {env.fitted_rate:.6g}")
    print(f"Lyapunov functional non-increasing at {100 * nonincr:.2f}% of steps")
    return EXIT_OK if env.fraction == 1.0 else EXIT_FAIL


def _r_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad r list {text!r}") from None


def cmd_diagnose(run: _Run):
    cfg, args = run.cfg, run.args
    ts = cfg.timescale
    nu = WeightFunction.parse(args.nu if args.nu is not None else cfg.analysis["weight"])
    params = StepanovParams(args.p, args.l)
    if args.expr is not None:
        f = args.expr
        lo, hi = (args.window or (0.0, float(cfg.run["horizon"])))
        t0 = 0.0 if args.t0 is None else args.t0
    else:
        traj = simulate(ts, cfg.network, run.initial(), float(cfg.run["horizon"]))
        try:
            traj.channel(args.channel)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        f = (traj, args.channel)
        lo, hi = args.window or (0.0, traj.upper_bound)
        t0 = (lo + hi) / 2 if args.t0 is None else args.t0
        if any(t0 - r < traj.lower_bound - 1e-9 or t0 + r > traj.upper_bound + 1e-9
               for r in args.r_list):
            raise ConfigError("a Q_r window leaves the simulated range; shorten --r-list")
    nu.validate(ts, (min(lo, t0 - max(args.r_list)), max(hi, t0 + max(args.r_list))))
    norm = stepanov_norm(f, params, ts, (lo, hi))
    prof = wpaa0_profile(f, nu, ts, t0, args.r_list)
    ws = [w for _, w in prof]
    decreasing = all(b < a for a, b in zip(ws, ws[1:]))
    lines = ["r,w_r"] + [f"{r:.17g},{w:.17g}" for r, w in prof]
    run.write_text("wpaa0.csv", "\n".join(lines) + "\n")
    run.write_json("diagnose.json", "diagnose", {
        "channel": args.expr if args.expr is not None else args.channel,
        "stepanov": {"p": params.p, "l": params.l, "window": [lo, hi], "norm": norm},
        "profile": {"t0": t0, "r": [r for r, _ in prof], "w": ws, "decreasing": decreasing},
    })
    print(f"Stepanov norm (p={params.p:g}, l={params.l:g}) = {norm:.10g}")
    for r, w in prof:
        print(f"r = {r:g}: w_r = {w:.10g}")
    print("profile decreasing" if decreasing else "profile not decreasing")
    return EXIT_OK


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "simulate": cmd_simulate,
            "stability": cmd_stability, "diagnose": cmd_diagnose}
HELP = {
    "check": "scan coefficient bounds and test hypotheses H1-H4",
    "solve": "Picard iteration for the almost periodic solution",
    "simulate": "integrate from an initial history (method of steps)",
    "stability": "decay certificate plus envelope and Lyapunov checks",
    "diagnose": "Stepanov norm and weighted ergodic mean profile",
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--resolution", type=float, default=argparse.SUPPRESS,
                        help="override the time-scale resolution")
    p = argparse.ArgumentParser(prog="tshobam", parents=[common],
                                description="Delayed high-order BAM networks on time scales.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=HELP[name])
        sp.add_argument("config", help="configuration file or builtin name (e.g. paper_sec6)")
        if name == "diagnose":
            sp.add_argument("--channel", default="x1", help="simulated channel, e.g. x1 or y2")
            sp.add_argument("--expr", default=None, help="diagnose an expression of t instead")
            sp.add_argument("--p", type=float, default=1.0, help="Stepanov exponent")
            sp.add_argument("--l", type=float, default=1.0, help="Stepanov window length")
            sp.add_argument("--nu", default=None, help="weight expression (default from config)")
            sp.add_argument("--t0", type=float, default=None, help="centre of the mean windows")
            sp.add_argument("--window", type=float, nargs=2, default=None,
                            help="range for the Stepanov supremum")
            sp.add_argument("--r-list", type=_r_list, default=[1.0, 2.0, 5.0, 10.0, 20.0],
                            help="comma-separated increasing radii")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for key, default in (("out", "."), ("seed", None), ("resolution", None)):
        if not hasattr(args, key):
            setattr(args, key, default)
    try:
        cfg = load_config(args.config, args.resolution)
        return COMMANDS[args.command](_Run(args, cfg))
    except (ConfigError, ParseError, EmptyWindow, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TshobamError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
