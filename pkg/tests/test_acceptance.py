"""Acceptance checks, one line each: ``[PASS]`` or ``[FAIL]``, the criterion, runtime.

Run with ``pytest tests/test_acceptance.py`` (the lines bypass output
capture) or directly as a script.  Failures are left red on
purpose; the README explains each one.
"""

import functools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import test_simulate  # noqa: E402
import test_timescale  # noqa: E402
from oracles import brute_h3  # noqa: E402
from tshobam import analysis as an  # noqa: E402
from tshobam.cli import main as cli_main  # noqa: E402
from tshobam.config import load_config  # noqa: E402
from tshobam.simulate import (  # noqa: E402
    StepanovParams, ergodic_mean, history_from_functions, random_history, simulate,
    stepanov_norm,
)
from tshobam.timescale import TimeScale  # noqa: E402

R2 = TimeScale.continuum(1e-2)
Z = TimeScale.uniform_grid(1)

# constants printed alongside the worked example; kept for the delta report only
REFERENCE = {"M": [0.119, 0.52, 0.12], "Mbar": [0.139, 0.069, 0.0136],
             "N": [0.343, 0.213], "Nbar": [0.65, 0.343]}


_capture = {}


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    _capture["fixture"] = capsys
    yield
    _capture.clear()


def show(line):
    """Print past pytest's output capture so every line reaches the log."""
    cap = _capture.get("fixture")
    if cap is None:
        print(line, flush=True)
        return
    with cap.disabled():
        # start on a fresh line; pytest leaves its progress marker unterminated
        print("\n" + line, flush=True)


def report(label, ok, detail, seconds, budget=None):
    within = budget is None or seconds < budget
    status = "PASS" if ok and within else "FAIL"
    timing = f"{seconds:.1f}s" + (f" (budget {budget:g}s)" if budget else "")
    line = f"[{status}] {label}: {detail}; {timing}"
    show(line)
    return ok and within


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def example():
    cfg = load_config("paper_sec6")
    bounds = an.scan_bounds(cfg.network, cfg.timescale, cfg.scan_window, cfg.density)
    return cfg, bounds


@functools.lru_cache(maxsize=None)
def pair(kind):
    """Certificate and two simulations from random histories (seeds 1, 2), horizon 50."""
    cfg, bounds = example()
    ts = R2 if kind == "continuum" else Z
    if kind != "continuum":
        bounds = an.scan_bounds(cfg.network, ts, cfg.scan_window)
    cert = an.decay_certificate(bounds, cfg.network.activation, cfg.r, ts)
    trajs = [simulate(ts, cfg.network, random_history(ts, cfg.network, np.random.default_rng(s)), 50.0)
             for s in (1, 2)]
    return ts, bounds, cert, trajs


# -- 1 ------------------------------------------------------------------------------

def test_c1_kernel_properties():
    suites = [test_timescale.test_semigroup_law, test_timescale.test_positivity,
              test_timescale.test_monotone_comparison,
              test_timescale.test_identity_at_equal_times_randomized,
              test_timescale.test_fundamental_identity_on_grid]
    failed = []

    def go():
        for fn in suites:
            try:
                fn()
            except AssertionError:
                failed.append(fn.__name__)

    _, sec = timed(go)
    detail = (f"{len(suites)} suites x {test_timescale.CASES} cases at 1e-9 relative"
              + (f", failing: {failed}" if failed else ""))
    assert report("1 kernel properties", not failed, detail, sec, 5)


# -- 2 ------------------------------------------------------------------------------

def test_c2_integral_oracles():
    forms = [(lambda t: t ** 2, lambda t: t ** 3 / 3), (np.sin, lambda t: -np.cos(t)),
             (np.exp, np.exp), (lambda t: 1 / (1 + t ** 2), np.arctan)]

    def go():
        test_timescale.test_grid_integral_is_exact_sum_for_polynomials()
        for f, F in forms:
            test_timescale.test_continuum_integral_closed_forms(f, F)

    ok = True
    try:
        _, sec = timed(go)
    except AssertionError:
        ok, sec = False, 0.0
    assert report("2 delta-integral oracles", ok,
                  "100 grid polynomials exact to 1e-12, continuum closed forms to 1e-6 at res 1e-3",
                  sec)


# -- 3 ------------------------------------------------------------------------------

def test_c3_example_constants():
    def go():
        cfg, b = example()
        S = {k: v.tolist() for k, v in b.sup.items()}
        I = {k: v.tolist() for k, v in b.inf.items()}
        act = cfg.network.activation
        M, Mb, N, Nb, big1, big2 = brute_h3(S, I, list(act.lipschitz), act.value_at_zero, cfg.r)
        c = an.h3_constants(b, act, cfg.r)
        agree = all(np.allclose(got, want, rtol=1e-12, atol=0)
                    for got, want in ((c.M, M), (c.Mbar, Mb), (c.N, N), (c.Nbar, Nb)))
        return agree, (M, Mb, N, Nb), big1, big2, cfg.r

    (agree, consts, big1, big2, r), sec = timed(go)
    ok = agree and big1 <= r and big2 <= 1
    deltas = []
    for name, vals in zip(("M", "Mbar", "N", "Nbar"), consts):
        for k, (v, ref) in enumerate(zip(vals, REFERENCE[name]), 1):
            deltas.append(f"{name}{k} {v:.4f} (ref {ref:g}, delta {v - ref:+.4f})")
    show("    constants vs reference: " + "; ".join(deltas))
    detail = (f"oracle agreement to 1e-12: {agree}; first max {big1:.4f} <= {r}; "
              f"second max {big2:.4f} <= 1")
    assert report("3 worked-example H3 constants", ok, detail, sec, 10)


# -- 4 ------------------------------------------------------------------------------

def test_c4_contraction():
    def go():
        cfg, b = example()
        a = cfg.analysis
        return an.picard_solve(cfg.timescale, cfg.network, cfg.r, tol=1e-8, max_iter=60,
                               window=tuple(a["picard_window"]), bounds=b)

    res, sec = timed(go)
    late = res.ratios[2:]
    ok = res.converged and res.iterations <= 60 and all(q <= res.kappa + 0.05 for q in late)
    detail = (f"{res.iterations} iterations to 1e-8; kappa {res.kappa:.4f}; "
              f"max ratio after iteration 3 {max(late, default=0):.4f}")
    assert report("4 Picard contraction", ok, detail, sec, 60)


# -- 5 ------------------------------------------------------------------------------

def _envelope(kind):
    (ts, _, cert, (ta, tb)), sec = timed(lambda: pair(kind))
    env, sec2 = timed(lambda: an.envelope_check(ta, tb, cert, ts, 0.0))
    ok = env.fraction == 1.0 and env.fitted_rate >= 0.5 * cert.gamma
    detail = (f"envelope holds at {100 * env.fraction:.1f}% of points; fitted rate "
              f"{env.fitted_rate:.4f} vs 0.5 gamma = {0.5 * cert.gamma:.4f}; K = {cert.K:.3f}")
    return report(f"5 exponential stability ({kind})", ok, detail, sec + sec2, 120)


def test_c5_stability_continuum():
    assert _envelope("continuum")


def test_c5_stability_integers():
    # Known failure: fractional leakage delays act as full-step delays on Z.
    assert _envelope("integers")


# -- 6 ------------------------------------------------------------------------------

def _nonincreasing(inner):
    ts, bounds, _, (ta, tb) = pair("continuum")
    ser = an.lyapunov_series(ta, tb, example()[0].network, ts, bounds, inner_limits=inner)
    tol = 1e-6 * ser.V[0]
    return float(np.mean(np.diff(ser.V) <= tol)), bool(np.all(ser.V <= ser.V[0] + tol))


def test_c6_lyapunov():
    (frac, below), sec = timed(lambda: _nonincreasing("standard"))
    printed, _ = _nonincreasing("printed")
    show(f"    with the inner limits exactly as displayed: {100 * printed:.1f}% of steps")
    detail = f"V non-increasing at {100 * frac:.2f}% of steps (need 99%); V(t) <= V(0): {below}"
    assert report("6 Lyapunov monotonicity", frac >= 0.99, detail, sec)


# -- 7 ------------------------------------------------------------------------------

def test_c7_discrete_oracle():
    ok = True

    def go():
        nonlocal ok
        for seed in (11, 12, 13):
            try:
                test_simulate.test_discrete_recurrence_oracle(seed)
            except AssertionError:
                ok = False

    _, sec = timed(go)
    assert report("7 discrete recurrence oracle", ok,
                  "3 random networks (n, m <= 2), 50 steps, 1e-12 relative", sec)


# -- 8 ------------------------------------------------------------------------------

def test_c8_scalar():
    def go():
        spec = test_simulate.scalar("0.5")
        g = simulate(Z, spec, history_from_functions(Z, 0.0, ["1"], ["0"]), 20)
        k = g.t >= 0
        exact = bool(np.array_equal(g.x[k, 0], 0.5 ** np.arange(21)))
        c = simulate(R2, spec, history_from_functions(R2, 0.0, ["1"], ["0"]), 1.0)
        return exact, abs(c.x[-1, 0] - math.exp(-0.5))

    (exact, err), sec = timed(go)
    detail = f"grid reproduces 0.5^k exactly: {exact}; continuum error at t=1 {err:.2e}"
    assert report("8 scalar analytic checks", exact and err <= 1e-6, detail, sec)


# -- 9 ------------------------------------------------------------------------------

def test_c9_diagnostics():
    def go():
        R3 = TimeScale.continuum(1e-3)
        _, w = ergodic_mean("exp(-abs(t))", "1", R3, 0.0, 1.0)
        norm = stepanov_norm("1.75", StepanovParams(2, 1), R3, (0, 10))
        return w, norm

    (w, norm), sec = timed(go)
    ok = abs(w - 0.63212) <= 1e-4 and abs(norm - 1.75) <= 1e-9
    detail = f"w_1 = {w:.6f} (0.63212); Stepanov norm of 1.75 = {norm:.12f}"
    assert report("9 diagnostics closed forms", ok, detail, sec)


# -- 10 -----------------------------------------------------------------------------

def test_c10_determinism(tmp_path):
    cmds = ["check", "solve", "simulate", "stability", "diagnose"]
    mismatched = []

    def go():
        for cmd in cmds:
            dirs = [tmp_path / f"{cmd}-{k}" for k in (1, 2)]
            for d in dirs:
                cli_main([cmd, "paper_sec6", "--seed", "7", "--out", str(d)])
            names = sorted(p.name for p in dirs[0].iterdir())
            if not names or names != sorted(p.name for p in dirs[1].iterdir()):
                mismatched.append(cmd)
                continue
            mismatched.extend(f"{cmd}/{n}" for n in names
                              if (dirs[0] / n).read_bytes() != (dirs[1] / n).read_bytes())

    _, sec = timed(go)
    detail = "all five commands byte-identical across two runs with --seed 7"
    if mismatched:
        detail = f"differences in {mismatched}"
    assert report("10 CLI determinism", not mismatched, detail, sec)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
