"""Hypothesis checks, contraction, decay certificates and Lyapunov evaluation.

Bounds are numeric: every coefficient is scanned on a grid of the time scale
over a finite window, and suprema/infima of absolute values are taken from
the samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BracketFailure, GridMismatch, MaxIterExceeded, NoContraction, NotStable,
)
from .model import (
    ActivationSpec, History, NetworkSpec, field_at, integral_at, running_integral,
)
from .timescale import Regressivity, TimeScale, circle_minus, exp_along, is_regressive
from .trajectory import Trajectory

__all__ = [
    "CoefficientBounds",
    "H3Constants",
    "HypothesisReport",
    "StabilityCertificate",
    "PicardResult",
    "EnvelopeReport",
    "LyapunovSeries",
    "scan_bounds",
    "h3_constants",
    "check_h3",
    "picard_solve",
    "gh_functions",
    "decay_certificate",
    "envelope_check",
    "convergence_condition",
    "lyapunov_series",
    "lyapunov_eval",
    "dini_derivative",
    "dini_series",
]

DEFAULT_WINDOW = (0.0, 1000.0)


# -- bounds -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoefficientBounds:
    """sup and inf of |coefficient| per family, arrays shaped like the family."""

    sup: dict
    inf: dict
    window: tuple
    density: float
    effective_delays: bool = False

    def __getitem__(self, name):
        return self.sup[name]

    @property
    def n(self):
        return len(self.sup["alpha"])

    @property
    def m(self):
        return len(self.sup["c"])

    def replace_sup(self, **changes):
        sup = dict(self.sup)
        sup.update({k: np.asarray(v, dtype=float) for k, v in changes.items()})
        return CoefficientBounds(sup, self.inf, self.window, self.density, self.effective_delays)

    def to_dict(self):
        return {"window": list(self.window), "density": self.density,
                "effective_delays": self.effective_delays,
                "sup": {k: v.tolist() for k, v in sorted(self.sup.items())},
                "inf": {k: v.tolist() for k, v in sorted(self.inf.items())}}


_DELAY_NAMES = ("eta", "varsigma", "tau", "sigma", "xi", "chi")


def scan_bounds(net: NetworkSpec, ts: TimeScale, window=DEFAULT_WINDOW, density=None,
                effective_delays=False):
    """Scan every coefficient on the grid of ``ts`` over ``window``.

    With ``effective_delays`` a delay d(t) is replaced by t - s*, s* the
    backward projection of t - d(t) onto the time scale, which is the lag the
    simulator actually applies.
    """
    density = float(density or ts.resolution)
    t, _ = ts.with_resolution(density).grid_arrays(*window)
    sup, inf = {}, {}
    chunk = 20000
    parts = [net.coefficients(t[i:i + chunk]) for i in range(0, len(t), chunk)]
    for name in parts[0]._fields:
        vals = np.concatenate([getattr(p, name) for p in parts], axis=0)
        if effective_delays and name in _DELAY_NAMES:
            shape = vals.shape
            tt = np.broadcast_to(t.reshape((-1,) + (1,) * (len(shape) - 1)), shape)
            proj = np.vectorize(ts.project_backward)(tt - vals)
            vals = tt - proj
        a = np.abs(vals)
        sup[name] = a.max(axis=0)
        inf[name] = a.min(axis=0)
    return CoefficientBounds(sup, inf, (float(window[0]), float(window[1])), density,
                             effective_delays)


# -- H3 -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class H3Constants:
    M: np.ndarray
    Mbar: np.ndarray
    N: np.ndarray
    Nbar: np.ndarray


def _lip(activation: ActivationSpec, n, m):
    L = np.asarray(activation.lipschitz, dtype=float)
    return L[:n], L[:m], float(activation.value_at_zero)


def h3_constants(bounds: CoefficientBounds, activation: ActivationSpec, r) -> H3Constants:
    S = bounds.sup
    n, m = bounds.n, bounds.m
    Lx, Ly, f0 = _lip(activation, n, m)
    ax, ay = Lx * r + f0, Ly * r + f0
    cx = S["D"] + S["D_tau"] + S["D_bar"] * S["sigma"] + S["D_tilde"] * S["xi"]
    cy = S["E"] + S["E_tau"] + S["E_bar"] * S["sigma"] + S["E_tilde"] * S["xi"]
    T, Tb = S["T"], S["T_bar"]
    M = (S["alpha"] * S["eta"] * r + cx @ ay + np.einsum("ijk,k,j->i", T, ay, ay) + S["I"])
    Mbar = (S["alpha"] * S["eta"] + cx @ Ly
            + np.einsum("ijk,k->i", T + T.transpose(0, 2, 1), ay))
    N = (S["c"] * S["varsigma"] * r + ax @ cy + np.einsum("jik,k,i->j", Tb, ax, ax) + S["J"])
    Nbar = (S["c"] * S["varsigma"] + Lx @ cy
            + np.einsum("jik,k->j", Tb + Tb.transpose(0, 2, 1), ax))
    return H3Constants(M, Mbar, N, Nbar)


def _h3_max(bounds, P, Q):
    S, I = bounds.sup, bounds.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.concatenate([P / I["alpha"], (1 + S["alpha"] / I["alpha"]) * P,
                               Q / I["c"], (1 + S["c"] / I["c"]) * Q])
    vals = np.where(np.isnan(vals), np.inf, vals)
    return float(vals.max())


@dataclass(frozen=True, eq=False)
class HypothesisReport:
    bounds: CoefficientBounds
    r: float
    constants: H3Constants
    lhs_r: float
    lhs_1: float
    kappa: float
    flags: dict

    @property
    def passed(self):
        return all(f["pass"] for f in self.flags.values())

    def to_dict(self):
        c = self.constants
        return {"r": self.r, "M": c.M.tolist(), "Mbar": c.Mbar.tolist(), "N": c.N.tolist(),
                "Nbar": c.Nbar.tolist(), "lhs_r": self.lhs_r, "lhs_1": self.lhs_1,
                "kappa": self.kappa, "flags": self.flags, "passed": self.passed,
                "bounds": self.bounds.to_dict()}


def _lipschitz_flag(activation, span=50.0, samples=20001):
    x = np.linspace(-span, span, samples)
    fx = np.asarray(activation(x))
    slope = float(np.max(np.abs(np.diff(fx) / np.diff(x))))
    L = min(activation.lipschitz)
    ok = slope <= L * (1 + 1e-9) + 1e-15
    return {"pass": bool(ok),
            "note": f"max sampled slope {slope:.6g} on [-{span:g}, {span:g}] vs min L {L:.6g}"}


def _h4_flag(net, ts, window, density):
    """inf(1 - d^Delta) > 0 for the distributed delays sigma and xi."""
    sc = ts.with_resolution(density)
    t, mu = sc.grid_arrays(*window)
    worst = math.inf
    where = None
    h = sc.resolution
    for name, arr in (("sigma", net.delays.distributed), ("xi", net.delays.derivative_distributed)):
        for idx, e in np.ndenumerate(arr):
            if ts.kind == "grid":
                d = (np.asarray(e(t + mu)) - np.asarray(e(t))) / mu
            else:
                d = np.where(mu > 0, (np.asarray(e(t + mu)) - np.asarray(e(t))) / np.where(mu > 0, mu, 1),
                             (np.asarray(e(t + h)) - np.asarray(e(t - h))) / (2 * h))
            k = int(np.argmin(1 - d))
            if 1 - d[k] < worst:
                worst = float(1 - d[k])
                where = f"{name}[{idx[0] + 1},{idx[1] + 1}] at t={t[k]:.6g}"
    note = f"inf(1 - delay^Delta) = {worst:.6g} ({where}); graininess ratio bounded for periodic scales"
    return {"pass": bool(worst > 0), "note": note, "value": worst}


def check_h3(net: NetworkSpec, ts: TimeScale, r, bounds: CoefficientBounds | None = None,
             window=DEFAULT_WINDOW, density=None):
    """Numeric check of H1 to H4 with the contraction modulus kappa."""
    if bounds is None:
        bounds = scan_bounds(net, ts, window, density)
    window, density = bounds.window, bounds.density
    r = float(r)
    consts = h3_constants(bounds, net.activation, r)
    lhs_r = _h3_max(bounds, consts.M, consts.N)
    kappa = _h3_max(bounds, consts.Mbar, consts.Nbar)
    S, I = bounds.sup, bounds.inf
    pos = bool(np.all(I["alpha"] > 0) and np.all(I["c"] > 0))
    reg = all(is_regressive(ts.with_resolution(density), lambda t, e=e: -np.asarray(e(t)), window)
              == Regressivity.POSITIVELY_REGRESSIVE for e in list(net.alpha) + list(net.c))
    finite = all(np.all(np.isfinite(v)) for v in S.values())
    flags = {
        "h1": {"pass": bool(pos and reg and finite),
               "note": (f"coefficients bounded on [{window[0]:g}, {window[1]:g}]; "
                        f"min alpha^- {I['alpha'].min():.6g}, min c^- {I['c'].min():.6g}; "
                        f"-alpha_i, -c_j positively regressive: {reg}")},
        "h2": _lipschitz_flag(net.activation),
        "h3": {"pass": bool(lhs_r <= r and kappa <= 1),
               "note": f"max(...) = {lhs_r:.6g} vs r = {r:g}; second max = {kappa:.6g} vs 1"},
        "h4": _h4_flag(net, ts, window, density),
    }
    return HypothesisReport(bounds, r, consts, lhs_r, kappa, kappa, flags)


# -- Picard iteration ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PicardResult:
    trajectory: Trajectory
    diffs: list
    ratios: list
    iterations: int
    kappa: float
    converged: bool
    window: tuple
    cutoff: float

    def to_dict(self):
        return {"iterations": self.iterations, "kappa": self.kappa, "converged": self.converged,
                "window": list(self.window), "cutoff": self.cutoff,
                "diffs": self.diffs, "ratios": self.ratios}


def _gamma_map(h, co, t, mu, start, alpha_c):
    """One application of Gamma on the grid; rows before ``start`` stay zero."""
    F = np.concatenate(field_at(h, co, t[start:], mode="FG"), axis=1)
    A = alpha_c[start:]
    N = len(t)
    Z = np.zeros((N, F.shape[1]))
    dt = np.diff(t[start:])
    sc = mu[start:-1] > 0
    decay = np.where(sc[:, None], 1 - mu[start:-1, None] * A[:-1],
                     np.exp(-dt[:, None] * (A[:-1] + A[1:]) / 2))
    gain_l = np.where(sc[:, None], mu[start:-1, None], dt[:, None] / 2 * decay)
    gain_r = np.where(sc[:, None], 0.0, dt[:, None] / 2)
    z = np.zeros(F.shape[1])
    for k in range(len(dt)):
        z = decay[k] * z + gain_l[k] * F[k] + gain_r[k] * F[k + 1]
        Z[start + k + 1] = z
    D = np.zeros_like(Z)
    D[start:] = F - A * Z[start:]
    return Z, D


def picard_solve(ts: TimeScale, net: NetworkSpec, r, tol=1e-8, max_iter=60, window=(0.0, 40.0),
                 tail_tol=1e-10, lower_cutoff=None, bounds=None, report=None):
    """Fixed point of Gamma by successive approximation from psi = 0.

    The lower limit of the exponential-kernel integral is truncated at
    ``window[0] - cutoff``; the returned trajectory covers
    [window[0] - theta, window[1]].
    """
    if report is None:
        report = check_h3(net, ts, r, bounds)
    kappa = report.kappa
    if not kappa < 1:
        raise NoContraction(f"kappa = {kappa:.6g} >= 1")
    I = report.bounds.inf
    amin = float(min(I["alpha"].min(), I["c"].min()))
    cutoff = float(lower_cutoff if lower_cutoff is not None else math.log(1 / tail_tol) / amin)
    t_min, t_max = float(window[0]), float(window[1])
    L0 = ts.project_backward(t_min - cutoff)
    pad = ts.h if ts.kind == "grid" else ts.resolution
    t_probe, _ = ts.grid_arrays(L0, t_max)
    lag = net.coefficients(t_probe)
    theta = max(float(np.max(getattr(lag, k))) for k in _DELAY_NAMES)
    lo = ts.project_backward(ts.project_backward(L0 - theta) - pad)
    t, mu = ts.grid_arrays(lo, t_max)
    start = int(np.searchsorted(t, L0 - 1e-9 * max(1.0, abs(L0))))
    co = net.coefficients(t[start:])
    alpha_c = np.zeros((len(t), net.n + net.m))
    alpha_c[start:] = np.concatenate([co.alpha, co.c], axis=1)
    n, m = net.n, net.m
    Z = np.zeros((len(t), n + m))
    D = np.zeros_like(Z)
    diffs, ratios = [], []
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        traj = Trajectory(t, mu, Z[:, :n], Z[:, n:], D[:, :n], D[:, n:])
        h = History.from_trajectory(traj, net.activation)
        Z1, D1 = _gamma_map(h, co, t, mu, start, alpha_c)
        diff = float(max(np.max(np.abs(Z1 - Z)), np.max(np.abs(D1 - D))))
        if diffs:
            ratios.append(diff / diffs[-1] if diffs[-1] > 0 else 0.0)
        diffs.append(diff)
        Z, D = Z1, D1
        if diff < tol:
            converged = True
            break
    if not converged:
        raise MaxIterExceeded(f"no convergence to {tol:g} in {max_iter} iterations "
                              f"(last difference {diffs[-1]:.3g})")
    keep = t >= ts.project_backward(t_min - net.delays.theta) - 1e-9 * max(1.0, abs(t_min))
    sol = Trajectory(t[keep], mu[keep], Z[keep, :n], Z[keep, n:], D[keep, :n], D[keep, n:])
    return PicardResult(sol, diffs, ratios, it, kappa, converged, (t_min, t_max), cutoff)


# -- decay certificate ----------------------------------------------------------

def _brackets(bounds, activation, r, w):
    """The bracketed sums of G_i and G-bar_j at rate w (shape (n,), (m,))."""
    S = bounds.sup
    n, m = bounds.n, bounds.m
    Lx, Ly, f0 = _lip(activation, n, m)
    ax, ay = Lx * r + f0, Ly * r + f0
    e = lambda d: np.exp(w * d)
    bx = (S["alpha"] * S["eta"] * e(S["eta"])
          + S["D"] @ Ly
          + (S["D_tau"] * e(S["tau"])) @ Ly
          + (S["D_bar"] * S["sigma"] * e(S["sigma"])) @ Ly
          + (S["D_tilde"] * S["xi"] * e(S["xi"])) @ Ly
          + np.einsum("ijk,k,j->i", S["T"], ay, ay))
    by = (S["c"] * S["varsigma"] * e(S["varsigma"])
          + Lx @ S["E"]
          + Lx @ (S["E_tau"] * e(S["tau"]))
          + Lx @ (S["E_bar"] * S["sigma"] * e(S["sigma"]))
          + Lx @ (S["E_tilde"] * S["xi"] * e(S["xi"]))
          + np.einsum("jik,k,i->j", S["T_bar"], ax, ax))
    return bx, by


def gh_functions(bounds: CoefficientBounds, activation: ActivationSpec, r, w, sup_graininess=0.0,
                 beta=None):
    """G_i(w), G-bar_j(w), H_i(w), H-bar_j(w) as a dict of arrays.

    ``beta`` is a pair (beta_x, beta_y) of arrays or scalars; the default
    beta_x = alpha^-, beta_y = c^- removes the extra factor from H and H-bar.
    """
    S, I = bounds.sup, bounds.inf
    bx, by = _brackets(bounds, activation, r, w)
    bx_beta, by_beta = (I["alpha"], I["c"]) if beta is None else beta
    g = np.exp(w * sup_graininess)
    return {
        "G": I["alpha"] - w - g * bx,
        "Gbar": I["c"] - w - g * by,
        "H": I["alpha"] - w - S["alpha"] * np.exp(w * sup_graininess + I["alpha"] - bx_beta) * bx,
        "Hbar": I["c"] - w - S["c"] * np.exp(w * sup_graininess + I["c"] - by_beta) * by,
    }


def convergence_condition(bounds: CoefficientBounds, activation: ActivationSpec, r):
    """Left-hand sides of the convergence conditions: (x-side (n,), y-side (m,))."""
    S, I = bounds.sup, bounds.inf
    n, m = bounds.n, bounds.m
    Lx, Ly, f0 = _lip(activation, n, m)
    ax, ay = Lx * r + f0, Ly * r + f0
    T, Tb = S["T"], S["T_bar"]
    cx = S["D"] + S["D_tau"] + S["D_bar"] * S["sigma"] + S["D_tilde"] * S["xi"]
    cy = S["E"] + S["E_tau"] + S["E_bar"] * S["sigma"] + S["E_tilde"] * S["xi"]
    x = I["alpha"] - (Ly * (cx + T @ ay)).sum(axis=1) - (ay * (T @ Ly)).sum(axis=1)
    inner_y = np.einsum("jik,k->ij", Tb, ax)
    inner_yL = np.einsum("jik,k->ij", Tb, Lx)
    y = I["c"] - (Lx[:, None] * (cy + inner_y)).sum(axis=0) - (ax[:, None] * inner_yL).sum(axis=0)
    return x, y


@dataclass(frozen=True, eq=False)
class StabilityCertificate:
    gamma: float
    a: float
    K: float
    roots: dict
    values_at_zero: dict
    values_at_gamma: dict
    safety_fraction: float
    sup_graininess: float
    K_star: np.ndarray
    P_star: np.ndarray
    beta_margins: tuple
    warnings: list = field(default_factory=list)

    def to_dict(self):
        num = lambda v: v if math.isfinite(v) else ("inf" if v > 0 else "-inf")
        return {"gamma": self.gamma, "a": self.a, "K": num(self.K),
                "safety_fraction": self.safety_fraction, "sup_graininess": self.sup_graininess,
                "roots": {k: v.tolist() for k, v in sorted(self.roots.items())},
                "values_at_zero": {k: v.tolist() for k, v in sorted(self.values_at_zero.items())},
                "values_at_gamma": {k: v.tolist() for k, v in sorted(self.values_at_gamma.items())},
                "K_star": [num(float(v)) for v in self.K_star],
                "P_star": [num(float(v)) for v in self.P_star],
                "beta_margins": {"x": self.beta_margins[0].tolist(), "y": self.beta_margins[1].tolist()},
                "warnings": self.warnings}


def _bisect(fn, lo, hi, tol=1e-10):
    flo, fhi = fn(lo), fn(hi)
    if not flo > 0:
        raise NotStable(f"function is non-positive at {lo}")
    if fhi > 0:
        raise BracketFailure(f"no sign change on [{lo}, {hi}]")
    if fhi == 0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def decay_certificate(bounds: CoefficientBounds, activation: ActivationSpec, r, ts: TimeScale,
                      safety_fraction=0.9, beta=None):
    """Decay rate gamma and overshoot K from the roots of G, G-bar, H, H-bar.

    Each function is decreasing in w and satisfies f(w) <= own bound - w, so
    its root is bracketed on [0, alpha_i^-] (resp. [0, c_j^-]).
    """
    if not 0 < safety_fraction < 1:
        raise ValueError("safety_fraction must lie in (0, 1)")
    I = bounds.inf
    smu = ts.sup_graininess
    ev = lambda w: gh_functions(bounds, activation, r, w, smu, beta)
    at0 = ev(0.0)
    for name, v in at0.items():
        bad = np.flatnonzero(~(v > 0))
        if bad.size:
            raise NotStable(f"{name}[{bad[0] + 1}](0) = {v[bad[0]]:.6g} is not positive")
    uppers = {"G": I["alpha"], "H": I["alpha"], "Gbar": I["c"], "Hbar": I["c"]}
    roots = {}
    for name in ("G", "Gbar", "H", "Hbar"):
        roots[name] = np.array([_bisect(lambda w, k=k, nm=name: ev(w)[nm][k], 0.0, float(up))
                                for k, up in enumerate(uppers[name])])
    a = float(min(v.min() for v in roots.values()))
    gamma = safety_fraction * min(a, float(I["alpha"].min()), float(I["c"].min()))
    at_gamma = ev(gamma)
    if not all(np.all(v > 0) for v in at_gamma.values()):
        raise NotStable("a G/H function is not positive at gamma")
    Ks, Ps = _brackets(bounds, activation, r, 0.0)
    with np.errstate(divide="ignore"):
        K = float(max(np.max(I["alpha"] / Ks), np.max(I["c"] / Ps)))
    warnings = []
    if not K > 1:
        warnings.append(f"K = {K:.6g} is not greater than 1")
    margins = convergence_condition(bounds, activation, r)
    return StabilityCertificate(gamma, a, K, roots, at0, at_gamma, safety_fraction, smu, Ks, Ps,
                                margins, warnings)


# -- envelope -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EnvelopeReport:
    t: np.ndarray
    d: np.ndarray
    bound: np.ndarray
    psi_norm: float
    fraction: float
    fitted_rate: float
    gamma: float
    K: float

    def to_dict(self):
        return {"fraction": self.fraction, "fitted_rate": self.fitted_rate, "gamma": self.gamma,
                "K": self.K, "psi_norm": self.psi_norm, "points": int(len(self.t)),
                "max_ratio": self.max_ratio}

    @property
    def max_ratio(self):
        pos = self.bound > 0
        ratio = float(np.max(self.d[pos] / self.bound[pos])) if pos.any() else 0.0
        return math.inf if np.any(self.d[~pos] > 0) else ratio

    def to_csv(self):
        lines = ["t,d,bound"]
        lines += [f"{a:.17g},{b:.17g},{c:.17g}" for a, b, c in zip(self.t, self.d, self.bound)]
        return "\n".join(lines) + "\n"


def _same_grid(a: Trajectory, b: Trajectory):
    if len(a) != len(b) or not np.allclose(a.t, b.t, rtol=0, atol=1e-9):
        raise GridMismatch("trajectories are not on the same grid")


def envelope_check(traj_a: Trajectory, traj_b: Trajectory, cert: StabilityCertificate,
                   ts: TimeScale, t0=0.0):
    """Compare d(t) = sup-distance of two solutions with K e_{-gamma}(t, t0) ||psi||_0."""
    _same_grid(traj_a, traj_b)
    diff = np.abs(traj_a.states() - traj_b.states())
    tol = 1e-9 * max(1.0, abs(t0))
    hist = traj_a.t <= t0 + tol
    psi = float(diff[hist].max()) if hist.any() else 0.0
    fut = traj_a.t >= t0 - tol
    t, mu = traj_a.t[fut], traj_a.mu[fut]
    d = diff[fut].max(axis=1)
    decay = exp_along(t, mu, circle_minus(ts, cert.gamma))
    # identical histories: the bound is 0 even when K is infinite
    bound = cert.K * decay * psi if psi > 0 else np.zeros_like(decay)
    ok = d <= bound * (1 + 1e-9) + 1e-300
    pos = d > 0
    if pos.sum() >= 2:
        slope = np.polyfit(t[pos], np.log(d[pos]), 1)[0]
        rate = float(-slope)
    else:
        rate = math.inf
    return EnvelopeReport(t, d, bound, psi, float(ok.mean()), rate, cert.gamma, cert.K)


# -- Lyapunov functional ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LyapunovSeries:
    t: np.ndarray
    V: np.ndarray
    parts: np.ndarray  # (len(t), 5): V1..V5

    def to_csv(self, dini=None):
        dini = dini_series(self.t, self.V) if dini is None else dini
        lines = ["t,V,V1,V2,V3,V4,V5,DV"]
        for k in range(len(self.t)):
            row = [self.t[k], self.V[k], *self.parts[k], dini[k]]
            lines.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"


def _proj_forward_on(t, mu, a):
    """a* on the stored grid: a itself inside dense intervals, the next point after a gap."""
    idx = np.searchsorted(t, a + 1e-9 * np.maximum(1.0, np.abs(a)), side="right") - 1
    idx = np.clip(idx, 0, len(t) - 1)
    exact = np.abs(a - t[idx]) <= 1e-9 * np.maximum(1.0, np.abs(a))
    nxt = np.minimum(idx + 1, len(t) - 1)
    return np.where(exact, t[idx], np.where(mu[idx] > 0, t[nxt], a))


def lyapunov_series(traj_a: Trajectory, traj_b: Trajectory, net: NetworkSpec, ts: TimeScale,
                    bounds: CoefficientBounds, t_points=None, symmetrize=False,
                    inner_limits="printed"):
    """V = V1 + ... + V5 along the difference of two trajectories.

    ``inner_limits="printed"`` integrates V3 over [t - s, t] and V4 over
    [s, 0] as displayed; ``"standard"`` uses [s, t] for both, which is the
    usual Krasovskii form.  ``symmetrize`` adds the mirror-image y-layer terms
    to V2..V4.
    """
    if inner_limits not in ("printed", "standard"):
        raise ValueError("inner_limits must be 'printed' or 'standard'")
    _same_grid(traj_a, traj_b)
    t, mu = traj_a.t, traj_a.mu
    n, m = net.n, net.m
    u = traj_a.x - traj_b.x
    v = traj_a.y - traj_b.y
    du = traj_a.x_delta - traj_b.x_delta
    dv = traj_a.y_delta - traj_b.y_delta
    if t_points is None:
        t_points = t[t >= 0 - 1e-12]
    s = np.asarray(t_points, dtype=float)
    Q = len(s)
    co = net.coefficients(s)
    Lx, Ly, _ = _lip(net.activation, n, m)
    S = bounds.sup

    G = np.hstack([u, v, np.abs(u), np.abs(v), np.abs(du), np.abs(dv)])
    C = running_integral(t, mu, G)
    CC = running_integral(t, mu, C)
    off = {"u": 0, "v": n, "au": n + m, "av": 2 * n + m, "adu": 2 * n + 2 * m, "adv": 3 * n + 2 * m}

    def at(cols, times):
        return integral_at(t, mu, G, C, times, cols)

    def cc_at(cols, times):
        return integral_at(t, mu, C, CC, times, cols)

    S1 = s[:, None]
    ii = np.broadcast_to(np.arange(n), (Q, n))
    jj = np.broadcast_to(np.arange(m), (Q, m))
    k_now = np.searchsorted(t, s - 1e-9 * np.maximum(1.0, np.abs(s)))
    u_now, v_now = u[k_now], v[k_now]
    V1 = np.abs(u_now - co.alpha * (at(off["u"] + ii, np.broadcast_to(S1, (Q, n)))
                                     - at(off["u"] + ii, S1 - co.eta))).sum(axis=1)
    V5 = np.abs(v_now - co.c * (at(off["v"] + jj, np.broadcast_to(S1, (Q, m)))
                                 - at(off["v"] + jj, S1 - co.varsigma))).sum(axis=1)

    S3 = s[:, None, None]
    I3 = np.broadcast_to(np.arange(n)[None, :, None], (Q, n, m))
    J3 = np.broadcast_to(np.arange(m)[None, None, :], (Q, n, m))
    full = np.broadcast_to(S3, (Q, n, m))

    def single(col, idx, lag):
        return at(col + idx, full) - at(col + idx, S3 - lag)

    def double(col, idx, lag, variant):
        lo = S3 - lag
        length = full - _proj_forward_on(t, mu, lo)
        ccd = cc_at(col + idx, full) - cc_at(col + idx, lo)
        if inner_limits == "standard":
            return at(col + idx, full) * length - ccd
        if variant == "V3":
            # inner integral over [t - s, t]; with r = t - s this is
            # C(t) * length - integral_0^lag C(r) dr
            z = np.zeros_like(lag)
            return at(col + idx, full) * length - (cc_at(col + idx, _proj_forward_on(t, mu, lag))
                                                   - cc_at(col + idx, z))
        zero = np.zeros_like(full)
        return at(col + idx, zero) * length - ccd

    wx2 = (Ly[None, :] * (S["D"] + S["D_tau"]))[None]
    wx3 = (Ly[None, :] * S["D_bar"])[None]
    wx4 = (Ly[None, :] * S["D_tilde"])[None]
    V2 = (wx2 * single(off["au"], I3, co.tau)).sum(axis=(1, 2))
    V3 = (wx3 * double(off["au"], I3, co.sigma, "V3")).sum(axis=(1, 2))
    V4 = (wx4 * double(off["adu"], I3, co.xi, "V4")).sum(axis=(1, 2))
    if symmetrize:
        wy2 = (Lx[:, None] * (S["E"] + S["E_tau"]))[None]
        wy3 = (Lx[:, None] * S["E_bar"])[None]
        wy4 = (Lx[:, None] * S["E_tilde"])[None]
        V2 = V2 + (wy2 * single(off["av"], J3, co.tau)).sum(axis=(1, 2))
        V3 = V3 + (wy3 * double(off["av"], J3, co.sigma, "V3")).sum(axis=(1, 2))
        V4 = V4 + (wy4 * double(off["adv"], J3, co.xi, "V4")).sum(axis=(1, 2))
    parts = np.column_stack([V1, V2, V3, V4, V5])
    return LyapunovSeries(s, parts.sum(axis=1), parts)


def lyapunov_eval(traj_a, traj_b, net, ts, t, bounds, **kw):
    """(V, V1, ..., V5) at a single time t."""
    ser = lyapunov_series(traj_a, traj_b, net, ts, bounds, [float(t)], **kw)
    return (float(ser.V[0]),) + tuple(float(x) for x in ser.parts[0])


def dini_derivative(V, ts: TimeScale, t):
    """Forward difference quotient of V at t with the graininess (resolution if dense)."""
    mu = ts.graininess(t)
    step = mu if mu > 0 else ts.resolution
    return (float(V(t + step)) - float(V(t))) / step


def dini_series(t, V):
    """Forward differences along a sampled series; the last entry repeats the previous one."""
    t = np.asarray(t, dtype=float)
    V = np.asarray(V, dtype=float)
    out = np.zeros_like(V)
    if len(t) > 1:
        out[:-1] = np.diff(V) / np.diff(t)
        out[-1] = out[-2]
    return out
