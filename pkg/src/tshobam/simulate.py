"""Forward simulation by the method of steps, plus Stepanov/ergodic diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindow, GridMismatch, NonFinite, NonPositiveWeight
from .exprlang import Expr, bound_scan, evaluate, parse
from .model import History, NetworkSpec, field_at, integral_at, interp, running_integral
from .timescale import TimeScale, _eval_on, _trapezoid_weights
from .trajectory import Trajectory

__all__ = [
    "Trajectory",
    "simulate",
    "history_from_functions",
    "random_history",
    "WeightFunction",
    "StepanovParams",
    "stepanov_norm",
    "ergodic_mean",
    "wpaa0_profile",
]

BLOWUP = 1e12


def _fn(f):
    if isinstance(f, Expr):
        return lambda t: evaluate(f, t)
    if isinstance(f, str):
        return _fn(parse(f))
    if callable(f):
        return f
    c = float(f)
    return lambda t: np.full(np.shape(t), c)


def _delta_of(ts, fn, t, mu):
    """Delta-derivative of fn at grid points: forward quotient or central difference."""
    out = np.empty_like(t)
    sc = mu > 0
    if sc.any():
        out[sc] = (_eval_on(fn, t[sc] + mu[sc]) - _eval_on(fn, t[sc])) / mu[sc]
    if (~sc).any():
        h = ts.resolution
        td = t[~sc]
        out[~sc] = (_eval_on(fn, td + h) - _eval_on(fn, td - h)) / (2 * h)
    return out


def history_window(ts: TimeScale, theta, t_end=0.0):
    """Grid of an initial-history window: [t_end - theta, t_end] plus one step of slack."""
    pad = ts.h if ts.kind == "grid" else ts.resolution
    lo = ts.project_backward(ts.project_backward(t_end - theta) - pad)
    return ts.grid_arrays(lo, t_end)


def history_from_functions(ts, theta, x_funcs, y_funcs, dx_funcs=None, dy_funcs=None,
                           t_end=0.0, derive_delta=True):
    """Sample initial functions on the history window of ``ts``.

    Functions may be expressions, expression strings, callables or numbers.
    Without explicit Delta-functions the Delta-channels are derived by the
    time-scale difference quotient (``derive_delta``) or set to zero.
    """
    t, mu = history_window(ts, theta, t_end)
    xs = [_fn(f) for f in x_funcs]
    ys = [_fn(f) for f in y_funcs]
    X = np.column_stack([_eval_on(f, t) for f in xs])
    Y = np.column_stack([_eval_on(f, t) for f in ys])

    def deltas(funcs, given):
        if given is not None:
            return np.column_stack([_eval_on(_fn(f), t) for f in given])
        if derive_delta:
            return np.column_stack([_delta_of(ts, f, t, mu) for f in funcs])
        return np.zeros((len(t), len(funcs)))

    return Trajectory(t, mu, X, Y, deltas(xs, dx_funcs), deltas(ys, dy_funcs))


def random_history(ts, net: NetworkSpec, rng, amplitude=0.5, t_end=0.0):
    """Smooth random initial functions a + b sin(w s + phi) for every neuron."""
    def draw(k):
        a = rng.uniform(-amplitude, amplitude, k)
        b = rng.uniform(-amplitude / 2, amplitude / 2, k)
        w = rng.uniform(0.5, 2.0, k)
        ph = rng.uniform(0.0, 2 * np.pi, k)
        return [(lambda s, a=a[i], b=b[i], w=w[i], ph=ph[i]: a + b * np.sin(w * np.asarray(s) + ph))
                for i in range(k)]

    return history_from_functions(ts, net.delays.theta, draw(net.n), draw(net.m), t_end=t_end)


def _check(t, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > BLOWUP:
            raise NonFinite(float(t))


def simulate(ts: TimeScale, net: NetworkSpec, init: Trajectory, horizon) -> Trajectory:
    """March the network from the end of ``init`` over ``horizon`` time units.

    Right-scattered points take the exact step x(sigma(t)) = x(t) + mu x^Delta(t);
    dense intervals use classical RK4 at the time-scale resolution.  The
    Delta-channels hold the vector field evaluated at each grid point.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if (init.n, init.m) != (net.n, net.m):
        raise GridMismatch("initial history dimensions do not match the network")
    start = init.upper_bound
    tf, muf = ts.grid_arrays(start, start + horizon)
    if abs(tf[0] - start) > 1e-9 * max(1.0, abs(start)):
        raise GridMismatch("initial history does not end on a point of the time scale")
    n, m = net.n, net.m
    k0 = len(init) - 1
    h = History.from_trajectory(init, net.activation, capacity=k0 + len(tf))
    h.mu[k0] = muf[0]
    co = net.coefficients(tf)
    dense = muf[:-1] == 0
    mids = (tf[:-1] + tf[1:]) / 2
    co_mid = net.coefficients(mids[dense]) if dense.any() else None
    mid_index = np.cumsum(dense) - 1

    def field(q, s):
        c = co.take(q) if s is None else co_mid.take(mid_index[q])
        tq = tf[q] if s is None else s
        xd, yd = field_at(h, c, [tq])
        return np.concatenate([xd[0], yd[0]])

    h.L = k0 + 1
    for _ in range(2):
        h.set_delta(k0, field(0, None))
    _check(start, h.V[k0])

    for q in range(len(tf) - 1):
        k = k0 + q
        z = h.V[k, :n + m].copy()
        k1 = h.V[k, n + m:].copy()
        t1 = tf[q + 1]
        if muf[q] > 0:
            z1 = z + muf[q] * k1
            guess = k1
        else:
            dt = t1 - tf[q]
            tm = mids[q]
            h.set_point(k + 1, tm, 0.0, z + dt / 2 * k1, k1)
            k2 = field(q, tm)
            h.set_point(k + 1, tm, 0.0, z + dt / 2 * k2, k2)
            k3 = field(q, tm)
            h.set_point(k + 1, t1, 0.0, z + dt * k3, k3)
            k4 = field(q + 1, None)
            z1 = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            guess = k4
        h.set_point(k + 1, t1, muf[q + 1], z1, guess)
        d1 = field(q + 1, None)
        h.set_delta(k + 1, d1)
        _check(t1, z1, d1)

    L = h.L
    return Trajectory(h.t[:L].copy(), h.mu[:L].copy(), h.X[:L], h.Y[:L], h.DX[:L], h.DY[:L])


# -- diagnostics ----------------------------------------------------------------

@dataclass(frozen=True)
class WeightFunction:
    """A positive weight nu(t); ``bounded_admissible`` additionally needs inf nu > 0."""

    expr: Expr
    kind: str = "general"

    @classmethod
    def parse(cls, src, kind="general"):
        return cls(parse(str(src)), kind)

    def validate(self, ts, window):
        lo, hi = bound_scan(self.expr, ts, window)
        t, _ = ts.grid_arrays(*window)
        if np.any(np.asarray(evaluate(self.expr, t)) <= 0):
            raise NonPositiveWeight("weight is not positive on the scan window")
        if self.kind == "bounded_admissible" and lo <= 0:
            raise NonPositiveWeight("bounded-admissible weight needs inf > 0")
        return lo, hi

    def __call__(self, t):
        return evaluate(self.expr, t)


@dataclass(frozen=True)
class StepanovParams:
    p: float = 1.0
    l: float = 1.0

    def __post_init__(self):
        if self.p < 1 or self.l <= 0:
            raise ValueError("need p >= 1 and l > 0")


def _values(f, t):
    """Sample a channel at the grid points t.

    ``f`` is a callable of t, or a pair (trajectory, channel name).
    """
    if isinstance(f, tuple):
        traj, name = f
        col = traj.channel(name)[:, None]
        return interp(traj.t, traj.mu, col, t, np.zeros(t.shape, dtype=int))
    if isinstance(f, (str, Expr)):
        f = _fn(f)
    return _eval_on(f, t)


def stepanov_norm(f, params: StepanovParams, ts: TimeScale, window):
    """sup over grid translates s of (1/l integral_s^{s+l} |f|^p)^(1/p)."""
    a, b = float(window[0]), float(window[1])
    if b - a < params.l - 1e-12:
        raise EmptyWindow(f"window [{a}, {b}] shorter than l={params.l}")
    t, mu = ts.grid_arrays(a, b)
    g = (np.abs(_values(f, t)) ** params.p)[:, None]
    C = running_integral(t, mu, g)
    starts = t[t + params.l <= b + 1e-9 * max(1.0, abs(b))]
    zero = np.zeros(starts.shape, dtype=int)
    ends = np.minimum(starts + params.l, t[-1])
    lo = integral_at(t, mu, g, C, starts, zero)
    hi = integral_at(t, mu, g, C, ends, zero)
    vals = np.maximum(hi - lo, 0.0) / params.l
    return float(np.max(vals) ** (1.0 / params.p))


def _weight(nu):
    if isinstance(nu, WeightFunction):
        return nu
    if isinstance(nu, Expr):
        return WeightFunction(nu)
    return WeightFunction.parse(str(nu))


def ergodic_mean(f, nu, ts: TimeScale, t0, r):
    """(m_r, w_r): the weight mass of Q_r = [t0-r, t0+r] and the weighted mean of |f|."""
    if r <= 0:
        raise ValueError("r must be positive")
    nu = _weight(nu)
    lo, hi = ts.project_forward(t0 - r), ts.project_forward(t0 + r)
    t, mu = ts.grid_arrays(lo, hi)
    if len(t) < 2:
        raise EmptyWindow(f"Q_r around {t0} with r={r} holds fewer than two points")
    wv = np.asarray(evaluate(nu.expr, t), dtype=float)
    if np.any(wv <= 0):
        raise NonPositiveWeight("weight is not positive on Q_r")
    w = _trapezoid_weights(t, mu)
    m_r = float(w @ wv)
    return m_r, float(w @ (np.abs(_values(f, t)) * wv)) / m_r


def wpaa0_profile(f, nu, ts: TimeScale, t0, r_list):
    rs = [float(r) for r in r_list]
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise ValueError("r_list must be increasing")
    return [(r, ergodic_mean(f, nu, ts, t0, r)[1]) for r in rs]
