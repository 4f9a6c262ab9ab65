"""The high-order BAM network with leakage and mixed delays.

Index conventions (0-based in code):

* the x-layer has ``n`` neurons, the y-layer ``m``;
* ``D*``, ``E*`` families and the delays ``tau``, ``sigma``, ``xi`` are n x m;
* ``T[i, j, k]`` multiplies f(y_k(t - chi_k)) f(y_j(t - chi_j)) in the
  equation of x_i;
* ``T_bar[j, i, k]`` multiplies f(x_k(t - chi_k)) f(x_i(t - chi_i)) in the
  equation of y_j;
* ``chi`` has max(n, m) entries and is indexed like the activation.

The x-equation reads y-histories and the y-equation reads x-histories.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, HistoryTooShort
from .exprlang import BinOp, Expr, Num, evaluate, parse
from .trajectory import StateSnapshot, Trajectory

__all__ = [
    "ActivationSpec",
    "DelaySpec",
    "NetworkSpec",
    "StateSnapshot",
    "Coefficients",
    "History",
    "rhs",
    "operator_F",
    "operator_G",
    "field_at",
    "running_integral",
    "integral_at",
    "interp",
]


def _as_expr(v, variables=("t",)):
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float)):
        return Num(float(v))
    return parse(str(v), variables)


def _expr_array(values, shape, name):
    arr = np.empty(shape, dtype=object)
    try:
        src = np.array(values, dtype=object)
        if src.shape != tuple(shape):
            raise ValueError
    except ValueError:
        raise ConfigError(f"{name}: expected shape {tuple(shape)}") from None
    for idx in itertools.product(*(range(s) for s in shape)):
        try:
            arr[idx] = _as_expr(src[idx])
        except Exception as exc:
            raise ConfigError(f"{name}{list(idx)}: {exc}") from exc
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ActivationSpec:
    """Activation f applied elementwise, with per-index Lipschitz constants."""

    expr: Expr
    lipschitz: tuple
    value_at_zero: float

    def __post_init__(self):
        lip = tuple(float(v) for v in self.lipschitz)
        if any(v < 0 for v in lip):
            raise ConfigError("Lipschitz constants must be non-negative")
        object.__setattr__(self, "lipschitz", lip)
        f0 = abs(float(evaluate(self.expr, x=0.0)))
        if abs(f0 - float(self.value_at_zero)) > 1e-12:
            raise ConfigError(f"value_at_zero={self.value_at_zero} but |f(0)|={f0}")

    @classmethod
    def from_string(cls, src, lipschitz, value_at_zero=None):
        e = parse(src, ("x",))
        if value_at_zero is None:
            value_at_zero = abs(float(evaluate(e, x=0.0)))
        return cls(e, tuple(lipschitz), value_at_zero)

    def __call__(self, x):
        return evaluate(self.expr, x=x)


@dataclass(frozen=True)
class DelaySpec:
    leakage_x: np.ndarray
    leakage_y: np.ndarray
    discrete: np.ndarray
    distributed: np.ndarray
    derivative_distributed: np.ndarray
    second_order: np.ndarray
    theta: float = 0.0

    def families(self):
        return {"eta": self.leakage_x, "varsigma": self.leakage_y, "tau": self.discrete,
                "sigma": self.distributed, "xi": self.derivative_distributed,
                "chi": self.second_order}


_FAMILY_SHAPES = {
    "alpha": ("n",), "c": ("m",),
    "D": ("n", "m"), "D_tau": ("n", "m"), "D_bar": ("n", "m"), "D_tilde": ("n", "m"),
    "E": ("n", "m"), "E_tau": ("n", "m"), "E_bar": ("n", "m"), "E_tilde": ("n", "m"),
    "T": ("n", "m", "m"), "T_bar": ("m", "n", "n"),
    "I": ("n",), "J": ("m",),
}
_DELAY_SHAPES = {
    "eta": ("n",), "varsigma": ("m",), "tau": ("n", "m"), "sigma": ("n", "m"),
    "xi": ("n", "m"), "chi": ("p",),
}
COUPLINGS = ("D", "D_tau", "D_bar", "D_tilde", "E", "E_tau", "E_bar", "E_tilde", "T", "T_bar")


class Coefficients(NamedTuple):
    """Coefficient values at Q time points; every field has leading axis Q."""

    alpha: np.ndarray
    c: np.ndarray
    D: np.ndarray
    D_tau: np.ndarray
    D_bar: np.ndarray
    D_tilde: np.ndarray
    E: np.ndarray
    E_tau: np.ndarray
    E_bar: np.ndarray
    E_tilde: np.ndarray
    T: np.ndarray
    T_bar: np.ndarray
    I: np.ndarray
    J: np.ndarray
    eta: np.ndarray
    varsigma: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray
    xi: np.ndarray
    chi: np.ndarray

    def take(self, k):
        return Coefficients._make(a[k:k + 1] for a in self)


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    n: int
    m: int
    alpha: np.ndarray
    c: np.ndarray
    D: np.ndarray
    D_tau: np.ndarray
    D_bar: np.ndarray
    D_tilde: np.ndarray
    E: np.ndarray
    E_tau: np.ndarray
    E_bar: np.ndarray
    E_tilde: np.ndarray
    T: np.ndarray
    T_bar: np.ndarray
    I: np.ndarray
    J: np.ndarray
    activation: ActivationSpec
    delays: DelaySpec
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ConfigError("n and m must be positive")
        dims = {"n": self.n, "m": self.m, "p": max(self.n, self.m)}
        for name, shape in _FAMILY_SHAPES.items():
            want = tuple(dims[s] for s in shape)
            if getattr(self, name).shape != want:
                raise ConfigError(f"{name}: expected shape {want}")
        for name, arr in self.delays.families().items():
            want = tuple(dims[s] for s in _DELAY_SHAPES[name])
            if arr.shape != want:
                raise ConfigError(f"delay {name}: expected shape {want}")
        if len(self.activation.lipschitz) != dims["p"]:
            raise ConfigError(f"activation needs {dims['p']} Lipschitz constants")

    @classmethod
    def from_dict(cls, net, delays, *, theta=None, scan_window=(0.0, 1000.0), density=1e-2):
        """Build from the ``network`` and ``delays`` blocks of a configuration."""
        try:
            n, m = int(net["n"]), int(net["m"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"network: n and m are required ({exc})") from None
        dims = {"n": n, "m": m, "p": max(n, m)}
        fams = {}
        for name, shape in _FAMILY_SHAPES.items():
            if name not in net:
                raise ConfigError(f"network.{name} is missing")
            fams[name] = _expr_array(net[name], [dims[s] for s in shape], f"network.{name}")
        dl = {}
        for name, shape in _DELAY_SHAPES.items():
            if name not in delays:
                raise ConfigError(f"delays.{name} is missing")
            dl[name] = _expr_array(delays[name], [dims[s] for s in shape], f"delays.{name}")
        act = net.get("activation")
        if not isinstance(act, dict) or "expr" not in act:
            raise ConfigError("network.activation.expr is missing")
        lip = act.get("lipschitz")
        if isinstance(lip, (int, float)):
            lip = [lip] * dims["p"]
        try:
            activation = ActivationSpec.from_string(act["expr"], lip or [], act.get("value_at_zero"))
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"network.activation: {exc}") from exc
        spec = DelaySpec(dl["eta"], dl["varsigma"], dl["tau"], dl["sigma"], dl["xi"], dl["chi"])
        netspec = cls(n, m, activation=activation, delays=spec, **fams)
        if theta is None:
            theta = netspec.scan_theta(scan_window, density)
        return netspec.with_theta(theta)

    def with_theta(self, theta):
        return replace(self, delays=replace(self.delays, theta=float(theta)), _cache={})

    def scan_theta(self, window=(0.0, 1000.0), density=1e-2):
        """Largest sampled delay; raises ConfigError on a negative delay."""
        k0, k1 = int(np.ceil(window[0] / density)), int(np.floor(window[1] / density))
        t = np.arange(k0, k1 + 1) * density
        theta = 0.0
        for name, arr in self.delays.families().items():
            for idx, e in np.ndenumerate(arr):
                v = np.asarray(evaluate(e, t))
                if v.min() < -1e-12:
                    raise ConfigError(f"delay {name}{list(idx)} is negative on the scan window")
                theta = max(theta, float(v.max()))
        return theta

    def families(self):
        """Every coefficient family by name, delays included."""
        out = {name: getattr(self, name) for name in _FAMILY_SHAPES}
        out.update(self.delays.families())
        return out

    def map_family(self, name, fn):
        """A copy with ``fn`` applied to every expression of family ``name``."""
        arr = np.empty(getattr(self, name).shape, dtype=object)
        for idx, e in np.ndenumerate(getattr(self, name)):
            arr[idx] = fn(e)
        return replace(self, _cache={}, **{name: arr})

    def scale(self, factor, names=COUPLINGS):
        out = self
        for name in names:
            out = out.map_family(name, lambda e: BinOp("*", Num(float(factor)), e))
        return out

    def coefficients(self, t):
        """Evaluate every coefficient at the times ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        memo = {}

        def ev(arr):
            out = np.empty((len(t),) + arr.shape)
            for idx, e in np.ndenumerate(arr):
                if e not in memo:
                    memo[e] = np.broadcast_to(evaluate(e, t), t.shape)
                out[(slice(None),) + idx] = memo[e]
            return out

        vals = {name: ev(getattr(self, name)) for name in _FAMILY_SHAPES}
        d = self.delays
        for name, arr in (("eta", d.leakage_x), ("varsigma", d.leakage_y), ("tau", d.discrete),
                          ("sigma", d.distributed), ("xi", d.derivative_distributed),
                          ("chi", d.second_order)):
            # a delay never points into the future
            vals[name] = np.maximum(ev(arr), 0.0)
        return Coefficients(**vals)


# -- history arrays and running integrals -------------------------------------

def _tol(s):
    return 1e-9 * np.maximum(1.0, np.abs(s))


def _locate(t, s):
    idx = np.searchsorted(t, s + _tol(s), side="right") - 1
    if np.any(idx < 0):
        raise HistoryTooShort(f"lookup at t={float(np.min(s))!r} precedes history start {t[0]!r}")
    return idx


def interp(t, mu, vals, s, comp):
    """Values of ``vals[:, comp]`` at times ``s``.

    Inside a dense interval the history is interpolated linearly; after a
    right-scattered point the value of that point is used (backward projection).
    """
    idx = _locate(t, s)
    nxt = np.minimum(idx + 1, len(t) - 1)
    dt = t[nxt] - t[idx]
    dense = (mu[idx] == 0) & (nxt > idx)
    w = np.where(dense, (s - t[idx]) / np.where(dt > 0, dt, 1.0), 0.0)
    w = np.clip(w, 0.0, 1.0)
    v0 = vals[idx, comp]
    return v0 + w * (vals[nxt, comp] - v0)


def running_integral(t, mu, g):
    """C[k] = Delta-integral of g from t[0] to t[k]; g has shape (L, C)."""
    C = np.zeros_like(g)
    if len(t) > 1:
        dt = np.diff(t)[:, None]
        sc = (mu[:-1] > 0)[:, None]
        inc = np.where(sc, mu[:-1, None] * g[:-1], dt * (g[:-1] + g[1:]) / 2)
        C[1:] = np.cumsum(inc, axis=0)
    return C


def integral_at(t, mu, g, C, a, comp):
    """Delta-integral of g[:, comp] from t[0] to a*, a* the inf-above projection of a."""
    idx = _locate(t, a)
    nxt = np.minimum(idx + 1, len(t) - 1)
    exact = np.abs(a - t[idx]) <= _tol(a)
    scattered = mu[idx] > 0
    dt = t[nxt] - t[idx]
    off = a - t[idx]
    w = np.clip(np.where(dt > 0, off / np.where(dt > 0, dt, 1.0), 0.0), 0.0, 1.0)
    g0 = g[idx, comp]
    ga = g0 + w * (g[nxt, comp] - g0)
    base = C[idx, comp]
    return np.where(exact, base, np.where(scattered, C[nxt, comp], base + off * (g0 + ga) / 2))


class History:
    """Trajectory arrays plus activation values and running integrals.

    Columns of ``V`` are [x, y, x^Delta, y^Delta]; columns of ``G`` are the
    integrands [f(x), f(y), f(x^Delta), f(y^Delta), x^Delta, y^Delta] and ``C``
    holds their running Delta-integrals.  The arrays have a fixed capacity so
    the simulator can append in place; only the first ``L`` rows are meaningful.
    """

    def __init__(self, f, n, m, capacity):
        self.f = f
        self.n, self.m = n, m
        p = n + m
        self.p = p
        self.L = 0
        self.t = np.zeros(capacity)
        self.mu = np.zeros(capacity)
        self.V = np.zeros((capacity, 2 * p))
        self.G = np.zeros((capacity, 3 * p))
        self.C = np.zeros((capacity, 3 * p))

    X = property(lambda self: self.V[:, :self.n])
    Y = property(lambda self: self.V[:, self.n:self.p])
    DX = property(lambda self: self.V[:, self.p:self.p + self.n])
    DY = property(lambda self: self.V[:, self.p + self.n:])

    @classmethod
    def from_trajectory(cls, traj, f, capacity=None, upto=None):
        L = len(traj) if upto is None else upto
        h = cls(f, traj.n, traj.m, max(capacity or 0, L))
        h.L = L
        h.t[:L], h.mu[:L] = traj.t[:L], traj.mu[:L]
        h.V[:L] = traj.states()[:L]
        h.G[:L, :2 * h.p] = np.asarray(f(h.V[:L])).reshape(L, 2 * h.p)
        h.G[:L, 2 * h.p:] = h.V[:L, h.p:]
        h.C[:L] = running_integral(h.t[:L], h.mu[:L], h.G[:L])
        return h

    def _step_integral(self, k, cols):
        C, G = self.C, self.G
        if k == 0:
            C[0, cols] = 0.0
        elif self.mu[k - 1] > 0:
            C[k, cols] = C[k - 1, cols] + self.mu[k - 1] * G[k - 1, cols]
        else:
            C[k, cols] = C[k - 1, cols] + (self.t[k] - self.t[k - 1]) * (G[k - 1, cols] + G[k, cols]) / 2

    def set_point(self, k, t, mu, z, dz):
        """Write row k from state z = [x, y] and Delta dz; rows before k must be final."""
        self.t[k], self.mu[k] = t, mu
        p = self.p
        self.V[k, :p] = z
        self.V[k, p:] = dz
        self.G[k, :2 * p] = self.f(self.V[k])
        self.G[k, 2 * p:] = dz
        self._step_integral(k, slice(None))
        self.L = k + 1

    def set_delta(self, k, dz):
        p = self.p
        self.V[k, p:] = dz
        self.G[k, p:2 * p] = self.f(dz)
        self.G[k, 2 * p:] = dz
        self._step_integral(k, slice(p, 3 * p))


def _slices(sizes):
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


class _Layout:
    """Static column indices of the lookups and integrals done by field_at."""

    _cache = {}

    @classmethod
    def get(cls, n, m):
        key = (n, m)
        if key not in cls._cache:
            cls._cache[key] = cls(n, m)
        return cls._cache[key]

    def __init__(self, n, m):
        p = n + m
        i_nm = np.repeat(np.arange(n), m)      # i index of flattened (i, j)
        j_nm = np.tile(np.arange(m), n)        # j index of flattened (i, j)
        xs, ys = np.arange(n), n + np.arange(m)
        # point lookups in V: now, delayed by tau, delayed by chi, leakage
        self.look_cols = np.concatenate([xs, ys, n + j_nm, i_nm, ys, xs, xs, ys])
        sizes = [n, m, n * m, n * m, m, n, n, m]
        self.look_split = np.cumsum(sizes)[:-1]
        self.look_slices = _slices(sizes)
        # integral lower limits in G: sigma on f(y), xi on f(y^D), sigma on f(x), xi on f(x^D),
        # eta on x^D, varsigma on y^D
        self.int_cols = np.concatenate([n + j_nm, p + n + j_nm, i_nm, p + i_nm,
                                        2 * p + xs, 2 * p + n + np.arange(m)])
        self.int_slices = _slices([n * m, n * m, n * m, n * m, n, m])
        self.j_nm, self.i_nm = j_nm, i_nm
        self.n, self.m, self.p = n, m, p


def field_at(h: History, co: Coefficients, s, mode="rhs"):
    """Vector field of the network at times ``s`` from history ``h``.

    ``mode="rhs"`` gives (x^Delta, y^Delta); ``mode="FG"`` gives the operators
    (F, G) in which the leakage term is replaced by alpha times the integral
    of the Delta-channel over the leakage window.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    Q = len(s)
    n, m = h.n, h.m
    lay = _Layout.get(n, m)
    L = h.L
    t, mu, V, G, C = h.t[:L], h.mu[:L], h.V[:L], h.G[:L], h.C[:L]
    S = s[:, None]
    tau = co.tau.reshape(Q, n * m)
    zq, zm = np.zeros((Q, n)), np.zeros((Q, m))
    lag = np.concatenate([zq, zm, tau, tau, co.chi[:, :m], co.chi[:, :n], co.eta, co.varsigma], axis=1)
    vals = interp(t, mu, V, S - lag, lay.look_cols)
    x_now, y_now, y_tau, x_tau, y_chi, x_chi, x_leak, y_leak = (vals[:, sl] for sl in lay.look_slices)

    sig = co.sigma.reshape(Q, n * m)
    xi = co.xi.reshape(Q, n * m)
    width = np.concatenate([sig, xi, sig, xi, co.eta, co.varsigma], axis=1)
    # running integral at s for every integrand column, then the lower limits
    all_cols = np.arange(3 * h.p)
    upper = integral_at(t, mu, G, C, np.broadcast_to(S, (Q, 3 * h.p)), all_cols)
    lower = integral_at(t, mu, G, C, S - width, lay.int_cols)
    win = upper[:, lay.int_cols] - lower
    fy_sig, fdy_xi, fx_sig, fdx_xi, lx, ly = (win[:, sl] for sl in lay.int_slices)

    fv = np.asarray(h.f(vals[:, :lay.look_split[5]]))
    fx_now, fy_now, fy_tau, fx_tau, gy, gx = (fv[:, sl] for sl in lay.look_slices[:6])
    fy_tau, fx_tau = fy_tau.reshape(Q, n, m), fx_tau.reshape(Q, n, m)
    fy_sig, fdy_xi = fy_sig.reshape(Q, n, m), fdy_xi.reshape(Q, n, m)
    fx_sig, fdx_xi = fx_sig.reshape(Q, n, m), fdx_xi.reshape(Q, n, m)

    xr = (np.einsum("qij,qj->qi", co.D, fy_now)
          + (co.D_tau * fy_tau + co.D_bar * fy_sig + co.D_tilde * fdy_xi).sum(axis=2)
          + np.einsum("qijk,qk,qj->qi", co.T, gy, gy)
          + co.I)
    yr = (np.einsum("qij,qi->qj", co.E, fx_now)
          + (co.E_tau * fx_tau + co.E_bar * fx_sig + co.E_tilde * fdx_xi).sum(axis=1)
          + np.einsum("qjik,qk,qi->qj", co.T_bar, gx, gx)
          + co.J)
    if mode == "rhs":
        return xr - co.alpha * x_leak, yr - co.c * y_leak
    if mode != "FG":
        raise ValueError(f"unknown mode {mode!r}")
    return xr + co.alpha * lx, yr + co.c * ly


def _history_upto(net, hist, t):
    k = hist.index_of(t)
    return History.from_trajectory(hist, net.activation, upto=k + 1), hist.t[k]


def rhs(ts, net: NetworkSpec, hist: Trajectory, t):
    """(x^Delta(t), y^Delta(t)) from the history up to the grid point t."""
    h, tk = _history_upto(net, hist, t)
    xd, yd = field_at(h, net.coefficients([tk]), [tk])
    return xd[0], yd[0]


def operator_F(ts, net: NetworkSpec, psi: Trajectory, t):
    h, tk = _history_upto(net, psi, t)
    return field_at(h, net.coefficients([tk]), [tk], mode="FG")[0][0]


def operator_G(ts, net: NetworkSpec, psi: Trajectory, t):
    h, tk = _history_upto(net, psi, t)
    return field_at(h, net.coefficients([tk]), [tk], mode="FG")[1][0]
