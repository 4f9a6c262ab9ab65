"""Time-scale calculus on three computable families of closed sets.

A :class:`TimeScale` is either the real line (``continuum``), a uniform grid
``t0 + hZ`` (``grid``) or a periodic union of closed intervals
``U_k [t0 + k(a+g), t0 + k(a+g) + a]`` (``union``).  Every query works in
floating point with a small absolute snapping tolerance so that grid points
produced by :meth:`TimeScale.grid_arrays` are recognised as members.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import EmptyWindow, NonRegressive, NotInScale

__all__ = [
    "TimeScale",
    "GridPoint",
    "Regressivity",
    "forward_jump",
    "graininess",
    "enumerate_grid",
    "delta_integral",
    "delta_derivative",
    "is_regressive",
    "ts_exp",
    "circle_minus",
    "project_backward",
    "project_forward",
    "exp_along",
]

_REL = 1e-9


def _tol(t):
    return _REL * max(1.0, abs(float(t)))


class GridPoint(NamedTuple):
    t: float
    is_right_scattered: bool
    graininess: float


class Regressivity(str, enum.Enum):
    REGRESSIVE = "regressive"
    POSITIVELY_REGRESSIVE = "positively_regressive"
    NEITHER = "neither"


@dataclass(frozen=True)
class TimeScale:
    """Immutable description of a time scale.

    Use the constructors :meth:`continuum`, :meth:`uniform_grid` and
    :meth:`periodic_union` rather than the raw fields.  ``resolution`` is the
    sampling step inside continuum segments.
    """

    kind: str
    resolution: float
    h: float = 0.0
    a: float = 0.0
    g: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("continuum", "grid", "union"):
            raise ValueError(f"unknown time scale kind {self.kind!r}")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.kind == "grid" and not self.h > 0:
            raise ValueError("grid step must be positive")
        if self.kind == "union" and not (self.a > 0 and self.g > 0):
            raise ValueError("union needs a > 0 and g > 0")

    # -- constructors ---------------------------------------------------
    @classmethod
    def continuum(cls, resolution=1e-2):
        return cls("continuum", float(resolution))

    @classmethod
    def uniform_grid(cls, h=1.0, resolution=None, anchor=0.0):
        h = float(h)
        return cls("grid", float(resolution or h), h=h, t0=float(anchor))

    @classmethod
    def periodic_union(cls, a, g, t0=0.0, resolution=1e-2):
        a, g = float(a), float(g)
        if a < 0 or g < 0 or a + g <= 0:
            raise ValueError("periodic union needs a >= 0, g >= 0, a + g > 0")
        if g == 0:
            return cls.continuum(resolution)
        if a == 0:
            return cls.uniform_grid(g, resolution, anchor=t0)
        return cls("union", float(resolution), a=a, g=g, t0=float(t0))

    def with_resolution(self, resolution):
        return TimeScale(self.kind, float(resolution), self.h, self.a, self.g, self.t0)

    def describe(self):
        if self.kind == "continuum":
            return {"kind": "continuum", "resolution": self.resolution}
        if self.kind == "grid":
            return {"kind": "grid", "h": self.h, "anchor": self.t0, "resolution": self.resolution}
        return {"kind": "union", "a": self.a, "g": self.g, "t0": self.t0,
                "resolution": self.resolution}

    # -- point queries --------------------------------------------------
    @property
    def period(self):
        return self.a + self.g

    @property
    def sup_graininess(self):
        return {"continuum": 0.0, "grid": self.h, "union": self.g}[self.kind]

    def _phase(self, t):
        # position of t inside its period, snapped to [0, P)
        P = self.period
        k = math.floor((t - self.t0) / P)
        ph = t - self.t0 - k * P
        if ph > P - _tol(t):
            k += 1
            ph = 0.0
        return k, max(ph, 0.0)

    def contains(self, t):
        t = float(t)
        if not math.isfinite(t):
            return False
        if self.kind == "continuum":
            return True
        if self.kind == "grid":
            k = round((t - self.t0) / self.h)
            return abs(t - (self.t0 + k * self.h)) <= _tol(t)
        _, ph = self._phase(t)
        return ph <= self.a + _tol(t)

    def _require(self, t):
        if not self.contains(t):
            raise NotInScale(f"t={t!r} is not a point of the time scale")

    def forward_jump(self, t):
        t = float(t)
        self._require(t)
        if self.kind == "continuum":
            return t
        if self.kind == "grid":
            k = round((t - self.t0) / self.h)
            return self.t0 + (k + 1) * self.h
        k, ph = self._phase(t)
        if abs(ph - self.a) <= _tol(t):
            return self.t0 + (k + 1) * self.period
        return t

    def graininess(self, t):
        t = float(t)
        self._require(t)
        if self.kind == "continuum":
            return 0.0
        if self.kind == "grid":
            return self.h
        _, ph = self._phase(t)
        return self.g if abs(ph - self.a) <= _tol(t) else 0.0

    def graininess_array(self, t):
        """Graininess at an array of member points (membership is not re-checked)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "continuum":
            return np.zeros_like(t)
        if self.kind == "grid":
            return np.full_like(t, self.h)
        P = self.period
        ph = np.mod(t - self.t0, P)
        tol = _REL * np.maximum(1.0, np.abs(t))
        return np.where(np.abs(ph - self.a) <= tol, self.g, 0.0)

    def project_backward(self, t):
        """sup{s in T : s <= t}."""
        t = float(t)
        if self.kind == "continuum":
            return t
        if self.kind == "grid":
            k = math.floor((t - self.t0) / self.h + _REL)
            return self.t0 + k * self.h
        k, ph = self._phase(t)
        if ph <= self.a + _tol(t):
            return t
        return self.t0 + k * self.period + self.a

    def project_forward(self, t):
        """inf{s in T : s >= t}."""
        t = float(t)
        if self.kind == "continuum":
            return t
        if self.kind == "grid":
            k = math.ceil((t - self.t0) / self.h - _REL)
            return self.t0 + k * self.h
        k, ph = self._phase(t)
        if ph <= self.a + _tol(t):
            return t
        return self.t0 + (k + 1) * self.period

    # -- grids ----------------------------------------------------------
    def grid_arrays(self, lo, hi):
        """Points of T in [lo, hi] with their graininess, as two arrays."""
        lo, hi = float(lo), float(hi)
        if hi < lo:
            raise EmptyWindow(f"window [{lo}, {hi}] is reversed")
        if self.kind == "continuum":
            t = _sample(lo, hi, self.resolution, 0.0)
            return t, np.zeros_like(t)
        if self.kind == "grid":
            k0 = math.ceil((lo - self.t0) / self.h - _REL)
            k1 = math.floor((hi - self.t0) / self.h + _REL)
            if k1 < k0:
                raise EmptyWindow(f"no grid point in [{lo}, {hi}]")
            t = self.t0 + np.arange(k0, k1 + 1) * self.h
            return t, np.full(t.shape, self.h)
        P = self.period
        ts, mus = [], []
        k0 = math.floor((lo - self.t0) / P)
        k1 = math.floor((hi - self.t0) / P)
        for k in range(k0, k1 + 1):
            start = self.t0 + k * P
            end = start + self.a
            s0, s1 = max(start, lo), min(end, hi)
            if s1 < s0 - _tol(s0):
                continue
            if abs(s0 - end) <= _tol(end):
                seg = np.array([end])
            else:
                seg = _sample(s0, max(s0, s1), self.resolution, start)
            mu = np.zeros_like(seg)
            if abs(seg[-1] - end) <= _tol(end):
                seg[-1] = end
                mu[-1] = self.g
            ts.append(seg)
            mus.append(mu)
        if not ts:
            raise EmptyWindow(f"no point of the time scale in [{lo}, {hi}]")
        return np.concatenate(ts), np.concatenate(mus)


def _sample(lo, hi, res, anchor):
    if hi - lo <= _tol(hi):
        return np.array([lo])
    k0 = math.floor((lo - anchor) / res) + 1
    k1 = math.ceil((hi - anchor) / res) - 1
    inner = anchor + np.arange(k0, k1 + 1) * res
    margin = 1e-6 * res
    inner = inner[(inner > lo + margin) & (inner < hi - margin)]
    return np.concatenate(([lo], inner, [hi]))


# -- module-level API ----------------------------------------------------

def forward_jump(ts: TimeScale, t):
    return ts.forward_jump(t)


def graininess(ts: TimeScale, t):
    return ts.graininess(t)


def project_backward(ts: TimeScale, t):
    return ts.project_backward(t)


def project_forward(ts: TimeScale, t):
    return ts.project_forward(t)


def enumerate_grid(ts: TimeScale, lo, hi):
    t, mu = ts.grid_arrays(lo, hi)
    return [GridPoint(float(a), bool(b > 0), float(b)) for a, b in zip(t, mu)]


def _as_callable(f):
    if callable(f):
        return f
    c = float(f)
    return lambda t: np.full(np.shape(t), c) if np.ndim(t) else c


def _eval_on(f, t):
    """Evaluate ``f`` at every point of ``t``; vectorised when f allows it."""
    f = _as_callable(f)
    try:
        v = np.asarray(f(t), dtype=float)
        if v.shape[:1] == t.shape and v.ndim >= 1:
            return v
    except (TypeError, ValueError):
        pass
    return np.array([np.asarray(f(float(s)), dtype=float) for s in t])


def _trapezoid_weights(t, mu):
    """Weights w with sum(w * f(t)) equal to the Delta-integral over [t[0], t[-1]]."""
    w = np.zeros_like(t)
    if t.size < 2:
        return w
    dt = np.diff(t)
    dense = mu[:-1] == 0
    w[:-1] += np.where(dense, dt / 2, mu[:-1])
    w[1:] += np.where(dense, dt / 2, 0.0)
    return w


def delta_integral(ts: TimeScale, f, a, b):
    """Delta-integral of ``f`` over [a*, b*), with a*, b* the inf-above projections."""
    if b < a:
        raise EmptyWindow(f"integral window [{a}, {b}] is reversed")
    lo, hi = ts.project_forward(a), ts.project_forward(b)
    if hi - lo <= _tol(hi):
        v = np.asarray(_as_callable(f)(lo), dtype=float)
        return np.zeros_like(v) if v.ndim else 0.0
    t, mu = ts.grid_arrays(lo, hi)
    vals = _eval_on(f, t)
    w = _trapezoid_weights(t, mu)
    out = np.tensordot(w, vals, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def delta_derivative(ts: TimeScale, f, t):
    t = float(t)
    mu = ts.graininess(t)
    f = _as_callable(f)
    if mu > 0:
        return (float(f(t + mu)) - float(f(t))) / mu
    h = ts.resolution
    return (float(f(t + h)) - float(f(t - h))) / (2 * h)


def is_regressive(ts: TimeScale, p, window):
    t, mu = ts.grid_arrays(*window)
    v = 1.0 + mu * _eval_on(p, t)
    if np.all(v > 0):
        return Regressivity.POSITIVELY_REGRESSIVE
    if np.all(v != 0):
        return Regressivity.REGRESSIVE
    return Regressivity.NEITHER


class _CircleMinus:
    """t -> -p(t) / (1 + mu(t) p(t)); ``dense`` gives the value without the jump."""

    def __init__(self, ts, p):
        self.ts = ts
        self.p = _as_callable(p)

    def dense(self, t):
        return -np.asarray(self.p(t), dtype=float)

    def __call__(self, t):
        pv = np.asarray(self.p(t), dtype=float)
        mu = self.ts.graininess(t) if np.ndim(t) == 0 else self.ts.graininess_array(t)
        den = 1.0 + mu * pv
        if np.any(den == 0):
            raise NonRegressive("1 + mu p vanishes")
        out = -pv / den
        return float(out) if np.ndim(out) == 0 else out


def circle_minus(ts: TimeScale, p) -> Callable:
    return _CircleMinus(ts, p)


def exp_along(t, mu, p):
    """e_p(t_k, t_0) for every k along a grid given by (t, mu).

    ``p`` is a callable or an array of values at ``t``.  Across a scattered
    point the factor is 1 + mu p; across a dense interval it is the
    exponential of the trapezoid integral of p.
    """
    t = np.asarray(t, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if callable(p):
        pv = _eval_on(p, t)
        pd = _eval_on(p.dense, t) if hasattr(p, "dense") else pv
    else:
        pv = pd = np.broadcast_to(np.asarray(p, dtype=float), t.shape)
    if t.size < 2:
        return np.ones_like(t)
    dense = mu[:-1] == 0
    factor = 1.0 + mu[:-1] * pv[:-1]
    if np.any(~dense & (factor == 0)):
        raise NonRegressive("1 + mu p vanishes on the marching grid")
    dt = np.diff(t)
    logs = np.where(dense, dt * (pd[:-1] + pd[1:]) / 2,
                    np.log(np.abs(np.where(dense, 1.0, factor))))
    neg = (~dense) & (factor < 0)
    sign = np.where(np.cumsum(neg) % 2 == 1, -1.0, 1.0)
    out = np.empty_like(t)
    out[0] = 1.0
    out[1:] = sign * np.exp(np.cumsum(logs))
    return out


def ts_exp(ts: TimeScale, p, t, s):
    """The time-scale exponential e_p(t, s) for s, t in T."""
    t, s = float(t), float(s)
    ts._require(t)
    ts._require(s)
    if t == s:
        return 1.0
    if t < s:
        return 1.0 / ts_exp(ts, p, s, t)
    grid, mu = ts.grid_arrays(s, t)
    return float(exp_along(grid, mu, _as_callable(p))[-1])
