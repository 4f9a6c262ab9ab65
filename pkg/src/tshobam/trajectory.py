"""Trajectories: state and Delta-derivative channels on a time-scale grid."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindow, GridMismatch
from .timescale import GridPoint

__all__ = ["Trajectory", "StateSnapshot"]


@dataclass(frozen=True)
class StateSnapshot:
    t: float
    x: np.ndarray
    y: np.ndarray
    x_delta: np.ndarray
    y_delta: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Values of x, y and their Delta-derivatives at the points ``t``.

    ``mu`` holds the graininess of each point.  Arrays are made read-only on
    construction; use :meth:`copy_arrays` to get writable copies.
    """

    t: np.ndarray
    mu: np.ndarray
    x: np.ndarray
    y: np.ndarray
    x_delta: np.ndarray
    y_delta: np.ndarray

    def __post_init__(self):
        N = len(self.t)
        if N == 0:
            raise EmptyWindow("trajectory has no points")
        for name in ("t", "mu", "x", "y", "x_delta", "y_delta"):
            arr = np.array(getattr(self, name), dtype=float)
            if name in ("x", "y", "x_delta", "y_delta") and arr.ndim == 1:
                arr = arr.reshape(N, -1)
            if len(arr) != N:
                raise GridMismatch(f"channel {name} has {len(arr)} rows, expected {N}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if N > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory grid must be strictly increasing")
        if self.x.shape != self.x_delta.shape or self.y.shape != self.y_delta.shape:
            raise GridMismatch("state and Delta channels differ in shape")

    @property
    def n(self):
        return self.x.shape[1]

    @property
    def m(self):
        return self.y.shape[1]

    @property
    def lower_bound(self):
        return float(self.t[0])

    @property
    def upper_bound(self):
        return float(self.t[-1])

    @property
    def grid(self):
        return [GridPoint(float(a), bool(b > 0), float(b)) for a, b in zip(self.t, self.mu)]

    def __len__(self):
        return len(self.t)

    def index_of(self, t, tol=1e-9):
        k = int(np.searchsorted(self.t, t - tol * max(1.0, abs(t))))
        if k < len(self.t) and abs(self.t[k] - t) <= tol * max(1.0, abs(t)):
            return k
        raise KeyError(f"t={t!r} is not a grid point of the trajectory")

    def snapshot(self, k):
        return StateSnapshot(float(self.t[k]), self.x[k].copy(), self.y[k].copy(),
                             self.x_delta[k].copy(), self.y_delta[k].copy())

    def channel(self, name):
        """Column by name: ``x1``, ``y2``, ``dx1``, ``dy1`` (1-based)."""
        for prefix, arr in (("dx", self.x_delta), ("dy", self.y_delta),
                            ("x", self.x), ("y", self.y)):
            if name.startswith(prefix) and name[len(prefix):].isdigit():
                k = int(name[len(prefix):]) - 1
                if 0 <= k < arr.shape[1]:
                    return arr[:, k]
        raise KeyError(f"unknown channel {name!r}")

    def restrict(self, lo, hi):
        keep = (self.t >= lo - 1e-9) & (self.t <= hi + 1e-9)
        if not keep.any():
            raise EmptyWindow(f"trajectory has no point in [{lo}, {hi}]")
        return Trajectory(self.t[keep], self.mu[keep], self.x[keep], self.y[keep],
                          self.x_delta[keep], self.y_delta[keep])

    def states(self):
        """All channels side by side: x, y, dx, dy."""
        return np.hstack([self.x, self.y, self.x_delta, self.y_delta])

    def header(self):
        return (["t"] + [f"x{i+1}" for i in range(self.n)] + [f"y{j+1}" for j in range(self.m)]
                + [f"dx{i+1}" for i in range(self.n)] + [f"dy{j+1}" for j in range(self.m)])

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        data = np.column_stack([self.t, self.states()])
        for row in data:
            w.writerow([f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, ts):
        """Read a CSV written by :meth:`to_csv`; graininess comes from ``ts``."""
        if hasattr(source, "read"):
            text = source.read()
        elif "\n" in str(source):
            text = source
        else:
            with open(source) as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        head, body = rows[0], np.array(rows[1:], dtype=float)
        n = sum(1 for h in head if h.startswith("x"))
        m = sum(1 for h in head if h.startswith("y"))
        t = body[:, 0]
        x, y = body[:, 1:1 + n], body[:, 1 + n:1 + n + m]
        dx, dy = body[:, 1 + n + m:1 + 2 * n + m], body[:, 1 + 2 * n + m:]
        return cls(t, ts.graininess_array(t), x, y, dx, dy)
