"""x^Delta = -a x on a few time scales against the closed forms.

    python demos/scalar_decay.py

On the integers the solution is (1 - a)^k; on the reals it is exp(-a t).
A union of intervals mixes the two, one factor (1 - a g) per gap.
"""

import math

from tshobam.model import NetworkSpec
from tshobam.simulate import history_from_functions, simulate
from tshobam.timescale import TimeScale

A = 0.5


def scalar_network(alpha):
    zero = [["0"]]
    net = {"n": 1, "m": 1, "activation": {"expr": "x", "lipschitz": [1.0], "value_at_zero": 0.0},
           "alpha": [str(alpha)], "c": ["0"], "I": ["0"], "J": ["0"],
           "T": [[["0"]]], "T_bar": [[["0"]]]}
    for fam in ("D", "D_tau", "D_bar", "D_tilde", "E", "E_tau", "E_bar", "E_tilde"):
        net[fam] = zero
    delays = {"eta": ["0"], "varsigma": ["0"], "chi": ["0"],
              "tau": zero, "sigma": zero, "xi": zero}
    return NetworkSpec.from_dict(net, delays)


spec = scalar_network(A)
cases = [
    ("integers", TimeScale.uniform_grid(1), lambda t: (1 - A) ** t),
    ("reals", TimeScale.continuum(1e-2), lambda t: math.exp(-A * t)),
    ("union P(1, 0.5)", TimeScale.periodic_union(1.0, 0.5, 0.0, 1e-2),
     lambda t: (math.exp(-A) * (1 - A * 0.5)) ** (t // 1.5) * math.exp(-A * (t % 1.5))),
]
for label, ts, exact in cases:
    traj = simulate(ts, spec, history_from_functions(ts, 0.0, ["1"], ["0"]), 6.0)
    t_end = traj.upper_bound
    got = traj.x[-1, 0]
    print(f"{label:>16}: x({t_end:g}) = {got:.10f}  closed form {exact(t_end):.10f}")
