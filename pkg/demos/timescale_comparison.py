"""Same network, three time scales: hypothesis check, decay certificate, one envelope.

    python demos/timescale_comparison.py

Coefficient bounds are scanned over [0, 200] to keep it quick (about 20 s).
On the integers the envelope only holds partly; the README explains why.
"""

import numpy as np

from tshobam import analysis as an
from tshobam.config import load_config
from tshobam.errors import NotStable
from tshobam.simulate import random_history, simulate
from tshobam.timescale import TimeScale

cfg = load_config("paper_sec6")
net, r = cfg.network, cfg.r
scales = {
    "continuum": TimeScale.continuum(1e-2),
    "integers": TimeScale.uniform_grid(1),
    "union P(1, 0.5)": TimeScale.periodic_union(1.0, 0.5, 0.0, 1e-2),
}

for label, ts in scales.items():
    bounds = an.scan_bounds(net, ts, (0.0, 200.0), cfg.density)
    rep = an.check_h3(net, ts, r, bounds)
    flags = " ".join(f"{k.upper()}={'ok' if v['pass'] else 'no'}" for k, v in rep.flags.items())
    print(f"{label:>16}: {flags}  kappa={rep.kappa:.4f}")
    try:
        cert = an.decay_certificate(bounds, net.activation, r, ts)
    except NotStable as exc:
        print(f"{'':>16}  no certificate: {exc}")
        continue
    a, b = (simulate(ts, net, random_history(ts, net, np.random.default_rng(s)), 30.0)
            for s in (1, 2))
    env = an.envelope_check(a, b, cert, ts, 0.0)
    print(f"{'':>16}  gamma={cert.gamma:.4f} K={cert.K:.3f}  envelope holds at "
          f"{100 * env.fraction:.1f}% of points, fitted rate {env.fitted_rate:.4f}")
