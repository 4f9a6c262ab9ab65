import copy
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tshobam import analysis  # noqa: E402
from tshobam.config import load_config  # noqa: E402
from tshobam.model import NetworkSpec  # noqa: E402


def zero_blocks(n, m, activation="0.1*arctan(x)", lipschitz=0.1):
    """Network and delay blocks with every coefficient and delay equal to 0."""
    p = max(n, m)
    mat = [["0"] * m for _ in range(n)]
    net = {
        "n": n, "m": m,
        "alpha": ["0"] * n, "c": ["0"] * m,
        "D": mat, "D_tau": mat, "D_bar": mat, "D_tilde": mat,
        "E": mat, "E_tau": mat, "E_bar": mat, "E_tilde": mat,
        "T": [[["0"] * m for _ in range(m)] for _ in range(n)],
        "T_bar": [[["0"] * n for _ in range(n)] for _ in range(m)],
        "I": ["0"] * n, "J": ["0"] * m,
        "activation": {"expr": activation, "lipschitz": [lipschitz] * p, "value_at_zero": 0.0},
    }
    delays = {"eta": ["0"] * n, "varsigma": ["0"] * m, "tau": mat, "sigma": mat, "xi": mat,
              "chi": ["0"] * p}
    return copy.deepcopy(net), copy.deepcopy(delays)


def build(net, delays, **kw):
    return NetworkSpec.from_dict(net, delays, **kw)


def write_config(path, net, delays, timescale=None, analysis=None, run=None, r=1.0):
    doc = {"timescale": timescale or {"kind": "continuum", "resolution": 0.01},
           "network": dict(net, r=r), "delays": delays}
    if analysis is not None:
        doc["analysis"] = analysis
    if run is not None:
        doc["run"] = run
    Path(path).write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(scope="session")
def sec6():
    """The shipped worked-example configuration with its scanned bounds and report."""
    cfg = load_config("paper_sec6")
    bounds = analysis.scan_bounds(cfg.network, cfg.timescale, cfg.scan_window, cfg.density)
    report = analysis.check_h3(cfg.network, cfg.timescale, cfg.r, bounds)
    return cfg, bounds, report
