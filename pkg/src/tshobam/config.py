"""Experiment configuration documents (JSON with expression strings)."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigError, TshobamError
from .model import NetworkSpec
from .timescale import TimeScale

__all__ = ["ExperimentConfig", "load_config", "builtin_names", "ANALYSIS_DEFAULTS", "RUN_DEFAULTS"]

_DATA = resources.files("tshobam") / "data"

ANALYSIS_DEFAULTS = {
    "scan_window": [0.0, 1000.0],
    "density": None,
    "tol": 1e-8,
    "max_iter": 60,
    "safety_fraction": 0.9,
    "beta": None,
    "tail_tol": 1e-10,
    "cutoff": None,
    "picard_window": [0.0, 40.0],
    "weight": "1",
    "lyapunov_inner": "standard",
    "symmetrize": False,
    "effective_delays": False,
}
RUN_DEFAULTS = {
    "horizon": 50.0,
    "initial_history": None,
    "derive_init_delta": True,
    "seeds": [1, 2],
    "random_amplitude": 0.5,
}


def builtin_names():
    return sorted(p.name[:-5] for p in _DATA.iterdir() if p.name.endswith(".json"))


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    raw: dict
    source: str
    sha256: str
    timescale: TimeScale
    network: NetworkSpec
    r: float
    analysis: dict
    run: dict

    @property
    def scan_window(self):
        return tuple(float(v) for v in self.analysis["scan_window"])

    @property
    def density(self):
        return float(self.analysis["density"] or self.timescale.resolution)

    def manifest(self, version):
        return {"config_sha256": self.sha256, "source": self.source,
                "scan_window": list(self.scan_window), "density": self.density,
                "timescale": self.timescale.describe(), "version": version}


def _read(source):
    path = Path(source)
    if path.is_file():
        return path.read_bytes(), str(source)
    if str(source) in builtin_names():
        data = _DATA.joinpath(f"{source}.json").read_bytes()
        return data, f"builtin:{source}"
    raise ConfigError(f"no such configuration file or builtin: {source!r}")


def _timescale(block, resolution):
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("timescale.kind is missing")
    kind = block["kind"]
    res = float(resolution if resolution is not None else block.get("resolution", 1e-2))
    try:
        if kind == "continuum":
            return TimeScale.continuum(res)
        if kind in ("grid", "uniform_grid"):
            return TimeScale.uniform_grid(float(block.get("h", 1.0)), res,
                                          float(block.get("anchor", 0.0)))
        if kind in ("union", "periodic_union"):
            return TimeScale.periodic_union(float(block["a"]), float(block["g"]),
                                            float(block.get("t0", 0.0)), res)
    except KeyError as exc:
        raise ConfigError(f"timescale.{exc.args[0]} is missing") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"timescale: {exc}") from None
    raise ConfigError(f"timescale.kind: unknown kind {kind!r}")


def _merge(defaults, block, name):
    block = block or {}
    if not isinstance(block, dict):
        raise ConfigError(f"{name} must be an object")
    unknown = sorted(set(block) - set(defaults))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}: unknown key")
    out = copy.deepcopy(defaults)
    out.update(block)
    return out


def load_config(source, resolution=None) -> ExperimentConfig:
    """Load and validate a configuration from a path or a builtin name.

    ``resolution`` overrides the time-scale resolution.
    """
    data, label = _read(source)
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{label}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in ("timescale", "network", "delays"):
        if key not in raw:
            raise ConfigError(f"{key} block is missing")
    ts = _timescale(raw["timescale"], resolution)
    analysis = _merge(ANALYSIS_DEFAULTS, raw.get("analysis"), "analysis")
    run = _merge(RUN_DEFAULTS, raw.get("run"), "run")
    window = tuple(float(v) for v in analysis["scan_window"])
    density = float(analysis["density"] or ts.resolution)
    try:
        net = NetworkSpec.from_dict(raw["network"], raw["delays"], scan_window=window,
                                    density=density)
    except ConfigError:
        raise
    except TshobamError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        r = float(raw["network"].get("r", 1.0))
    except (TypeError, ValueError):
        raise ConfigError("network.r must be a number") from None
    if r <= 0:
        raise ConfigError("network.r must be positive")
    digest = hashlib.sha256(data).hexdigest()
    return ExperimentConfig(raw, label, digest, ts, net, r, analysis, run)
