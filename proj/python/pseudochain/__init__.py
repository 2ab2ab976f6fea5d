"""Python access to the pseudochain C++ core.

Configs are passed as dicts of overrides on top of the defaults; results
come back as parsed metrics records.
"""

import json

from . import _core
from ._core import (
    GenerationEnv as _GenerationEnv,
    PseudochainError,
    hmac_sha256_hex,
    instantaneous_dope,
    interval_area,
    sha256_hex,
    time_average_dope,
)

__all__ = [
    "GenerationEnv",
    "PseudochainError",
    "config_digest",
    "critical_ratio",
    "default_config",
    "dope_benchmark",
    "chain_benchmark",
    "hmac_sha256_hex",
    "instantaneous_dope",
    "interval_area",
    "newsvendor_benchmark",
    "optimal_generation",
    "protocol_simulation",
    "sha256_hex",
    "sweep_csv",
    "time_average_dope",
    "training_eval",
]


def _dump(overrides):
    return json.dumps(overrides) if overrides else ""


def default_config():
    return json.loads(_core.default_config_json())


def config_digest(overrides=None):
    return _core.config_digest(_dump(overrides))


def critical_ratio(overrides=None):
    return _core.critical_ratio(_dump(overrides))


def optimal_generation(overrides=None):
    return _core.optimal_generation(_dump(overrides))


def chain_benchmark(overrides=None):
    return [json.loads(r) for r in _core.run_chain_benchmark(_dump(overrides))]


def protocol_simulation(overrides=None):
    return json.loads(_core.run_protocol_simulation(_dump(overrides)))


def dope_benchmark(overrides=None):
    return json.loads(_core.run_dope_benchmark(_dump(overrides)))


def newsvendor_benchmark(overrides=None):
    return json.loads(_core.run_newsvendor_benchmark(_dump(overrides)))


def training_eval(overrides=None):
    return json.loads(_core.run_training_eval(_dump(overrides)))


def sweep_csv(overrides=None, kind="lambda"):
    return _core.sweep_csv(_dump(overrides), kind)


def GenerationEnv(overrides=None):
    return _GenerationEnv(_dump(overrides))


def series(record, name):
    """Points of a named series as (label, x, y) tuples."""
    for s in record["series"]:
        if s["name"] == name:
            return [(p["label"], p["x"], p["y"]) for p in s["points"]]
    raise KeyError(name)
