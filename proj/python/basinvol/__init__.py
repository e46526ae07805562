"""Star-convex basin volumes of small MLP minima.

Config-driven entry points take the same documents as the command line tool
(a dict, or a path to a JSON file) and return plain dicts.
"""

import json
import math
import os

from . import _basinvol
from ._basinvol import (
    BasinvolError,
    ConfigError,
    DataError,
    DimensionError,
    DivergenceError,
    DomainError,
    __version__,
    estimate_log_volume,
    fit_power_law,
    forward,
    log_unit_ball,
    loss,
    swiss_roll,
    toy_oracle,
    toy_volume_closed_form,
)

__all__ = [
    "BasinvolError", "ConfigError", "DataError", "DimensionError", "DivergenceError", "DomainError",
    "__version__", "estimate_log_volume", "execute", "fit_power_law", "forward", "log_unit_ball", "loss",
    "log_volume", "measure_volume", "resolve", "run", "swiss_roll", "toy_oracle", "toy_volume_closed_form",
]


def _doc(config):
    if isinstance(config, (str, os.PathLike)):
        with open(config) as f:
            return f.read()
    return json.dumps(config)


def resolve(config, kind=None):
    """The fully resolved config echo and its hash."""
    return json.loads(_basinvol.resolved_config_json(_doc(config), kind))


def execute(config, kind=None):
    """Run an experiment in memory: {"payload", "files", "flagged"}."""
    return json.loads(_basinvol.execute_json(_doc(config), kind))


def run(config, kind=None, output_root="."):
    """Run an experiment and write its output directory: {"dir", "result", "partial"}."""
    return json.loads(_basinvol.run_json(_doc(config), kind, os.fspath(output_root)))


def measure_volume(checkpoint, features, labels, directions=500, threshold=0.1, c_max=0.1, seed=0,
                   filter_normalize=True, workers=1):
    """Volume estimate of a saved minimum on the landscape (features, labels)."""
    return json.loads(_basinvol.volume_json(os.fspath(checkpoint), features, list(labels), directions, threshold,
                                            c_max, seed, filter_normalize, workers))


def log_volume(value):
    """A serialized log-volume (null for a collapsed estimate) as a float."""
    return -math.inf if value is None else float(value)
