"""Python access to the crlab core: Heisenberg group, bubbles, CR deformations and the CLI commands."""

import json

from ._crlab import (
    CalibrationError,
    ConfigError,
    DomainError,
    Error,
    HPoint,
    SolverError,
    bubble,
    c1,
    dilate,
    functional_value,
    group_inv,
    group_mul,
    koranyi_norm,
    pushforward_coefficient,
    pushforward_components,
    rossi_curvature,
    rossi_phi,
)
from . import _crlab

__all__ = [
    "CalibrationError",
    "ConfigError",
    "DomainError",
    "Error",
    "HPoint",
    "SolverError",
    "bubble",
    "c1",
    "calibrate",
    "cayley_check",
    "default_config",
    "dilate",
    "expansion",
    "functional_value",
    "group_inv",
    "group_mul",
    "koranyi_norm",
    "pushforward_coefficient",
    "pushforward_components",
    "rossi_curvature",
    "rossi_phi",
    "scan",
    "verify",
]


def _dump(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else json.dumps(config)


def _unpack(result):
    code, report, tables = result
    return code, json.loads(report), dict(tables)


def default_config():
    return json.loads(_crlab.default_config())


def calibrate(config=None):
    """Returns (exit_code, report, tables)."""
    return _unpack(_crlab.calibrate(_dump(config)))


def verify(suite="all", config=None):
    return _unpack(_crlab.verify(suite, _dump(config)))


def expansion(config=None):
    return _unpack(_crlab.expansion(_dump(config)))


def cayley_check(config=None, points=100):
    return _unpack(_crlab.cayley_check(_dump(config), points))


def scan(config=None):
    return _unpack(_crlab.scan(_dump(config)))
