"""Numerical lab for small-noise asymptotics of stochastic 2D hydrodynamical systems."""

import json

import numpy as np

from . import _core
from ._core import ConfigError, ExperimentFailure, IntegrationError, InvalidInput, Model, philox4x32

__all__ = [
    "ConfigError",
    "ExperimentFailure",
    "IntegrationError",
    "InvalidInput",
    "Model",
    "model",
    "normalize_config",
    "override",
    "philox4x32",
    "run",
    "solve_deterministic",
    "verify",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def model(name="shell", **params):
    """Build a model from the same fields as the config's "model" section."""
    return _core.build_model(json.dumps({"name": name, "params": params}))


def normalize_config(config):
    """Strictly parse a config (dict or JSON text) and return it with every default filled in."""
    return json.loads(_core.normalize_config(_text(config)))


def override(config, assignment):
    """Apply one "a.b=value" override and return the normalized config."""
    return json.loads(_core.override_config(_text(config), assignment))


def run(config, jobs=1):
    """Run an experiment and return its report as a dict."""
    return json.loads(_core.run(_text(config), jobs))


def solve_deterministic(m, xi, T=1.0, steps=1024):
    """Noise-free path as an array of shape (steps + 1, dimension)."""
    return _core.solve_deterministic(m, np.asarray(xi, dtype=float), float(T), int(steps))


def verify(m, q=None, n_samples=1000, seed=1):
    """Run every hypothesis check; q defaults to j^-2 on all modes."""
    if q is None:
        q = [1.0 / (j * j) for j in range(1, m.dimension + 1)]
    return json.loads(_core.verify(m, list(q), int(n_samples), int(seed)))
