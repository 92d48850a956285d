"""Experiment configuration: JSON documents merged over defaults, unknown keys rejected."""
from __future__ import annotations

import copy
import json
import pathlib

from .errors import ConfigError
from .specs import parse_complex

DEFAULTS = {
    "metric": "euclidean",
    "connection": "zero",
    "connection_scale": "1",
    "transform": "I0",
    "grids": {
        "n_x": 64,
        "n_beta": 128,
        "n_omega": 128,
        "panels_per_unit": 16.0,
        "n_theta": None,
        "w_n_x": 32,
        "w_theta": 48,
        "w_panels_per_unit": 6.0,
    },
    "ode": {"rtol": 1e-8, "atol": 1e-10, "max_step": 0.5, "tau_max": 50.0},
    "phantom": {
        "type": "gaussian",
        "center": [0.1, -0.1],
        "width": 0.15,
        "amplitude": ["1"],
        "count": 4,
        "seed": None,
    },
    "solver": {"method": "none", "tol": 1e-8, "max_iter": 30, "norm_estimate": True},
    "sweep": {"lambdas": ["0", "0.1", "0.2"], "direction": "1"},
    "range_test": {"modes": 3, "amplitude": 1.0, "cutoff": 0.5, "trace_modes": 8},
    "validate": {"mutation": "none", "groups": ["structure", "identities", "santalo", "adjointness",
                                                "symmetry", "kernels", "bound"]},
    "seed": 0,
    "output": "out",
}

_TYPES = {
    "metric": str, "connection": str, "transform": str, "output": str,
    "grids.n_x": int, "grids.n_beta": int, "grids.n_omega": int, "grids.w_n_x": int, "grids.w_theta": int,
    "grids.panels_per_unit": float, "grids.w_panels_per_unit": float,
    "ode.rtol": float, "ode.atol": float, "ode.max_step": float, "ode.tau_max": float,
    "phantom.type": str, "phantom.width": float, "phantom.count": int,
    "solver.method": str, "solver.tol": float, "solver.max_iter": int, "solver.norm_estimate": bool,
    "seed": int, "range_test.modes": int, "range_test.amplitude": float, "range_test.cutoff": float, "range_test.trace_modes": int, "validate.mutation": str,
}

_CHOICES = {
    "transform": ("I0", "Iperp"),
    "phantom.type": ("gaussian", "bumps", "zero"),
    "solver.method": ("none", "neumann", "krylov"),
    "validate.mutation": ("none", "flip_xperp"),
}


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def _lookup(cfg, dotted):
    cur = cfg
    for part in dotted.split("."):
        cur = cur[part]
    return cur


def _check(cfg):
    for key, typ in _TYPES.items():
        val = _lookup(cfg, key)
        if typ is float and isinstance(val, int) and not isinstance(val, bool):
            continue
        if typ is int and isinstance(val, bool):
            raise ConfigError(f"{key!r} must be an integer")
        if not isinstance(val, typ):
            raise ConfigError(f"{key!r} must be of type {typ.__name__}, got {val!r}")
    for key, choices in _CHOICES.items():
        if _lookup(cfg, key) not in choices:
            raise ConfigError(f"{key!r} must be one of {choices}")
    g = cfg["grids"]
    if g["n_omega"] % 4:
        raise ConfigError("grids.n_omega must be divisible by 4")
    for k in ("n_x", "n_beta", "n_omega", "w_n_x", "w_theta"):
        if g[k] < 8:
            raise ConfigError(f"grids.{k} must be at least 8")
    if g["n_theta"] is not None and (not isinstance(g["n_theta"], int) or g["n_theta"] < 8):
        raise ConfigError("grids.n_theta must be null or an integer >= 8")
    if cfg["seed"] < 0 or cfg["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    try:
        parse_complex(str(cfg["connection_scale"]))
        [parse_complex(str(a)) for a in cfg["phantom"]["amplitude"]]
        [parse_complex(str(a)) for a in cfg["sweep"]["lambdas"]]
        parse_complex(str(cfg["sweep"]["direction"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad complex number in configuration: {exc}") from exc
    c = cfg["phantom"]["center"]
    if not (isinstance(c, list) and len(c) == 2):
        raise ConfigError("phantom.center must be a list of two numbers")
    bad = [grp for grp in cfg["validate"]["groups"] if grp not in DEFAULTS["validate"]["groups"]]
    if bad:
        raise ConfigError(f"unknown validation groups {bad}")


def resolve(doc: dict | None = None, *, seed=None, output=None) -> dict:
    """Merge a user document over the defaults, apply CLI overrides, validate."""
    cfg = _merge(DEFAULTS, doc or {})
    if seed is not None:
        cfg["seed"] = int(seed)
    if output is not None:
        cfg["output"] = str(output)
    if cfg["phantom"]["seed"] is None:
        cfg["phantom"]["seed"] = cfg["seed"]
    _check(cfg)
    return cfg


def load(path, **overrides) -> dict:
    try:
        doc = json.loads(pathlib.Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"configuration file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    return resolve(doc, **overrides)
