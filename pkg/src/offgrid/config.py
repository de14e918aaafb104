"""YAML run configuration with strict key checking."""

from __future__ import annotations

import copy

import yaml


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "dictionary": {"family": "gaussian_translate", "scale": 1.0},
    "grid": {"T": 2048, "a": None, "b": None, "growth": 0.1, "shrink": 0.1, "limit": False},
    "noise": {"kind": "iid", "sigma": 0.2, "c": 1.0, "C": 1.0, "n_terms": 64, "delta": None},
    "truth": {"gap": 3.0, "theta": None, "amplitudes": [1.0, -0.8, 1.2]},
    "solver": {"C1": 1.5, "kappa": None, "coarse_step": 0.1, "max_atoms": None},
    "data": None,
    "certify": {"s": 2, "gap": 9.0, "rho": 2.0, "eta0": 0.9, "r": None},
    "separation": {"s": 2, "rho": 2.0, "eta0": 0.9, "restarts": 32, "T": 2048},
    "rates": {"T": [256, 512, 1024, 2048, 4096, 8192], "reps": 200, "sigma": 0.2, "C1": 1.5,
              "gap": 3.0, "amplitudes": [1.0, -0.8, 1.2], "shrink": 0.1, "growth": 0.1},
    "noise_check": {"T": 512, "reps": 1000, "processes": [0, 1, 2], "n_u": 10, "sigma": 1.0},
}


def _merge(base, over, path=""):
    if over is None:
        return base
    if not isinstance(over, dict):
        raise ConfigError(f"section {path or '<root>'} must be a mapping")
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"unknown key {where!r}")
        if isinstance(base[k], dict):
            out[k] = _merge(base[k], v, where)
        else:
            out[k] = v
    return out


def load_config(path=None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    cfg = _merge(DEFAULTS, raw or {})
    _validate(cfg)
    return cfg


def _validate(cfg):
    def pos(section, key, integer=False):
        v = cfg[section][key]
        ok = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok or v <= 0:
            raise ConfigError(f"{section}.{key} must be a positive {'integer' if integer else 'number'}")

    pos("dictionary", "scale")
    pos("grid", "T", integer=True)
    pos("rates", "reps", integer=True)
    pos("noise_check", "reps", integer=True)
    pos("certify", "s", integer=True)
    pos("separation", "s", integer=True)
    if not 0 <= cfg["grid"]["shrink"] < 1:
        raise ConfigError("grid.shrink must lie in [0, 1)")
    if not isinstance(cfg["rates"]["T"], list) or not all(isinstance(t, int) and t > 1 for t in cfg["rates"]["T"]):
        raise ConfigError("rates.T must be a list of integers > 1")
    if not set(cfg["noise_check"]["processes"]) <= {0, 1, 2}:
        raise ConfigError("noise_check.processes must be drawn from 0, 1, 2")
