"""Run configuration: YAML text, validated against a JSON schema.

Every numeric default lives in ``DEFAULTS`` below; ``validate_config``
materialises them so that the returned mapping is complete.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import yaml
from jsonschema import Draft202012Validator

EXPERIMENTS = ("burnett", "slip", "layers", "compose", "residual", "converge")

DEFAULTS = {
    "experiment": None,
    "seed": 0,
    "output": None,
    "K": 1,
    "alpha": 1.0,
    "eps_list": [0.1, 0.05, 0.025],
    "model": {"kind": "bgk", "nu0": 1.0, "degree": None},
    "velocity": {"scheme": "tensor-gauss", "points_per_axis": 12, "perp_points": 6,
                 "v3_rule": "half-range", "cutoff": None},
    "knudsen": {"xi_max": 30.0, "xi_cells": 200},
    "scenario": {"T": 1.0, "theta0": 0.05, "tau0": 4.0, "pulse": 0.05, "pulse_center": 0.9,
                 "pulse_width": 0.4, "length": 3.5, "interior_cells": 600,
                 "zeta_max": 40.0, "layer_cells": 400},
    "reference": {"cells_per_eps": 8, "cfl": 0.5, "limiter": "minmod", "audit": True},
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


SCHEMA = _obj({
    "experiment": {"enum": list(EXPERIMENTS)},
    "seed": {"type": "integer", "minimum": 0},
    "output": {"type": ["string", "null"]},
    "K": {"type": "integer", "minimum": 0, "maximum": 3},
    "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    "eps_list": {"type": "array", "minItems": 1,
                 "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
    "model": _obj({"kind": {"enum": ["bgk", "hard-sphere"]}, "nu0": _pos,
                   "degree": {"type": ["integer", "null"], "minimum": 2, "maximum": 10}}),
    "velocity": _obj({"scheme": {"enum": ["tensor-gauss", "uniform-truncated"]},
                      "points_per_axis": {"type": "integer", "minimum": 4},
                      "perp_points": _posint,
                      "v3_rule": {"enum": ["half-range", "gauss"]},
                      "cutoff": {"type": ["number", "null"], "exclusiveMinimum": 0}}),
    "knudsen": _obj({"xi_max": _pos, "xi_cells": {"type": "integer", "minimum": 10}}),
    "scenario": _obj({"T": _pos, "theta0": _num, "tau0": _pos, "pulse": _num,
                      "pulse_center": _pos, "pulse_width": _pos, "length": _pos,
                      "interior_cells": {"type": "integer", "minimum": 16},
                      "zeta_max": _pos, "layer_cells": {"type": "integer", "minimum": 16}}),
    "reference": _obj({"cells_per_eps": {"type": "integer", "minimum": 4},
                       "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.9},
                       "limiter": {"enum": ["minmod", "vanleer"]},
                       "audit": {"type": "boolean"}}),
})

_MESSAGES = {
    ("alpha", "exclusiveMinimum"): "alpha must lie in the supported range (0,1]",
    ("alpha", "maximum"): "alpha must lie in the supported range (0,1]",
}


class ConfigError(ValueError):
    """Aggregated validation failure; ``errors`` holds 'path: message' strings."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    data: dict

    def __getitem__(self, key):
        return self.data[key]

    @property
    def experiment(self):
        return self.data["experiment"]

    def canonical(self):
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _path(err):
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return ".".join(parts + extra[:1]) or "<root>", f"unknown key(s) {extra}"
    key = parts[0] if parts else ""
    msg = _MESSAGES.get((key, err.validator), err.message)
    return ".".join(parts) or "<root>", msg


def validate_config(text, experiment=None):
    """Parse YAML text, validate it and fill defaults.

    ``experiment`` (the CLI subcommand) fills or must match the
    ``experiment`` key.  Raises ConfigError with every problem found.
    """
    try:
        raw = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError([f"<root>: not valid YAML ({exc})"]) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a mapping of keys to values"])
    errors = []
    for err in sorted(Draft202012Validator(SCHEMA).iter_errors(raw), key=lambda e: [str(p) for p in e.absolute_path]):
        where, msg = _path(err)
        errors.append(f"{where}: {msg}")
    eps = raw.get("eps_list")
    if isinstance(eps, list) and all(isinstance(e, (int, float)) for e in eps):
        if list(eps) != sorted(eps, reverse=True) or len(set(eps)) != len(eps):
            errors.append("eps_list: must be strictly decreasing (sorted from largest to smallest)")
    if experiment is not None:
        given = raw.get("experiment")
        if given is not None and given != experiment:
            errors.append(f"experiment: config says {given!r} but the command is {experiment!r}")
    if errors:
        raise ConfigError(errors)
    data = _merge(DEFAULTS, raw)
    if experiment is not None:
        data["experiment"] = experiment
    if data["experiment"] is None:
        raise ConfigError(["experiment: missing (give it in the file or as the subcommand)"])
    return RunConfig(data)


def load_config(path, experiment=None):
    with open(path, encoding="utf-8") as fh:
        return validate_config(fh.read(), experiment)
