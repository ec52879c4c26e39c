"""
JSON experiment configuration: schema, defaults and a canonical hash.
"""

from __future__ import annotations

import copy
import hashlib
import json

import jsonschema

from .errors import ConfigError

__all__ = ["MODES", "SCHEMA", "load_config", "normalize_config", "config_hash", "canonical_json"]

MODES = ("coeffs", "predict", "simulate", "verify", "regression", "davis-gut")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_SLOWLY_VARYING = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["constant", "log_power"]},
        "c": _POS, "gamma": _NUM, "scale": _POS,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_FIELD = {
    "type": "object",
    "oneOf": [
        {"properties": {"kind": {"const": "finite"},
                        "coefficients": {"type": "array", "minItems": 1,
                                         "items": {"type": "array", "minItems": 3, "maxItems": 3,
                                                   "prefixItems": [{"type": "integer"}, {"type": "integer"},
                                                                   _NUM],
                                                   "items": _NUM}}},
         "required": ["kind", "coefficients"], "additionalProperties": False},
        {"properties": {"kind": {"const": "short_range"}, "decay": {"enum": ["geometric", "power"]},
                        "rate": _POS, "beta": _POS, "scale": _NUM},
         "required": ["kind"], "additionalProperties": False},
        {"properties": {"kind": {"const": "long_range"}, "beta": _NUM, "slowly_varying": _SLOWLY_VARYING,
                        "angular": {"type": "object"}, "a00": _NUM},
         "required": ["kind", "beta"], "additionalProperties": False},
    ],
}

_INNOVATION = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["gaussian", "rademacher", "uniform", "discrete", "student_like", "hybrid"]},
        "t": _NUM, "h": _SLOWLY_VARYING, "core_weight": _NUM, "x0": _POS,
        "values": {"type": "array", "items": _NUM}, "probs": {"type": "array", "items": _NUM},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_REGION = {
    "type": "object",
    "properties": {"rectangles": {"type": "array", "minItems": 1,
                                  "items": {"type": "array", "items": {"type": "integer"},
                                            "minItems": 4, "maxItems": 4}},
                   "label": {"type": "string"}},
    "required": ["rectangles"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "mode": {"enum": list(MODES)},
        "field": _FIELD,
        "n": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "regions": {"type": "array", "items": _REGION, "minItems": 1},
        "innovation": _INNOVATION,
        "exponents": {"type": "object", "properties": {"p": _POS, "t": _POS},
                      "additionalProperties": False},
        "thresholds": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "n_samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "certify": {"enum": ["tail", "sigma2"]},
        "two_sided": {"type": "boolean"},
        "margin": {"type": "number", "minimum": 0},
        "tolerances": {"type": "object",
                       "properties": {"ratio_low": _NUM, "ratio_high": _NUM,
                                      "require_validity": {"type": "boolean"}},
                       "additionalProperties": False},
        "regression": {"type": "object",
                       "properties": {"kernel": {"enum": ["epanechnikov", "gaussian", "flat"]},
                                      "bandwidth": _POS, "eval_point": {"type": "array", "items": _NUM},
                                      "dim": {"enum": [1, 2]}},
                       "additionalProperties": False},
        "davis_gut": {"type": "object",
                      "properties": {"weight": {"enum": ["one", "logpow", "log"]}, "r": _NUM, "c": _NUM,
                                     "epsilon": _NUM, "b": _NUM, "corollary": {"enum": ["C31", "C32", "C33"]},
                                     "ns": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                                     "mc": {"type": "boolean"}, "psi_max": _POS},
                      "additionalProperties": False},
        "output": {"type": "object",
                   "properties": {"weights": {"type": "boolean"}},
                   "additionalProperties": False},
    },
    "required": ["mode"],
    "additionalProperties": False,
}

DEFAULTS = {
    "field": {"kind": "finite", "coefficients": [[0, 0, 1.0]]},
    "innovation": {"kind": "gaussian"},
    "exponents": {"p": 4.0},
    "thresholds": [1.0, 2.0],
    "n_samples": 1_000_000,
    "seed": 0,
    "epsilon": 1e-6,
    "certify": "tail",
    "two_sided": False,
    "margin": 0.05,
    "tolerances": {"ratio_low": 0.85, "ratio_high": 1.15, "require_validity": True},
    "output": {"weights": False},
}

_MODE_DEFAULTS = {
    "regression": {"regression": {"kernel": "epanechnikov", "bandwidth": 0.1, "eval_point": [0.5, 0.5],
                                  "dim": 2}},
    "davis-gut": {"davis_gut": {"weight": "one", "r": 0.0, "epsilon": 0.0, "b": 0.0,
                                "ns": [16, 32, 64], "mc": False, "psi_max": 1e6}},
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def normalize_config(raw, seed=None):
    """Validate ``raw`` and fill defaults; ``seed`` overrides the config's seed.

    Raises
    ------
    ConfigError
        On schema violations or unresolved cross-references.
    """
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, _MODE_DEFAULTS.get(raw["mode"], {}))
    cfg = _merge(cfg, raw)
    if seed is not None:
        if seed < 0:
            raise ConfigError("seed must be nonnegative")
        cfg["seed"] = int(seed)
    if "n" not in cfg and "regions" not in cfg and cfg["mode"] != "davis-gut":
        cfg["n"] = [10]
    if "n" in cfg and "regions" in cfg:
        raise ConfigError("give either 'n' (square regions) or 'regions', not both")
    cfg["exponents"] = {k: float(v) for k, v in cfg["exponents"].items()}
    cfg["thresholds"] = [float(x) for x in cfg["thresholds"]]
    if cfg["thresholds"] != sorted(cfg["thresholds"]):
        raise ConfigError("thresholds must be sorted ascending")
    heavy = cfg["innovation"]["kind"] in ("student_like", "hybrid")
    if heavy and "t" not in cfg["innovation"]:
        raise ConfigError("heavy-tailed innovations need a tail index 't'")
    if heavy:
        cfg["exponents"].setdefault("t", float(cfg["innovation"]["t"]))
        if cfg["exponents"]["t"] != float(cfg["innovation"]["t"]):
            raise ConfigError("exponents.t must equal the innovation's tail index")
    if cfg["mode"] in ("predict", "verify", "regression") and cfg["exponents"].get("p", 0) <= 2:
        raise ConfigError("exponent p must exceed 2")
    if cfg["mode"] == "regression" and len(cfg["regression"]["eval_point"]) != cfg["regression"]["dim"]:
        raise ConfigError("regression.eval_point must have length regression.dim")
    return cfg


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg):
    """SHA-256 of the canonical JSON of a normalized config."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def load_config(path, seed=None, mode=None):
    """Read, parse and normalize a JSON config file.

    ``mode`` fills in a missing ``"mode"`` key (the CLI subcommand).
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if mode is not None:
        raw.setdefault("mode", mode)
    return normalize_config(raw, seed)
