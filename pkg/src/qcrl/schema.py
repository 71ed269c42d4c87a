"""Published JSON schemas for run configs and every file the command line writes."""
from __future__ import annotations

import json

from .models import PRESETS

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_vector = {"type": "array", "items": _num}

BASIS_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["piecewise", "taylor", "fourier", "morlet"]},
        "n_segments": _posint,
        "n_terms": _posint,
        "n_harmonics": _posint,
        "window": {"enum": ["sin", "sin2", "gaussian"]},
        "sigma": _pos,
        "form": {"enum": ["phase", "cossin"]},
        "n_orders": _posint,
        "ratio": _pos,
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qcrl run config",
    "type": "object",
    "required": ["model"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "nt": {"type": "integer", "minimum": 16},
        "out": {"type": "string"},
        "model": {
            "type": "object",
            "required": ["preset"],
            "properties": {
                "preset": {"enum": sorted(PRESETS)},
                "gate_time": _pos,
                "basis": BASIS_SCHEMA,
            },
            "additionalProperties": False,
        },
        "optimize": {
            "type": "object",
            "properties": {
                "A_init": {"type": "array", "items": _vector},
                "area": {"oneOf": [_num, _vector]},
                "init_scale": {"type": "number", "minimum": 0},
                "weights": {"type": "array", "items": {"type": "number", "minimum": 0},
                            "minItems": 2, "maxItems": 2},
                "S1_target": {"type": "number", "minimum": 0},
                "S2_target": {"type": ["number", "null"], "minimum": 0},
                "max_iters": _posint,
                "method": {"enum": ["gd", "lbfgs"]},
                "amplitude_bound": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "undesired_weight": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "traverse": {
            "type": "object",
            "required": ["beginning", "dtheta"],
            "properties": {
                "beginning": {"type": "string"},
                "dtheta": {"type": "number", "not": {"const": 0}},
                "span": {"type": "number", "minimum": 0},
                "theta_range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "constraints": {
                    "type": "object",
                    "properties": {"s1": {"type": "boolean"}, "s2": {"type": "boolean"},
                                   "undesired": {"type": "boolean"}},
                    "additionalProperties": False,
                },
                "max_iters": _posint,
                "eps_irr": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "step_tol": _pos,
                "correction": {
                    "type": ["object", "null"],
                    "properties": {"max_inner": _posint, "angle_weight": {"type": "number", "minimum": 0},
                                   "constraint_weight": {"type": "number", "minimum": 0}},
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "required": ["records"],
            "properties": {
                "records": {"type": "string"},
                "delta_rel": _vector,
                "grid": {
                    "type": "object",
                    "properties": {"n": _posint, "lo": _pos, "hi": _pos},
                    "additionalProperties": False,
                },
                "select_every": _posint,
                "noises": {"type": "array", "items": {"type": "string"}},
            },
            "additionalProperties": False,
        },
        "noise": {
            "type": "object",
            "required": ["laws"],
            "properties": {
                "laws": {"type": "array", "items": {
                    "type": "object", "required": ["kind"],
                    "properties": {"kind": {"enum": ["fixed", "uniform", "gaussian"]}, "value": _num},
                    "additionalProperties": False}},
                "n_samples": _posint,
            },
            "additionalProperties": False,
        },
        "qeed": {
            "type": "object",
            "required": ["records"],
            "properties": {"records": {"type": "string"}, "select_every": _posint,
                           "noise": {"type": "string"}},
            "additionalProperties": False,
        },
        "interp": {
            "type": "object",
            "required": ["records", "theta"],
            "properties": {"records": {"type": "string"}, "theta": _num},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

_axis = {"type": "object", "additionalProperties": _num}

BEGINNING_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qcrl beginning pulse",
    "type": "object",
    "required": ["model", "A", "theta", "S1", "S2", "success"],
    "properties": {
        "model": CONFIG_SCHEMA["properties"]["model"],
        "A": {"type": "array", "items": _vector},
        "theta": _num,
        "S1": _axis,
        "S2": _axis,
        "success": {"type": "boolean"},
        "iterations": {"type": "integer"},
        "seed": {"type": ["integer", "null"]},
        "norm_kind": {"type": "string"},
    },
}

RECORD_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qcrl traversal record",
    "type": "object",
    "required": ["index", "theta", "A", "s1", "s2", "undesired", "constraints",
                 "dtheta_measured", "ortho_residual"],
    "properties": {
        "index": {"type": "integer", "minimum": 0},
        "theta": _num,
        "A": {"type": "array", "items": _vector},
        "s1": _axis,
        "s2": _axis,
        "undesired": _vector,
        "constraints": _vector,
        "dtheta_measured": _num,
        "ortho_residual": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qcrl traversal summary",
    "type": "object",
    "required": ["n_records", "status", "constraints"],
    "properties": {
        "n_records": {"type": "integer", "minimum": 0},
        "status": {"enum": ["complete", "aborted"]},
        "error": {"type": ["string", "null"]},
        "last_good_index": {"type": ["integer", "null"]},
        "theta_min": _num,
        "theta_max": _num,
        "constraints": {"type": "array", "items": {
            "type": "object", "required": ["label", "target", "min", "max"],
            "properties": {"label": {"type": "string"}, "target": _num, "min": _num, "max": _num}}},
    },
}

MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qcrl error-curve manifest",
    "type": "object",
    "required": ["noise", "entries"],
    "properties": {
        "noise": {"type": "string"},
        "entries": {"type": "array", "items": {
            "type": "object", "required": ["index", "theta", "file"],
            "properties": {"index": {"type": "integer"}, "theta": _num, "file": {"type": "string"}}}},
    },
}

INTERP_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qcrl interpolated pulse",
    "type": "object",
    "required": ["theta", "A", "theta_extracted"],
    "properties": {"theta": _num, "A": {"type": "array", "items": _vector}, "theta_extracted": _num},
}

SCHEMAS = {
    "config": CONFIG_SCHEMA,
    "beginning": BEGINNING_SCHEMA,
    "record": RECORD_SCHEMA,
    "summary": SUMMARY_SCHEMA,
    "manifest": MANIFEST_SCHEMA,
    "interp": INTERP_SCHEMA,
}


def dump_schema(name: str) -> str:
    return json.dumps(SCHEMAS[name], indent=2, sort_keys=True)
