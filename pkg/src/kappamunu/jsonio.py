"""JSON spec loading, schemas and a deterministic report emitter."""

from __future__ import annotations

import json
import math

import jsonschema
import numpy as np

from . import catalog
from .errors import NumericError, StructureError, UsageError
from .geometry_core import LieAlgebraSpec, LieBackend, check_metric, constant_field
from .structure import AlmostContactStructure

_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

SPEC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ManifoldSpec",
    "type": "object",
    "oneOf": [
        {
            "description": "left-invariant structure on a Lie group",
            "required": ["backend", "structure_constants", "phi", "xi_index"],
            "not": {"required": ["catalog"]},
        },
        {
            "description": "reference to a built-in catalog entry",
            "required": ["catalog"],
        },
    ],
    "properties": {
        "backend": {"enum": ["lie", "chart"]},
        "name": {"type": "string"},
        "dim": {"type": "integer", "minimum": 3},
        "structure_constants": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        },
        "metric": _matrix,
        "phi": _matrix,
        "xi_index": {"type": "integer", "minimum": 0},
        "eta": {"type": "array", "items": {"type": "number"}},
        "catalog": {"type": "string"},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "sample_points": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}},
    },
    "additionalProperties": False,
}

_check = {
    "type": "object",
    "required": ["name", "value", "tol", "op", "passed"],
    "properties": {
        "name": {"type": "string"},
        "value": {"type": "number"},
        "tol": {"type": "number"},
        "op": {"enum": ["<=", ">"]},
        "passed": {"type": "boolean"},
        "detail": {"type": "string"},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Report",
    "type": "object",
    "required": ["engine", "command", "seed", "spec", "checks", "passed"],
    "properties": {
        "engine": {
            "type": "object",
            "required": ["name", "version"],
            "properties": {"name": {"type": "string"}, "version": {"type": "string"}},
        },
        "command": {"enum": ["classify", "kmn", "decompose", "deform", "verify", "catalog"]},
        "seed": {"type": "integer"},
        "spec": {"type": "object"},
        "model": {"type": "object"},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "classification": {"type": "object"},
        "h": {"type": "array"},
        "kmn": {"type": "array"},
        "identities": {"type": "object"},
        "curvature": {"type": "object"},
        "decomposition": {"type": "object"},
        "dim3": {"type": "object"},
        "obstruction": {"type": "object"},
        "deformation": {"type": "object"},
        "catalog": {"type": "array"},
        "entry": {"type": "object"},
        "stopped": {"type": "string"},
        "checks": {"type": "array", "items": _check},
        "passed": {"type": "boolean"},
    },
    "additionalProperties": False,
}

ERROR_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ErrorReport",
    "type": "object",
    "required": ["error"],
    "properties": {
        "error": {
            "type": "object",
            "required": ["kind", "message"],
            "properties": {
                "kind": {"enum": ["usage", "spec", "numeric"]},
                "message": {"type": "string"},
                "line": {"type": "integer"},
                "column": {"type": "integer"},
                "operation": {"type": "string"},
            },
        }
    },
}


class SpecError(UsageError):
    """A spec file that cannot be parsed or fails the schema."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        super().__init__(message)


# ---------------------------------------------------------------------------
# emitter


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _emit(obj, indent, level, path, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for n, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(k)}: ")
            _emit(v, indent, level + 1, f"{path}.{k}", out)
            out.append(",\n" if n < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            out.append("[")
            for n, v in enumerate(obj):
                _emit(v, indent, level, f"{path}[{n}]", out)
                if n < len(obj) - 1:
                    out.append(", ")
            out.append("]")
            return
        out.append("[\n")
        for n, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, f"{path}[{n}]", out)
            out.append(",\n" if n < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        if not math.isfinite(obj):
            raise NumericError(f"report field {path or '<root>'}", repr(obj))
        out.append(format(obj, ".17g"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__} at {path}")


def dumps(obj, indent=2):
    """Deterministic JSON; floats carry 17 significant digits, non-finite values raise."""
    out = []
    _emit(_plain(obj), indent, 0, "", out)
    return "".join(out) + "\n"


# ---------------------------------------------------------------------------
# spec loading


def parse_spec_text(text, source="<spec>"):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}", exc.lineno, exc.colno) from None
    try:
        jsonschema.validate(data, SPEC_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SpecError(f"{source}: schema violation at {where}: {exc.message}") from None
    return data


def load_spec(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc.strerror}") from None
    return parse_spec_text(text, str(path))


def build_from_spec(data):
    """``(BuiltModel, sample_points or None)`` for a parsed spec."""
    if "catalog" in data:
        model = catalog.build(data["catalog"], data.get("params", {}))
        if "backend" in data and data["backend"] != model.backend.kind:
            raise SpecError(f"catalog entry {data['catalog']} uses backend {model.backend.kind}, not {data['backend']}")
        pts = data.get("sample_points")
        if pts is not None:
            pts = [np.asarray(p, dtype=float) for p in pts]
            for p in pts:
                if p.shape != (model.structure.dim,):
                    raise SpecError(f"sample point {p.tolist()} has the wrong dimension")
        return model, pts
    if data["backend"] != "lie":
        raise SpecError("explicit chart specs are not supported; reference a catalog entry instead")
    c = np.asarray(data["structure_constants"], dtype=float)
    if c.ndim != 3 or len(set(c.shape)) != 1:
        raise SpecError("structure_constants must be a d x d x d array")
    d = c.shape[0]
    if "dim" in data and data["dim"] != d:
        raise SpecError(f"dim = {data['dim']} but structure_constants are {d}-dimensional")
    G = np.asarray(data.get("metric", np.eye(d).tolist()), dtype=float)
    phi = np.asarray(data["phi"], dtype=float)
    if G.shape != (d, d) or phi.shape != (d, d):
        raise SpecError("metric and phi must be d x d")
    k = data["xi_index"]
    if k >= d:
        raise SpecError(f"xi_index {k} out of range for dimension {d}")
    try:
        check_metric(G, "metric")
        algebra = LieAlgebraSpec(c, G)
    except StructureError as exc:
        raise SpecError(str(exc)) from None
    xi = np.zeros(d)
    xi[k] = 1.0
    eta = np.asarray(data["eta"], dtype=float) if "eta" in data else G @ xi
    if eta.shape != (d,):
        raise SpecError("eta must have d components")
    name = data.get("name", "spec")
    backend = LieBackend(algebra, name=name)
    structure = AlmostContactStructure(
        backend,
        constant_field("(1,1)-tensor", phi, "phi"),
        constant_field("vector", xi, "xi"),
        constant_field("1-form", eta, "eta"),
        name,
    )
    return catalog.BuiltModel(name, {}, structure, {}), None
