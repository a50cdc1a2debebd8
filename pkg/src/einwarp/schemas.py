"""JSON scene schemas and payload builders for the command-line runner.

A scene file wraps one payload:

    {
      "schema_version": 1,
      "kind": "mwp-metric" | "structure-data" | "three-curvature-example" | "cylinder-query",
      "payload": {...},
      "grid": {"points_per_axis": 5, "inset": 0.12},
      "tolerances": {"einstein": 1e-6, ...},
      "seed": 0
    }

Function nodes use the expression-tree encoding {"op": ..., "args": [...]}
with ops const, t, add, mul, div, pow, sin, cos, sinh, cosh, exp and an
optional "domain" {"min", "max", "open"}.  Payload shapes are documented
in the README; validation is jsonschema Draft 2020-12.
"""

from __future__ import annotations

import jsonschema

from .classifier import ThreeCurvatureSpec
from .curvature import Fiber, MWPSpec, build_mwp_metric
from .errors import ConstraintError
from .hypersurface import StructureData
from .scalarfun import IntervalDomain, SmoothFn, fn_from_json
from .spaceform import SpaceFormChart

SCHEMA_VERSION = 1

_SMOOTHFN = {
    "$ref": "#/$defs/smoothfn",
}

_DEFS = {
    "smoothfn": {
        "type": "object",
        "required": ["op"],
        "properties": {
            "op": {
                "enum": ["const", "t", "add", "mul", "div", "pow",
                         "sin", "cos", "sinh", "cosh", "exp"],
            },
            "args": {"type": "array"},
            "domain": {"$ref": "#/$defs/interval"},
        },
    },
    "fn_or_number": {
        "anyOf": [{"type": "number"}, {"$ref": "#/$defs/smoothfn"}],
    },
    "interval": {
        "type": "object",
        "required": ["min", "max"],
        "properties": {
            "min": {"type": "number"},
            "max": {"type": "number"},
            "open": {"type": "boolean"},
        },
    },
    "fiber": {
        "type": "object",
        "required": ["dim", "curvature", "warping"],
        "properties": {
            "dim": {"type": "integer", "minimum": 1},
            "curvature": {"type": "number"},
            "radius": {"type": "number", "exclusiveMinimum": 0},
            "warping": _SMOOTHFN,
        },
    },
    "mwp": {
        "type": "object",
        "required": ["base", "fibers"],
        "properties": {
            "base": {"$ref": "#/$defs/interval"},
            "fibers": {
                "type": "array",
                "minItems": 1,
                "maxItems": 2,
                "items": {"$ref": "#/$defs/fiber"},
            },
            "rho": {"type": "number"},
        },
    },
}

PAYLOAD_SCHEMAS = {
    "mwp-metric": {"$ref": "#/$defs/mwp"},
    "structure-data": {
        "type": "object",
        "required": ["metric", "shape_blocks", "ambient"],
        "properties": {
            "metric": {"$ref": "#/$defs/mwp"},
            "shape_blocks": {
                "type": "array",
                "minItems": 2,
                "maxItems": 3,
                "items": {"$ref": "#/$defs/fn_or_number"},
            },
            "shape_offset": {"type": "number"},
            "theta": {"$ref": "#/$defs/fn_or_number"},
            "pi": {"$ref": "#/$defs/fn_or_number"},
            "T": {
                "anyOf": [
                    {"const": "grad-pi"},
                    {"type": "array", "items": {"type": "number"}},
                ],
            },
            "ambient": {
                "type": "object",
                "required": ["f", "c"],
                "properties": {
                    "f": _SMOOTHFN,
                    "c": {"enum": [-1, 0, 1]},
                },
            },
            "rho": {"type": "number"},
        },
    },
    "three-curvature-example": {
        "type": "object",
        "required": ["n", "p1", "p2", "k1", "k2", "rho"],
        "properties": {
            "n": {"type": "integer"},
            "p1": {"type": "integer"},
            "p2": {"type": "integer"},
            "k1": {"type": "number"},
            "k2": {"type": "number"},
            "rho": {"type": "number"},
            "branch": {"enum": ["increasing", "decreasing"]},
            "window": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": 2,
                "maxItems": 2,
            },
        },
    },
    "cylinder-query": {
        "type": "object",
        "required": ["n", "c", "rho"],
        "properties": {
            "n": {"type": "integer", "minimum": 4},
            "c": {"enum": [-1, 1]},
            "rho": {"type": "number"},
        },
    },
}

SCENE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind", "payload"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"enum": sorted(PAYLOAD_SCHEMAS)},
        "payload": {"type": "object"},
        "grid": {
            "type": "object",
            "properties": {
                "points_per_axis": {"type": "integer", "minimum": 2},
                "inset": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
            },
        },
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "seed": {"type": "integer", "minimum": 0},
    },
    "$defs": _DEFS,
}


def validate_scene(scene: dict) -> None:
    """Raise jsonschema.ValidationError if the scene or its payload is malformed."""
    jsonschema.validate(scene, SCENE_SCHEMA)
    kind = scene["kind"]
    payload_schema = dict(PAYLOAD_SCHEMAS[kind])
    payload_schema["$defs"] = _DEFS
    jsonschema.validate(scene["payload"], payload_schema)


# ---------------------------------------------------------------------------
# payload -> objects
# ---------------------------------------------------------------------------

def mwp_from_payload(payload: dict) -> MWPSpec:
    base = IntervalDomain.from_json(payload["base"])
    fibers = []
    for fp in payload["fibers"]:
        chart = SpaceFormChart(int(fp["dim"]), float(fp["curvature"]), float(fp.get("radius", 0.0)))
        warping = fn_from_json(fp["warping"])
        fibers.append(Fiber(chart, warping))
    return MWPSpec(base, tuple(fibers))


def _fn_of_s(obj) -> SmoothFn:
    return fn_from_json(obj)


def structure_data_from_payload(payload: dict) -> tuple[StructureData, MWPSpec]:
    """Build a StructureData whose fields are closed-form in the base coordinate.

    The shape operator is block diagonal, one scalar function of s per block
    (base direction first, then one per fiber), optionally shifted by
    shape_offset * Id.  theta is a function of s (default 0), pi a function
    of s (default the identity), and T either explicit constant components
    or the g-gradient of pi (the default, which matches T = grad(pi)).
    """
    import numpy as np

    mwp = mwp_from_payload(payload["metric"])
    metric = build_mwp_metric(mwp)
    d = metric.dim
    blocks = [_fn_of_s(b) for b in payload["shape_blocks"]]
    if len(blocks) != 1 + len(mwp.fibers):
        raise ConstraintError(
            f"need {1 + len(mwp.fibers)} shape blocks (base + fibers), got {len(blocks)}"
        )
    offset = float(payload.get("shape_offset", 0.0))
    slices = [slice(0, 1)] + mwp.fiber_slices()

    def shape_operator(pts):
        pts = np.asarray(pts, dtype=float)
        s = pts[..., 0]
        out = np.zeros(pts.shape[:-1] + (d, d))
        for fn, sl in zip(blocks, slices):
            val = np.asarray(fn(s)) + offset
            for i in range(sl.start, sl.stop):
                out[..., i, i] = val
        return out

    theta_fn = _fn_of_s(payload.get("theta", 0.0))

    def angle(pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(np.asarray(theta_fn(pts[..., 0])), pts.shape[:-1]).copy()

    if "pi" in payload:
        pi_fn = _fn_of_s(payload["pi"])
    else:
        from .scalarfun import Variable

        pi_fn = Variable()

    def height(pts):
        pts = np.asarray(pts, dtype=float)
        return np.asarray(pi_fn(pts[..., 0]))

    t_spec = payload.get("T", "grad-pi")
    if t_spec == "grad-pi":
        dpi = pi_fn.derivative()

        def tangent_part(pts):
            pts = np.asarray(pts, dtype=float)
            out = np.zeros(pts.shape[:-1] + (d,))
            out[..., 0] = dpi(pts[..., 0])  # g^{ss} = 1 in these coordinates
            return out

    else:
        t_const = np.asarray([float(v) for v in t_spec], dtype=float)
        if t_const.shape != (d,):
            raise ConstraintError(f"T must have {d} components, got {t_const.shape}")

        def tangent_part(pts):
            pts = np.asarray(pts, dtype=float)
            return np.broadcast_to(t_const, pts.shape[:-1] + (d,)).copy()

    f = fn_from_json(payload["ambient"]["f"])
    c = int(payload["ambient"]["c"])
    data = StructureData(
        metric=metric,
        shape_operator=shape_operator,
        tangent_part=tangent_part,
        angle=angle,
        height=height,
        warping=f,
        ambient_curvature=c,
    )
    return data, mwp


def example_spec_from_payload(payload: dict) -> ThreeCurvatureSpec:
    return ThreeCurvatureSpec.from_json(payload)


def solve_f_params(payload: dict) -> tuple[int, float, str]:
    """(n, rho, branch) for the solve-f command; works for either the
    three-curvature-example or the cylinder-query payload."""
    if "n" not in payload or "rho" not in payload:
        raise ConstraintError("solve-f needs fields n and rho in the payload")
    return int(payload["n"]), float(payload["rho"]), str(payload.get("branch", "increasing"))
