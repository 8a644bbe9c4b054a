"""JSON schemas for problem files (draft 2020-12). Documented in docs/formats.md."""

NUMBER = {"type": "number"}
NONNEG = {"type": "number", "minimum": 0}
VECTOR = {"type": "array", "items": NUMBER}
MATRIX = {"type": "array", "items": VECTOR, "minItems": 1}

DENSITY = {
    "type": "object",
    "required": ["kind", "params"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["sin", "cos", "poly", "samples"]},
        "params": {"type": "array", "items": NUMBER, "minItems": 1},
    },
}

MEASURE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "atoms": {"type": "array", "items": {"type": "array", "items": NUMBER, "minItems": 2, "maxItems": 2}},
        "density": {"oneOf": [DENSITY, {"type": "null"}]},
        "quad_nodes": {"type": "integer", "minimum": 1},
    },
}
MEASURES = {"type": "array", "items": MEASURE, "minItems": 1}

MODEL = {
    "type": "object",
    "required": ["kind", "eps"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["chebyshev", "polynomial", "odd-polynomial"]},
        "degrees": {"type": "array", "items": {"type": "integer", "minimum": 0}, "uniqueItems": True},
        "n": {"type": "integer", "minimum": 0},
        "eps": {"type": "number", "exclusiveMinimum": 0},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "chebyshev"}}}, "then": {"required": ["degrees"]}},
        {"if": {"properties": {"kind": {"enum": ["polynomial", "odd-polynomial"]}}}, "then": {"required": ["n"]}},
    ],
}

NOISE = {
    "type": "object",
    "required": ["p", "eta"],
    "additionalProperties": False,
    "properties": {
        "p": {"oneOf": [{"enum": [1, 2]}, {"enum": ["inf", "1", "2"]}]},
        "eta": NONNEG,
    },
}

SOLVER = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "gap_tol": {"type": "number", "exclusiveMinimum": 0},
        "feas_tol": {"type": "number", "exclusiveMinimum": 0},
        "dist_tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
    },
}

COMMON = {
    "solver": SOLVER,
    "seed": {"type": "integer", "minimum": 0},
    "budget": {"type": "integer", "minimum": 1},
}

TRUNCATION = {
    "gap_tol": {"type": "number", "exclusiveMinimum": 0},
    "N_max": {"type": "integer", "minimum": 1},
}


def _kind(name, required, properties):
    return {
        "type": "object",
        "required": ["kind", *required],
        "additionalProperties": False,
        "properties": {"kind": {"const": name}, **COMMON, **properties},
    }


POLYTOPE_CENTER = _kind("polytope-center", ["A", "b", "L", "y", "eta", "Q"], {
    "A": MATRIX, "b": VECTOR, "L": MATRIX, "y": VECTOR, "eta": NONNEG, "Q": MATRIX,
})

POLYBALL_CENTER = _kind("polyball-center", ["n", "observations", "Q", "y", "eta"], {
    "n": {"type": "integer", "minimum": 1},
    "observations": {"type": "array", "items": MEASURE},
    "Q": MEASURES,
    "y": VECTOR,
    "eta": NONNEG,
})

ESTIMATE = _kind("estimate", ["model", "noise", "observations", "quantity"], {
    "model": MODEL, "noise": NOISE, "observations": MEASURES, "quantity": MEASURE, "y": VECTOR, **TRUNCATION,
})

RECOVER = _kind("recover", ["model", "noise", "observations", "y"], {
    "model": MODEL, "noise": NOISE, "observations": MEASURES, "y": VECTOR,
    "grid": {"oneOf": [{"type": "integer", "minimum": 2}, {"type": "array", "items": NUMBER, "minItems": 1}]},
    **TRUNCATION,
})

PROBE = _kind("probe", ["points", "model", "noise"], {
    "points": {"type": "array", "items": NUMBER, "minItems": 1},
    "model": MODEL,
    "noise": NOISE,
    "nodes": {"type": "array", "items": {"type": "integer", "minimum": 0}},
})

ORACLE_CHECK = _kind("oracle-check", ["problem"], {"problem": {"type": "object"}})

BY_KIND = {
    "polytope-center": POLYTOPE_CENTER,
    "polyball-center": POLYBALL_CENTER,
    "estimate": ESTIMATE,
    "recover": RECOVER,
    "probe": PROBE,
    "oracle-check": ORACLE_CHECK,
}
