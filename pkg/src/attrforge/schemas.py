"""JSON Schema documents for the file formats the CLI reads and writes."""

EDIT_SPEC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "attrforge edit spec",
    "type": "object",
    "properties": {
        "kind": {"enum": ["background", "size", "position", "direction"]},
        "t0": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "mode": {"enum": ["guided", "invert", "random", "template"]},
        "lambda": {"type": "number"},
        "adversarial": {"type": "boolean"},
        "band": {"enum": ["all", "high"]},
        "cutoff": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "template": {"enum": ["checker", "stripe"]},
        "period": {"type": "integer", "minimum": 1},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "rate": {
            "oneOf": [
                {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                {"const": "full"},
            ]
        },
        "offset": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 2,
            "maxItems": 2,
        },
        "angle": {"type": "number"},
    },
    "required": ["kind", "t0", "seed"],
    "additionalProperties": False,
}

VARIANT_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "spec": EDIT_SPEC_SCHEMA,
        "output": {"type": "string"},
        "sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "skip_reason": {"type": "string"},
    },
    "required": ["name"],
    "oneOf": [
        {"required": ["spec", "output", "sha256"]},
        {"required": ["skip_reason"]},
    ],
    "additionalProperties": False,
}

MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "attrforge suite manifest",
    "type": "object",
    "properties": {
        "format": {"const": "attrforge-manifest"},
        "version": {"const": 1},
        "seed": {"type": "integer"},
        "config": {"type": "object"},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "source": {"type": "string"},
                    "mask": {"type": "string"},
                    "label": {"type": "integer"},
                    "seed": {"type": "integer"},
                    "variants": {"type": "array", "items": VARIANT_SCHEMA},
                },
                "required": ["source", "mask", "label", "seed", "variants"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["format", "version", "seed", "entries"],
    "additionalProperties": False,
}

INDEX_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "attrforge image index",
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "image": {"type": "string"},
            "mask": {"type": "string"},
            "label": {"type": "integer"},
        },
        "required": ["image", "mask"],
        "additionalProperties": False,
    },
    "minItems": 1,
}

SCHEDULE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "attrforge noise schedule",
    "type": "object",
    "properties": {
        "T": {"type": "integer", "minimum": 1},
        "beta": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "minItems": 1,
        },
    },
    "required": ["T", "beta"],
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "attrforge evaluation report",
    "type": "object",
    "properties": {
        "original": {
            "type": "object",
            "properties": {
                "n": {"type": "integer"},
                "top1": {"type": "number"},
                "top1_se": {"type": "number"},
                "per_class_top1": {"type": "object"},
            },
            "required": ["n", "top1"],
        },
        "variants": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {
                    "n": {"type": "integer"},
                    "top1": {"type": "number"},
                    "top1_se": {"type": "number"},
                    "da": {"type": "number"},
                    "per_class_da": {"type": "object"},
                },
                "required": ["n", "top1", "da"],
            },
        },
        "average_da": {"type": "number"},
        "skips": {"type": "array"},
    },
    "required": ["original", "variants", "average_da"],
}


def all_schemas() -> dict:
    return {
        "edit-spec": EDIT_SPEC_SCHEMA,
        "manifest": MANIFEST_SCHEMA,
        "index": INDEX_SCHEMA,
        "schedule": SCHEDULE_SCHEMA,
        "report": REPORT_SCHEMA,
    }
