import json
import logging
import os

import jsonschema
import numpy as np

from models.ica_lingam import StructuralMatrix
from models.svar_model import SvarModel, structure_inverse
from utils.exceptions import (
    InputNotFoundError,
    MicdtError,
    ModelParseError,
    SchemaVersionMismatchError,
)
from utils.timeseries import StandardizationParams

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}}
_MATRIX = {"type": "array", "items": _NUMBER_LIST}
_MATRIX_STACK = {"type": "array", "minItems": 1, "items": _MATRIX}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "channels", "order", "s0", "lagged"],
    "properties": {
        "schema_version": {"type": "string"},
        "channels": {"type": "array", "minItems": 1, "items": {"type": "string", "minLength": 1}},
        "order": {"type": "integer", "minimum": 1},
        "s0": _MATRIX,
        "causal_order": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "lagged": _MATRIX_STACK,
        "uncorrected_lagged": _MATRIX_STACK,
        "noise_variances": _NUMBER_LIST,
        "preprocessing": {
            "type": "object",
            "required": ["means", "stds"],
            "properties": {"means": _NUMBER_LIST, "stds": _NUMBER_LIST},
        },
        "fit_meta": {"type": "object"},
        "clamps": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}


# ==================================
# Model <-> dict
# ==================================

def model_to_dict(model):
    """Plain JSON-ready dict of a model"""
    return {
        "schema_version": SCHEMA_VERSION,
        "channels": list(model.channels),
        "order": model.order,
        "s0": model.s0.s0.tolist(),
        "causal_order": list(model.s0.causal_order),
        "lagged": model.lagged.tolist(),
        "uncorrected_lagged": model.uncorrected_lagged.tolist(),
        "noise_variances": model.noise_variances.tolist(),
        "preprocessing": {
            "means": model.preprocessing.means.tolist(),
            "stds": model.preprocessing.stds.tolist(),
        },
        "fit_meta": {**model.fit_meta, "pruned": model.s0.pruned},
        "clamps": dict(model.clamps),
    }


def validate_model_dict(document):
    """
    Check a decoded model document against the schema

    Raises:
        SchemaVersionMismatchError: unknown schema_version
        ModelParseError: any other schema violation
    """
    if isinstance(document, dict) and "schema_version" in document:
        if document["schema_version"] != SCHEMA_VERSION:
            raise SchemaVersionMismatchError(
                f"Unsupported schema_version {document['schema_version']!r}; expected {SCHEMA_VERSION!r}"
            )
    try:
        jsonschema.validate(document, MODEL_SCHEMA)
    except jsonschema.ValidationError as e:
        location = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ModelParseError(f"Invalid model JSON at {location}: {e.message}") from None


def model_from_dict(document):
    """
    Build an SvarModel from a decoded model document

    Missing optional keys take defaults: identity causal order, uncorrected
    lags from the reduced form, unit noise variances, identity preprocessing.
    """
    validate_model_dict(document)

    channels = document["channels"]
    n_channels = len(channels)
    order = document["order"]

    try:
        s0 = np.array(document["s0"], dtype=float)
        lagged = np.array(document["lagged"], dtype=float)
    except ValueError as e:
        raise ModelParseError(f"Ragged matrix in model JSON: {e}") from None
    if s0.shape != (n_channels, n_channels):
        raise ModelParseError(f"s0 must be {n_channels}x{n_channels}, got shape {s0.shape}")
    if lagged.shape != (order, n_channels, n_channels):
        raise ModelParseError(
            f"lagged must have shape ({order}, {n_channels}, {n_channels}), got {lagged.shape}"
        )

    fit_meta = dict(document.get("fit_meta", {}))
    causal_order = document.get("causal_order", list(range(n_channels)))
    pruned = bool(fit_meta.pop("pruned", False))

    try:
        structural = StructuralMatrix(s0=s0, causal_order=causal_order, pruned=pruned)

        if "uncorrected_lagged" in document:
            uncorrected = np.array(document["uncorrected_lagged"], dtype=float)
        else:
            inverse = structure_inverse(structural)
            uncorrected = np.stack([inverse @ s for s in lagged])

        preprocessing = document.get("preprocessing")
        if preprocessing is None:
            params = StandardizationParams.identity(n_channels)
        else:
            params = StandardizationParams(preprocessing["means"], preprocessing["stds"])

        return SvarModel(
            channels=tuple(channels),
            s0=structural,
            lagged=lagged,
            uncorrected_lagged=uncorrected,
            noise_variances=document.get("noise_variances", [1.0] * n_channels),
            preprocessing=params,
            fit_meta=fit_meta,
            clamps=document.get("clamps", {}),
        )
    except ValueError as e:
        raise ModelParseError(f"Inconsistent model JSON: {e}") from None
    except MicdtError as e:
        if isinstance(e, ModelParseError):
            raise
        raise ModelParseError(f"Inconsistent model JSON: {e}") from None


# ==================================
# File operations
# ==================================

def save_model(model, path):
    """
    Write a model as JSON

    Floats are written with Python's shortest round-trip repr, so every
    float64 reloads bit-exactly.
    """
    document = model_to_dict(model)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, allow_nan=False)
        f.write("\n")
    logger.info(f"Saved {model.n_channels}-channel SVAR({model.order}) model to {path}")


def load_model(path):
    """Read a model JSON file written by save_model (or by hand)"""
    if not os.path.isfile(path):
        raise InputNotFoundError(f"Model file not found: {path}")

    with open(path, encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelParseError(f"Malformed JSON in {path}: {e.msg}", row=e.lineno, column=e.colno) from None

    model = model_from_dict(document)
    logger.info(f"Loaded {model.n_channels}-channel SVAR({model.order}) model from {path}")
    return model
