"""Deterministic JSON/CSV output and schema validation.

Reports never carry timestamps or host details, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .measure import ProductMeasure, Word, measure_to_dict

MAX_SAFE_INT = 2**53


def to_jsonable(obj):
    """Plain JSON types; non-finite floats and huge ints become strings."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        v = int(obj)
        return str(v) if abs(v) > MAX_SAFE_INT else v
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Word):
        return str(obj)
    if isinstance(obj, ProductMeasure):
        return to_jsonable(measure_to_dict(obj))
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj):
        return to_jsonable(dataclasses.asdict(obj))
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("bernshift").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def schema_names() -> list[str]:
    root = resources.files("bernshift").joinpath("schemas")
    return sorted(p.name.removesuffix(".schema.json") for p in root.iterdir() if p.name.endswith(".schema.json"))


def validate(doc, name: str) -> None:
    """Raise jsonschema.ValidationError if ``doc`` does not match schema ``name``."""
    schema = load_schema(name)
    jsonschema.Draft202012Validator(schema).validate(to_jsonable(doc))


# result kinds whose payload has a dedicated schema
RESULT_SCHEMAS = {"certificate": "certificate", "schedule": "schedule", "classification": "classification"}


def envelope(kind: str, result, *, command=(), seed: int = 0, budgets=None, measure=None) -> dict:
    doc = {
        "schema": "bernshift.report",
        "version": __version__,
        "kind": kind,
        "command": list(command),
        "seed": int(seed),
        "budgets": dict(budgets or {}),
        "result": result,
    }
    if measure is not None:
        doc["measure"] = measure_to_dict(measure) if isinstance(measure, ProductMeasure) else measure
    return to_jsonable(doc)


def validate_report(doc: dict) -> None:
    validate(doc, "report")
    if "measure" in doc:
        validate(doc["measure"], "measure")
    if doc["kind"] in RESULT_SCHEMAS:
        validate(doc["result"], RESULT_SCHEMAS[doc["kind"]])


def write_report(path: Path, doc: dict) -> Path:
    validate_report(doc)
    return write_text(path, dumps(doc))


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def rows_csv(header, rows) -> str:
    """CSV with a header row; floats use repr for exact round trips."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()
