import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bernshift.catalog import builtin, builtin_names
from bernshift.measure import measure_to_dict
from bernshift.reporting import dumps, envelope, load_schema, rows_csv, schema_names, to_jsonable, validate, validate_report
from bernshift.tail import essential_value_certificate


def test_shipped_schemas():
    names = schema_names()
    assert {"measure", "certificate", "schedule", "classification", "report"} <= set(names)
    for n in names:
        jsonschema.Draft202012Validator.check_schema(load_schema(n))


def test_special_values():
    assert to_jsonable([math.inf, -math.inf, math.nan]) == ["inf", "-inf", "nan"]
    assert to_jsonable(2**60) == str(2**60)
    assert to_jsonable(np.int64(5)) == 5
    assert to_jsonable(np.bool_(True)) is True


@given(st.recursive(
    st.none() | st.booleans() | st.integers() | st.floats() | st.text(max_size=5),
    lambda c: st.lists(c, max_size=4) | st.dictionaries(st.text(max_size=4), c, max_size=4),
    max_leaves=20,
))
def test_dumps_is_strict_json(obj):
    text = dumps(obj)
    json.loads(text)  # no NaN/Infinity literals
    assert dumps(json.loads(text)) == text


@pytest.mark.parametrize("name", builtin_names())
def test_builtin_measures_validate(name):
    validate(measure_to_dict(builtin(name)), "measure")


def test_measure_schema_rejects_bad_kind():
    doc = measure_to_dict(builtin("fair"))
    doc["rule"]["kind"] = "nonsense"
    with pytest.raises(jsonschema.ValidationError):
        validate(doc, "measure")


def test_certificate_envelope_validates():
    c = essential_value_certificate(builtin("step-third"), 1 / 3, 0.05, "01", 100_000)
    doc = envelope("certificate", c.to_dict(), command=["certify"], seed=0, measure=builtin("step-third"))
    validate_report(doc)
    bad = dict(doc, extra=1)
    with pytest.raises(jsonschema.ValidationError):
        validate_report(bad)


def test_rows_csv_roundtrip():
    text = rows_csv(["a", "b"], [(1, 0.1), (2, 1 / 3)])
    lines = text.splitlines()
    assert lines[0] == "a,b"
    assert float(lines[2].split(",")[1]) == 1 / 3
