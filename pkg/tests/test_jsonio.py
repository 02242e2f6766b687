import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from kappamunu.catalog import reeb_action_constants, standard_phi
from kappamunu.errors import NumericError
from kappamunu.jsonio import (
    ERROR_SCHEMA,
    REPORT_SCHEMA,
    SPEC_SCHEMA,
    SpecError,
    build_from_spec,
    dumps,
    parse_spec_text,
)
from kappamunu.structure import classify, validate

DOCS = Path(__file__).resolve().parent.parent / "docs"


@pytest.mark.parametrize(
    "fname, schema",
    [("manifold_spec", SPEC_SCHEMA), ("report", REPORT_SCHEMA), ("error", ERROR_SCHEMA)],
)
def test_shipped_schemas_match(fname, schema):
    assert json.loads((DOCS / f"{fname}.schema.json").read_text()) == schema
    jsonschema.Draft202012Validator.check_schema(schema)


def test_dumps_round_trip_exact():
    vals = [0.1, 1 / 3, np.pi, -2.5e-300, 1e22]
    out = json.loads(dumps({"x": vals, "m": np.eye(2), "flag": np.bool_(True), "k": np.int64(3)}))
    assert out["x"] == vals
    assert out["m"] == [[1.0, 0.0], [0.0, 1.0]]
    assert out["flag"] is True and out["k"] == 3


def test_dumps_names_nonfinite_field():
    with pytest.raises(NumericError) as exc:
        dumps({"kmn": [{"kappa": float("nan")}]})
    assert "kmn[0].kappa" in exc.value.operation


def test_parse_error_has_line_and_column():
    text = '{\n  "catalog": "cosym3",\n  "params": {"b": 1,}\n}'
    with pytest.raises(SpecError) as exc:
        parse_spec_text(text, "s.json")
    assert (exc.value.line, exc.value.column) == (3, 21)
    assert str(exc.value).startswith("s.json:3:21:")


def test_schema_violations():
    with pytest.raises(SpecError, match="schema"):
        parse_spec_text('{"catalog": "cosym3", "extra": 1}')
    with pytest.raises(SpecError, match="schema"):
        parse_spec_text('{"backend": "lie"}')
    with pytest.raises(SpecError, match="schema"):
        parse_spec_text('{"catalog": "cosym3", "tolerances": {"kmn": -1}}')


def lie_spec(M, n):
    return {
        "backend": "lie",
        "structure_constants": reeb_action_constants(M).tolist(),
        "phi": standard_phi(n).tolist(),
        "xi_index": 0,
        "name": "kenmotsu_spec",
    }


def test_explicit_lie_spec_builds():
    M = np.diag([-1.5, -0.5])
    data = parse_spec_text(json.dumps(lie_spec(M, 1)))
    model, pts = build_from_spec(data)
    assert pts is None
    s = model.structure
    p = s.backend.base_point()
    assert validate(s, [p]).passed
    assert classify(s, [p]).tag == "almost_kenmotsu"


def test_explicit_spec_consistency_checks():
    good = lie_spec(np.diag([-1.5, -0.5]), 1)
    for patch, msg in [
        ({"dim": 5}, "dim"),
        ({"xi_index": 7}, "xi_index"),
        ({"metric": [[1, 0], [0, 1]]}, "d x d"),
        ({"metric": [[1, 0, 0], [0, -1, 0], [0, 0, 1]]}, "positive definite"),
        ({"backend": "chart"}, "chart"),
    ]:
        with pytest.raises(SpecError, match=msg):
            build_from_spec(parse_spec_text(json.dumps({**good, **patch})))
    bad = np.array(good["structure_constants"])
    bad[0, 1, 1] = 5.0
    with pytest.raises(SpecError, match="antisymmetric"):
        build_from_spec({**good, "structure_constants": bad.tolist()})


def test_catalog_spec_sample_points():
    model, pts = build_from_spec({"catalog": "cosym_chart", "params": {"n": 1}, "sample_points": [[0.1, 0.2, 0.3]]})
    assert np.allclose(pts[0], [0.1, 0.2, 0.3])
    with pytest.raises(SpecError, match="dimension"):
        build_from_spec({"catalog": "cosym_chart", "params": {"n": 1}, "sample_points": [[0.1]]})
    with pytest.raises(SpecError, match="backend"):
        build_from_spec({"catalog": "cosym3", "backend": "chart"})
