from __future__ import annotations

import copy
import json

import numpy as np
import pytest

from lightlike.calculus.expr import evaluate
from lightlike.calculus.fields import Samples, VectorField
from lightlike.models import (
    SasakianAxiomError,
    SpecError,
    SpecValidationError,
    _validate_sasakian,
    builtin,
    cone,
    dump_spec,
    embedding_residual,
    hyperplane,
    load_spec,
    parse_spec,
    sasakian,
    save_spec,
)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_cone_matches_its_embedding(m):
    model = cone(m)
    assert embedding_residual(model, Samples(model.struct.chart, 30)) < 1e-9


@pytest.mark.parametrize("name, size", [("cone", 2), ("cone", 3), ("hyperplane", 2), ("hyperplane", 4),
                                        ("sasakian", 1), ("sasakian", 2)])
def test_builders_validate_at_fifty_samples(name, size):
    model = builtin(name, size)
    recs = model.struct.validate(Samples(model.struct.chart, 50))
    assert all(r.passed for r in recs), [r.line() for r in recs if not r.passed]


def test_builders_reject_small_sizes():
    for fn in (cone, hyperplane):
        with pytest.raises(ValueError):
            fn(1)
    with pytest.raises(ValueError):
        sasakian(0)
    with pytest.raises(ValueError):
        builtin("sphere")


def test_sasakian_validation_names_the_failing_axiom():
    model = sasakian(1)
    d = model.data
    chart = model.struct.chart

    def no_phi(V):
        return VectorField.zero(chart)

    with pytest.raises(SasakianAxiomError, match="phi\\^2"):
        _validate_sasakian(chart, d["g"], d["eta"], model.struct.Z, no_phi, d["levi_civita"], Samples(chart, 10), 1e-8)


def test_sasakian_phi_squares_to_minus_identity_on_screen():
    model = sasakian(1)
    s = Samples(model.struct.chart, 10)
    phi = model.data["phi"]
    for E in model.base_screen().frame:
        assert np.max(np.abs(s.field(phi(phi(E)) + E))) < 1e-12


def _round_trip(model, tmp_path):
    path = tmp_path / "g.json"
    save_spec(model, path)
    return load_spec(path)


@pytest.mark.parametrize("factory", [lambda: cone(3), lambda: hyperplane(3), lambda: sasakian(1)])
def test_spec_round_trip(factory, tmp_path):
    model = factory()
    again = _round_trip(model, tmp_path)
    assert dump_spec(again) == dump_spec(model)
    n = model.struct.chart.dim
    assert all(again.struct.h.entry(a, b) is model.struct.h.entry(a, b) for a in range(n) for b in range(n))
    if model.cs is not None:
        m = model.cs.m
        assert all(again.cs.gamma(a, i, j) is model.cs.gamma(a, i, j)
                   for a in range(n) for i in range(m) for j in range(m))


def test_malformed_expression_names_the_entry():
    spec = dump_spec(cone(2))
    spec["metric"][1][1] = "exp(2*t"
    with pytest.raises(SpecError, match=r"metric\[1\]\[1\]"):
        parse_spec(spec)
    spec = dump_spec(cone(2))
    spec["Z"][0] = "q"
    with pytest.raises(SpecError, match=r"Z\[0\].*unknown coordinate"):
        parse_spec(spec)


def test_tau0_must_normalize_z():
    spec = dump_spec(cone(2))
    spec["tau0"] = ["2", "0", "0"]
    with pytest.raises(SpecValidationError) as err:
        parse_spec(spec)
    assert err.value.records and not err.value.records[0].passed


def test_degenerate_geometry_fails_validation():
    spec = dump_spec(cone(2), include_structure=False)
    spec["Z"] = ["0", "1", "0"]
    with pytest.raises(SpecValidationError):
        parse_spec(spec)


def test_structural_errors(tmp_path):
    base = dump_spec(hyperplane(2))
    cases = []
    for key in ("metric", "Z", "coords", "domain"):
        bad = copy.deepcopy(base)
        del bad[key]
        cases.append(bad)
    bad = copy.deepcopy(base)
    bad["spec_version"] = 99
    cases.append(bad)
    bad = copy.deepcopy(base)
    bad["structure"]["D0"] = [["0"]]
    cases.append(bad)
    bad = copy.deepcopy(base)
    del bad["tau0"]
    cases.append(bad)
    for spec in cases:
        with pytest.raises(SpecError):
            parse_spec(spec)
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(SpecError, match="invalid JSON"):
        load_spec(path)
    with pytest.raises(SpecError, match="cannot read"):
        load_spec(tmp_path / "missing.json")


def test_nonantisymmetric_gamma_is_rejected():
    spec = dump_spec(hyperplane(2))
    spec["structure"]["gamma"]["r1"][0][1] = "1"
    with pytest.raises(SpecValidationError, match="antisymmetric"):
        parse_spec(spec)


def test_bundled_specs_load():
    import pathlib

    root = pathlib.Path(__file__).resolve().parents[1] / "specs"
    for path in sorted(root.glob("*.json")):
        model = load_spec(path)
        assert model.struct.chart.dim == len(json.loads(path.read_text())["coords"])


def test_cone_conformal_factor_value():
    h = cone(2).struct.h
    assert evaluate(h.entry(1, 1), t=0.0, u1=0.0, u2=0.0) == 4.0
