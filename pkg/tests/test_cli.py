from __future__ import annotations

import json
import subprocess
import sys

import pytest

from lightlike.cli import EXIT_CHECK, EXIT_INPUT, EXIT_OK, main
from lightlike.models import cone, hyperplane, load_spec, save_spec


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def specs(tmp_path_factory):
    d = tmp_path_factory.mktemp("specs")
    paths = {}
    for name, model, structure in (("cone3", cone(3), False), ("cone2", cone(2), False),
                                   ("hyperplane", hyperplane(3), True)):
        paths[name] = d / f"{name}.json"
        save_spec(model, paths[name], structure)
    return paths


def test_validate(capsys, specs):
    code, out, _ = run(capsys, "validate", str(specs["cone3"]))
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["passed"] and any("A_Z = Id" in r["notes"] or r["name"] == "A_Z = Id" for r in rep["records"])
    code, out, _ = run(capsys, "validate", str(specs["hyperplane"]), "--format", "text")
    assert code == EXIT_OK and "A_Z = 0" in out


def test_missing_file_is_an_input_error(capsys, tmp_path):
    code, out, err = run(capsys, "validate", str(tmp_path / "nope.json"))
    assert code == EXIT_INPUT and "cannot read" in err and out == ""


def test_bad_builtin_is_an_input_error(capsys):
    code, _, err = run(capsys, "validate", "builtin:sphere")
    assert code == EXIT_INPUT and "sphere" in err


def test_laws_on_structureless_spec_skips_connection_checks(capsys, specs):
    code, out, _ = run(capsys, "laws", str(specs["cone3"]))
    rep = json.loads(out)
    assert code == EXIT_OK
    assert any("no structure" in r["notes"] for r in rep["records"])


def test_laws_with_normalization(capsys):
    code, out, _ = run(capsys, "laws", "builtin:cone:3", "--normalize")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert any(r["name"].startswith("change law for D") for r in rep["records"])


def test_normalize_refusals_exit_two(capsys, specs):
    code, out, _ = run(capsys, "normalize", str(specs["hyperplane"]))
    rep = json.loads(out)
    assert code == EXIT_CHECK and rep["result"]["refused_at"] == "homothety"
    code, out, _ = run(capsys, "normalize", str(specs["cone2"]))
    rep = json.loads(out)
    assert code == EXIT_CHECK and rep["result"]["refused_at"] == "schouten"
    assert any(r["passed"] for r in rep["records"])


def test_normalize_output_is_byte_identical(capsys, specs):
    _, first, _ = run(capsys, "normalize", str(specs["cone3"]), "--seed", "3")
    _, second, _ = run(capsys, "normalize", str(specs["cone3"]), "--seed", "3")
    assert first == second


def test_text_and_json_carry_the_same_records(capsys, specs):
    code_j, out_j, _ = run(capsys, "normalize", str(specs["cone3"]))
    code_t, out_t, _ = run(capsys, "normalize", str(specs["cone3"]), "--format", "text")
    assert code_j == code_t == EXIT_OK
    names = [r["name"] for r in json.loads(out_j)["records"]]
    for name in names:
        assert name in out_t
    status_lines = [ln for ln in out_t.splitlines() if ln.startswith(("PASS ", "FAIL "))]
    assert len(status_lines) == len(names)


def test_emit_spec_and_curvature(capsys, specs, tmp_path):
    emitted = tmp_path / "cone3n.json"
    report = tmp_path / "report.json"
    code, out, _ = run(capsys, "normalize", str(specs["cone3"]), "--emit-spec", str(emitted), "--out", str(report))
    assert code == EXIT_OK and out == ""
    assert json.loads(report.read_text())["passed"]
    assert load_spec(emitted).cs is not None
    code, out, _ = run(capsys, "curvature", str(emitted))
    rep = json.loads(out)
    assert code == EXIT_OK and rep["result"]["structure"] == "from spec"
    code, out, _ = run(capsys, "curvature", str(emitted), "--perturb", "1e-2")
    rep = json.loads(out)
    assert code == EXIT_CHECK
    scale = [r for r in rep["records"] if r["name"].startswith("scale-bundle criterion")]
    assert scale and scale[0]["max_residual"] > 1e-4


def test_curvature_table_for_hyperplane(capsys, specs):
    code, out, _ = run(capsys, "curvature", str(specs["hyperplane"]))
    rep = json.loads(out)
    assert rep["result"]["table"]
    assert code in (EXIT_OK, EXIT_CHECK)


def test_curvature_budget_without_fallback(capsys):
    code, out, _ = run(capsys, "curvature", "builtin:sasakian", "--node-budget", "5", "--fd-fallback", "off")
    rep = json.loads(out)
    assert code == EXIT_CHECK
    assert any("node budget" in r["notes"] for r in rep["records"])


def test_model_algebra(capsys):
    code, out, _ = run(capsys, "model-algebra", "--m", "2", "--count", "20", "--format", "text")
    assert code == EXIT_OK and "[m=2]" in out and "[m=3]" not in out
    code, _, err = run(capsys, "model-algebra", "--m", "1")
    assert code == EXIT_INPUT


def test_export_round_trip(capsys, tmp_path):
    path = tmp_path / "hyp.json"
    assert main(["export", "hyperplane", "--size", "2", "--out", str(path)]) == EXIT_OK
    model = load_spec(path)
    assert model.cs is not None and model.struct.m == 2
    code, out, _ = run(capsys, "export", "cone", "--size", "2", "--no-structure")
    assert code == EXIT_OK and "structure" not in json.loads(out)


def test_invalid_tau0_exits_two(capsys, tmp_path):
    from lightlike.models import dump_spec

    spec = dump_spec(cone(2))
    spec["tau0"] = ["2", "0", "0"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    code, out, _ = run(capsys, "validate", str(path))
    assert code == EXIT_CHECK and not json.loads(out)["passed"]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lightlike.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("lightlike ")


def test_curvature_with_random_fields(capsys):
    code, out, _ = run(capsys, "curvature", "builtin:cone:3", "--random-fields", "2")
    rep = json.loads(out)
    assert code == EXIT_OK
    flat = [r for r in rep["records"] if r["name"] == "tractor curvature vanishes (all components)"][0]
    assert "2 random" in flat["notes"] and flat["max_residual"] < 1e-7
