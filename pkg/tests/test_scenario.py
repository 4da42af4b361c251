import json

import numpy as np
import pytest

from qobs.linalg import SIGMA_Y, matrix_to_json
from qobs.scenario import (ScenarioError, parse_scenario, parse_schedule_file,
                           scenario_from_dict, shipped, shipped_scenarios)

NAMES = [p.stem for p in shipped_scenarios()]


def load(name):
    return json.loads(shipped(name).read_text())


def test_fixtures_are_shipped():
    assert {"qubit_ising", "qubit_ising_mixed_probe", "spin1_luders", "qubit_luders",
            "qubit_alternating", "qubit_commuting"} <= set(NAMES)


@pytest.mark.parametrize("name", NAMES)
def test_roundtrip_is_identical(name):
    doc = load(name)
    sc = parse_scenario(shipped(name))
    assert sc.to_dict() == doc
    assert parse_scenario(shipped(name)).dumps() == scenario_from_dict(json.loads(sc.dumps())).dumps()


def test_qubit_ising_contents():
    sc = parse_scenario(shipped("qubit_ising"))
    assert sc.dim == 2 and sc.controls == ["u1", "u2"] and sc.kind == "indirect"
    assert np.allclose(sc.measurement.A, SIGMA_Y)


def test_spin1_contents():
    sc = parse_scenario(shipped("spin1_luders"))
    assert sc.dim == 3 and sc.kind == "luders"
    assert np.allclose(sc.measurement, np.diag([1, 0, -1]))


def test_settings_precedence():
    sc = parse_scenario(shipped("qubit_alternating"))
    assert sc.setting("sigma") == 2.0
    assert sc.setting("sigma", 3.0) == 3.0
    assert sc.setting("tol") == 1e-14
    assert sc.setting("tol", 1e-10) == 1e-10


def test_non_hermitian_control_is_named():
    doc = load("qubit_ising")
    doc["hamiltonians"]["u2"] = matrix_to_json(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(doc)
    assert info.value.code == "hermiticity"
    assert "u2" in str(info.value) and info.value.path == "hamiltonians/u2"


@pytest.mark.parametrize("mutate,code,path", [
    (lambda d: d.pop("measurement"), "schema", "<root>"),
    (lambda d: d["measurement"].update({"direct": {"S": d["measurement"].pop("indirect")["S"]},
                                        "luders": {}}), "schema", "measurement"),
    (lambda d: d.update(dim="two"), "schema", "dim"),
    (lambda d: d["hamiltonians"].update(u3=matrix_to_json(np.eye(3))), "dimension",
     "hamiltonians/u3"),
    (lambda d: d.update(rho0=matrix_to_json(np.eye(2))), "density", "rho0"),
    (lambda d: d["measurement"]["indirect"].update(rho_P=matrix_to_json(np.diag([2.0, -1.0]))),
     "density", "measurement/indirect/rho_P"),
    (lambda d: d.update(schedule=[["u9", 1.0]]), "schema", "schedule/0"),
    (lambda d: d["hamiltonians"]["u1"].update(re=[0.0, 1.0]), "dimension", "hamiltonians/u1"),
])
def test_validation_errors(mutate, code, path):
    doc = load("qubit_ising")
    mutate(doc)
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(doc)
    assert info.value.code == code
    assert info.value.path == path


def test_kraus_block_roundtrip():
    p0 = np.diag([1.0, 0.0])
    doc = load("qubit_luders")
    doc["measurement"] = {"kraus": {
        "outcomes": [{"label": "up", "value": 1.0}, {"label": "down", "value": -1.0}],
        "operators": [[matrix_to_json(p0)], [matrix_to_json(np.eye(2) - p0)]]}}
    sc = scenario_from_dict(doc)
    assert sc.kind == "kraus"
    assert sc.to_dict() == doc
    assert np.allclose(sc.effective_observable().traceless, np.diag([1, -1]))


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioError) as info:
        parse_scenario(p)
    assert info.value.code == "schema"


def test_schedule_file_forms(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"timeline": [["u1", 0.5]]}))
    assert parse_schedule_file(p) == [(("u1", 0.5),)]
    p.write_text(json.dumps({"schedules": [[["u1", 0.5]], [["u2", 1]]]}))
    assert parse_schedule_file(p) == [(("u1", 0.5),), (("u2", 1.0),)]
    p.write_text(json.dumps([["u2", 2]]))
    assert parse_schedule_file(p) == [(("u2", 2.0),)]
    p.write_text(json.dumps({"legs": []}))
    with pytest.raises(ScenarioError):
        parse_schedule_file(p)
