"""Regenerate the bundled scenario fixtures."""
import json
from pathlib import Path

import numpy as np

from qobs.indirect import IndirectSetup
from qobs.linalg import IDENTITY_2, SIGMA_X, SIGMA_Y, SIGMA_Z, spin_matrices
from qobs.scenario import Scenario, scenario_from_dict

OUT = Path(__file__).resolve().parents[1] / "src" / "qobs" / "data" / "scenarios"
E = 1.0
GROUND = np.array([[1, 0], [0, 0]], dtype=complex)


def ising(name, rho_p, description):
    setup = IndirectSetup(SIGMA_Y, SIGMA_X, SIGMA_Z, rho_p, 0.5, 0.1)
    return Scenario(name, 2, {"u1": E * SIGMA_X, "u2": E * SIGMA_Y}, "indirect", setup,
                    (("u1", 1.0), ("u2", 1.0)) * 4, GROUND, {"kmax": 4}, description)


def build():
    jx, jy, jz = spin_matrices(1)
    alternating = (("u1", 1.0), ("u2", 1.0)) * 16
    return [
        ising("qubit_ising", (IDENTITY_2 + 0.8 * SIGMA_Y) / 2,
              "qubit probed by a second qubit through sigma_y x sigma_x coupling"),
        ising("qubit_ising_mixed_probe", IDENTITY_2 / 2,
              "same coupling with a maximally mixed probe"),
        Scenario("spin1_luders", 3, {"ux": jx, "uy": jy}, "luders", jz, None,
                 np.diag([1.0, 0, 0]).astype(complex), {"kmax": 5},
                 "spin 1 with x and y fields, projective measurement of J_z"),
        Scenario("qubit_luders", 2, {"u1": E * SIGMA_X, "u2": E * SIGMA_Y}, "luders", SIGMA_Z,
                 (("u1", 0.4), ("u2", 0.7)), GROUND, {"kmax": 4},
                 "qubit with projective sigma_z measurement"),
        Scenario("qubit_alternating", 2, {"u1": E * SIGMA_X, "u2": E * SIGMA_Y}, "direct",
                 SIGMA_Z, alternating, GROUND,
                 {"M": 1.0, "sigma": 2.0, "T": 30.0, "step": 0.01, "nodes": 801},
                 "continuous sigma_z readout under alternating x and y fields"),
        Scenario("qubit_commuting", 2, {"u1": SIGMA_Z}, "direct", SIGMA_Z, (("u1", 3.0),),
                 GROUND, {}, "field along the measured axis: unobservable"),
    ]


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for sc in build():
        text = sc.dumps() + "\n"
        assert scenario_from_dict(json.loads(text)).dumps() == sc.dumps()
        (OUT / f"{sc.name}.json").write_text(text)
        print("wrote", sc.name)
