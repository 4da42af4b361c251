"""Scenario documents: one JSON file binding dynamics, measurement and run defaults."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .channels import KrausChannel, effective_observable_from_outcomes, identity_channel, \
    luders_channel
from .dynamics import ControlSchedule
from .indirect import IndirectSetup, effective_observable_exact, effective_observable_series, \
    indirect_channel
from .lie import dynamical_lie_algebra
from .linalg import (DimensionError, check_hermitian, is_density, is_hermitian, matrix_from_json,
                     matrix_to_json, traceless)

BUILTIN_DEFAULTS = {
    "tol": 1e-14,
    "k_cap": 60,
    "nodes": 801,
    "kmax": 4,
    "seed": 0,
    "M": 1.0,
    "step": 0.01,
    "samples": 801,
}

MEASUREMENT_KINDS = ("direct", "luders", "indirect", "kraus")


class ScenarioError(ValueError):
    """Invalid scenario document.

    ``code`` is one of ``schema``, ``hermiticity``, ``dimension``, ``density``
    and ``path`` points at the offending field.
    """

    def __init__(self, code, path, message):
        super().__init__(f"[{code}] {path}: {message}")
        self.code = code
        self.path = path


def load_schema():
    return json.loads(resources.files("qobs").joinpath("data/scenario.schema.json").read_text())


def shipped_scenarios():
    """Paths of the scenario fixtures bundled with the package."""
    root = resources.files("qobs").joinpath("data/scenarios")
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".json"))


def shipped(name):
    for p in shipped_scenarios():
        if p.stem == name:
            return p
    raise FileNotFoundError(f"no shipped scenario named {name!r}")


@dataclass
class EffectiveObservable:
    traceless: np.ndarray
    raw: np.ndarray
    method: str
    order: int | None = None
    converged: bool = True


@dataclass
class Scenario:
    name: str
    dim: int
    hamiltonians: dict
    kind: str
    measurement: object
    timeline: tuple | None = None
    rho0: np.ndarray | None = None
    defaults: dict = field(default_factory=dict)
    description: str | None = None

    def setting(self, key, override=None):
        """Flag value, else scenario default, else built-in default."""
        if override is not None:
            return override
        if key in self.defaults:
            return self.defaults[key]
        return BUILTIN_DEFAULTS.get(key)

    @property
    def controls(self):
        return list(self.hamiltonians)

    def schedule(self, timeline=None):
        tl = self.timeline if timeline is None else timeline
        return ControlSchedule(self.hamiltonians, tuple(tl or ()))

    def lie_algebra(self):
        return dynamical_lie_algebra(list(self.hamiltonians.values()))

    def channel(self):
        if self.kind == "direct":
            return identity_channel(self.dim)
        if self.kind == "luders":
            return luders_channel(self.measurement)
        if self.kind == "indirect":
            return indirect_channel(self.measurement)[0]
        return self.measurement

    def effective_observable(self, tol=None, k_cap=None):
        if self.kind in ("direct", "luders"):
            s = self.measurement
            return EffectiveObservable(traceless(s), s, self.kind)
        if self.kind == "kraus":
            s = effective_observable_from_outcomes(self.measurement)
            return EffectiveObservable(s, s, "outcomes")
        setup = self.measurement
        if setup.free_evolution:
            raw = effective_observable_exact(setup)
            return EffectiveObservable(traceless(raw), raw, "exact")
        res = effective_observable_series(setup, tol=self.setting("tol", tol),
                                          k_cap=self.setting("k_cap", k_cap))
        return EffectiveObservable(res.traceless, res.raw, "series", res.order, res.converged)

    def to_dict(self):
        d = {"name": self.name}
        if self.description is not None:
            d["description"] = self.description
        d["dim"] = self.dim
        d["hamiltonians"] = {s: matrix_to_json(h) for s, h in self.hamiltonians.items()}
        if self.kind in ("direct", "luders"):
            d["measurement"] = {self.kind: {"S": matrix_to_json(self.measurement)}}
        elif self.kind == "kraus":
            d["measurement"] = {"kraus": self.measurement.to_dict()}
        else:
            st = self.measurement
            block = {"A": matrix_to_json(st.A), "B": matrix_to_json(st.B),
                     "S": matrix_to_json(st.S), "rho_P": matrix_to_json(st.rho_P),
                     "G": st.G, "tau": st.tau}
            if st.H_u is not None:
                block["H_u"] = matrix_to_json(st.H_u)
            if st.H_P is not None:
                block["H_P"] = matrix_to_json(st.H_P)
            d["measurement"] = {"indirect": block}
        if self.timeline is not None:
            d["schedule"] = [[s, t] for s, t in self.timeline]
        if self.rho0 is not None:
            d["rho0"] = matrix_to_json(self.rho0)
        if self.defaults:
            d["defaults"] = dict(self.defaults)
        return d

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2)


def _matrix(doc, path, dim=None, hermitian=True, label=None):
    try:
        m = matrix_from_json(doc)
    except DimensionError as exc:
        raise ScenarioError("dimension", path, str(exc)) from None
    if dim is not None and m.shape[0] != dim:
        raise ScenarioError("dimension", path, f"expected dimension {dim}, got {m.shape[0]}")
    if hermitian:
        if not is_hermitian(m):
            raise ScenarioError("hermiticity", path, f"{label or 'matrix'} is not Hermitian")
        m = check_hermitian(m)
    return m


def scenario_from_dict(doc):
    validator = jsonschema.Draft7Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ScenarioError("schema", path, err.message)
    n = doc["dim"]
    hams = {}
    for sym, m in doc["hamiltonians"].items():
        hams[sym] = _matrix(m, f"hamiltonians/{sym}", n, label=f"H({sym})")
    (kind, block), = doc["measurement"].items()
    base = f"measurement/{kind}"
    if kind in ("direct", "luders"):
        meas = _matrix(block["S"], f"{base}/S", n, label="S")
    elif kind == "kraus":
        ops = [[_matrix(w, f"{base}/operators/{i}/{j}", n, hermitian=False)
                for j, w in enumerate(g)] for i, g in enumerate(block["operators"])]
        if len(ops) != len(block["outcomes"]):
            raise ScenarioError("dimension", f"{base}/operators",
                                "one operator list per outcome is required")
        try:
            meas = KrausChannel([(o["label"], o.get("value")) for o in block["outcomes"]], ops)
        except ValueError as exc:
            raise ScenarioError("schema", base, str(exc)) from None
    else:
        a = _matrix(block["A"], f"{base}/A", n, label="A")
        b = _matrix(block["B"], f"{base}/B", label="B")
        npb = b.shape[0]
        s = _matrix(block["S"], f"{base}/S", npb, label="S")
        rho_p = _matrix(block["rho_P"], f"{base}/rho_P", npb, label="rho_P")
        if not is_density(rho_p):
            raise ScenarioError("density", f"{base}/rho_P", "probe state is not a density matrix")
        extra = {}
        if "H_u" in block:
            extra["H_u"] = _matrix(block["H_u"], f"{base}/H_u", n, label="H_u")
        if "H_P" in block:
            extra["H_P"] = _matrix(block["H_P"], f"{base}/H_P", npb, label="H_P")
        meas = IndirectSetup(a, b, s, rho_p, float(block["G"]), float(block.get("tau", 1.0)),
                             **extra)
    timeline = None
    if "schedule" in doc:
        timeline = tuple((str(s), float(t)) for s, t in doc["schedule"])
        for i, (s, _) in enumerate(timeline):
            if s not in hams:
                raise ScenarioError("schema", f"schedule/{i}", f"unknown control symbol {s!r}")
    rho0 = None
    if "rho0" in doc:
        rho0 = _matrix(doc["rho0"], "rho0", n, label="rho0")
        if not is_density(rho0):
            raise ScenarioError("density", "rho0", "initial state is not a density matrix")
    return Scenario(doc["name"], n, hams, kind, meas, timeline, rho0,
                    dict(doc.get("defaults", {})), doc.get("description"))


def parse_scenario(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError("schema", "<root>", f"invalid JSON: {exc}") from None
    return scenario_from_dict(doc)


def parse_schedule_file(path):
    """Schedule file: ``{"timeline": [[u, dt], ...]}`` or ``{"schedules": [[[u, dt], ...], ...]}``."""
    with open(path) as fh:
        doc = json.load(fh)
    if isinstance(doc, list):
        return [tuple((str(s), float(t)) for s, t in doc)]
    if "schedules" in doc:
        return [tuple((str(s), float(t)) for s, t in leg) for leg in doc["schedules"]]
    if "timeline" in doc:
        return [tuple((str(s), float(t)) for s, t in doc["timeline"])]
    raise ScenarioError("schema", "<root>", "schedule file needs 'timeline' or 'schedules'")
