"""Generalized measurements in Kraus form: operations, channel, dual, effects."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (as_matrix, check_hermitian, dagger, hermitian_part, matrix_from_json,
                     matrix_to_json, traceless)

COMPLETENESS_ATOL = 1e-10
NULL_EVENT = 1e-14
# eigenvalues closer than this (relative to ||S||) belong to one outcome
LUDERS_REL_GAP = 1e-9


class NullEventError(ValueError):
    """Conditioning on an outcome whose probability is numerically zero."""


@dataclass(frozen=True)
class Outcome:
    label: str
    value: float | None = None


@dataclass(frozen=True)
class Effect:
    outcome: Outcome
    matrix: np.ndarray


class KrausChannel:
    """Measurement with outcomes ``m`` and Kraus operators ``Ω_{mk}``.

    Parameters
    ----------
    outcomes : sequence of Outcome, str or (label, value)
    operators : sequence (one entry per outcome) of sequences of square matrices
    check : bool
        Enforce completeness ``Σ Ω† Ω = I``.
    """

    def __init__(self, outcomes, operators, check=True):
        outs = []
        for o in outcomes:
            if isinstance(o, Outcome):
                outs.append(o)
            elif isinstance(o, str):
                outs.append(Outcome(o))
            else:
                label, value = o
                outs.append(Outcome(str(label), None if value is None else float(value)))
        if len(outs) != len(operators):
            raise ValueError("one operator list per outcome is required")
        if len({o.label for o in outs}) != len(outs):
            raise ValueError("outcome labels must be unique")
        ops = []
        dim = None
        for group in operators:
            g = [as_matrix(w, "Kraus operator") for w in group]
            if not g:
                raise ValueError("every outcome needs at least one Kraus operator")
            for w in g:
                if dim is None:
                    dim = w.shape[0]
                elif w.shape[0] != dim:
                    raise ValueError("Kraus operators must share one dimension")
            ops.append(tuple(g))
        self.outcomes = tuple(outs)
        self.operators = tuple(ops)
        self.dim = dim
        if check:
            err = np.linalg.norm(self.completeness() - np.eye(dim))
            if err > COMPLETENESS_ATOL:
                raise ValueError(f"Kraus operators are not complete (|ΣΩ†Ω - I| = {err:.3g})")

    def __repr__(self):
        return (f"KrausChannel(dim={self.dim}, outcomes={[o.label for o in self.outcomes]}, "
                f"kraus={[len(g) for g in self.operators]})")

    @property
    def labels(self):
        return [o.label for o in self.outcomes]

    def all_operators(self):
        return [w for g in self.operators for w in g]

    def completeness(self):
        return sum(dagger(w) @ w for w in self.all_operators())

    def index_of(self, m):
        """Outcome index from a label, an Outcome, or a numeric outcome value."""
        if isinstance(m, Outcome):
            m = m.label
        for i, o in enumerate(self.outcomes):
            if o.label == str(m):
                return i
        if not isinstance(m, str):
            for i, o in enumerate(self.outcomes):
                if o.value is not None and abs(o.value - float(m)) <= 1e-9 * max(1, abs(o.value)):
                    return i
        else:
            try:
                return self.index_of(float(m))
            except (ValueError, KeyError):
                pass
        raise KeyError(f"unknown outcome {m!r}; known: {self.labels}")

    def operation(self, m, rho):
        """``Φ_m(ρ) = Σ_k Ω_mk ρ Ω_mk†``."""
        rho = self._check(rho)
        return sum(w @ rho @ dagger(w) for w in self.operators[self.index_of(m)])

    def _check(self, m):
        m = as_matrix(m)
        if m.shape[0] != self.dim:
            raise ValueError(f"operand dimension {m.shape[0]} does not match channel {self.dim}")
        return m

    def to_dict(self):
        return {"outcomes": [{"label": o.label, "value": o.value} for o in self.outcomes],
                "operators": [[matrix_to_json(w) for w in g] for g in self.operators]}

    @classmethod
    def from_dict(cls, d):
        outs = [Outcome(str(o["label"]), None if o.get("value") is None else float(o["value"]))
                for o in d["outcomes"]]
        ops = [[matrix_from_json(w) for w in g] for g in d["operators"]]
        return cls(outs, ops)


def identity_channel(n):
    return KrausChannel([Outcome("id")], [[np.eye(n, dtype=complex)]])


def apply_channel(ch, rho):
    """Nonselective update ``ρ -> Σ_{m,k} Ω_mk ρ Ω_mk†``."""
    rho = ch._check(rho)
    ws = np.array(ch.all_operators())
    return np.einsum("kij,jl,kml->im", ws, rho, ws.conj())


def dual_apply(ch, s):
    """Heisenberg-picture map ``S -> Σ Ω† S Ω`` with ``Tr(F*(S)ρ) = Tr(S F(ρ))``."""
    s = ch._check(s)
    ws = np.array(ch.all_operators())
    return np.einsum("kji,jl,klm->im", ws.conj(), s, ws)


def effects_of(ch):
    return [Effect(o, hermitian_part(sum(dagger(w) @ w for w in g)))
            for o, g in zip(ch.outcomes, ch.operators)]


def effective_observable_from_outcomes(ch):
    """Traceless part of ``Σ_m m F_m``."""
    if any(o.value is None for o in ch.outcomes):
        bad = [o.label for o in ch.outcomes if o.value is None]
        raise ValueError(f"outcomes without numeric values: {bad}")
    s = sum(o.value * e.matrix for o, e in zip(ch.outcomes, effects_of(ch)))
    return traceless(hermitian_part(s))


def spectral_projectors(s, rel_gap=LUDERS_REL_GAP):
    """Distinct eigenvalues of Hermitian ``s`` (ascending) and their projectors."""
    s = check_hermitian(s, "S")
    w, v = np.linalg.eigh(s)
    scale = max(np.abs(w).max(), 1e-300)
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[groups[-1][-1]] > rel_gap * scale:
            groups.append([i])
        else:
            groups[-1].append(i)
    values, projs = [], []
    for g in groups:
        values.append(float(np.mean(w[g])))
        vg = v[:, g]
        projs.append(vg @ dagger(vg))
    return values, projs


def _label(value):
    return f"{value:+.12g}"


def luders_channel(s):
    """Von Neumann-Lüders measurement of ``s``: one projector per distinct eigenvalue."""
    values, projs = spectral_projectors(s)
    return KrausChannel([Outcome(_label(x), x) for x in values], [[p] for p in projs])


def has_repetition_property(ch, atol=1e-10):
    """True when ``Ω_mk Ω_rl = δ_mr δ_kl Ω_mk`` for all operator pairs."""
    flat = [(i, k, w) for i, g in enumerate(ch.operators) for k, w in enumerate(g)]
    for i, k, a in flat:
        for r, l, b in flat:
            target = a if (i, k) == (r, l) else 0
            if np.linalg.norm(a @ b - target) > atol:
                return False
    return True


def selective_update(ch, rho, m):
    """Probability of ``m`` and the conditioned state ``Φ_m(ρ)/P(m)``."""
    post = ch.operation(m, rho)
    p = float(np.trace(post).real)
    if p <= NULL_EVENT:
        raise NullEventError(f"outcome {m!r} has probability {p:.3g}; cannot condition on it")
    return p, hermitian_part(post) / p
