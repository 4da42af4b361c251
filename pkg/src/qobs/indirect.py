"""Probe-mediated (indirect) measurement.

The system couples to a probe through ``g(t) A ⊗ B`` for a time ``tau``; the
probe observable ``S`` is read out afterwards.  Only ``G = ∫ g dt`` matters
when the coupling dominates, so non-square profiles are reduced to ``G``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import KrausChannel, Outcome, _label, spectral_projectors
from .linalg import (check_density, check_hermitian, dagger, hermitian_basis, hermitian_part,
                     partial_trace_probe, tensor, traceless, unitary_from_hamiltonian)


@dataclass(frozen=True)
class IndirectSetup:
    """System operator ``A``, probe operator ``B``, probe observable ``S``, probe state.

    ``G`` is the integrated coupling strength and ``tau`` the interaction time.
    ``H_u`` (system) and ``H_P`` (probe) are optional free Hamiltonians active
    during the interaction; with either present the coupling is taken as a
    square pulse of height ``G / tau``.
    """

    A: np.ndarray
    B: np.ndarray
    S: np.ndarray
    rho_P: np.ndarray
    G: float
    tau: float = 1.0
    H_u: np.ndarray | None = None
    H_P: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "A", check_hermitian(self.A, "A"))
        object.__setattr__(self, "B", check_hermitian(self.B, "B"))
        object.__setattr__(self, "S", check_hermitian(self.S, "S"))
        object.__setattr__(self, "rho_P", check_density(self.rho_P, "rho_P"))
        if self.B.shape != self.S.shape or self.B.shape != self.rho_P.shape:
            raise ValueError("B, S and rho_P must act on the same probe space")
        if not math.isfinite(self.G):
            raise ValueError("G must be finite")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.H_u is not None:
            h = check_hermitian(self.H_u, "H_u")
            if h.shape != self.A.shape:
                raise ValueError("H_u must act on the system space")
            object.__setattr__(self, "H_u", h)
        if self.H_P is not None:
            h = check_hermitian(self.H_P, "H_P")
            if h.shape != self.B.shape:
                raise ValueError("H_P must act on the probe space")
            object.__setattr__(self, "H_P", h)

    @property
    def n_sys(self):
        return self.A.shape[0]

    @property
    def n_probe(self):
        return self.B.shape[0]

    @property
    def free_evolution(self):
        return self.H_u is not None or self.H_P is not None

    def total_unitary(self):
        """Joint system-probe unitary over the interaction window."""
        if not self.free_evolution:
            return unitary_from_hamiltonian(tensor(self.A, self.B), self.G)
        h = (self.G / self.tau) * tensor(self.A, self.B)
        if self.H_u is not None:
            h = h + tensor(self.H_u, np.eye(self.n_probe))
        if self.H_P is not None:
            h = h + tensor(np.eye(self.n_sys), self.H_P)
        return unitary_from_hamiltonian(h, self.tau)


@dataclass(frozen=True)
class SeriesResult:
    raw: np.ndarray
    traceless: np.ndarray
    order: int
    converged: bool


def effective_observable_series(setup, tol=1e-14, k_cap=60):
    """Power series in ``G`` for the effective observable.

    The ``k``-th term is ``A^k Tr((ad_{-iB}^k ρ_P) S) G^k / k!``.  Summation
    stops after two consecutive terms below ``tol`` times the running sum's
    norm (odd or even terms can vanish identically), or at ``k_cap``.
    ``order`` is the highest ``k`` included.  The terms peak near
    ``k ~ |G| ||A|| spread(B)`` so large couplings lose digits to cancellation.
    """
    if setup.free_evolution:
        raise ValueError("no closed series with free evolution during the interaction; "
                         "use effective_observable_exact or effective_observable_first_order")
    a, b, s, rho_p, g = setup.A, setup.B, setup.S, setup.rho_P, setup.G
    n = a.shape[0]
    total = np.trace(rho_p @ s) * np.eye(n, dtype=complex)
    order, converged = 0, g == 0
    ad = rho_p.astype(complex)
    a_pow = np.eye(n, dtype=complex)
    coef = 1.0
    minus_ib = -1j * b
    small = 0
    while not converged and order < k_cap:
        order += 1
        ad = minus_ib @ ad - ad @ minus_ib
        a_pow = a_pow @ a
        coef *= g / order
        term = a_pow * (np.trace(ad @ s) * coef)
        total = total + term
        if np.linalg.norm(term) <= tol * max(np.linalg.norm(total), 1e-300):
            small += 1
            converged = small >= 2
        else:
            small = 0
    raw = hermitian_part(total)
    return SeriesResult(raw, traceless(raw), order, bool(converged))


def effective_observable_exact(setup):
    """Dense-exponential effective observable.

    The output map ``ρ_S -> Tr((1 ⊗ S) U (ρ_S ⊗ ρ_P) U†)`` is evaluated on an
    orthonormal Hermitian basis; its values are the coordinates of ``S_eff``.
    """
    u = setup.total_unitary()
    hb = hermitian_basis(setup.n_sys) if setup.n_sys >= 2 else None
    obs = tensor(np.eye(setup.n_sys), setup.S)
    if hb is None:
        els = np.ones((1, 1, 1), dtype=complex)
    else:
        els = hb.elements
    ys = []
    for e in els:
        rho_tot = u @ tensor(e, setup.rho_P) @ dagger(u)
        ys.append(np.real(np.trace(obs @ rho_tot)))
    ys = np.array(ys)
    return hermitian_part(np.tensordot(ys, els, axes=1))


def effective_observable_first_order(setup):
    """Two-term approximation ``Tr(ρ_P S) I + Tr([-iB, ρ_P] S) G A``.

    With free evolution during the interaction the coupling is a unit square
    pulse, so ``G`` is replaced by ``tau``.
    """
    n = setup.n_sys
    rho_p, b, s = setup.rho_P, setup.B, setup.S
    c0 = np.trace(rho_p @ s).real
    c1 = np.trace((-1j * (b @ rho_p - rho_p @ b)) @ s).real
    strength = setup.tau if setup.free_evolution else setup.G
    return c0 * np.eye(n, dtype=complex) + c1 * strength * setup.A


def indirect_channel(setup):
    """Channel induced on the system, as Kraus operators and as a dense map.

    Returns ``(channel, dense_map)``.  Outcomes are the distinct eigenvalues of
    the probe observable ``S``; summing over them gives the nonselective map,
    which does not depend on ``S``.  Kraus operators are
    ``√p_a (1 ⊗ ⟨b|) (1 ⊗ Π_m) U (1 ⊗ |a⟩)`` with ``ρ_P = Σ p_a |a⟩⟨a|`` and
    ``|b⟩`` running over an orthonormal basis of the ``Π_m`` eigenspace.
    """
    u = setup.total_unitary()
    ns, npb = setup.n_sys, setup.n_probe
    p, vecs = np.linalg.eigh(setup.rho_P)
    values, projs = spectral_projectors(setup.S)
    u4 = u.reshape(ns, npb, ns, npb)
    outcomes, groups = [], []
    for val, proj in zip(values, projs):
        w, bv = np.linalg.eigh(proj)
        bvecs = bv[:, w > 0.5]
        ops = []
        for pa, avec in zip(p, vecs.T):
            if pa <= 1e-15:
                continue
            # contract the probe input with |a> and the probe output with <b|
            ua = np.einsum("iajb,b->iaj", u4, avec)
            for bvec in bvecs.T:
                ops.append(np.sqrt(pa) * np.einsum("a,iaj->ij", bvec.conj(), ua))
        outcomes.append(Outcome(_label(val), val))
        groups.append(ops)
    ch = KrausChannel(outcomes, groups)

    def dense_map(rho_s):
        return partial_trace_probe(u @ tensor(rho_s, setup.rho_P) @ dagger(u), ns, npb)

    return ch, dense_map


def conjugate_probe_formula(gamma, G, A, trPS):
    """``trPS * I + gamma * G * A``: the exact answer when ``[B, S] = i gamma I``.

    That commutation relation has no finite-dimensional realisation, so this is
    a formula utility only and is not checked against the series.
    """
    A = check_hermitian(A, "A")
    return trPS * np.eye(A.shape[0], dtype=complex) + gamma * G * A
