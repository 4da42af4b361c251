"""Dynamical Lie algebra and the observability-space recursion.

Subspaces of skew-Hermitian matrices are stored through the real coordinates
of ``-i A`` in the orthonormal Hermitian basis, so that the Hilbert-Schmidt
inner product becomes the Euclidean one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channels import dual_apply, effects_of
from .linalg import check_hermitian, hermitian_basis, matrix_to_json, traceless

RANK_RTOL = 1e-9
# generators below this Frobenius norm are treated as exact zeros
RANK_ATOL = 1e-12
CONTAIN_ATOL = 1e-10


@dataclass(frozen=True)
class OperatorSubspace:
    """Real span of skew-Hermitian ``n x n`` matrices with an orthonormal basis.

    ``coords`` has one row per basis element: the coordinates of ``-i A`` in
    :func:`qobs.linalg.hermitian_basis`.
    """

    dim_hilbert: int
    coords: np.ndarray

    @property
    def rank(self):
        return int(self.coords.shape[0])

    @property
    def basis(self):
        """Skew-Hermitian basis matrices ``iA_j``."""
        hb = hermitian_basis(self.dim_hilbert)
        if self.rank == 0:
            return np.zeros((0, self.dim_hilbert, self.dim_hilbert), dtype=complex)
        return 1j * hb.matrix(self.coords)

    @property
    def hermitian_basis(self):
        """The Hermitian matrices ``A_j`` with ``iA_j`` in the subspace."""
        return -1j * self.basis

    def projector(self):
        return self.coords.T @ self.coords

    def project_hermitian(self, h):
        """Orthogonal projection of Hermitian ``h`` onto ``{A : iA in V}``."""
        hb = hermitian_basis(self.dim_hilbert)
        c = hb.coords(h)
        return hb.matrix(self.projector() @ c)

    def traceless_part(self):
        """The subspace modulo ``span{i I}``."""
        c = self.coords.copy()
        c[:, -1] = 0.0
        return span_coords(self.dim_hilbert, c)

    def containment_residual(self, other):
        """Largest distance of a unit basis vector of ``other`` from this subspace."""
        if other.rank == 0:
            return 0.0
        resid = other.coords - other.coords @ self.projector()
        return float(np.linalg.norm(resid, axis=1).max())

    def contains(self, other, atol=CONTAIN_ATOL):
        return self.containment_residual(other) <= atol

    def distance(self, other):
        """Frobenius distance between orthogonal projectors."""
        return float(np.linalg.norm(self.projector() - other.projector()))

    def to_dict(self):
        return {"dim": self.dim_hilbert, "rank": self.rank,
                "basis": [matrix_to_json(b) for b in self.basis]}

    def to_json(self):
        return json.dumps(self.to_dict())


def span_coords(n, rows, rtol=RANK_RTOL, atol=RANK_ATOL):
    rows = np.asarray(rows, dtype=float).reshape(-1, n * n)
    if rows.shape[0] == 0:
        return OperatorSubspace(n, np.zeros((0, n * n)))
    _, sv, vt = np.linalg.svd(rows, full_matrices=False)
    cut = max(rtol * sv[0], atol)
    r = int(np.sum(sv > cut))
    return OperatorSubspace(n, vt[:r].copy())


def span_closure(generators, n=None):
    """Orthonormal basis of the real span of skew-Hermitian ``generators``."""
    gens = [np.asarray(g, dtype=complex) for g in generators]
    if not gens:
        if n is None:
            raise ValueError("empty generator list needs an explicit dimension")
        return OperatorSubspace(n, np.zeros((0, n * n)))
    n = gens[0].shape[0]
    if any(g.shape != (n, n) for g in gens):
        raise ValueError("generators must share one dimension")
    hb = hermitian_basis(n)
    return span_coords(n, hb.coords(-1j * np.array(gens)))


def _brackets(left, right):
    """All commutators ``[l, r]`` for stacks of matrices."""
    lr = np.einsum("aij,bjk->abik", left, right)
    rl = np.einsum("bij,ajk->abik", right, left)
    return (lr - rl).reshape(-1, left.shape[-1], left.shape[-1])


def _saturate(n, start, gens):
    """Smallest subspace containing ``start`` and closed under ``ad`` of ``gens``."""
    hb = hermitian_basis(n)
    cur = start
    if cur.rank == 0 or len(gens) == 0:
        return cur
    for _ in range(n ** 4):
        new = _brackets(gens, cur.basis)
        rows = np.vstack([cur.coords, hb.coords(-1j * new)])
        nxt = span_coords(n, rows)
        if nxt.rank == cur.rank:
            return nxt
        cur = nxt
    return cur


def dynamical_lie_algebra(hams):
    """Lie algebra generated by ``{-i H(u)}``."""
    hams = [check_hermitian(h, "Hamiltonian") for h in hams]
    if not hams:
        raise ValueError("need at least one Hamiltonian")
    n = hams[0].shape[0]
    gens = span_closure([-1j * h for h in hams])
    return _saturate(n, gens, gens.basis)


def ad_orbit(lie, v):
    """Span of all repeated brackets ``[R_1, [R_2, ..., [R_j, iA]]]`` with ``j >= 0``."""
    if lie.dim_hilbert != v.dim_hilbert:
        raise ValueError("Lie algebra and subspace act on different dimensions")
    return _saturate(v.dim_hilbert, v, lie.basis)


def _dual_subspace(ch, v):
    # each iA in V goes to i F*(A)
    return span_closure([1j * dual_apply(ch, a) for a in v.hermitian_basis], n=v.dim_hilbert)


def observability_spaces(lie, s_eff, ch, k_max):
    """``[V_0, ..., V_kmax]`` seeded by ``span{i S_eff}``."""
    s_eff = check_hermitian(s_eff, "S_eff")
    n = s_eff.shape[0]
    if n != lie.dim_hilbert or (ch is not None and ch.dim != n):
        raise ValueError("dimension mismatch between S_eff, Lie algebra and channel")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    spaces = [span_closure([1j * s_eff])]
    spaces.append(ad_orbit(lie, spaces[0]))
    for _ in range(2, k_max + 1):
        spaces.append(ad_orbit(lie, _dual_subspace(ch, spaces[-1])))
    return spaces


def selective_observability_spaces(lie, effects, ch, k_max):
    """Selective spaces, each quotiented by ``span{i I}`` (traceless representatives)."""
    mats = [e.matrix if hasattr(e, "matrix") else e for e in effects]
    n = lie.dim_hilbert
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    spaces = [span_closure([1j * traceless(f) for f in mats], n=n)]
    spaces.append(ad_orbit(lie, spaces[0]).traceless_part())
    for _ in range(2, k_max + 1):
        seed = span_closure([1j * traceless(dual_apply(ch, a)) for a in spaces[-1].hermitian_basis],
                            n=n)
        spaces.append(ad_orbit(lie, seed).traceless_part())
    return spaces


def selective_spaces_for(lie, ch, k_max):
    return selective_observability_spaces(lie, effects_of(ch), ch, k_max)


def is_observable(v):
    """True iff ``V`` modulo ``span{i I}`` is all of ``su(n)``."""
    n = v.dim_hilbert
    return v.traceless_part().rank == n * n - 1


def decompose_state(rho, v):
    """Split ``rho = rho1 + rho2`` with ``i rho1`` in ``V`` and ``rho2`` orthogonal to it."""
    rho = check_hermitian(rho, "rho")
    rho1 = v.project_hermitian(rho)
    return rho1, rho - rho1


def indistinguishable(rho_a, rho_b, v, atol=1e-10):
    """Two initial states give identical outputs iff their difference is orthogonal to ``V``."""
    diff = check_hermitian(np.asarray(rho_a) - np.asarray(rho_b), "rho_a - rho_b")
    return float(np.linalg.norm(v.project_hermitian(diff))) <= atol


def stabilization_index(spaces):
    """Smallest ``k`` with ``V_j = V_k`` for every recorded ``j > k``."""
    for k in range(len(spaces)):
        if all(spaces[j].rank == spaces[k].rank and spaces[j].contains(spaces[k])
               for j in range(k + 1, len(spaces))):
            return k
    return len(spaces) - 1
