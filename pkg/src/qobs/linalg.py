"""Dense complex-matrix kernels shared by the rest of the package.

Everything here works on plain ``numpy`` arrays of dtype ``complex128``.
Tensor products are ordered system-first (``system ⊗ probe``) everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
EIG_FLOOR = -1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


def as_matrix(a, name="matrix"):
    """Coerce ``a`` to a finite square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] == 0:
        raise DimensionError(f"{name} is empty")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _same_dim(a, b):
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a, b):
    """Return ``ab - ba``."""
    a, b = _same_dim(a, b)
    return a @ b - b @ a


def ad_power(b, x, k):
    """Return ``ad_b^k(x)``: ``k`` nested commutators ``[b, [b, ... [b, x]]]``."""
    b, x = _same_dim(b, x)
    if k < 0:
        raise ValueError("k must be non-negative")
    out = x
    for _ in range(k):
        out = b @ out - out @ b
    return out


def hs_inner(a, b):
    """Hilbert-Schmidt inner product ``Tr(a† b)``."""
    a, b = _same_dim(a, b)
    return complex(np.vdot(a, b))


def tensor(a, b):
    """Kronecker product, system factor first."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace_probe(m, n_sys, n_probe):
    """Trace out the probe factor of a ``(n_sys*n_probe)``-dimensional operator."""
    m = as_matrix(m)
    if n_sys < 1 or n_probe < 1 or m.shape[0] != n_sys * n_probe:
        raise DimensionError(
            f"cannot split dimension {m.shape[0]} as {n_sys} x {n_probe}")
    return np.einsum("iaja->ij", m.reshape(n_sys, n_probe, n_sys, n_probe))


def is_hermitian(m, atol=HERMITIAN_ATOL):
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and \
        np.linalg.norm(m - dagger(m)) <= atol


def is_skew_hermitian(m, atol=HERMITIAN_ATOL):
    m = np.asarray(m)
    return np.linalg.norm(m + dagger(m)) <= atol


def is_density(m, trace_atol=TRACE_ATOL, eig_floor=EIG_FLOOR):
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m):
        return False
    if abs(np.trace(m) - 1) > trace_atol:
        return False
    return np.linalg.eigvalsh(hermitian_part(m)).min() >= eig_floor


def hermitian_part(m):
    return 0.5 * (m + dagger(m))


def check_hermitian(m, name="operator", atol=HERMITIAN_ATOL):
    m = as_matrix(m, name)
    if not is_hermitian(m, atol):
        raise ValueError(f"{name} is not Hermitian "
                         f"(|M - M†| = {np.linalg.norm(m - dagger(m)):.3g})")
    return hermitian_part(m)


def check_density(m, name="state"):
    m = check_hermitian(m, name)
    tr = np.trace(m).real
    if abs(tr - 1) > TRACE_ATOL:
        raise ValueError(f"{name} has trace {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(m).min()
    if lo < EIG_FLOOR:
        raise ValueError(f"{name} has negative eigenvalue {lo:.3g}")
    return m


def traceless(m):
    m = np.asarray(m, dtype=complex)
    n = m.shape[-1]
    return m - np.trace(m, axis1=-2, axis2=-1)[..., None, None] / n * np.eye(n)


def expm(a):
    """Matrix exponential.

    Skew-Hermitian arguments go through a unitary eigendecomposition of the
    Hermitian matrix ``i a``; everything else falls back to scipy's
    scaling-and-squaring Pade approximant.
    """
    a = as_matrix(a)
    if is_skew_hermitian(a, atol=1e-12 * max(1.0, np.abs(a).max())):
        w, v = np.linalg.eigh(hermitian_part(1j * a))
        return (v * np.exp(-1j * w)) @ dagger(v)
    return scipy.linalg.expm(a)


def unitary_from_hamiltonian(h, t):
    """``exp(-i h t)`` for Hermitian ``h``."""
    w, v = np.linalg.eigh(hermitian_part(as_matrix(h)))
    return (v * np.exp(-1j * w * t)) @ dagger(v)


@dataclass(frozen=True)
class HermitianBasis:
    """Hilbert-Schmidt orthonormal basis of n x n Hermitian matrices.

    ``elements[:-1]`` are the normalised traceless generalized Gell-Mann
    matrices, ``elements[-1]`` is ``I/sqrt(n)``.
    """

    dim: int
    elements: np.ndarray

    @property
    def traceless(self):
        return self.elements[:-1]

    def coords(self, m):
        """Real coordinates ``Tr(E_j m)`` of Hermitian ``m`` (last axis = basis)."""
        m = np.asarray(m, dtype=complex)
        return np.einsum("kji,...ij->...k", self.elements, m).real

    def traceless_coords(self, m):
        return self.coords(m)[..., :-1]

    def matrix(self, c):
        c = np.asarray(c, dtype=float)
        els = self.elements if c.shape[-1] == self.dim ** 2 else self.traceless
        return np.tensordot(c, els, axes=([-1], [0]))

    def adjoint_action(self, u):
        """Real orthogonal matrix of ``m -> u m u†`` in these coordinates."""
        conj = u @ self.elements @ dagger(u)
        return self.coords(conj).T


@lru_cache(maxsize=None)
def _gell_mann(n):
    els = []
    for j in range(n):
        for k in range(j + 1, n):
            s = np.zeros((n, n), dtype=complex)
            s[j, k] = s[k, j] = 1
            els.append(s / np.sqrt(2))
            a = np.zeros((n, n), dtype=complex)
            a[j, k], a[k, j] = -1j, 1j
            els.append(a / np.sqrt(2))
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1
        d[l] = -l
        els.append(np.diag(d).astype(complex) / np.sqrt(l * (l + 1)))
    els.append(np.eye(n, dtype=complex) / np.sqrt(n))
    arr = np.array(els)
    arr.setflags(write=False)
    return arr


def hermitian_basis(n):
    """Orthonormal Hermitian basis for dimension ``n`` (identity last).

    For ``n = 2`` the traceless part is ``{σx, σy, σz}/√2``.
    """
    n = int(n)
    if n < 2:
        raise ValueError("hermitian_basis needs n >= 2")
    return HermitianBasis(n, _gell_mann(n))


def matrix_to_json(m):
    m = np.asarray(m, dtype=complex)
    return {"dim": int(m.shape[0]),
            "re": [float(x) for x in m.real.ravel()],
            "im": [float(x) for x in m.imag.ravel()]}


def matrix_from_json(d):
    n = int(d["dim"])
    re = np.asarray(d["re"], dtype=float)
    im = np.asarray(d.get("im", np.zeros(n * n)), dtype=float)
    if re.size != n * n or im.size != n * n:
        raise DimensionError(f"matrix payload does not hold {n}x{n} entries")
    return (re + 1j * im).reshape(n, n)


def random_hermitian(n, rng):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (g + dagger(g)) / 2


def random_unitary(n, rng):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(n, rng, rank=None):
    rank = n if rank is None else rank
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_pure(n, rng):
    return random_density(n, rng, rank=1)


def spin_matrices(j):
    """Spin-``j`` angular momentum matrices ``(Jx, Jy, Jz)``, basis m = j..-j."""
    dim = int(round(2 * j + 1))
    m = j - np.arange(dim)
    jp = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        jp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jx = (jp + jp.T) / 2
    jy = (jp - jp.T) / 2j
    return jx, jy, np.diag(m).astype(complex)
