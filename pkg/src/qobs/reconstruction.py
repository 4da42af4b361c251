"""Initial-state reconstruction from a continuous output record.

Coordinates are taken in the traceless part of the orthonormal Hermitian
basis, so the Gramian is the plain Gram matrix of the coordinate functions of
``X(t)† S X(t)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import ControlSchedule
from .linalg import check_hermitian, dagger, hermitian_basis, hermitian_part, traceless
from .lie import dynamical_lie_algebra, is_observable, observability_spaces

RANK_RTOL = 1e-9
PSD_CLIP = -1e-8
PSD_WARN = -1e-4


class RankDeficiencyError(RuntimeError):
    """The Gramian is singular: the output does not determine the state."""


@dataclass
class GramianOperator:
    dim_hilbert: int
    matrix: np.ndarray
    horizon: float
    quadrature_nodes: int

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    @property
    def min_eigenvalue(self):
        return float(self.eigenvalues[0])

    @property
    def condition_number(self):
        w = self.eigenvalues
        return float(w[-1] / w[0]) if w[0] > 0 else float("inf")

    def apply(self, h):
        """``W(ρ̂) = ∫ C(t) Tr(C(t) ρ̂) dt`` for Hermitian ``h`` (trace part ignored)."""
        hb = hermitian_basis(self.dim_hilbert)
        return hb.matrix(self.matrix @ hb.traceless_coords(h))


def simpson_weights(t):
    """Composite Simpson weights on a uniform grid with an odd number of nodes."""
    t = np.asarray(t, dtype=float)
    n = t.size
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson's rule needs an odd number of nodes >= 3")
    h = (t[-1] - t[0]) / (n - 1)
    w = np.ones(n)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w * h / 3


def quadrature_grid(T, nodes):
    nodes = int(nodes)
    if nodes < 3:
        raise ValueError("need at least 3 quadrature nodes")
    if nodes % 2 == 0:
        nodes += 1
    t = np.linspace(0.0, float(T), nodes)
    return t, simpson_weights(t)


def conjugated_observable(schedule, s, t):
    """``X(t)† S X(t)``: the observable that reads ``ρ0`` at time ``t``."""
    s = check_hermitian(s, "S")
    x = schedule.forward([t])[0]
    return dagger(x) @ s @ x


def coordinate_functions(schedule, s, times):
    """Traceless-basis coordinates of ``X(t)† S X(t)``, shape ``(len(times), n²-1)``."""
    s = check_hermitian(s, "S")
    xs = schedule.forward(times)
    conj = dagger(xs) @ s @ xs
    return hermitian_basis(s.shape[0]).traceless_coords(conj)


def gramian(schedule, s, T, nodes=801):
    """Gram matrix ``g_ij = ∫_0^T f_i f_j dt`` by composite Simpson quadrature."""
    t, w = quadrature_grid(T, nodes)
    f = coordinate_functions(schedule, s, t)
    g = (f * w[:, None]).T @ f
    return GramianOperator(check_hermitian(s).shape[0], 0.5 * (g + g.T), float(T), t.size)


def check_rank(W, rtol=RANK_RTOL):
    w = W.eigenvalues
    return bool(w[-1] > 0 and w[0] > rtol * w[-1])


@dataclass
class Reconstruction:
    rho0: np.ndarray
    gramian: GramianOperator
    residual: float
    clipped: bool


def _project_density(rho):
    w, v = np.linalg.eigh(hermitian_part(rho))
    if w.min() >= PSD_CLIP:
        return rho, False
    if w.min() < PSD_WARN:
        warnings.warn(f"reconstructed state has eigenvalue {w.min():.3g}; projecting to PSD",
                      RuntimeWarning, stacklevel=3)
    w = np.clip(w, 0.0, None)
    w /= w.sum()
    return (v * w) @ dagger(v), True


def reconstruct(samples, schedule, s, T, nodes=801):
    """Recover ``ρ0`` from output samples ``(t, y)`` with ``y = Tr(S ρ(t))``.

    ``ρ0 = I/n + W⁻¹(∫_0^T X† S X · y(t) dt)``, with the integral taken by the
    same quadrature as the Gramian against linearly interpolated samples.
    A trace carried by ``S`` is removed from both ``S`` and ``y``.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise ValueError("samples must be an array of (time, y) rows")
    order = np.argsort(samples[:, 0])
    ts, ys = samples[order, 0], samples[order, 1]
    s = check_hermitian(s, "S")
    n = s.shape[0]
    t, w = quadrature_grid(T, nodes)
    if ts.size < t.size:
        raise ValueError(f"{ts.size} samples cannot resolve {t.size} quadrature nodes")
    if ts[0] > 1e-12 * max(1.0, T) or ts[-1] < T * (1 - 1e-12):
        raise ValueError("samples do not cover [0, T]")
    shift = np.trace(s).real / n
    s0 = traceless(s)
    f = coordinate_functions(schedule, s0, t)
    fw = (f * w[:, None]).T
    g = fw @ f
    W = GramianOperator(n, 0.5 * (g + g.T), float(T), t.size)
    if not check_rank(W):
        raise RankDeficiencyError(
            f"Gramian is rank deficient (eigenvalues {W.eigenvalues}); "
            "the output does not determine the initial state")
    y = np.interp(t, ts, ys) - shift
    rhs = fw @ y
    c = np.linalg.solve(W.matrix, rhs)
    hb = hermitian_basis(n)
    rho = np.eye(n, dtype=complex) / n + hb.matrix(c)
    rho, clipped = _project_density(hermitian_part(rho))
    y_hat = coordinate_functions(schedule, s0, ts) @ hb.traceless_coords(rho) + shift
    resid = float(np.sqrt(np.mean((ys - y_hat) ** 2)))
    return Reconstruction(rho, W, resid, clipped)


def synthetic_samples(rho0, schedule, s, T, count):
    """Noise-free output record on a uniform grid."""
    t = np.linspace(0.0, T, count)
    xs = schedule.forward(t)
    rho_t = xs @ rho0 @ dagger(xs)
    y = np.einsum("ij,tji->t", np.asarray(s, dtype=complex), rho_t).real
    return np.column_stack([t, y])


class SearchExhausted(RuntimeError):
    def __init__(self, msg, best_condition):
        super().__init__(msg)
        self.best_condition = best_condition


def candidate_control_search(hamiltonians, s, segments=6, seed=0, horizon=None,
                             retries=8, nodes=801):
    """Random piecewise-constant schedule whose Gramian has full rank.

    Each attempt draws ``segments`` random (control, duration) pairs; after a
    failure the horizon doubles.  Observability of the control set is checked
    first because no schedule can help otherwise.
    """
    hams = {str(k): check_hermitian(v, f"H({k})") for k, v in hamiltonians.items()}
    s = check_hermitian(s, "S")
    lie = dynamical_lie_algebra(list(hams.values()))
    v1 = observability_spaces(lie, traceless(s), None, 1)[1]
    if not is_observable(v1):
        raise RankDeficiencyError(
            f"not observable in one step: rank(V_1) = {v1.rank} < {s.shape[0] ** 2 - 1}")
    norm = max(np.linalg.norm(h, 2) for h in hams.values())
    if horizon is None:
        horizon = np.pi / max(norm, 1e-12)
    rng = np.random.default_rng(seed)
    symbols = sorted(hams)
    best = float("inf")
    for _ in range(retries):
        durations = rng.dirichlet(np.ones(segments)) * horizon
        picks = rng.integers(len(symbols), size=segments)
        sched = ControlSchedule(hams, tuple((symbols[p], float(d))
                                            for p, d in zip(picks, durations)))
        W = gramian(sched, traceless(s), sched.duration, nodes)
        best = min(best, W.condition_number)
        if check_rank(W):
            return sched
        horizon *= 2
    raise SearchExhausted(f"no full-rank schedule found in {retries} attempts "
                          f"(best condition number {best:.3g})", best)
