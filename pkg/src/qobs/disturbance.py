"""Back-action of a measurement on the system state and minimally disturbing probes."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .channels import apply_channel
from .linalg import (SIGMA_X, SIGMA_Y, check_hermitian, hermitian_part)


@dataclass
class DisturbanceReport:
    d_squared: float
    worst_state: np.ndarray
    eigenvalues: np.ndarray
    weights: np.ndarray
    pair: tuple
    degenerate: bool = False
    multiplier: float | None = None
    candidates: list = field(default_factory=list)


def disturbance(rho_s, ch):
    """Frobenius distance ``||F(ρ) - ρ||`` between pre- and post-measurement states."""
    rho_s = check_hermitian(rho_s, "rho_S")
    return float(np.linalg.norm(apply_channel(ch, rho_s) - rho_s))


def small_time_disturbance(rho_s, x, tau):
    """Leading-order ``d²`` for a short interaction: ``2τ² Tr(X²ρ² - XρXρ)``."""
    rho_s = check_hermitian(rho_s, "rho_S")
    x = check_hermitian(x, "X")
    val = 2 * tau ** 2 * np.trace(x @ x @ rho_s @ rho_s - x @ rho_s @ x @ rho_s).real
    return float(max(val, 0.0))


def pairwise_form(x_eigs, weights):
    """``Σ_{k>j} (x_k - x_j)² s_k s_j`` for simplex weights ``s``."""
    x = np.asarray(x_eigs, dtype=float)
    s = np.asarray(weights, dtype=float)
    c = (x[:, None] - x[None, :]) ** 2
    return 0.5 * float(s @ c @ s)


def _project_simplex(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > css)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def _refine(c, s, steps=400):
    lr = 0.5 / max(np.abs(c).max(), 1e-300)
    for _ in range(steps):
        s_new = _project_simplex(s + lr * (c @ s))
        if np.abs(s_new - s).max() < 1e-15:
            break
        s = s_new
    return s


def worst_case_state(x, tau, starts=20, seed=0, tie_atol=1e-12):
    """Pure state maximising the small-time disturbance for a given ``X``.

    With ``s_k = r_k²`` in the eigenbasis of ``X`` the objective is the
    quadratic form ``2τ² Σ_{k>j}(x_k - x_j)² s_k s_j`` on the probability
    simplex.  Every eigenvector pair at weights (1/2, 1/2) is a candidate;
    projected-gradient ascent from random simplex points guards against a
    better interior stationary point.  Ties between optimal pairs go to the
    lowest index pair and are flagged.
    """
    x = check_hermitian(x, "X")
    n = x.shape[0]
    w, v = np.linalg.eigh(x)
    c = (w[:, None] - w[None, :]) ** 2
    scale = 2 * tau ** 2

    pair_scores = []
    for j, k in itertools.combinations(range(n), 2):
        pair_scores.append((c[j, k] / 4, (j, k)))
    best_pair_score = max(p[0] for p in pair_scores)
    tol = tie_atol * max(1.0, best_pair_score)
    optimal_pairs = [pq for sc, pq in pair_scores if sc >= best_pair_score - tol]
    pair = optimal_pairs[0]
    s = np.zeros(n)
    s[list(pair)] = 0.5
    best = pairwise_form(w, s)

    rng = np.random.default_rng(seed)
    for _ in range(starts if n > 2 else 0):
        cand = _refine(c, rng.dirichlet(np.ones(n)))
        val = pairwise_form(w, cand)
        if val > best + tol:
            best, s = val, cand
            pair = tuple(int(i) for i in np.argsort(cand)[-2:][::-1])

    r = np.sqrt(s)
    psi = v @ r
    rho = np.outer(psi, psi.conj())
    support = np.nonzero(r > 1e-12)[0]
    if best > 0 and support.size:
        l0 = support[0]
        multiplier = -float(np.sum(c[l0] * s))
    else:
        multiplier = 0.0
    degenerate = best <= tol or len(optimal_pairs) > 1
    return DisturbanceReport(d_squared=scale * best, worst_state=hermitian_part(rho),
                             eigenvalues=w, weights=s, pair=pair, degenerate=degenerate,
                             multiplier=multiplier, candidates=optimal_pairs)


def disturbance_generator(h_u, a, b, rho_p):
    """``X = H(u) + Tr(B ρ_P) A``, the generator of the leading-order back-action."""
    return check_hermitian(h_u, "H(u)") + np.trace(b @ rho_p).real * check_hermitian(a, "A")


def eigen_spread(m):
    w = np.linalg.eigvalsh(hermitian_part(m))
    return float(w[-1] - w[0])


def minimal_disturbance_probe(h_u, a, b):
    """Probe state minimising the worst-case small-time disturbance.

    The worst case depends on the probe only through ``c = Tr(B ρ_P)``, which
    ranges over ``[λ_min(B), λ_max(B)]``; it equals ``(spread of X)²/2 · τ²``
    and the spread of ``H(u) + cA`` is convex in ``c``.  Returns ``(c, ρ_P)``
    with ``ρ_P`` a mixture of the extreme eigenvectors of ``B``.
    """
    h_u = check_hermitian(h_u, "H(u)")
    a = check_hermitian(a, "A")
    b = check_hermitian(b, "B")
    wb, vb = np.linalg.eigh(b)
    lo, hi = float(wb[0]), float(wb[-1])
    if hi - lo <= 1e-15:
        c = lo
    else:
        # slope of the spread by Hellmann-Feynman; non-decreasing since the spread is convex
        def slope(c):
            w, v = np.linalg.eigh(h_u + c * a)
            top, bot = v[:, -1], v[:, 0]
            return float((top.conj() @ a @ top).real - (bot.conj() @ a @ bot).real)

        s_lo, s_hi = slope(lo), slope(hi)
        if s_lo >= 0:
            c = lo
        elif s_hi <= 0:
            c = hi
        else:
            c = brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            if abs(c) < 1e-13 * max(1.0, hi - lo):
                c = 0.0
    p = 0.0 if hi - lo <= 1e-15 else (hi - c) / (hi - lo)
    rho_p = p * np.outer(vb[:, 0], vb[:, 0].conj()) + (1 - p) * np.outer(vb[:, -1], vb[:, -1].conj())
    return c, hermitian_part(rho_p)


QUBIT_CONTROLS = ("u1", "u2")


def optimal_probe_qubit(E, u):
    """Minimally disturbing ``c = Tr(σx ρ_P)`` for the qubit flip-field example.

    Controls: ``H(u1) = E σx``, ``H(u2) = E σy``; coupling ``A = σy``, ``B = σx``.
    The gap of ``E σx + c σy`` is ``2√(E² + c²)`` (minimised at ``c = 0``); the
    gap of ``(E + c) σy`` is ``2|E + c|`` (minimised at ``c = -E`` clipped to
    ``|c| <= 1``).
    """
    if u == "u1":
        return 0.0
    if u == "u2":
        return float(np.clip(-E, -1.0, 1.0))
    raise KeyError(f"unknown control symbol {u!r}; expected one of {QUBIT_CONTROLS}")


def qubit_example_generator(E, u, c):
    h = {"u1": E * SIGMA_X, "u2": E * SIGMA_Y}
    if u not in h:
        raise KeyError(f"unknown control symbol {u!r}")
    return h[u] + c * SIGMA_Y
