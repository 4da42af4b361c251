"""Asymptotic state observer driven by the scalar output ``y = Tr(S ρ)``.

The estimate obeys

    dρ̂/dt = -i[H(u), ρ̂] + ½ P_t⁻¹(S) (y - Tr(S ρ̂))

where ``P_t`` is the exponentially weighted sliding-window Gramian

    P_t(Δ) = ∫_{t-σ}^t e^{-M(t-τ)} K(t,τ) Tr(K(t,τ) Δ) dτ,
    K(t,τ) = Φ(t,τ) S Φ(t,τ)†,   Φ(t,τ) = X(t) X(τ)†.

``K(t,τ)`` is the observable that reads the *current* state ``ρ(t)`` at the
past time ``τ``: ``y(τ) = Tr(K(t,τ) ρ(t))``.  With this gain the error
``Δ = ρ - ρ̂`` satisfies ``dV/dt <= -M V`` for ``V = Tr(Δ P_t(Δ))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import check_density, check_hermitian, dagger, hermitian_basis, \
    hermitian_part, traceless


class ObserverError(RuntimeError):
    """Uniform observability fails or the window Gramian is singular."""


def _simpson(taus):
    n = taus.size
    if n < 3:
        return np.full(n, (taus[-1] - taus[0]) / max(n - 1, 1)) * (0.5 if n == 2 else 0.0)
    if n % 2 == 0:
        # trapezoid on the first interval, Simpson on the rest
        h = taus[1] - taus[0]
        w = np.zeros(n)
        w[:2] = h / 2
        w[1:] += _simpson(taus[1:])
        return w
    h = (taus[-1] - taus[0]) / (n - 1)
    w = np.ones(n)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w * h / 3


def kernel_observable(schedule, s, t, tau_prime):
    """``Φ(t,τ) S Φ(t,τ)†`` with ``Φ(t,τ) = X(t) X(τ)†``."""
    if not 0 <= tau_prime <= t + 1e-12:
        raise ValueError("need 0 <= tau' <= t")
    s = check_hermitian(s, "S")
    xt, xs = schedule.forward([t, tau_prime])
    phi = xt @ dagger(xs)
    return phi @ s @ dagger(phi)


@dataclass
class SlidingGramian:
    """``P_t`` as a real symmetric matrix over the full Hermitian basis."""

    dim_hilbert: int
    window: float
    forgetting: float
    matrix: np.ndarray
    time: float

    def apply(self, delta):
        hb = hermitian_basis(self.dim_hilbert)
        return hb.matrix(self.matrix @ hb.coords(delta))

    def solve(self, s, rtol=1e-10):
        """``P_t⁻¹(s)`` restricted to the range of ``P_t``.

        Raises when ``s`` has a component outside that range, i.e. when the
        inverse does not exist on the relevant subspace.
        """
        hb = hermitian_basis(self.dim_hilbert)
        w, v = np.linalg.eigh(self.matrix)
        keep = w > rtol * max(w[-1], 1e-300)
        c = hb.coords(s)
        proj = v[:, keep].T @ c
        if np.linalg.norm(c - v[:, keep] @ proj) > 1e-8 * max(np.linalg.norm(c), 1e-300):
            raise ObserverError("P_t is singular on the direction of the requested argument")
        return hb.matrix(v[:, keep] @ (proj / w[keep]))

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)


def _heisenberg_coords(schedule, s, taus, full=False):
    """Basis coordinates of ``X(τ)† S X(τ)``."""
    xs = schedule.forward(taus)
    hb = hermitian_basis(s.shape[0])
    c = hb.coords(dagger(xs) @ s @ xs)
    return c if full else c[:, :-1]


def sliding_gramian(schedule, s, t, sigma, M, nodes=401):
    """Quadrature of ``e^{-M(t-τ)} k(τ) k(τ)ᵀ`` over ``[t-σ, t]``."""
    if t < sigma - 1e-12:
        raise ValueError("sliding Gramian needs t >= sigma")
    if not M > 0:
        raise ValueError("forgetting rate M must be positive")
    s = check_hermitian(s, "S")
    n = s.shape[0]
    taus = np.linspace(t - sigma, t, int(nodes) | 1)
    taus[0] = max(taus[0], 0.0)
    hb = hermitian_basis(n)
    xt = schedule.forward([t])[0]
    R = hb.adjoint_action(xt)
    k = _heisenberg_coords(schedule, s, taus, full=True) @ R.T
    w = _simpson(taus) * np.exp(-M * (t - taus))
    mat = (k * w[:, None]).T @ k
    return SlidingGramian(n, float(sigma), float(M), 0.5 * (mat + mat.T), float(t))


def _window_gram(c, taus, t, M=0.0):
    w = _simpson(taus)
    if M:
        w = w * np.exp(-M * (t - taus))
    return (c * w[:, None]).T @ c


def uniform_observability_check(schedule, s, sigma, horizon, t_samples=61, nodes=201):
    """Empirical constants of ``α₁|Δ|² <= ∫_{t-σ}^t Tr(K Δ)² dτ <= α₂|Δ|²``.

    Minimum and maximum eigenvalues of the unweighted window Gram matrix over
    a grid of ``t`` in ``[σ, horizon]``; only traceless ``Δ`` are considered,
    since the output cannot see the trace.  The eigenvalues do not depend on
    the frame, so Heisenberg-picture coordinates are used.
    """
    if horizon < sigma:
        raise ValueError("horizon must be >= sigma")
    s = traceless(check_hermitian(s, "S"))
    a1, a2 = np.inf, 0.0
    for t in np.linspace(sigma, horizon, t_samples):
        taus = np.linspace(t - sigma, t, int(nodes) | 1)
        c = _heisenberg_coords(schedule, s, taus)
        w = np.linalg.eigvalsh(_window_gram(c, taus, t))
        a1, a2 = min(a1, w[0]), max(a2, w[-1])
    return float(max(a1, 0.0)), float(a2)


@dataclass
class ObserverRun:
    times: np.ndarray
    true_states: np.ndarray
    estimates: np.ndarray
    delta_norms: np.ndarray
    lyapunov: np.ndarray
    alpha_bounds: tuple
    sigma: float
    forgetting: float
    decay_rate: float = float("nan")
    decay_intercept: float = float("nan")
    r_squared: float = float("nan")

    def summary(self):
        return {"alpha1": self.alpha_bounds[0], "alpha2": self.alpha_bounds[1],
                "sigma": self.sigma, "M": self.forgetting,
                "decay_rate": self.decay_rate, "r_squared": self.r_squared,
                "delta_initial": float(self.delta_norms[0]),
                "delta_final": float(self.delta_norms[-1])}


def fit_decay(times, norms, start, floor=1e-11):
    """Least-squares slope, intercept and R² of ``log |Δ|`` over ``t >= start``."""
    mask = (times >= start - 1e-12) & (norms > floor)
    if mask.sum() < 3:
        return float("nan"), float("nan"), float("nan")
    x, y = times[mask], np.log(norms[mask])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = np.sum((y - pred) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def run_observer(rho0, rho_hat0, schedule, s, M, sigma, T, step, check=True,
                 singular_rtol=1e-12):
    """Simulate the true system and the observer side by side.

    The true state uses exact propagators.  The estimate is advanced with
    fixed-step RK4 in the frame co-rotating with ``X(t)``, so only the gain
    term carries integration error.  The window Gramian is assembled from propagator samples
    buffered on the half-step grid (so every RK4 stage lands on a sample) and
    the gain is switched off until ``t >= σ``.  ``σ`` is rounded to a whole
    number of half steps.
    """
    rho0 = check_density(rho0, "rho0")
    rho_hat0 = check_hermitian(rho_hat0, "rho_hat0")
    s = check_hermitian(s, "S")
    n = s.shape[0]
    if not M > 0:
        raise ValueError("M must be positive")
    if T > schedule.duration * (1 + 1e-12):
        raise ValueError("schedule shorter than the simulation horizon")
    hnorm = max(np.linalg.norm(h, 2) for h in schedule.hamiltonians.values())
    if hnorm * step > 0.1 + 1e-12:
        raise ValueError(f"step too large: |H| * step = {hnorm * step:.3g} > 0.1")
    steps = int(round(T / step))
    h = T / steps
    half = h / 2
    m = max(int(round(sigma / half)), 2)
    sigma_eff = m * half
    if check:
        alphas = uniform_observability_check(schedule, s, sigma_eff, T)
        if alphas[0] <= 1e-9 * max(alphas[1], 1e-300):
            raise ObserverError(f"uniform observability fails on [σ, T]: alpha1 = {alphas[0]:.3g}")
    else:
        alphas = (float("nan"), float("nan"))

    s0 = traceless(s)
    grid = np.arange(2 * steps + 1) * half
    xs = schedule.forward(grid)
    hb = hermitian_basis(n)
    heis = hb.traceless_coords(dagger(xs) @ s0 @ xs)
    y = np.einsum("ij,tjk,kl,tli->t", s, xs, rho0, dagger(xs)).real

    def window(i2):
        lo = max(0, i2 - m)
        taus = grid[lo:i2 + 1]
        if taus.size < 2:
            return np.zeros((heis.shape[1],) * 2)
        c = heis[lo:i2 + 1]
        w = np.full(taus.size, half)
        w[0] = w[-1] = half / 2
        w *= np.exp(-M * (grid[i2] - taus))
        return (c * w[:, None]).T @ c

    # gains in the co-rotating frame, where the estimate is X(t)† ρ̂ X(t)
    gains = np.zeros((grid.size, n, n), dtype=complex)
    for i2 in range(m, grid.size):
        q = window(i2)
        ev = np.linalg.eigvalsh(q)
        if ev[0] <= singular_rtol * ev[-1]:
            raise ObserverError(f"window Gramian singular at t = {grid[i2]:.6g} "
                                f"(eigenvalues {ev[0]:.3g} .. {ev[-1]:.3g})")
        gains[i2] = hb.matrix(np.linalg.solve(q, heis[i2]))
    s_heis = dagger(xs) @ s @ xs

    def rhs(i2, r):
        innov = y[i2] - np.einsum("ij,ji->", s_heis[i2], r).real
        return 0.5 * gains[i2] * innov

    # the free evolution is exact in this frame; RK4 only integrates the gain term
    rot = np.empty((steps + 1, n, n), dtype=complex)
    rot[0] = rho_hat0
    r = rho_hat0.astype(complex)
    for i in range(steps):
        i2 = 2 * i
        k1 = rhs(i2, r)
        k2 = rhs(i2 + 1, r + half * k1)
        k3 = rhs(i2 + 1, r + half * k2)
        k4 = rhs(i2 + 2, r + h * k3)
        r = hermitian_part(r + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
        rot[i + 1] = r

    xg = xs[::2]
    true = xg @ rho0 @ dagger(xg)
    est = xg @ rot @ dagger(xg)
    delta_rot = rho0 - rot
    norms = np.linalg.norm(delta_rot, axis=(1, 2))
    lyap = np.empty(steps + 1)
    dh = hb.traceless_coords(delta_rot)
    for i in range(steps + 1):
        lyap[i] = float(dh[i] @ window(2 * i) @ dh[i])
    times = grid[::2]
    slope, intercept, r2 = fit_decay(times, norms, sigma_eff)
    return ObserverRun(times, true, est, norms, lyap, alphas, sigma_eff, float(M),
                       slope, intercept, r2)
