"""Piecewise-constant controlled unitary evolution and measurement-interleaved runs."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .linalg import as_matrix, check_hermitian, dagger, hermitian_part


@dataclass(frozen=True)
class ControlSchedule:
    """Map of control symbols to Hamiltonians plus a timeline of ``(symbol, duration)``.

    Segment propagators are exact (one eigendecomposition per Hamiltonian), so
    evaluating ``X(t)`` at arbitrary ``t`` never accumulates stepping error.
    """

    hamiltonians: Mapping[str, np.ndarray]
    timeline: tuple = ()

    def __post_init__(self):
        hams = {}
        dim = None
        for sym, h in self.hamiltonians.items():
            h = check_hermitian(h, f"H({sym})")
            if dim is None:
                dim = h.shape[0]
            elif h.shape[0] != dim:
                raise ValueError(f"H({sym}) has dimension {h.shape[0]}, expected {dim}")
            hams[str(sym)] = h
        if not hams:
            raise ValueError("schedule needs at least one Hamiltonian")
        timeline = tuple((str(s), float(d)) for s, d in self.timeline)
        for s, d in timeline:
            if s not in hams:
                raise ValueError(f"timeline references unknown control {s!r}")
            if not np.isfinite(d) or d < 0:
                raise ValueError(f"segment duration must be finite and >= 0, got {d}")
        object.__setattr__(self, "hamiltonians", hams)
        object.__setattr__(self, "timeline", timeline)

    @property
    def dim(self):
        return next(iter(self.hamiltonians.values())).shape[0]

    @property
    def duration(self):
        return float(sum(d for _, d in self.timeline))

    @cached_property
    def boundaries(self):
        """Segment start times followed by the total duration."""
        return np.concatenate([[0.0], np.cumsum([d for _, d in self.timeline])])

    @cached_property
    def _eig(self):
        return {s: np.linalg.eigh(h) for s, h in self.hamiltonians.items()}

    @cached_property
    def _segment_starts(self):
        # X at the start of every segment, X(0) = I
        out = [np.eye(self.dim, dtype=complex)]
        for s, d in self.timeline:
            out.append(self._segment_unitary(s, d) @ out[-1])
        return np.array(out)

    def _segment_unitary(self, symbol, dt):
        w, v = self._eig[symbol]
        return (v * np.exp(-1j * w * dt)) @ dagger(v)

    def segment_index(self, t):
        """Index of the segment active at ``t`` (right-continuous; last segment at the end)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.boundaries, t, side="right") - 1
        return np.clip(idx, 0, max(len(self.timeline) - 1, 0))

    def hamiltonian_at(self, t):
        if not self.timeline:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return self.hamiltonians[self.timeline[int(self.segment_index(t))][0]]

    def with_timeline(self, timeline):
        return ControlSchedule(self.hamiltonians, tuple(timeline))

    def then(self, other):
        """Concatenate two schedules over the same control set."""
        hams = dict(self.hamiltonians)
        hams.update(other.hamiltonians)
        return ControlSchedule(hams, self.timeline + other.timeline)

    def forward(self, times):
        """Vectorised ``X(t)`` for an array of times, shape ``(len(times), n, n)``."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        total = self.duration
        if np.any(times < -1e-12) or np.any(times > total + 1e-9 * max(1.0, total)):
            raise ValueError(f"time outside schedule range [0, {total}]")
        times = np.clip(times, 0.0, total)
        out = np.empty((times.size, self.dim, self.dim), dtype=complex)
        if not self.timeline:
            out[:] = np.eye(self.dim)
            return out
        idx = self.segment_index(times)
        for j in np.unique(idx):
            mask = idx == j
            sym = self.timeline[j][0]
            w, v = self._eig[sym]
            dt = times[mask] - self.boundaries[j]
            phases = np.exp(-1j * np.outer(dt, w))
            seg = np.einsum("ik,tk,lk->til", v, phases, v.conj())
            out[mask] = seg @ self._segment_starts[j]
        return out

    def to_dict(self):
        from .linalg import matrix_to_json
        return {"hamiltonians": {s: matrix_to_json(h) for s, h in self.hamiltonians.items()},
                "timeline": [[s, d] for s, d in self.timeline]}


@dataclass(frozen=True)
class Propagator:
    matrix: np.ndarray
    time: float


def propagator(schedule, t, sign="forward"):
    """Propagator at time ``t``.

    ``forward`` gives ``X(t)`` solving ``dX/dt = -i H(u) X``; ``adjoint`` gives
    ``X(t)†``, the inverse evolution.
    """
    if sign not in ("forward", "adjoint"):
        raise ValueError("sign must be 'forward' or 'adjoint'")
    x = schedule.forward([t])[0]
    return Propagator(x if sign == "forward" else dagger(x), float(t))


def evolve_density(rho0, schedule, t):
    rho0 = as_matrix(rho0, "rho0")
    if rho0.shape[0] != schedule.dim:
        raise ValueError("state and schedule dimensions differ")
    x = schedule.forward([t])[0]
    return x @ rho0 @ dagger(x)


def output_value(rho, s_eff):
    """Scalar output ``Tr(S_eff rho)``."""
    rho = as_matrix(rho, "rho")
    s_eff = as_matrix(s_eff, "S_eff")
    if rho.shape != s_eff.shape:
        raise ValueError("state and observable dimensions differ")
    return float(np.real(np.einsum("ij,ji->", s_eff, rho)))


@dataclass
class MeasuredTrajectory:
    """States sampled along ``k`` evolution legs, each followed by a nonselective measurement.

    ``states[i]`` is the state at ``times[i]`` on leg ``legs[i]`` (0-based); the
    last sample of each leg is the state immediately before that leg's
    measurement.  ``final_state`` is the state after the ``k``-th measurement.
    """

    times: np.ndarray
    states: np.ndarray
    legs: np.ndarray
    measurement_times: list = field(default_factory=list)
    final_state: np.ndarray | None = None

    def outputs(self, s_eff):
        return np.einsum("ij,tji->t", np.asarray(s_eff, dtype=complex), self.states).real

    def leg(self, j):
        mask = self.legs == j
        return self.times[mask], self.states[mask]

    def to_csv(self, path):
        n = self.states.shape[1]
        header = ["time", "leg"]
        for i in range(n):
            for j in range(n):
                header += [f"re_{i}{j}", f"im_{i}{j}"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, leg, rho in zip(self.times, self.legs, self.states):
                row = [f"{t:.17g}", str(int(leg))]
                for z in rho.ravel():
                    row += [f"{z.real:.17g}", f"{z.imag:.17g}"]
                w.writerow(row)

    def write(self, csv_path, meta_path, scenario_name, extra=None):
        self.to_csv(csv_path)
        meta = {"scenario": scenario_name,
                "dim": int(self.states.shape[1]),
                "samples": int(len(self.times)),
                "measurement_times": [float(t) for t in self.measurement_times]}
        meta.update(extra or {})
        with open(meta_path, "w") as fh:
            json.dump(meta, fh, indent=2)


def _check_schedules(schedules, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(schedules) < k:
        raise ValueError(f"need {k} schedules, got {len(schedules)}")


def measured_trajectory(rho0, schedules: Sequence[ControlSchedule], channel, k,
                        samples_per_leg=21):
    """Evolve along ``schedules[0..k-1]``, applying the channel after each leg."""
    from .channels import apply_channel

    _check_schedules(schedules, k)
    rho = as_matrix(rho0, "rho0")
    t0 = 0.0
    times, states, legs, mtimes = [], [], [], []
    for j in range(k):
        sch = schedules[j]
        local = np.linspace(0.0, sch.duration, max(2, samples_per_leg))
        xs = sch.forward(local)
        seg = xs @ rho @ dagger(xs)
        times.append(t0 + local)
        states.append(seg)
        legs.append(np.full(local.size, j))
        t0 += sch.duration
        rho = apply_channel(channel, hermitian_part(seg[-1]))
        mtimes.append(t0)
    return MeasuredTrajectory(np.concatenate(times), np.concatenate(states),
                              np.concatenate(legs), mtimes, rho)


def selective_probability(rho0, schedules, channel, m, k):
    """Marginal probability of outcome ``m`` at the ``k``-th measurement.

    Earlier outcomes are averaged over, which collapses the Bayes sum over all
    outcome histories into repeated application of the nonselective channel.
    """
    from .channels import apply_channel, effects_of

    _check_schedules(schedules, k)
    idx = channel.index_of(m)
    rho = as_matrix(rho0, "rho0")
    for j in range(k):
        x = schedules[j].forward([schedules[j].duration])[0]
        rho = x @ rho @ dagger(x)
        if j < k - 1:
            rho = apply_channel(channel, rho)
    f = effects_of(channel)[idx].matrix
    return float(np.real(np.einsum("ij,ji->", f, rho)))
