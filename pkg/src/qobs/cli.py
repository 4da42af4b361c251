"""``qobs`` command line: analyze, seff, disturbance, reconstruct, observe, simulate.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channels import NullEventError, effects_of
from .disturbance import (disturbance, disturbance_generator, minimal_disturbance_probe,
                          optimal_probe_qubit, small_time_disturbance, worst_case_state)
from .dynamics import measured_trajectory, selective_probability
from .lie import (is_observable, observability_spaces, selective_observability_spaces,
                  stabilization_index)
from .linalg import SIGMA_X, SIGMA_Y, matrix_to_json, random_density
from .observer import ObserverError, run_observer
from .reconstruction import RankDeficiencyError, SearchExhausted, reconstruct
from .scenario import ScenarioError, parse_scenario, parse_schedule_file

log = logging.getLogger("qobs")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _emit(doc, out=None):
    text = json.dumps(doc, indent=2, allow_nan=True)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _verdict(spaces):
    for k, v in enumerate(spaces):
        if is_observable(v):
            return k, f"observable in {k} step{'s' if k != 1 else ''}"
    return None, f"unobservable, rank {spaces[-1].traceless_part().rank}"


def analyze(scenario, k_max):
    """Rank report of the dynamical Lie algebra and the observability spaces."""
    lie = scenario.lie_algebra()
    seff = scenario.effective_observable()
    ch = scenario.channel()
    spaces = observability_spaces(lie, seff.traceless, ch, k_max)
    k_obs, verdict = _verdict(spaces)
    report = {
        "scenario": scenario.name,
        "dim": scenario.dim,
        "rank_lie_algebra": lie.rank,
        "s_eff": matrix_to_json(seff.traceless),
        "nonselective": [{"k": k, "rank": v.rank, "observable": is_observable(v)}
                         for k, v in enumerate(spaces)],
        "observable_in_steps": k_obs,
        "verdict": verdict,
        "stabilization_index": stabilization_index(spaces),
        "selective": None,
    }
    if scenario.kind != "direct":
        sel = selective_observability_spaces(lie, effects_of(ch), ch, k_max)
        k_sel, sel_verdict = _verdict(sel)
        report["selective"] = {
            "spaces": [{"k": k, "rank": v.rank, "observable": is_observable(v)}
                       for k, v in enumerate(sel)],
            "observable_in_steps": k_sel,
            "verdict": sel_verdict,
            "stabilization_index": stabilization_index(sel),
        }
    return report


def seff_report(scenario, tol=None, k_cap=None):
    e = scenario.effective_observable(tol=tol, k_cap=k_cap)
    return {"scenario": scenario.name, "method": e.method,
            "raw": matrix_to_json(e.raw), "traceless": matrix_to_json(e.traceless),
            "truncation_index": e.order, "converged": e.converged}


def _is_flip_field_example(scenario):
    if scenario.kind != "indirect" or scenario.dim != 2 or set(scenario.hamiltonians) != {"u1", "u2"}:
        return None
    st = scenario.measurement
    if not (np.allclose(st.A, SIGMA_Y) and np.allclose(st.B, SIGMA_X)):
        return None
    h1, h2 = scenario.hamiltonians["u1"], scenario.hamiltonians["u2"]
    E = h1[0, 1].real
    if np.allclose(h1, E * SIGMA_X) and np.allclose(h2, E * SIGMA_Y):
        return float(E)
    return None


def disturbance_report(scenario):
    doc = {"scenario": scenario.name, "controls": {}}
    ch = scenario.channel()
    if scenario.rho0 is not None:
        doc["d_channel_rho0"] = disturbance(scenario.rho0, ch)
    if scenario.kind != "indirect":
        return doc
    st = scenario.measurement
    E = _is_flip_field_example(scenario)
    for sym, h in scenario.hamiltonians.items():
        x = disturbance_generator(h, st.A, st.B, st.rho_P)
        rep = worst_case_state(x, st.tau)
        c_opt, rho_p_opt = minimal_disturbance_probe(h, st.A, st.B)
        opt_rep = worst_case_state(h + c_opt * st.A, st.tau)
        entry = {
            "X_eigenvalues": [float(w) for w in rep.eigenvalues],
            "d_squared_worst": rep.d_squared,
            "worst_state": matrix_to_json(rep.worst_state),
            "eigen_pair": list(rep.pair),
            "degenerate": rep.degenerate,
            "lagrange_multiplier": rep.multiplier,
            "optimal_probe_c": c_opt,
            "optimal_probe_state": matrix_to_json(rho_p_opt),
            "d_squared_worst_at_optimum": opt_rep.d_squared,
        }
        if scenario.rho0 is not None:
            entry["d_squared_small_time_rho0"] = small_time_disturbance(scenario.rho0, x, st.tau)
        if E is not None:
            entry["optimal_probe_c_closed_form"] = optimal_probe_qubit(E, sym)
        doc["controls"][sym] = entry
    return doc


def _read_samples(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header[:2]] != ["time", "y"]:
            raise ScenarioError("schema", str(path), "samples CSV must have header time,y")
        for row in reader:
            if row:
                rows.append((float(row[0]), float(row[1])))
    return np.array(rows)


def _timeline(scenario, schedule_path):
    if schedule_path:
        return parse_schedule_file(schedule_path)
    if scenario.timeline is None:
        raise ScenarioError("schema", "schedule", "scenario has no schedule; pass --schedule")
    return [scenario.timeline]


def reconstruct_report(scenario, samples, timeline, T=None, nodes=None):
    sched = scenario.schedule(timeline)
    T = sched.duration if T is None else T
    s = scenario.effective_observable().raw
    res = reconstruct(samples, sched, s, T, nodes=scenario.setting("nodes", nodes))
    return {"scenario": scenario.name, "rho0_hat": matrix_to_json(res.rho0),
            "gramian_condition_number": res.gramian.condition_number,
            "gramian_min_eigenvalue": res.gramian.min_eigenvalue,
            "residual_rms": res.residual, "psd_projected": res.clipped}


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{x:.17g}" for x in r])


def cmd_analyze(args):
    sc = parse_scenario(args.scenario)
    _emit(analyze(sc, sc.setting("kmax", args.kmax)), args.out)


def cmd_seff(args):
    sc = parse_scenario(args.scenario)
    _emit(seff_report(sc, args.tol), args.out)


def cmd_disturbance(args):
    sc = parse_scenario(args.scenario)
    _emit(disturbance_report(sc), args.out)


def cmd_reconstruct(args):
    sc = parse_scenario(args.scenario)
    samples = _read_samples(args.samples)
    timeline = _timeline(sc, args.schedule)[0]
    _emit(reconstruct_report(sc, samples, timeline, args.T, args.nodes), args.out)


def cmd_observe(args):
    sc = parse_scenario(args.scenario)
    sched = sc.schedule(_timeline(sc, args.schedule)[0])
    rng = np.random.default_rng(sc.setting("seed", args.seed))
    rho0 = sc.rho0 if sc.rho0 is not None else np.diag([1.0] + [0.0] * (sc.dim - 1)).astype(complex)
    rho_hat0 = random_density(sc.dim, rng)
    T = sc.setting("T", args.T) or sched.duration
    sigma = sc.setting("sigma", args.sigma)
    if sigma is None:
        raise ScenarioError("schema", "defaults/sigma", "observer window sigma is required")
    run = run_observer(rho0, rho_hat0, sched, sc.effective_observable().raw,
                       sc.setting("M", args.M), sigma, T, sc.setting("step", args.step))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / f"{sc.name}_observer.csv", ["time", "delta_norm", "lyapunov"],
                zip(run.times, run.delta_norms, run.lyapunov))
    summary = {"scenario": sc.name, **run.summary()}
    (out / f"{sc.name}_observer.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))


def cmd_simulate(args):
    sc = parse_scenario(args.scenario)
    legs = _timeline(sc, args.schedule)
    k = args.k
    if len(legs) == 1 and k > 1:
        legs = legs * k
    scheds = [sc.schedule(tl) for tl in legs]
    rho0 = sc.rho0 if sc.rho0 is not None else np.eye(sc.dim, dtype=complex) / sc.dim
    ch = sc.channel()
    traj = measured_trajectory(rho0, scheds, ch, k, samples_per_leg=sc.setting("samples", args.samples))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    seff = sc.effective_observable()
    extra = {"k": k, "channel_outcomes": ch.labels}
    probs = {o.label: selective_probability(rho0, scheds, ch, o.label, k) for o in ch.outcomes}
    extra["probabilities_at_k"] = probs
    if args.outcome is not None:
        idx = ch.index_of(args.outcome)
        extra["outcome"] = ch.outcomes[idx].label
        extra["selective_probability"] = probs[ch.outcomes[idx].label]
    traj.write(out / f"{sc.name}_trajectory.csv", out / f"{sc.name}_trajectory.json", sc.name, extra)
    t0, states0 = traj.leg(0)
    y = np.einsum("ij,tji->t", seff.raw, states0).real
    _write_rows(out / f"{sc.name}_samples.csv", ["time", "y"], zip(t0, y))
    print(json.dumps({"scenario": sc.name, **extra}, indent=2))


def build_parser():
    p = argparse.ArgumentParser(prog="qobs", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qobs {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario JSON file")
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--nodes", type=int, default=None)
        sp.add_argument("--kmax", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="output file (JSON commands) or directory")
        return sp

    common(sub.add_parser("analyze", help="observability ranks and verdicts")).set_defaults(
        func=cmd_analyze)
    common(sub.add_parser("seff", help="effective observable")).set_defaults(func=cmd_seff)
    common(sub.add_parser("disturbance", help="worst-case disturbance and optimal probe")
           ).set_defaults(func=cmd_disturbance)
    sp = common(sub.add_parser("reconstruct", help="initial state from an output record"))
    sp.add_argument("--samples", required=True, help="CSV with header time,y")
    sp.add_argument("--schedule", default=None)
    sp.add_argument("--T", type=float, default=None)
    sp.set_defaults(func=cmd_reconstruct)
    sp = common(sub.add_parser("observe", help="run the asymptotic observer"))
    sp.add_argument("--schedule", default=None)
    sp.add_argument("--M", type=float, default=None)
    sp.add_argument("--sigma", type=float, default=None)
    sp.add_argument("--T", type=float, default=None)
    sp.add_argument("--step", type=float, default=None)
    sp.set_defaults(func=cmd_observe)
    sp = common(sub.add_parser("simulate", help="measurement-interleaved trajectory"))
    sp.add_argument("--schedule", default=None)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--outcome", default=None)
    sp.add_argument("--samples", type=int, default=None)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ScenarioError, KeyError, ValueError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RankDeficiencyError, ObserverError, SearchExhausted, NullEventError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
