"""Command-line front end.

    clustered-consensus run <scenario> -o <dir> [--force]
    clustered-consensus sweep <scenario> --delta 0.1,0.5,1.0 [-o table.csv]
    clustered-consensus verify <scenario>

``<scenario>`` is a JSON file or the name of a bundled scenario
(``paper-fig1``, ``paper-fig1-leaders-only``, ``paper-fig2``).
Exit codes: 0 ok, 1 validation failure, 2 parse error, 3 runtime error.
Set ``CLUSTERED_CONSENSUS_LOG`` (DEBUG, INFO, ...) for log output.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import svg
from .analysis import (check_product_bound, convergence_time, decay_fit, disagreement, hinf_index,
                       limit_product, lyapunov_trace, predict_consensus_closed_form, spread)
from .certificate import (check_lmi_flow, check_lmi_jump, convergence_rate,
                          empirical_certificate_check)
from .graph import build_laplacian, is_sia, validate_network
from .hybrid import simulate
from .linalg import mat_exp
from .scenario import Scenario, ScenarioError, compact_json, load

log = logging.getLogger("clustered_consensus")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARSE = 2
EXIT_RUNTIME = 3


class ValidationFailure(Exception):
    def __init__(self, report):
        self.report = report
        names = ", ".join(c.name for c in report.failures())
        super().__init__(f"network validation failed: {names}")


def _clean(obj):
    """Make a summary JSON-safe: numpy scalars to floats, non-finite to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def analyze(scenario: Scenario, force: bool = False):
    """Simulate a scenario and collect every requested diagnostic.

    Returns ``(trajectory, summary, lyapunov_values)``; the last is None when
    the Lyapunov analysis is off.
    """
    network = scenario.network()
    report = validate_network(network)
    if not report.passed and not force:
        raise ValidationFailure(report)
    opts = scenario.analyses
    x0 = np.asarray(scenario.x0, dtype=float)
    schedule = scenario.impulse_schedule()
    w = scenario.disturbance

    traj = simulate(network, x0, schedule, w, scenario.horizon, scenario.mode, scenario.step, force=force)
    pred = limit_product(network, scenario.schedule.intervals(opts.limit_terms), x0)
    terminal = traj.terminal
    t_avg = schedule.average_interval()

    summary = {
        "scenario": scenario.name,
        "agents": network.size,
        "clusters": network.cluster_count,
        "horizon": scenario.horizon,
        "mode": scenario.mode,
        "forced": bool(force),
        "impulses": len(schedule.within(scenario.horizon)),
        "average_interval": t_avg,
        "validation": report.to_dict(),
        "consensus_value": pred.value,
        "residual": pred.residual,
        "limit_terms": pred.k_used,
        "limit_converged": pred.converged,
        "c": pred.c,
        "terminal_state": terminal,
        "terminal_error": float(np.max(np.abs(terminal - pred.value))),
        "spread_at_T": spread(terminal),
        "consensus_achieved": spread(terminal) < opts.consensus_tol,
        "convergence_time": convergence_time(traj, opts.consensus_tol),
    }

    if math.isfinite(t_avg):
        product = network.p_e @ mat_exp(-build_laplacian(network), t_avg)
        sia = is_sia(product)
        summary["sia_product"] = {"interval": t_avg, "is_sia": sia.ok, "reason": sia.reason}
        if opts.product_bound:
            summary["gamma"] = check_product_bound(network, t_avg)

    rho = scenario.certificate.rho if scenario.certificate is not None else 1.0
    if opts.hinf and not w.is_zero():
        # the attenuation claim concerns the zero-initial-condition response
        forced = simulate(network, np.zeros(network.size), schedule, w, scenario.horizon, "rk4",
                          scenario.step, force=force)
        h = hinf_index(forced, w, rho, scenario.horizon)
        summary["J"] = h.J
        summary["hinf"] = dict(h.to_dict(), initial_condition="zero")

    cert = None
    if scenario.certificate is not None:
        cert = scenario.certificate.build(network, t_avg)
        jump = check_lmi_jump(cert, network)
        summary["certificate"] = {
            "alpha": cert.alpha, "rho": cert.rho, "beta": cert.beta, "n0": cert.n0, "t_avg": cert.t_avg,
            "structure_restored": scenario.certificate.restore_structure,
            "P_min_eigenvalue": cert.min_eigenvalue(),
            "eta": convergence_rate(cert),
            "flow": check_lmi_flow(cert, network).to_dict(),
            "jump": jump.to_dict(),
        }
        if scenario.certificate.restore_structure:
            raw = replace(scenario.certificate, restore_structure=False).build(network, t_avg)
            summary["certificate"]["flow_as_given"] = check_lmi_flow(raw, network).to_dict()

    vvalues = None
    if opts.lyapunov:
        psi = disagreement(traj, pred.c, x0)
        p = cert.P if cert is not None else np.eye(network.size)
        vtrace = lyapunov_trace(psi, p)
        vvalues = vtrace.values
        try:
            summary["eta_empirical"] = decay_fit(vtrace)
        except ValueError:
            summary["eta_empirical"] = None
        summary["lyapunov_matrix"] = "certificate" if cert is not None else "identity"
        if cert is not None:
            summary["certificate"]["empirical"] = empirical_certificate_check(cert, psi, w).to_dict()

    if scenario.p_l is not None and opts.closed_form:
        summary["closed_form"] = {
            "closed_form_value": predict_consensus_closed_form(network, scenario.p_l, x0),
            "limit_product_value": pred.value,
            "simulated_terminal_mean": float(terminal.mean()),
            "reference_value": opts.reference_consensus_value,
        }
    return traj, _clean(summary), vvalues


def run_scenario(scenario: Scenario, outdir, force: bool = False) -> dict:
    traj, summary, vvalues = analyze(scenario, force)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    traj.to_csv(outdir / "trajectory.csv")
    (outdir / "summary.json").write_text(compact_json(summary), encoding="utf-8")
    show_v = vvalues if scenario.certificate is not None else None
    (outdir / "trajectory.svg").write_text(
        svg.render(traj.times, traj.states, title=scenario.name, lyapunov=show_v), encoding="utf-8")
    return summary


SWEEP_FIELDS = ("delta", "consensus_value", "residual", "convergence_time")


def sweep(scenario: Scenario, deltas, force: bool = False) -> list[dict]:
    """One row per uniform impulse spacing, in input order."""
    deltas = [float(d) for d in deltas]
    for d in deltas:
        if not d > 0:
            raise ValueError(f"impulse spacing must be positive, got {d:g}")
    rows = []
    for d in deltas:
        _, summary, _ = analyze(scenario.with_uniform_delta(d), force)
        rows.append({"delta": d, "consensus_value": summary["consensus_value"],
                     "residual": summary["residual"], "convergence_time": summary["convergence_time"]})
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_FIELDS)
    for row in rows:
        writer.writerow(["" if row[k] is None else f"{row[k]:.12g}" for k in SWEEP_FIELDS])
    return buf.getvalue()


def _lmi_line(label, rep) -> str:
    return (f"{'PASS' if rep.at_least_structured() else 'FAIL'} {label}: {rep.verdict} "
            f"max_eigenvalue={rep.max_eigenvalue:.6g} eps={rep.eps:.3g} near_zero={rep.near_zero_count} "
            f"null_alignment={rep.null_state_alignment:.3g}")


def verify(scenario: Scenario, out=None) -> bool:
    out = sys.stdout if out is None else out
    network = scenario.network()
    report = validate_network(network)
    ok = report.passed
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}", file=out)
    schedule = scenario.impulse_schedule()
    t_avg = schedule.average_interval()
    if math.isfinite(t_avg):
        sia = is_sia(network.p_e @ mat_exp(-build_laplacian(network), t_avg))
        print(f"{'PASS' if sia else 'FAIL'} sia_product(interval={t_avg:g}): {sia.reason}", file=out)
        ok = ok and sia.ok
    if scenario.certificate is not None:
        cert = scenario.certificate.build(network, t_avg)
        flow = check_lmi_flow(cert, network)
        jump = check_lmi_jump(cert, network)
        print(_lmi_line("flow_lmi", flow), file=out)
        if scenario.certificate.restore_structure:
            raw = replace(scenario.certificate, restore_structure=False).build(network, t_avg)
            print(f"INFO {_lmi_line('flow_lmi_as_given', check_lmi_flow(raw, network))[5:]}", file=out)
        print(_lmi_line("jump_lmi", jump.quadratic), file=out)
        if jump.schur is None:
            print("INFO jump_lmi_schur_form: not applicable (P singular)", file=out)
        else:
            print(f"INFO {_lmi_line('jump_lmi_schur_form', jump.schur)[5:]} agreement={jump.agreement}",
                  file=out)
        print(f"INFO eta={convergence_rate(cert):.6g} (alpha - ln(beta)/t_avg, t_avg={cert.t_avg:g})", file=out)
        ok = ok and flow.at_least_structured() and jump.quadratic.at_least_structured()
    print("OVERALL " + ("PASS" if ok else "FAIL"), file=out)
    return ok


def _parse_deltas(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ScenarioError("--delta", f"not a comma-separated list of numbers: {text!r}") from None
    if not values:
        raise ScenarioError("--delta", "no values given")
    for v in values:
        if not v > 0:
            raise ScenarioError("--delta", f"impulse spacing must be positive, got {v:g}")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clustered-consensus",
                                     description="Simulate and verify consensus over clustered networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and write CSV, JSON and SVG artifacts")
    p_run.add_argument("scenario")
    p_run.add_argument("-o", "--output", required=True, help="output directory")
    p_run.add_argument("--force", action="store_true", help="simulate even if network validation fails")

    p_sweep = sub.add_parser("sweep", help="repeat a scenario over uniform impulse spacings")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--delta", required=True, help="comma-separated spacings, e.g. 0.1,0.5,1.0")
    p_sweep.add_argument("-o", "--output", help="CSV file (default: standard output)")
    p_sweep.add_argument("--force", action="store_true")

    p_verify = sub.add_parser("verify", help="check network hypotheses and certificate inequalities")
    p_verify.add_argument("scenario")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CLUSTERED_CONSENSUS_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        scenario = load(args.scenario)
        if args.command == "run":
            summary = run_scenario(scenario, args.output, force=args.force)
            print(f"consensus_value={summary['consensus_value']:.12g} spread_at_T={summary['spread_at_T']:.3g} "
                  f"artifacts in {args.output}")
            return EXIT_OK
        if args.command == "sweep":
            text = sweep_csv(sweep(scenario, _parse_deltas(args.delta), force=args.force))
            if args.output:
                Path(args.output).write_text(text, encoding="utf-8")
            else:
                sys.stdout.write(text)
            return EXIT_OK
        return EXIT_OK if verify(scenario) else EXIT_VALIDATION
    except (ScenarioError, FileNotFoundError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationFailure as exc:
        print(str(exc), file=sys.stderr)
        for c in exc.report.failures():
            print(f"  FAIL {c.name}: {c.detail}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
