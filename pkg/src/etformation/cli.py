"""Command-line interface: run scenarios, verify traces, print bounds.

Exit codes: 0 success (verify: all checks passed), 1 failed verification
checks, 2 validation or parse errors, 3 runtime fault during a run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import engine, plots, traceio
from .bounds import CertificationReport, certify_trace, compute_rate_caps
from .errors import SimulationFault, ValidationError
from .scenario import load_scenario

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_FAULT = 3


def _gains_dict(gains) -> dict:
    return {
        "rate": gains.rate,
        "pos_gain": gains.pos_gain,
        "vel_gain": gains.vel_gain,
        "damping": gains.damping,
        "damping_load": gains.damping_load,
        "certificate": gains.certificate.tolist(),
        "certificate_floor": gains.certificate_floor,
        "decay_limit": gains.decay_limit,
    }


def _bounds_payload(config) -> dict:
    caps = compute_rate_caps(config.formation)
    bound_set = engine.compute_bounds(config)
    payload = {
        "mode": config.mode,
        "beta_max": caps.beta_max,
        "margin_max": caps.margin_max,
        "conservative_beta_max": caps.conservative,
        "bounds": bound_set.to_dict(config.formation.graph),
    }
    if config.gains is not None:
        payload["gains"] = _gains_dict(config.gains)
    return payload


def _print_report(report: CertificationReport) -> None:
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}: {check.detail}")
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")


def _cmd_run(args) -> int:
    try:
        traceio.output_precision()  # fail fast on a bad precision override
        config = load_scenario(args.scenario)
        payload = _bounds_payload(config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = engine.run(config)
    except SimulationFault as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_FAULT

    spec = config.formation
    traceio.write_trace_csv(out_dir / "trace.csv", result.trace,
                            spec.graph.edges, config.mode)
    traceio.write_triggers_csv(out_dir / "triggers.csv", result.triggers,
                               spec.p, config.mode)
    (out_dir / "bounds.json").write_text(json.dumps(payload, indent=2) + "\n")

    report = engine.replay_check(result.trace, result.triggers, config)
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")

    plots.emit_plot_data(out_dir, result.trace, result.triggers)
    plots.render_figures(out_dir, result.trace, result.triggers, spec)

    print(f"run complete: {len(result.triggers)} triggers, "
          f"{result.trace.times.size} trace samples, outputs in {out_dir}")
    _print_report(report)
    return EXIT_OK


def _cmd_verify(args) -> int:
    try:
        config = load_scenario(args.scenario)
        trace = traceio.read_trace_csv(args.trace, config)
        triggers = traceio.read_triggers_csv(args.triggers, config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if abs(trace.times[-1] - config.horizon) > config.sample_dt + 1e-9:
        print(f"error: trace ends at t={trace.times[-1]:.6g} but the scenario "
              f"horizon is {config.horizon:.6g}", file=sys.stderr)
        return EXIT_INVALID
    if trace.times[0] > 1e-12:
        print("error: trace does not start at t=0", file=sys.stderr)
        return EXIT_INVALID
    if np.max(np.abs(trace.x[0] - config.initial.x0)) > 1e-6:
        print("error: trace does not start from the scenario initial state",
              file=sys.stderr)
        return EXIT_INVALID

    try:
        bound_set = engine.compute_bounds(config)
        report = certify_trace(
            trace, triggers, bound_set, config.formation, config.threshold,
            config.mode, config.gains,
            terminal_speed_tol=config.terminal_speed_tol,
        )
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    _print_report(report)
    if not report.passed:
        print(f"failed checks: {', '.join(report.failed_names())}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_bounds(args) -> int:
    try:
        config = load_scenario(args.scenario)
        payload = _bounds_payload(config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etformation",
        description="Event-triggered formation control: simulate, verify, analyze.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario and write all outputs")
    run_p.add_argument("scenario", help="scenario file path")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.set_defaults(func=_cmd_run)

    ver_p = sub.add_parser("verify", help="re-certify an exported trace")
    ver_p.add_argument("trace", help="trace.csv path")
    ver_p.add_argument("triggers", help="triggers.csv path")
    ver_p.add_argument("scenario", help="scenario file path")
    ver_p.set_defaults(func=_cmd_verify)

    bounds_p = sub.add_parser("bounds", help="print rate caps, gains, and bound sets")
    bounds_p.add_argument("scenario", help="scenario file path")
    bounds_p.set_defaults(func=_cmd_bounds)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
