"""Command-line driver.

Subcommands::

    willmore-pf run --config PATH [--output DIR]
    willmore-pf check --trace PATH [--tol-grad X] [--slack X]
    willmore-pf validate-potential --config PATH
    willmore-pf stability --config PATH [--output DIR]
    willmore-pf refine --config PATH [--output DIR]

Exit codes: 0 success, 1 usage or configuration error, 2 a verification
failed (discrete estimates, stability or refinement criteria), 3 an inner
solve did not converge and the run was aborted, 4 the potential violates its
structural assumptions, 5 file I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io as wio
from .config import ConfigError, RunConfig, load_config, perturbation
from .potential import validate_assumptions
from .scheme import (
    PotentialRejected,
    StepFailure,
    check_estimates,
    refinement_experiment,
    run,
    stability_experiment,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK_FAILED = 2
EXIT_SOLVER_ABORT = 3
EXIT_POTENTIAL = 4
EXIT_IO = 5

logger = logging.getLogger("willmore_pf")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is reserved for failed checks
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="willmore-pf", description="Volume-constrained phase-field Willmore flow solver")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run the experiment selected by the config's mode (default: flow)")
    p.add_argument("--config", required=True)
    p.add_argument("--output")

    p = sub.add_parser("check", help="re-verify the estimates from a trace file")
    p.add_argument("--trace", required=True)
    p.add_argument("--tol-grad", type=float, help="inner tolerance of the run (default: from report.json or 1e-8)")
    p.add_argument("--slack", type=float, help="override the slack 10 tol_grad (1 + E0)")

    p = sub.add_parser("validate-potential", help="check the structural assumptions of the potential")
    p.add_argument("--config", required=True)
    p.add_argument("--range", type=float, default=10.0, help="validate on [-R, R] (default 10)")
    p.add_argument("--samples", type=int, default=10_000)

    for name, text in (("stability", "two-trajectory stability experiment"), ("refine", "time-step refinement sweep")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--output")
    return parser


def _output_dir(cfg: RunConfig, override: str | None) -> Path:
    return Path(override or cfg.output_dir)


def _check_summary(report) -> dict:
    out = {"slack": report.slack, "checks_passed": report.passed}
    for c in report.checks:
        key = c.name.replace(" ", "_")
        out[f"check.{key}.passed"] = c.passed
        out[f"check.{key}.margin"] = c.margin
    return out


def _write_run_files(cfg, grid, trace, states, out: Path, summary: dict) -> None:
    wio.write_trace(trace, out / "trace.csv")
    if cfg.write_fields and cfg.snapshot_every > 0:
        for s in states:
            if s.n % cfg.snapshot_every == 0 or s is states[-1]:
                wio.write_snapshot(grid, s, out / "snapshots" / f"snap_{s.n:06d}.csv")
    wio.write_summary(summary, out / "report.json")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if cfg.mode == "stability":
        return cmd_stability(args)
    if cfg.mode == "refinement":
        return cmd_refine(args)
    grid = cfg.grid()
    p = cfg.build_potential()
    v0 = cfg.initial_field(grid)
    out = _output_dir(cfg, args.output)
    summary = {
        "command": "run",
        "dim": grid.dim,
        "cells": "x".join(map(str, grid.cells)),
        "tau": cfg.tau,
        "t_final": cfg.t_final,
        "tol_grad": cfg.tol_grad,
        "potential": p.name,
        "initial": cfg.initial,
    }
    try:
        trace, states = run(grid, v0, cfg.tau, cfg.t_final, p, cfg.minimize_config(), on_failure=cfg.on_failure)
    except StepFailure as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        summary.update(status="solver_abort", exit_code=EXIT_SOLVER_ABORT, steps=len(exc.trace.rows) - 1)
        _write_run_files(cfg, grid, exc.trace, exc.states, out, summary)
        return EXIT_SOLVER_ABORT

    report = check_estimates(trace, states, grid)
    code = EXIT_OK if report.passed else EXIT_CHECK_FAILED
    summary.update(
        status="ok" if report.passed else "check_failed",
        exit_code=code,
        steps=len(trace.rows) - 1,
        E0=trace.E0,
        E_final=trace.rows[-1].energy,
        alpha=trace.alpha,
        max_mean_deviation=max(abs(r.mean - trace.alpha) for r in trace.rows),
        all_converged=all(r.converged for r in trace.rows),
        total_inner_iters=sum(r.inner_iters for r in trace.rows),
    )
    summary.update(_check_summary(report))
    _write_run_files(cfg, grid, trace, states, out, summary)
    print(f"{len(trace.rows) - 1} steps, tau = {cfg.tau:g}, E(v0) = {trace.E0:.6g}, E(final) = {trace.rows[-1].energy:.6g}")
    print(report.summary())
    print(f"output written to {out}")
    return code


def cmd_check(args) -> int:
    path = Path(args.trace)
    tol = args.tol_grad
    if tol is None:
        report_file = path.parent / "report.json"
        tol = 1e-8
        if report_file.exists():
            try:
                tol = float(json.loads(report_file.read_text(encoding="utf-8")).get("tol_grad", tol))
            except (ValueError, TypeError):
                logger.warning("ignoring unreadable %s", report_file)
    trace = wio.read_trace(path, tol_grad=tol)
    report = check_estimates(trace, slack=args.slack)
    print(report.summary())
    if not report.passed:
        for c in report.checks:
            if not c.passed:
                print(f"violated: {c.name} at rows {c.violations}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    report = validate_assumptions(cfg.build_potential(), -args.range, args.range, args.samples)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_POTENTIAL


def cmd_stability(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.grid()
    p = cfg.build_potential()
    v0 = cfg.initial_field(grid)
    v0_b = v0 + perturbation(grid, cfg.perturbation_seed, cfg.perturbation_amplitude)
    rep = stability_experiment(grid, v0, v0_b, cfg.tau, cfg.t_final, p, cfg.minimize_config(), cap=cfg.stability_cap)
    out = _output_dir(cfg, args.output)
    half = rep.half_distances if rep.half_distances is not None else rep.distances
    rows = zip(range(len(rep.times)), rep.times, rep.distances, rep.ratios, half)
    wio.atomic_write_text(out / "stability.csv", wio._csv_text(["n", "t", "distance", "ratio", "half_distance"], rows))
    code = EXIT_OK if rep.passed else EXIT_CHECK_FAILED
    wio.write_summary(
        {
            "command": "stability",
            "status": "ok" if rep.passed else "check_failed",
            "exit_code": code,
            "tau": cfg.tau,
            "t_final": cfg.t_final,
            "perturbation_amplitude": cfg.perturbation_amplitude,
            "initial_distance": float(rep.distances[0]),
            "final_distance": float(rep.distances[-1]),
            "max_ratio": float(rep.ratios.max()),
            "cap": rep.cap,
            "cap_passed": rep.passed_cap,
            "linearity_ratio": rep.linearity_ratio,
            "linearity_passed": rep.passed_linearity,
            "diagnosis": rep.diagnosis,
        },
        out / "report.json",
    )
    print(rep.summary())
    return code


def cmd_refine(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.grid()
    p = cfg.build_potential()
    rep = refinement_experiment(grid, cfg.initial_field(grid), cfg.tau_list, cfg.t_final, p, cfg.minimize_config())
    out = _output_dir(cfg, args.output)
    wio.atomic_write_text(out / "refinement.csv", wio._csv_text(["tau", "delta"], zip(rep.taus, rep.deltas)))
    code = EXIT_OK if rep.passed else EXIT_CHECK_FAILED
    summary = {
        "command": "refine",
        "status": "ok" if rep.passed else "check_failed",
        "exit_code": code,
        "t_final": cfg.t_final,
        "exponent": rep.exponent,
        "exponent_in_window": rep.in_window,
        "delta_decreasing": rep.monotone,
    }
    for tau, d in zip(rep.taus, rep.deltas):
        summary[f"delta.{tau!r}"] = d
    wio.write_summary(summary, out / "report.json")
    print(rep.table())
    return code


_COMMANDS = {
    "run": cmd_run,
    "check": cmd_check,
    "validate-potential": cmd_validate,
    "stability": cmd_stability,
    "refine": cmd_refine,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except PotentialRejected as exc:
        print(exc, file=sys.stderr)
        return EXIT_POTENTIAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StepFailure as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_SOLVER_ABORT
    except ValueError as exc:
        # malformed trace or snapshot contents, bad initial-condition file
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
