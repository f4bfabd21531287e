"""Command-line surface.

Commands: run, sweep, envelope, check, plot.  Exit code 0 means every
executed verdict passed or was masked-invalid, 2 means at least one
verdict was violated, 1 means an operational error (bad config, missing
file, unreadable report).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, SweepConfig, parse_config, run_config_to_dict
from .dynamics import run_invariant_report, sample_times, simulate
from .harness import sweep as run_sweep
from .harness import verify_report
from .io import (
    emit_plot_svg,
    emit_report_json,
    emit_trace_csv,
    write_checkpoint,
)

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_VIOLATION = 2


def _workers_from_env() -> int:
    raw = os.environ.get("BQ_WORKERS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError([f"BQ_WORKERS must be an integer, got {raw!r}"])
    if value < 1:
        raise ConfigError([f"BQ_WORKERS must be >= 1, got {value}"])
    return value


def _print_verdicts(verdicts) -> bool:
    all_ok = True
    for v in verdicts:
        status = "PASS" if v["passed"] else "FAIL"
        print(f"[{status}] {v['name']}")
        if not v["passed"]:
            print(f"       {v['detail']}")
        all_ok &= bool(v["passed"])
    return all_ok


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if not isinstance(cfg, RunConfig):
        raise ConfigError(["'run' needs a config with kind = 'run'"])
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    times = sample_times(cfg.t_final, cfg.cadence)
    pending = sorted(cfg.checkpoint_times)

    def on_sample(idx, state):
        while pending and pending[0] <= times[idx] + 1e-12:
            target = pending.pop(0)
            write_checkpoint(state, outdir / f"checkpoint_{target:.6f}.bqchk")

    trace, _ = simulate(cfg, on_sample=on_sample)
    emit_trace_csv(trace, outdir / "trace.csv")
    invariants = run_invariant_report(trace) if len(trace.t) >= 3 else {"passed": True}
    summary = {
        "schema": "bqlim-run-report/1",
        "config": run_config_to_dict(cfg),
        "aborted": trace.aborted,
        "abort_reason": trace.abort_reason,
        "steps": trace.steps,
        "dt_min": trace.dt_min if math.isfinite(trace.dt_min) else None,
        "dt_max": trace.dt_max,
        "invariants": invariants,
    }
    emit_report_json(summary, outdir / "run.json")
    print(f"run: {trace.steps} steps, {len(trace.t)} samples -> {outdir}")
    verdicts = [{"name": k, "passed": v["passed"], "detail": v}
                for k, v in invariants.items()
                if isinstance(v, dict) and "passed" in v]
    ok = _print_verdicts(verdicts)
    if trace.aborted:
        print(f"[FAIL] integration aborted: {trace.abort_reason}")
        return EXIT_VIOLATION
    return EXIT_OK if ok else EXIT_VIOLATION


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    if not isinstance(cfg, SweepConfig):
        raise ConfigError(["'sweep' needs a config with kind = 'sweep'"])
    workers = _workers_from_env()
    outdir = Path(cfg.base.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    start = time.monotonic()
    result = run_sweep(cfg, workers=workers)
    wall = time.monotonic() - start

    emit_trace_csv(result.ref_trace, outdir / "run_ref.csv")
    for trace in result.traces:
        emit_trace_csv(trace, outdir / f"run_nu_{trace.nu:.6g}.csv")
    emit_report_json(result.report, outdir / "report.json")
    # Wall-clock timing is inherently nondeterministic, so it lives in a
    # sidecar: the main report stays byte-identical across repeat sweeps.
    (outdir / "timing.json").write_text(json.dumps(
        {"wall_time_s": wall, "workers": workers}, sort_keys=True) + "\n")

    verdicts, _ = verify_report(result.report)
    ok = _print_verdicts(verdicts)
    print(f"sweep: {len(cfg.nu_list)} nu-runs + reference in {wall:.1f}s -> {outdir}")
    if result.report.get("partial"):
        print("[WARN] partial report: at least one run aborted")
    return EXIT_OK if ok else EXIT_VIOLATION


def _load_report(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read report {path}: {exc}"])


def _cmd_envelope(args) -> int:
    report = _load_report(args.report)
    verdicts, refreshed = verify_report(report, c0=args.c0, e1=args.e1)
    out = args.out or args.report
    emit_report_json(refreshed, out)
    ok = _print_verdicts(verdicts)
    print(f"envelope: constants c0={args.c0} e1={args.e1} -> {out}")
    return EXIT_OK if ok else EXIT_VIOLATION


def _cmd_check(args) -> int:
    report = _load_report(args.report)
    verdicts, _ = verify_report(report)
    ok = _print_verdicts(verdicts)
    print(f"check: {len(verdicts)} verdicts, {'all pass' if ok else 'VIOLATIONS'}")
    return EXIT_OK if ok else EXIT_VIOLATION


def _cmd_plot(args) -> int:
    report = _load_report(args.report)
    outdir = Path(args.outdir) if args.outdir else Path(args.report).parent
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    runs = [r for r in report.get("runs", []) if not r.get("aborted")]
    if len(runs) >= 2:
        nus = [r["nu"] for r in runs]
        sup_by_p = {key: [r["sup_gaps"][key] for r in runs]
                    for key in runs[0]["sup_gaps"]}
        path = outdir / "convergence.svg"
        emit_plot_svg({"kind": "convergence", "nus": nus, "sup_by_p": sup_by_p}, path)
        written.append(path)

    times = report.get("times", [])
    for r in runs:
        if r.get("y") is None or "envelope_values" not in r:
            continue
        path = outdir / f"envelope_nu_{r['nu']:.6g}.svg"
        emit_plot_svg({
            "kind": "envelope",
            "times": times[:len(r["y"])],
            "measured": r["y"],
            "env_values": r["envelope_values"],
            "env_mask": r["envelope_mask"],
            "title": f"y(t) vs envelope, nu={r['nu']:.3g}",
        }, path)
        written.append(path)
    for p in written:
        print(f"plot: {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bqlim",
        description="2D Boussinesq pseudo-spectral runs and inviscid-limit verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a single configuration")
    p_run.add_argument("config")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a nu-sweep against the inviscid reference")
    p_sweep.add_argument("config")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_env = sub.add_parser("envelope", help="recompute report envelopes with constant overrides")
    p_env.add_argument("report")
    p_env.add_argument("--c0", type=float, default=None)
    p_env.add_argument("--e1", type=float, default=None)
    p_env.add_argument("--out", default=None)
    p_env.set_defaults(func=_cmd_envelope)

    p_check = sub.add_parser("check", help="re-run all verdicts stored in a report")
    p_check.add_argument("report")
    p_check.set_defaults(func=_cmd_check)

    p_plot = sub.add_parser("plot", help="emit SVG plots for a report")
    p_plot.add_argument("report")
    p_plot.add_argument("--outdir", default=None)
    p_plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_OPERATIONAL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
