"""Command-line entry point: simulate, detect, sweep, report.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from .detector import (
    DetectorConfig,
    default_config,
    format_config,
    read_config,
)
from . import flightlog
from .replay import (
    SweepSpec,
    default_sweep_spec,
    evaluate,
    render_report,
    read_results_csv,
    run_detector,
    run_sweep,
    summarize_sweep,
    write_results_csv,
    write_summary_csv,
)
from .simulator import FaultEvent, SCENARIOS, SensorNoiseModel, fly_scenario

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class CommandError(Exception):
    def __init__(self, message: str, code: int = RUNTIME_ERROR):
        super().__init__(message)
        self.code = code


def _parse_fault(text: str) -> FaultEvent:
    actuator, _, when = text.partition(":")
    try:
        event = FaultEvent(time=float(when), actuator_index=int(actuator))
    except (ValueError, TypeError) as exc:
        raise CommandError(
            f"invalid --fault {text!r}: expected ACTUATOR:TIME with actuator 1..4 ({exc})",
            USAGE_ERROR,
        ) from exc
    return event


def _load_config(path: str | None) -> DetectorConfig:
    if path is None:
        return default_config()
    if not os.path.exists(path):
        raise CommandError(f"config file not found: {path}", USAGE_ERROR)
    try:
        return read_config(path)
    except ValueError as exc:
        raise CommandError(f"bad config file {path}: {exc}", USAGE_ERROR) from exc


def _load_sweep_spec(path: str | None, base: DetectorConfig) -> SweepSpec:
    if path is None:
        return default_sweep_spec(base)
    if not os.path.exists(path):
        raise CommandError(f"sweep spec file not found: {path}", USAGE_ERROR)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        variations = tuple(
            (name, tuple(float(v) for v in values))
            for name, values in payload["parameters"].items()
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CommandError(f"bad sweep spec {path}: {exc}", USAGE_ERROR) from exc
    return SweepSpec(base=base, variations=variations)


def cmd_simulate(args) -> int:
    fault = _parse_fault(args.fault) if args.fault else None
    noise = SensorNoiseModel(seed=args.seed).scaled(args.noise_scale)
    try:
        log = fly_scenario(
            scenario=args.scenario,
            duration=args.duration,
            fault=fault,
            noise=noise,
        )
    except ValueError as exc:
        raise CommandError(str(exc), USAGE_ERROR) from exc
    flightlog.save_log(log, args.out)
    print(f"wrote {args.out}: {len(log)} samples at {log.sample_rate_hz:g} Hz")
    if fault is not None:
        print(f"ground truth: actuator {fault.actuator_index} fails at t={fault.time:g} s")
    else:
        print("ground truth: no fault")
    return 0


def _write_outputs_csv(outputs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        names = (
            ["t"]
            + [f"k{i}" for i in range(1, 5)]
            + [f"var{i}" for i in range(1, 5)]
            + [f"pfail{i}" for i in range(1, 5)]
            + ["armed"]
            + [f"failed{i}" for i in range(1, 5)]
        )
        fh.write(",".join(names) + "\n")
        for out in outputs:
            row = (
                [repr(out.timestamp)]
                + [repr(float(v)) for v in out.k_hat]
                + [repr(float(v)) for v in out.variances]
                + [repr(float(v)) for v in out.p_fail]
                + [str(int(out.armed))]
                + [str(int(f)) for f in out.status.failed]
            )
            fh.write(",".join(row) + "\n")


def cmd_detect(args) -> int:
    if not os.path.exists(args.log):
        raise CommandError(f"log file not found: {args.log}", USAGE_ERROR)
    config = _load_config(args.config)
    try:
        log = flightlog.load_log(args.log)
    except flightlog.LogFormatError as exc:
        raise CommandError(f"bad log {args.log}: {exc}", USAGE_ERROR) from exc
    outputs = run_detector(log, config)
    if args.out:
        _write_outputs_csv(outputs, args.out)
        print(f"wrote {args.out}: {len(outputs)} detector outputs")

    result = evaluate(outputs, log.ground_truth())
    for i, t in enumerate(outputs[-1].status.first_detection_time):
        if t is not None:
            print(f"actuator {i + 1} latched at t={t:g} s")
    if log.ground_truth() is not None:
        delay = "none" if result.detection_delay is None else f"{result.detection_delay:.4f}"
        print(
            f"delay_s={delay} false_alarms={result.false_alarm_count} "
            f"missed={str(result.missed_detection).lower()}"
        )
    else:
        print(f"false_alarms={result.false_alarm_count}")
    return 0


def cmd_sweep(args) -> int:
    paths = sorted(glob.glob(args.logs))
    if not paths:
        raise CommandError(f"no logs match {args.logs!r}", USAGE_ERROR)
    base = _load_config(args.config)
    spec = _load_sweep_spec(args.spec, base)
    try:
        psets = spec.parameter_sets()  # validates parameter names up front
    except KeyError as exc:
        raise CommandError(f"bad sweep spec: {exc.args[0]}", USAGE_ERROR) from exc

    logs = []
    log_ids = []
    for path in paths:
        try:
            logs.append(flightlog.load_log(path))
        except flightlog.LogFormatError as exc:
            raise CommandError(f"bad log {path}: {exc}", USAGE_ERROR) from exc
        log_ids.append(os.path.splitext(os.path.basename(path))[0])

    rows = run_sweep(logs, spec, log_ids=log_ids, jobs=args.jobs)
    os.makedirs(args.out_dir, exist_ok=True)
    results_path = os.path.join(args.out_dir, "results.csv")
    summary_path = os.path.join(args.out_dir, "summary.csv")
    write_results_csv(rows, results_path)
    write_summary_csv(summarize_sweep(rows, spec), summary_path)
    print(
        f"swept {len(psets)} parameter sets x {len(logs)} logs = {len(rows)} runs"
    )
    print(f"wrote {results_path} and {summary_path}")
    return 0


def cmd_report(args) -> int:
    if not os.path.exists(args.results):
        raise CommandError(f"results file not found: {args.results}", USAGE_ERROR)
    rows = read_results_csv(args.results)
    base = _load_config(args.config)
    spec = _load_sweep_spec(args.spec, base)
    known = {p.set_id for p in spec.parameter_sets()}
    missing = {r.param_set_id for r in rows} - known
    if missing:
        raise CommandError(
            f"results reference parameter sets absent from the spec: {sorted(missing)}",
            USAGE_ERROR,
        )
    text = render_report(rows, spec)
    print(text, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loedetect",
        description="Quadrotor actuator loss-of-effectiveness detection toolkit",
    )
    parser.add_argument(
        "--print-default-config",
        action="store_true",
        help="print the default detector configuration and exit",
    )
    sub = parser.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="generate a flight log with an optional failure")
    sim.add_argument("--scenario", choices=SCENARIOS, default="hover")
    sim.add_argument("--duration", type=float, default=10.0, help="flight length, s")
    sim.add_argument("--fault", help="ACTUATOR:TIME, e.g. 3:1.56")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--noise-scale", type=float, default=1.0)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    det = sub.add_parser("detect", help="replay a log through the detector")
    det.add_argument("--log", required=True)
    det.add_argument("--config", help="detector config file (defaults otherwise)")
    det.add_argument("--out", help="per-tick detector output CSV")
    det.set_defaults(func=cmd_detect)

    swp = sub.add_parser("sweep", help="one-at-a-time parameter sweep over logs")
    swp.add_argument("--logs", required=True, help="glob of flight log CSVs")
    swp.add_argument("--spec", help="JSON sweep spec (default: the 19-set sweep)")
    swp.add_argument("--config", help="base detector config file")
    swp.add_argument("--out-dir", required=True)
    swp.add_argument("--jobs", type=int, default=1)
    swp.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="render box-plot tables from sweep results")
    rep.add_argument("--results", required=True)
    rep.add_argument("--spec", help="JSON sweep spec the results were produced with")
    rep.add_argument("--config", help="base detector config file")
    rep.add_argument("--out", help="also write the rendered report here")
    rep.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        print(format_config(default_config()), end="")
        return 0
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
