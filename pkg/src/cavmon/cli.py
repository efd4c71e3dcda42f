"""Command-line interface: ``cavmon {indicators,sweep,simulate,synth}``.

Every option can also come from a JSON config file passed with ``--config``;
flags given on the command line take precedence.  ``CAVMON_OUTPUT_DIR`` sets
the default output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import __version__
from .errors import CavmonError, NoDataError
from .events import detect_events
from .indicators import IndicatorKind, compute
from .netsim import ChannelModel, channel_preset, end_to_end_check, sampled_log, simulate
from .sampling import SamplingSpec
from .stats import ks_passing_rate
from .synth import EventPlan, generate, write_events
from .telemetry import DEFAULT_VEHICLE_WIDTH, QualityPolicy, filter_quality, load_log, write_log
from .tradeoff import (
    DEFAULT_INTERVALS,
    DELAY_BIN,
    ERROR_BIN,
    Weights,
    recommend,
    recommend_uniform,
    sweep,
    uniform_scores,
)

log = logging.getLogger("cavmon")

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3

FORMAT_VERSION = 1
OUTPUT_ENV = "CAVMON_OUTPUT_DIR"


class UsageError(CavmonError):
    pass


@dataclass
class RunConfig:
    input: str | None = None
    output: str | None = None
    indicators: list[str] = field(default_factory=lambda: [k.value for k in IndicatorKind])
    intervals: list[float] = field(default_factory=lambda: list(DEFAULT_INTERVALS))
    weights: list[float] = field(default_factory=lambda: [0.5, 0.5])
    alpha: float = 0.05
    trials: int = 100
    seed: int | None = None
    delay_bin: float = DELAY_BIN
    error_bin: float = ERROR_BIN
    min_lane_quality: int = 2
    valid_target_status: list[int] | None = None
    vehicle_width: float = DEFAULT_VEHICLE_WIDTH
    columns: dict[str, str] | None = None
    delimiter: str = ","
    channel: str = "wave"
    capacity: float | None = None
    queue_limit: int | None = None
    propagation_delay: float | None = None
    interval: float = 0.2
    batch_interval: float = 1.0
    rate: float = 50.0
    duration: float = 600.0
    events: dict[str, list[float]] | None = None

    def validate(self):
        if self.trials < 1:
            raise UsageError("trials must be at least 1")
        if not 0 < self.alpha < 1:
            raise UsageError("alpha must lie in (0, 1)")
        if not self.intervals or any(k <= 0 for k in self.intervals):
            raise UsageError("intervals must be a non-empty list of positive numbers")
        if len(self.weights) != 2:
            raise UsageError("weights takes two numbers: communication reliability")
        for name in self.indicators:
            if name not in {k.value for k in IndicatorKind}:
                raise UsageError(f"unknown indicator {name!r}")

    @property
    def output_dir(self) -> Path:
        return Path(self.output or os.environ.get(OUTPUT_ENV, "."))

    def kinds(self) -> list[IndicatorKind]:
        return [IndicatorKind(v) for v in self.indicators]

    def require_seed(self) -> int:
        if self.seed is None:
            raise UsageError("this command is randomized; pass --seed")
        return self.seed


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _csv_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _csv_names(text: str) -> list[str]:
    return [x.strip().lower() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavmon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cavmon {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("-o", "--output", help=f"output directory (default ${OUTPUT_ENV} or .)")
    common.add_argument("-v", "--verbose", action="store_true")

    reader = argparse.ArgumentParser(add_help=False)
    reader.add_argument("input", nargs="?", help="telemetry log (delimited text)")
    reader.add_argument("--delimiter")
    reader.add_argument("--vehicle-width", type=float)
    reader.add_argument("--min-lane-quality", type=int)
    reader.add_argument("--valid-target-status", type=_csv_ints, help="comma list; default any non-zero")

    p = sub.add_parser("indicators", parents=[common, reader], help="export indicator series")
    p.add_argument("--indicators", type=_csv_names, help="comma list of sd,lpv,ittc")

    p = sub.add_parser("sweep", parents=[common, reader], help="interval trade-off report")
    p.add_argument("--indicators", type=_csv_names)
    p.add_argument("--intervals", type=_csv_floats, help="comma list of seconds")
    p.add_argument("--weights", type=float, nargs=2, metavar=("W_COM", "W_REL"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--delay-bin", type=float)
    p.add_argument("--error-bin", type=float)

    p = sub.add_parser("simulate", parents=[common, reader], help="OBU-RSU-TMC pipeline run")
    p.add_argument("--channel", help="preset name: lte or wave")
    p.add_argument("--capacity", type=float, help="bits/s, overrides the preset")
    p.add_argument("--queue-limit", type=int)
    p.add_argument("--propagation-delay", type=float)
    p.add_argument("--interval", type=float, help="sampling interval, s")
    p.add_argument("--batch-interval", type=float, help="message interval, s")

    p = sub.add_parser("synth", parents=[common], help="write a synthetic log")
    p.add_argument("--rate", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--vehicle-width", type=float)
    for kind in IndicatorKind:
        p.add_argument(
            f"--{kind.value}-events",
            type=float,
            nargs=3,
            metavar=("COUNT", "DURATION", "PEAK"),
            help=f"planted {kind.value.upper()} events",
        )
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(cfg, key, value)
    for key, value in vars(args).items():
        if key in known and value is not None:
            setattr(cfg, key, value)
    if getattr(args, "command", None) == "synth":
        events = dict(cfg.events or {})
        for kind in IndicatorKind:
            value = getattr(args, f"{kind.value}_events", None)
            if value is not None:
                events[kind.value] = value
        cfg.events = events or None
    cfg.validate()
    return cfg


def _read_log(cfg: RunConfig):
    if not cfg.input:
        raise UsageError("an input log is required")
    raw = load_log(cfg.input, cfg.columns, delimiter=cfg.delimiter, vehicle_width=cfg.vehicle_width)
    if raw.dropped_rows:
        log.warning("%s: dropped %d malformed rows", cfg.input, raw.dropped_rows)
    policy = QualityPolicy(
        min_lane_quality=cfg.min_lane_quality,
        valid_target_status=frozenset(cfg.valid_target_status) if cfg.valid_target_status else None,
    )
    return filter_quality(raw, policy)


def _clean(value):
    """JSON-safe copy: NaN/inf become null, tuples become lists."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


def cmd_indicators(cfg: RunConfig) -> int:
    telemetry = _read_log(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    summary = {"format_version": FORMAT_VERSION, "source": cfg.input, "indicators": {}}
    failures = 0
    for kind in cfg.kinds():
        try:
            series = compute(kind, telemetry)
        except (NoDataError, ValueError) as exc:
            failures += 1
            summary["indicators"][kind.value] = {"error": str(exc)}
            log.error("%s: %s", kind.value, exc)
            continue
        path = out / f"{kind.value}.csv"
        series.write_csv(path)
        events = detect_events(series)
        durations = [e.duration for e in events]
        summary["indicators"][kind.value] = {
            "file": path.name,
            "points": len(series),
            "skipped_frames": series.skipped,
            "threshold": series.threshold,
            "critical_events": len(events),
            "mean_event_duration_s": sum(durations) / len(durations) if durations else None,
        }
    _write_json(out / "indicators_summary.json", summary)
    if failures == len(cfg.kinds()):
        return EXIT_FATAL
    return EXIT_PARTIAL if failures else EXIT_OK


def _summary_fields(s) -> list:
    return [None, None, 0] if s is None else [s.mode, s.std_dev, s.count]


def cmd_sweep(cfg: RunConfig) -> int:
    seed = cfg.require_seed()
    telemetry = _read_log(cfg)
    weights = Weights(*cfg.weights)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)

    per_kind = {}
    ks_rows = []
    errors = {}
    for kind in cfg.kinds():
        try:
            series = compute(kind, telemetry)
        except (NoDataError, ValueError) as exc:
            errors[kind.value] = str(exc)
            log.error("%s: %s", kind.value, exc)
            continue
        per_kind[kind] = sweep(
            series, cfg.intervals, weights, delay_bin=cfg.delay_bin, error_bin=cfg.error_bin
        )
        for k in cfg.intervals:
            rate = ks_passing_rate(series, k, cfg.trials, cfg.alpha, seed)
            ks_rows.append([kind.value, k, rate])

    outcome_header = [
        "indicator", "interval_s", "success_ratio", "compression_ratio", "weighted_sum",
        "raw_count", "sampled_count", "event_count", "detected_count",
    ]
    outcome_rows = [
        [o.indicator.value, o.interval, o.success_ratio, o.compression_ratio, o.weighted_sum,
         o.raw_count, o.sampled_count, o.event_count, o.detected_count]
        for outs in per_kind.values() for o in outs
    ]
    summary_rows = []
    for outs in per_kind.values():
        for o in outs:
            for outcome, metric, s in (
                ("detected", "delay", o.delay_summary),
                ("detected", "error", o.error_summary),
                ("missed", "delay", o.missed_delay_summary),
                ("missed", "error", o.missed_error_summary),
            ):
                width = cfg.delay_bin if metric == "delay" else cfg.error_bin
                summary_rows.append([o.indicator.value, o.interval, outcome, metric, width, *_summary_fields(s)])
    match_rows = [
        [o.indicator.value, o.interval, m.raw_event.start, m.raw_event.end, m.raw_event.peak_time,
         m.raw_event.peak_value, m.outcome.value, m.delay, m.error, m.sampled_peak_time, m.sampled_peak_value]
        for outs in per_kind.values() for o in outs for m in o.matches
    ]
    recommendations = {kind.value: recommend(outs) for kind, outs in per_kind.items()}
    uniform = recommend_uniform(per_kind) if per_kind else None
    rec_rows = [[name, k] for name, k in recommendations.items()]
    if uniform is not None:
        rec_rows.append(["uniform", uniform])
    uniform_rows = [[k, s] for k, s in uniform_scores(per_kind).items()] if per_kind else []

    _write_csv(out / "outcomes.csv", outcome_header, outcome_rows)
    _write_csv(out / "ks_passing.csv", ["indicator", "interval_s", "passing_rate"], ks_rows)
    _write_csv(
        out / "summaries.csv",
        ["indicator", "interval_s", "outcome", "metric", "bin_width", "mode", "std_dev", "count"],
        summary_rows,
    )
    _write_csv(
        out / "matches.csv",
        ["indicator", "interval_s", "start", "end", "peak_time", "peak_value", "outcome",
         "delay", "error", "sampled_peak_time", "sampled_peak_value"],
        match_rows,
    )
    _write_csv(out / "uniform_scores.csv", ["interval_s", "mean_weighted_sum"], uniform_rows)
    _write_csv(out / "recommendations.csv", ["indicator", "interval_s"], rec_rows)

    report = {
        "format_version": FORMAT_VERSION,
        "source": cfg.input,
        "config": {
            "intervals": cfg.intervals,
            "weights": {"communication": weights.communication, "reliability": weights.reliability},
            "alpha": cfg.alpha,
            "trials": cfg.trials,
            "seed": seed,
            "delay_bin": cfg.delay_bin,
            "error_bin": cfg.error_bin,
        },
        "errors": errors,
        "outcomes": [dict(zip(outcome_header, r)) for r in outcome_rows],
        "ks_passing": [dict(zip(["indicator", "interval_s", "passing_rate"], r)) for r in ks_rows],
        "summaries": [
            dict(zip(["indicator", "interval_s", "outcome", "metric", "bin_width", "mode", "std_dev", "count"], r))
            for r in summary_rows
        ],
        "uniform_scores": [dict(zip(["interval_s", "mean_weighted_sum"], r)) for r in uniform_rows],
        "recommendations": recommendations,
        "uniform_recommendation": uniform,
    }
    _write_json(out / "report.json", report)
    text = _render_sweep(outcome_rows, ks_rows, recommendations, uniform)
    (out / "report.txt").write_text(text)
    print(text, end="")
    if not per_kind:
        return EXIT_FATAL
    return EXIT_PARTIAL if errors else EXIT_OK


def _render_sweep(outcome_rows, ks_rows, recommendations, uniform) -> str:
    ks = {(r[0], r[1]): r[2] for r in ks_rows}
    lines = [f"{'indicator':<10}{'k [s]':>8}{'x_suc':>10}{'x_comp':>10}{'sum':>10}{'KS pass':>10}"]
    for name, k, suc, comp, total, *_ in outcome_rows:
        lines.append(f"{name:<10}{k:>8g}{suc:>10.4g}{comp:>10.4g}{total:>10.4g}{ks[(name, k)]:>10.4g}")
    lines.append("")
    for name, k in recommendations.items():
        lines.append(f"recommended interval {name}: {k:g} s")
    if uniform is not None:
        lines.append(f"recommended uniform interval: {uniform:g} s")
    return "\n".join(lines) + "\n"


def _channel(cfg: RunConfig) -> ChannelModel:
    try:
        base = channel_preset(cfg.channel)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return ChannelModel(
        capacity=base.capacity if cfg.capacity is None else cfg.capacity,
        queue_limit=base.queue_limit if cfg.queue_limit is None else cfg.queue_limit,
        propagation_delay=base.propagation_delay if cfg.propagation_delay is None else cfg.propagation_delay,
    )


def cmd_simulate(cfg: RunConfig) -> int:
    channel = _channel(cfg)
    telemetry = _read_log(cfg)
    spec = SamplingSpec(cfg.interval)
    report = simulate(telemetry, spec, cfg.batch_interval, channel)
    kept = sampled_log(telemetry, spec)
    checks = {}
    for kind in IndicatorKind:
        try:
            direct = compute(kind, kept)
        except NoDataError:
            continue
        checks[kind.value] = end_to_end_check(report, direct)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "format_version": FORMAT_VERSION,
        "source": cfg.input,
        "channel": {
            "name": cfg.channel,
            "capacity_bps": channel.capacity,
            "queue_limit": channel.queue_limit,
            "propagation_delay_s": channel.propagation_delay,
        },
        "sampling_interval_s": cfg.interval,
        "batch_interval_s": cfg.batch_interval,
        "report": report.to_record(),
        "end_to_end_check": checks,
    }
    _write_json(out / "simulation.json", doc)
    _write_csv(out / "latencies.csv", ["message", "latency_s"], list(enumerate(report.latencies)))
    rec = report.to_record()
    print(
        f"messages generated {rec['generated']}, delivered {rec['delivered']}, "
        f"dropped {rec['dropped']}, in queue {rec['in_queue']}"
    )
    print(f"mean latency {rec['latency_mean_s']} s, throughput {rec['throughput_Bps']} B/s")
    for name, ok in checks.items():
        print(f"end-to-end {name}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if all(checks.values()) else EXIT_PARTIAL


def cmd_synth(cfg: RunConfig) -> int:
    seed = cfg.require_seed()
    plans = {}
    for name, (count, duration, peak) in (cfg.events or {}).items():
        if float(count) != int(count):
            raise UsageError(f"{name} event count must be an integer")
        plans[IndicatorKind(name)] = EventPlan(int(count), float(duration), float(peak))
    result = generate(cfg.rate, cfg.duration, seed, plans, vehicle_width=cfg.vehicle_width)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_log(result.log, out / "synthetic_log.csv")
    write_events(result.events, out / "synthetic_events.csv")
    print(f"wrote {len(result.log)} frames and {len(result.events)} planted events to {out}")
    return EXIT_OK


COMMANDS = {
    "indicators": cmd_indicators,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cavmon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CavmonError, ValueError) as exc:
        print(f"cavmon: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
