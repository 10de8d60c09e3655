"""Command-line pipeline: ingest -> signals -> reward/backtest -> calibrate.

Stages communicate exclusively through files (CSV in, JSONL/JSON/CSV out) so
every stage is independently re-runnable; each command drops a digest
manifest beside its outputs. Exit codes: 0 success, 1 fatal error, 2
empty-result success-with-warning.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import __version__
from .backtester import (
    compare_reports,
    export_long_csv,
    export_report,
    read_report_json,
    run_backtest,
)
from .calibration import (
    CalibrationGrid,
    export_feedback,
    grid_calibrate,
    write_calibration_json,
)
from .errors import HarnessError
from .manifest import RunManifest, write_manifest
from .market_data import (
    align_events,
    load_headlines,
    load_prices,
    read_events_jsonl,
    write_events_jsonl,
)
from .prompt_forge import default_config, load_config_toml, render_prompt, validate_config
from .rlmf_reward import RewardParams, batch_rewards
from .signal_engine import (
    ENDPOINT_ENV,
    SignalSourceSpec,
    generate_signals,
    read_signals_jsonl,
    write_signals_jsonl,
)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_EMPTY = 2


class UsageError(HarnessError):
    pass


class _Parser(argparse.ArgumentParser):
    # Exit code 2 is reserved for empty results; argparse would use it for
    # usage errors, so route those to the fatal code instead.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _load_prompt_config(args):
    config = load_config_toml(args.prompt_config) if args.prompt_config else default_config()
    if getattr(args, "signal_strength", None) is not None:
        config = dataclasses.replace(config, signal_strength=args.signal_strength)
    violations = validate_config(config)
    if violations:
        raise UsageError("invalid prompt config: " + "; ".join(violations))
    return config


def _reward_params(args) -> RewardParams:
    params = RewardParams(
        signal_strength=args.signal_strength,
        action_threshold=args.tau,
        movement_threshold=args.theta,
        hold_reward=args.beta,
    )
    try:
        params.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    return params


def _add_reward_flags(parser) -> None:
    parser.add_argument("--signal-strength", type=int, default=10,
                        help="score bound S (default 10)")
    parser.add_argument("--tau", type=int, default=3,
                        help="action threshold (default 3)")
    parser.add_argument("--theta", type=float, default=0.01,
                        help="minimum |forward return| counted as a strong move (default 0.01)")
    parser.add_argument("--beta", type=float, default=0.001,
                        help="flat hold reward magnitude (default 0.001)")


def _parse_grid_axis(raw: str, conv):
    try:
        values = tuple(conv(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise UsageError(f"bad grid axis {raw!r}")
    if not values:
        raise UsageError(f"bad grid axis {raw!r}")
    return values


def cmd_ingest(args) -> int:
    if args.horizon < 1:
        raise UsageError("--horizon must be >= 1")
    if args.entry_lag not in (0, 1):
        raise UsageError("--entry-lag must be 0 or 1")
    manifest = RunManifest(command=_command_string(args), tool_version=__version__)
    headlines = load_headlines(args.headlines)
    prices = load_prices(args.prices)
    manifest.add_input("headlines", args.headlines)
    manifest.add_input("prices", args.prices)
    result = align_events(headlines, prices, horizon=args.horizon, entry_lag=args.entry_lag)
    write_events_jsonl(result.events, args.out)
    manifest.add_output("events", args.out)
    manifest.stats = {
        "headlines": len(headlines),
        "aligned": len(result.events),
        "skipped": result.skip_tally,
        "skip_reasons": [list(pair) for pair in result.skipped],
    }
    write_manifest(manifest, _manifest_path(args.out))
    print(f"aligned {len(result.events)} events ({result.skip_tally} skipped) -> {args.out}")
    if result.skipped:
        _warn(f"skipped {result.skip_tally} headline(s) without usable price bars")
    return EXIT_OK


def cmd_signals(args) -> int:
    config = _load_prompt_config(args)
    if args.source == "replay":
        if not args.replay_file:
            raise UsageError("--replay-file is required for --source replay")
        spec = SignalSourceSpec.replay(args.replay_file)
    elif args.source == "llm":
        endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise UsageError(
                f"--endpoint (or ${ENDPOINT_ENV}) is required for --source llm"
            )
        spec = SignalSourceSpec.llm(
            endpoint=endpoint,
            model_name=args.model,
            request_timeout=args.request_timeout,
            max_parallel=args.max_parallel,
        )
    else:
        spec = SignalSourceSpec.baseline()

    manifest = RunManifest(command=_command_string(args), tool_version=__version__)
    manifest.config_fingerprints["prompt"] = config.fingerprint()
    events = read_events_jsonl(args.events)
    manifest.add_input("events", args.events)
    prices = None
    if args.prices:
        prices = load_prices(args.prices)
        manifest.add_input("prices", args.prices)
    if args.replay_file:
        manifest.add_input("replay", args.replay_file)

    result = generate_signals(spec, events, config, prices)
    write_signals_jsonl(result.signals, args.out)
    manifest.add_output("signals", args.out)
    manifest.stats = {
        "events": len(events),
        "signals": len(result.signals),
        "failures": len(result.failures),
    }
    write_manifest(manifest, _manifest_path(args.out))
    for event_id, reason in result.failures:
        print(f"unscored {event_id}: {reason}", file=sys.stderr)
    print(f"scored {len(result.signals)}/{len(events)} events -> {args.out}")
    if not result.signals:
        _warn("no signals produced")
        return EXIT_EMPTY
    return EXIT_OK


def cmd_backtest(args) -> int:
    params = _reward_params(args)
    manifest = RunManifest(command=_command_string(args), tool_version=__version__)
    manifest.config_fingerprints["reward"] = params.fingerprint()
    events = read_events_jsonl(args.events)
    signals = read_signals_jsonl(args.signals, params.signal_strength)
    manifest.add_input("events", args.events)
    manifest.add_input("signals", args.signals)
    if not signals:
        _warn("empty signals file; producing an empty report")
    report = run_backtest(signals, events, params)
    out_dir = Path(args.out_dir)
    written = export_report(report, out_dir, fmt="json")
    written += export_report(report, out_dir, fmt="csv")
    for path in written:
        manifest.add_output(path.name, path)
    win = "n/a" if report.win_rate is None else f"{report.win_rate:.4f}"
    manifest.stats = {
        "trades": report.trade_counts,
        "win_rate": report.win_rate,
        "dispersion": report.dispersion,
        "total_reward": report.total_reward,
    }
    write_manifest(manifest, out_dir / "manifest.json")
    print(
        f"trades long={report.trade_counts['long']} short={report.trade_counts['short']} "
        f"hold={report.trade_counts['hold']} win_rate={win} "
        f"dispersion={report.dispersion:.6f} total_reward={report.total_reward:.6f}"
    )
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if args.signal_strength < 1:
        raise UsageError("--signal-strength must be >= 1")
    grid = CalibrationGrid(
        tau_values=_parse_grid_axis(args.tau_grid, int),
        theta_values=_parse_grid_axis(args.theta_grid, float),
        beta_values=_parse_grid_axis(args.beta_grid, float),
    )
    try:
        grid.validate(args.signal_strength)
    except ValueError as exc:
        raise UsageError(str(exc))
    manifest = RunManifest(command=_command_string(args), tool_version=__version__)
    events = read_events_jsonl(args.events)
    signals = read_signals_jsonl(args.signals, args.signal_strength)
    manifest.add_input("events", args.events)
    manifest.add_input("signals", args.signals)
    try:
        result = grid_calibrate(events, signals, grid, args.signal_strength)
    except ValueError as exc:
        raise HarnessError(str(exc))
    write_calibration_json(result, args.out)
    manifest.add_output("calibration", args.out)
    manifest.config_fingerprints["reward"] = result.best_params.fingerprint()
    manifest.stats = {
        "surface_points": len(result.full_surface),
        "best_mean_reward": result.best_mean_reward,
    }
    write_manifest(manifest, _manifest_path(args.out))
    best = result.best_params
    print(
        f"best tau={best.action_threshold} theta={best.movement_threshold} "
        f"beta={best.hold_reward} mean_reward={result.best_mean_reward:.6f} "
        f"({len(result.full_surface)} grid points)"
    )
    return EXIT_OK


def cmd_export_feedback(args) -> int:
    params = _reward_params(args)
    config = _load_prompt_config(args)
    manifest = RunManifest(command=_command_string(args), tool_version=__version__)
    manifest.config_fingerprints["prompt"] = config.fingerprint()
    manifest.config_fingerprints["reward"] = params.fingerprint()
    events = read_events_jsonl(args.events)
    signals = read_signals_jsonl(args.signals, params.signal_strength)
    manifest.add_input("events", args.events)
    manifest.add_input("signals", args.signals)
    prices = None
    if args.prices:
        prices = load_prices(args.prices)
        manifest.add_input("prices", args.prices)

    from .signal_engine import _price_context

    batch = batch_rewards(signals, events, params)
    by_id = {e.headline.id: e for e in events}
    prompts = {}
    for signal in signals:
        event = by_id[signal.event_id]
        context = _price_context(prices, event, config.price_context_days)
        prompts[signal.event_id] = render_prompt(config, event.headline, context)
    count = export_feedback(batch.records, prompts, args.out)
    manifest.add_output("feedback", args.out)
    manifest.stats = {"records": count}
    write_manifest(manifest, _manifest_path(args.out))
    print(f"exported {count} feedback records -> {args.out}")
    return EXIT_OK if count else EXIT_EMPTY


def cmd_compare(args) -> int:
    manifest = RunManifest(command=_command_string(args), tool_version=__version__)
    report_a = read_report_json(args.report_a)
    report_b = read_report_json(args.report_b)
    manifest.add_input("report_a", args.report_a)
    manifest.add_input("report_b", args.report_b)
    summary = compare_reports(report_a, report_b)
    rows = [("ticker", "final_a", "final_b", "delta")]
    for ticker, (fa, fb) in summary.per_ticker_finals.items():
        rows.append((ticker, f"{fa:.6f}", f"{fb:.6f}", f"{fa - fb:.6f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    for row in rows:
        print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    print(
        f"dispersion a={summary.dispersion_a:.6f} b={summary.dispersion_b:.6f} "
        f"ratio={summary.dispersion_ratio:.6f} narrower={summary.narrower}"
    )
    win = "n/a" if summary.win_rate_delta is None else f"{summary.win_rate_delta:+.6f}"
    mix = " ".join(f"{k}={v:+d}" for k, v in summary.action_mix_delta.items())
    print(f"win_rate_delta={win} action_mix_delta: {mix}")
    payload = {
        "per_ticker_finals": {
            t: {"a": fa, "b": fb, "delta": fa - fb}
            for t, (fa, fb) in summary.per_ticker_finals.items()
        },
        "dispersion_a": summary.dispersion_a,
        "dispersion_b": summary.dispersion_b,
        "dispersion_ratio": summary.dispersion_ratio,
        "win_rate_delta": summary.win_rate_delta,
        "action_mix_delta": summary.action_mix_delta,
        "narrower": summary.narrower,
    }
    with Path(args.out).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    manifest.add_output("comparison", args.out)
    write_manifest(manifest, _manifest_path(args.out))
    return EXIT_OK


def cmd_report(args) -> int:
    manifest = RunManifest(command=_command_string(args), tool_version=__version__)
    report = read_report_json(args.report)
    manifest.add_input("report", args.report)
    export_long_csv(report, args.out)
    manifest.add_output("plot_csv", args.out)
    write_manifest(manifest, _manifest_path(args.out))
    print(f"wrote long-format plot data -> {args.out}")
    return EXIT_OK


def _manifest_path(out_path: str | Path) -> Path:
    return Path(str(out_path) + ".manifest.json")


def _command_string(args) -> str:
    return args._command_line


def build_parser() -> _Parser:
    parser = _Parser(prog="rlmf", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="align headlines with price bars into events")
    p.add_argument("--headlines", required=True)
    p.add_argument("--prices", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--horizon", type=int, default=3,
                   help="forward window in trading days (default 3)")
    p.add_argument("--entry-lag", type=int, default=0,
                   help="calendar days between headline and entry date (0 or 1)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("signals", help="score events through a signal source")
    p.add_argument("--events", required=True)
    p.add_argument("--source", choices=["llm", "replay", "baseline"], required=True)
    p.add_argument("--replay-file", default=None)
    p.add_argument("--endpoint", default=None,
                   help=f"chat-completions base URL (or ${ENDPOINT_ENV})")
    p.add_argument("--model", default="default")
    p.add_argument("--prices", default=None,
                   help="price CSV for prompt context (llm source)")
    p.add_argument("--prompt-config", default=None)
    p.add_argument("--signal-strength", type=int, default=None)
    p.add_argument("--request-timeout", type=float, default=30.0)
    p.add_argument("--max-parallel", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_signals)

    p = sub.add_parser("backtest", help="run the unit-trade backtest")
    p.add_argument("--events", required=True)
    p.add_argument("--signals", required=True)
    p.add_argument("--out-dir", required=True)
    _add_reward_flags(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("calibrate", help="grid-search reward thresholds")
    p.add_argument("--events", required=True)
    p.add_argument("--signals", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--signal-strength", type=int, default=10)
    p.add_argument("--tau-grid", default="1,2,3,4,5")
    p.add_argument("--theta-grid", default="0.0,0.005,0.01,0.02,0.05")
    p.add_argument("--beta-grid", default="0.0,0.001")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("export-feedback", help="write reward-annotated feedback JSONL")
    p.add_argument("--events", required=True)
    p.add_argument("--signals", required=True)
    p.add_argument("--prices", default=None)
    p.add_argument("--prompt-config", default=None)
    p.add_argument("--out", required=True)
    _add_reward_flags(p)
    p.set_defaults(func=cmd_export_feedback)

    p = sub.add_parser("compare", help="compare two backtest reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--out", default="comparison.json")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="emit plot-ready long-format CSV from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._command_line = "rlmf " + " ".join(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
