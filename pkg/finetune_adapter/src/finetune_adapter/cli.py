"""Command-line interface: train, serve, evaluate.

Exit codes: 0 on success, 1 on any error (including usage errors).
"""

from __future__ import annotations

import argparse
import shlex
import sys

from . import __version__
from .errors import AdapterError
from .evaluate import DEFAULT_HARNESS_CMD, RewardSettings, evaluate_adapter
from .feedback import load_feedback
from .model import build_base_model
from .serving import AdapterServer
from .training import TrainingConfig, load_trained_model, train_adapter

EXIT_OK = 0
EXIT_ERROR = 1

_DEFAULTS = TrainingConfig()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def cmd_train(args) -> int:
    examples = load_feedback(args.feedback)
    config = TrainingConfig(
        base_model=args.base,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        weight_decay=args.weight_decay,
        lora_rank=args.lora_rank,
        lora_alpha=args.lora_alpha,
        seed=args.seed,
    )
    result = train_adapter(
        examples, args.out_dir, config,
        log=lambda epoch, loss: print(
            f"epoch {epoch}/{config.epochs}: weighted loss {loss:.6f}"
        ),
    )
    print(
        f"saved adapter ({result.trainable_params} trainable params, "
        f"{result.examples} examples) -> {result.adapter_dir}"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    if args.adapter_dir:
        model, metadata = load_trained_model(args.adapter_dir)
        name = f"{metadata['base_model']}+adapter"
    else:
        model = build_base_model(args.base)
        name = args.base
    server = AdapterServer(model, name, host=args.host, port=args.port).start()
    print(f"serving {name} at {server.url}/v1/chat/completions", flush=True)
    try:
        server.wait()
    except KeyboardInterrupt:
        server.stop()
    return EXIT_OK


def cmd_evaluate(args) -> int:
    harness_cmd = shlex.split(args.harness_cmd) if args.harness_cmd else None
    reward = RewardSettings(
        signal_strength=args.signal_strength,
        tau=args.tau,
        theta=args.theta,
        beta=args.beta,
    )
    report = evaluate_adapter(
        args.adapter_dir,
        args.eval_events,
        eval_feedback_path=args.eval_feedback,
        harness_cmd=harness_cmd,
        reward=reward,
        work_dir=args.work_dir,
        out_path=args.out,
        max_parallel=args.max_parallel,
        request_timeout=args.request_timeout,
    )
    print(
        f"base mean reward:    {report.base.mean_reward:+.6f} "
        f"({report.base.scored_events}/{report.eval_events} scored)"
    )
    print(
        f"adapted mean reward: {report.adapted.mean_reward:+.6f} "
        f"({report.adapted.scored_events}/{report.eval_events} scored)"
    )
    print(f"improvement:         {report.improvement:+.6f}")
    if args.out:
        print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="finetune-adapter",
        description="Reward-weighted fine-tuning of a tiny local model on feedback records",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fine-tune adapter weights on a feedback file")
    p.add_argument("--feedback", required=True, help="feedback JSONL path")
    p.add_argument("--out-dir", required=True, help="directory for adapter weights + logs")
    p.add_argument("--base", default=_DEFAULTS.base_model)
    p.add_argument("--epochs", type=int, default=_DEFAULTS.epochs)
    p.add_argument("--learning-rate", type=float, default=_DEFAULTS.learning_rate)
    p.add_argument("--batch-size", type=int, default=_DEFAULTS.batch_size)
    p.add_argument("--weight-decay", type=float, default=_DEFAULTS.weight_decay)
    p.add_argument("--lora-rank", type=int, default=_DEFAULTS.lora_rank)
    p.add_argument("--lora-alpha", type=float, default=_DEFAULTS.lora_alpha)
    p.add_argument("--seed", type=int, default=_DEFAULTS.seed)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve a model on a local chat-completions endpoint")
    p.add_argument("--base", default=_DEFAULTS.base_model)
    p.add_argument("--adapter-dir", default=None,
                   help="serve this trained adapter instead of the bare base model")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("evaluate",
                       help="score base vs adapted model on held-out events via the harness")
    p.add_argument("--adapter-dir", required=True)
    p.add_argument("--eval-events", required=True,
                   help="aligned-events JSONL for the evaluation period")
    p.add_argument("--eval-feedback", default=None,
                   help="optional feedback JSONL whose ids join the leakage check")
    p.add_argument("--out", default=None, help="write the comparison report JSON here")
    p.add_argument("--harness-cmd", default=None,
                   help=f"harness command (default: {' '.join(DEFAULT_HARNESS_CMD)})")
    p.add_argument("--signal-strength", type=int, default=None)
    p.add_argument("--tau", type=int, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--work-dir", default=None,
                   help="keep signal/backtest artifacts in this directory")
    p.add_argument("--max-parallel", type=int, default=2)
    p.add_argument("--request-timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
