"""Bridge entry point: apply one update from a batch file, or serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .model import TinyTokenLM
from .server import build_app
from .trainer import BridgeTrainer


def _load_model(path: str | None, vocab_size: int) -> TinyTokenLM:
    if path and Path(path).exists():
        return TinyTokenLM.load(path)
    return TinyTokenLM(vocab_size=vocab_size)


def cmd_apply(args: argparse.Namespace) -> int:
    model = _load_model(args.model, args.vocab_size)
    trainer = BridgeTrainer(
        model,
        learning_rate=args.learning_rate,
        clip_epsilon=args.clip_epsilon,
        kl_coefficient=args.kl_coefficient,
    )
    report = trainer.apply_update(args.batch)
    print(
        f"step={report.step} items={report.num_items} "
        f"objective {report.objective_before:.6f} -> {report.objective_after:.6f} "
        f"grad_norm={report.grad_norm:.6e}"
    )
    if args.model:
        model.save(args.model)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    model = _load_model(args.model, args.vocab_size)
    trainer = BridgeTrainer(model, learning_rate=args.learning_rate)
    uvicorn.run(build_app(trainer), host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="boottrans-bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("apply", help="apply one optimizer step from a batch file")
    p.add_argument("--batch", required=True)
    p.add_argument("--model", default=None, help="model checkpoint to load/save")
    p.add_argument("--vocab-size", type=int, default=256)
    p.add_argument("--learning-rate", type=float, default=1e-6)
    p.add_argument("--clip-epsilon", type=float, default=0.2)
    p.add_argument("--kl-coefficient", type=float, default=0.01)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("serve", help="serve the generation contract")
    p.add_argument("--model", default=None)
    p.add_argument("--vocab-size", type=int, default=256)
    p.add_argument("--learning-rate", type=float, default=1e-6)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8601)
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
