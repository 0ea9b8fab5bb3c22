"""Command line entry points: make-base, train, serve."""

import argparse
import sys

from .base import make_tiny_base
from .config import DEFAULT_EPOCHS, DEFAULT_MASK_RATE, ServiceConfig
from .errors import ServiceError
from .predict import MlmPredictor
from .server import build_app
from .train import finetune


def cmd_make_base(args: argparse.Namespace) -> int:
    path = make_tiny_base(
        args.corpus,
        args.output,
        vocab_size=args.vocab_size,
        hidden_size=args.hidden_size,
        layers=args.layers,
        heads=args.heads,
        max_input_tokens=args.max_input_tokens,
        seed=args.seed,
    )
    print(f"base checkpoint written to {path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = ServiceConfig(
        corpus_path=args.corpus,
        base_model=args.base,
        output_dir=args.output,
        epochs=args.epochs,
        mask_rate=args.mask_rate,
        device=args.device,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_input_tokens=args.max_input_tokens,
        seed=args.seed,
    )
    result = finetune(config)
    for epoch, loss in enumerate(result.epoch_losses, start=1):
        print(f"epoch {epoch}: loss {loss:.4f}")
    print(f"checkpoint written to {result.checkpoint_dir}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    predictor = MlmPredictor(args.checkpoint, device=args.device)
    app = build_app(predictor)
    print(f"serving {predictor.model_id} on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlm-service",
        description="fine-tune and serve a masked-value predictor over model renderings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-base", help="fabricate a tiny local base checkpoint from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--vocab-size", type=int, default=512, dest="vocab_size")
    p.add_argument("--hidden-size", type=int, default=64, dest="hidden_size")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--max-input-tokens", type=int, default=256, dest="max_input_tokens")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_base)

    p = sub.add_parser("train", help="fine-tune a base checkpoint on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--base", required=True, help="base checkpoint directory or published model id")
    p.add_argument("--output", required=True)
    p.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    p.add_argument("--mask-rate", type=float, default=DEFAULT_MASK_RATE, dest="mask_rate")
    p.add_argument("--device", default="cpu")
    p.add_argument("--learning-rate", type=float, default=5e-4, dest="learning_rate")
    p.add_argument("--batch-size", type=int, default=8, dest="batch_size")
    p.add_argument("--max-input-tokens", type=int, default=256, dest="max_input_tokens")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve a checkpoint over the prediction protocol")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ServiceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
