"""Command line entry point: one subcommand per pipeline stage plus ``all``."""
import argparse
import logging
import os
import sys

from . import pipeline
from .dataio.config import ConfigError, load_config

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_CONFIG = 4
EXIT_STAGE_FAILURE = 5

EPILOG = f"""exit codes:
  {EXIT_OK}  success
  {EXIT_USAGE}  usage error (unknown subcommand or flag, bad flag value)
  {EXIT_MISSING_INPUT}  missing input (an earlier stage has not been run)
  {EXIT_CONFIG}  invalid configuration
  {EXIT_STAGE_FAILURE}  stage failure (training diverged, generation failed, bad data)
"""

# flag -> dotted config key, per subcommand
STAGE_FLAGS = {
    "synth-data": [("--customers", int, "world.customers"), ("--products", int, "world.products"),
                   ("--categories", int, "world.categories"), ("--personas", int, "world.personas"),
                   ("--weeks", int, "world.weeks")],
    "embed-products": [("--dim", int, "embed.dim"), ("--epochs", int, "embed.epochs"),
                       ("--window", int, "embed.window"), ("--negatives", int, "embed.negatives")],
    "train-lstm": [("--hidden-dim", int, "lstm.hidden_dim"), ("--epochs", int, "lstm.epochs"),
                   ("--lr", float, "lstm.lr")],
    "train-gan": [("--lam", float, "gan.lam"), ("--n-critic", int, "gan.n_critic"),
                  ("--epochs", int, "gan.epochs"), ("--noise-dim", int, "gan.noise_dim"),
                  ("--batch-size", int, "gan.batch_size"), ("--lr", float, "gan.lr"),
                  ("--beta1", float, "gan.beta1"), ("--beta2", float, "gan.beta2")],
    "generate": [("--weeks", int, "generation.weeks"), ("--k", int, "generation.k")],
    "evaluate": [],
    "all": [],
}

HELP = {
    "synth-data": "write a synthetic catalog, transactions and manifest",
    "embed-products": "train skip-gram word vectors and product vectors",
    "train-lstm": "train the multi-task customer LSTM",
    "train-gan": "train the conditional WGAN-GP on (product, condition) pairs",
    "generate": "generate future baskets for customers",
    "evaluate": "compare real and generated baskets",
    "all": "run every stage in order",
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (defaults when omitted)")
    common.add_argument("--seed", type=int, help="root seed; every stage stream derives from it")
    common.add_argument("--workdir", help="directory holding data/, models/, output/, report/")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings only")

    parser = argparse.ArgumentParser(
        prog="basketgen", description="Generate and evaluate customer basket sequences.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="subcommand", required=True)
    for name, flags in STAGE_FLAGS.items():
        p = sub.add_parser(name, parents=[common], help=HELP[name], epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        for flag, kind, key in flags:
            p.add_argument(flag, type=kind, dest=key.replace(".", "__"),
                           help=f"overrides {key}")
        if name == "generate":
            p.add_argument("--customers", default="all",
                           help="'all' or a file with one customer id per line")
    return parser


def _overrides(args):
    out = {"seed": args.seed, "workdir": args.workdir}
    for _, _, key in STAGE_FLAGS[args.command]:
        out[key] = getattr(args, key.replace(".", "__"))
    return out


def _read_customer_file(path):
    with open(path) as fh:
        ids = [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    if not ids:
        raise ValueError(f"{path}: no customer ids")
    return ids


def _run(args, cfg):
    paths = pipeline.Paths(cfg.workdir)
    if args.command == "synth-data":
        pipeline.run_synth(cfg, paths)
    elif args.command == "embed-products":
        pipeline.run_embed(cfg, paths)
    elif args.command == "train-lstm":
        pipeline.run_lstm(cfg, paths)
    elif args.command == "train-gan":
        pipeline.run_gan(cfg, paths)
    elif args.command == "generate":
        customers = None if args.customers == "all" else _read_customer_file(args.customers)
        pipeline.run_generate(cfg, paths, customers)
    elif args.command == "evaluate":
        pipeline.run_evaluate(cfg, paths)
        with open(os.path.join(paths.report, "summary.txt")) as fh:
            print(fh.read(), end="")
    elif args.command == "all":
        pipeline.run_all(cfg, paths)
        with open(os.path.join(paths.report, "summary.txt")) as fh:
            print(fh.read(), end="")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    log = logging.getLogger("basketgen")

    try:
        if args.config is not None and not os.path.isfile(args.config):
            raise ConfigError(f"config file {args.config} not found")
        cfg = load_config(args.config, _overrides(args))
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    try:
        _run(args, cfg)
    except pipeline.MissingInputError as exc:
        log.error("%s", exc)
        return EXIT_MISSING_INPUT
    except Exception as exc:  # noqa: BLE001
        log.error("%s failed: %s: %s", args.command, type(exc).__name__, exc)
        log.debug("traceback", exc_info=True)
        return EXIT_STAGE_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
