#!/usr/bin/env python3
"""
Adversarial filepath strings - command line entry point

Subcommands:
    gen-data            generate the synthetic corpus and its temporal split
    train-autoencoder   fit the string codec
    train-classifier    fit bag classifiers on frozen codec latents
    adv-train           robust training (latent or full mode)
    attack              run latent-space attacks and write summary tables
    cross-eval          robustness matrix across attacker/target models
    report              aggregate metric files of several runs
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from loguru import logger

# Add the project root to the Python path
project_root = Path(__file__).resolve().parent
sys.path.insert(0, str(project_root))

from src.config import get_settings, load_config  # noqa: E402
from src.errors import AdvStringsError, ConfigError  # noqa: E402
from src.pipelines import experiments  # noqa: E402
from src.utils.logging_setup import configure_logging  # noqa: E402

load_dotenv()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config, or a manifest.json to replay")
    common.add_argument("--seed", type=int, help="Seed for corpus, codec and classifier (single run)")
    common.add_argument("--seeds", help="Comma-separated classifier seeds for replicated runs")
    common.add_argument("--out", help="Output directory (default: $ADVSTR_OUTPUT_DIR/<subcommand>)")
    common.add_argument("--threads", type=int, help="Worker threads for attacks")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="Override a config key (repeatable)")
    common.add_argument("--log-level", help="Console log level (default: $ADVSTR_LOG_LEVEL)")

    parser = argparse.ArgumentParser(description="Latent-space adversarial filepath strings")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-data", parents=[common], help="Generate the synthetic corpus")

    p = sub.add_parser("train-autoencoder", parents=[common], help="Train the string autoencoder")
    p.add_argument("--train", help="Training dataset (jsonl)")

    p = sub.add_parser("train-classifier", parents=[common], help="Train bag classifiers")
    p.add_argument("--autoencoder", help="Autoencoder checkpoint")
    p.add_argument("--train", help="Training dataset (jsonl)")
    p.add_argument("--test", help="Test dataset (jsonl)")

    p = sub.add_parser("adv-train", parents=[common], help="Adversarially train bag classifiers")
    p.add_argument("--autoencoder", help="Autoencoder checkpoint")
    p.add_argument("--train", help="Training dataset (jsonl)")
    p.add_argument("--test", help="Test dataset (jsonl)")
    p.add_argument("--mode", choices=["latent", "full"], help="Adversarial training mode")
    p.add_argument("--alpha", type=float, action="append", help="Inner attack step size (repeatable sweep)")
    p.add_argument("--attacker", help="Classifier whose attacks measure robustness of the trained models")
    p.add_argument("--sweep", action="store_true", help="Train the configured alpha grid of the chosen mode")

    p = sub.add_parser("attack", parents=[common], help="Attack classifiers and summarise")
    p.add_argument("--autoencoder", help="Autoencoder checkpoint")
    p.add_argument("--classifier", action="append", help="Classifier checkpoint (repeatable, one per seed)")
    p.add_argument("--data", help="Evaluation dataset (jsonl)")
    p.add_argument("--grid", help="'table' for the full method grid, or specs like 'pgd:alpha=2,eps=10;fgsm'")

    p = sub.add_parser("cross-eval", parents=[common], help="Robustness matrix across models")
    p.add_argument("--autoencoder", help="Autoencoder checkpoint")
    p.add_argument("--model", action="append", help="name=checkpoint (repeatable, at least two)")
    p.add_argument("--data", help="Evaluation dataset (jsonl)")

    p = sub.add_parser("report", parents=[common], help="Aggregate metric files of several runs")
    p.add_argument("runs", nargs="+", help="Run output directories")
    return parser


def _overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides += [f"corpus.seed={args.seed}", f"autoencoder.seed={args.seed}",
                      f"classifier.seed={args.seed}", f"runtime.seeds=[{args.seed}]"]
    if args.seeds:
        overrides.append(f"runtime.seeds=[{args.seeds}]")
    threads = args.threads if args.threads is not None else get_settings().threads
    if args.threads is not None or threads > 1:
        overrides.append(f"runtime.threads={threads}")
    if getattr(args, "mode", None):
        overrides.append(f"adversarial.mode={args.mode}")
    return overrides


def _input(args: argparse.Namespace, replay: dict, name: str):
    value = getattr(args, name, None)
    return value if value else replay.get(name)


def run(args: argparse.Namespace) -> None:
    settings = get_settings()
    out = Path(args.out) if args.out else Path(settings.output_dir) / args.command
    configure_logging(args.log_level or settings.log_level, str(out / "run.log"))

    config = load_config(args.config, _overrides(args))
    replay = experiments.manifest_inputs(args.config)
    inputs = {name: _input(args, replay, name) for name in
              ("train", "test", "autoencoder", "classifier", "data", "model", "alpha", "attacker", "runs")}
    ctx = experiments.RunContext(args.command, config, out, config_path=args.config, inputs=inputs)
    logger.info(f"{args.command}: writing to {out}")

    if args.command == "gen-data":
        experiments.cmd_gen_data(ctx)
    elif args.command == "train-autoencoder":
        experiments.cmd_train_autoencoder(ctx, inputs["train"])
    elif args.command == "train-classifier":
        experiments.cmd_train_classifier(ctx, inputs["autoencoder"], inputs["train"], inputs["test"])
    elif args.command == "adv-train":
        experiments.cmd_adv_train(ctx, inputs["autoencoder"], inputs["train"], inputs["test"],
                                  alphas=inputs["alpha"], attacker=inputs["attacker"],
                                  sweep=args.sweep)
    elif args.command == "attack":
        experiments.cmd_attack(ctx, inputs["autoencoder"], inputs["classifier"] or [], inputs["data"], args.grid)
    elif args.command == "cross-eval":
        experiments.cmd_cross_eval(ctx, inputs["autoencoder"], inputs["model"] or [], inputs["data"])
    elif args.command == "report":
        experiments.cmd_report(ctx, inputs["runs"])
    ctx.write_manifest()


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit status"""
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return 2
    except AdvStringsError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
