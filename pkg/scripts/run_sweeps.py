#!/usr/bin/env python3
"""
Hyperparameter Sweep Script
Representation size, kernel width and attention heads sweeps on the synthetic corpus
"""

import os
import sys
from typing import List, Optional, Sequence

from dotenv import load_dotenv

# Add the project root to the Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

SIZES = [32, 64, 128, 256, 512]
KERNELS = [3, 5, 7, 9]
HEADS = [2, 4, 8, 16, 32, 64]
HELD_OUT = 2000


def _prepare(config):
    """Corpus split plus the unique training paths and unseen test paths"""
    from src.data.corpus import generate
    from src.data.dataset import temporal_split

    train, test = temporal_split(generate(config.corpus).bags, config.corpus.split_timestamp())
    seen = list(dict.fromkeys(p for bag in train for p in bag.paths))
    known = set(seen)
    unseen = [p for p in dict.fromkeys(p for bag in test for p in bag.paths) if p not in known]
    return train, test, seen, unseen[:HELD_OUT]


def sweep_codec(config, field: str, values: Sequence[int], out: str) -> None:
    """Train one autoencoder per value and report held-out reconstruction accuracy"""
    import pandas as pd
    from loguru import logger

    from src.models.autoencoder import reconstruction_accuracy, train_autoencoder

    _, _, seen, unseen = _prepare(config)
    rows = []
    for value in values:
        for seed in config.runtime.seeds:
            logger.info(f"Autoencoder sweep: {field}={value} seed={seed}")
            codec_config = config.autoencoder.model_copy(update={field: value, "seed": seed})
            model, report = train_autoencoder(seen, codec_config)
            rows.append({field: value, "seed": seed, "validation_accuracy": report.final_accuracy,
                         "heldout_accuracy": reconstruction_accuracy(model, unseen)})
    _write(pd.DataFrame(rows), field, ["validation_accuracy", "heldout_accuracy"], out, f"sweep_{field}")


def sweep_heads(config, values: Sequence[int], out: str, autoencoder: Optional[str] = None) -> None:
    """Train classifiers per head count plus the mean+max baseline"""
    import pandas as pd
    from loguru import logger

    from src.models.autoencoder import StringAutoencoder, train_autoencoder
    from src.training.classifier_trainer import train_classifier

    train, test, seen, _ = _prepare(config)
    codec = StringAutoencoder.load(autoencoder) if autoencoder else train_autoencoder(seen, config.autoencoder)[0]

    variants = [("attention", heads) for heads in values] + [("mean_max", 0)]
    rows = []
    for aggregator, heads in variants:
        label = "mean+max" if aggregator == "mean_max" else str(heads)
        for seed in config.runtime.seeds:
            logger.info(f"Classifier sweep: heads={label} seed={seed}")
            update = {"aggregator": aggregator, "seed": seed}
            if heads:
                update["heads"] = heads
            _, report = train_classifier(train, codec, config.classifier.model_copy(update=update), test)
            rows.append({"heads": label, "seed": seed, "test_accuracy": report.final_test_accuracy})
    _write(pd.DataFrame(rows), "heads", ["test_accuracy"], out, "sweep_heads")


def _write(frame, key: str, columns: List[str], out: str, stem: str) -> None:
    """Per-run table plus a mean ± std summary across seeds"""
    import pandas as pd

    from src.metrics.reports import format_mean_std, write_table

    write_table(frame, out, f"{stem}_runs")
    grouped = frame.groupby(key, sort=False)[columns]
    means, stds = grouped.mean(), grouped.std(ddof=1)
    summary = means.index.to_frame(index=False)
    for column in columns:
        summary[column] = [format_mean_std(m, None if pd.isna(s) else s, percent=True)
                           for m, s in zip(means[column], stds[column])]
    write_table(summary, out, stem)
    print(summary.to_string(index=False))


def main():
    """Main function"""
    import argparse

    parser = argparse.ArgumentParser(description='Run hyperparameter sweeps')
    parser.add_argument('sweep', choices=['size', 'kernel', 'heads'],
                        help='Hyperparameter to sweep')
    parser.add_argument('--config', help='JSON run config (default: built-in defaults)')
    parser.add_argument('--values', type=int, nargs='+', help='Override the swept values')
    parser.add_argument('--autoencoder', help='Reuse a trained autoencoder for the heads sweep')
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE', help='Config override')
    parser.add_argument('--out', default='runs/sweeps', help='Output directory')

    args = parser.parse_args()
    load_dotenv()

    from loguru import logger

    from src.config import load_config
    from src.errors import AdvStringsError
    from src.utils.logging_setup import configure_logging

    configure_logging(os.getenv("ADVSTR_LOG_LEVEL", "INFO"), os.path.join(args.out, "sweep.log"))
    try:
        config = load_config(args.config, args.set)
        if args.sweep == 'size':
            sweep_codec(config, "hidden_size", args.values or SIZES, args.out)
        elif args.sweep == 'kernel':
            sweep_codec(config, "kernel_width", args.values or KERNELS, args.out)
        elif args.sweep == 'heads':
            sweep_heads(config, args.values or HEADS, args.out, args.autoencoder)
    except AdvStringsError as e:
        logger.error(f"Sweep failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
