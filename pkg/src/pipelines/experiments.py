"""
Experiment pipelines behind the CLI subcommands.

Every pipeline writes into one output directory and finishes with a
manifest.json that echoes the effective config, the seeds and the input
artifacts, so passing the manifest back as --config replays the run.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
from loguru import logger

from ..attacks.config import AttackConfig, AttackResult, table_grid
from ..attacks.engine import batch_attack
from ..attacks.trace_logger import AttackTraceLogger
from ..config import ExperimentConfig
from ..data.corpus import generate
from ..data.dataset import Bag, DatasetFile, temporal_split
from ..errors import CheckpointError, ConfigError, DatasetError, ShapeError
from ..metrics.reports import (aggregate_frames, attack_table_text, format_mean_std, mark_pareto,
                               render_examples, summary_frame, write_ecdf, write_table)
from ..models.autoencoder import StringAutoencoder, train_autoencoder
from ..models.classifier import ClassifierModel
from ..training.adversarial import TrainMode, cross_matrix, robustness_against, train_robust
from ..training.classifier_trainer import LatentDataset, accuracy, encode_bags, train_classifier

MANIFEST = "manifest.json"


class RunContext:
    """Output directory, effective config and the artifacts a run produced"""

    def __init__(self, subcommand: str, config: ExperimentConfig, output_dir, config_path: Optional[str] = None,
                 inputs: Optional[Dict[str, object]] = None):
        self.subcommand = subcommand
        self.config = config
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.config_path = config_path
        self.inputs = {k: v for k, v in (inputs or {}).items() if v is not None}
        self.outputs: List[str] = []

    def path(self, *parts: str) -> Path:
        target = self.output_dir.joinpath(*parts)
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def record(self, path) -> Path:
        path = Path(path)
        self.outputs.append(path.relative_to(self.output_dir).as_posix())
        return path

    def write_manifest(self) -> Path:
        manifest = {
            "subcommand": self.subcommand,
            "config_path": self.config_path,
            "config": self.config.model_dump(mode="json"),
            "seeds": self.config.runtime.seeds,
            "output_dir": str(self.output_dir),
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
        }
        path = self.output_dir / MANIFEST
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        logger.info(f"Manifest written to {path}")
        return path


def manifest_inputs(config_path: Optional[str]) -> Dict[str, object]:
    """Input artifacts recorded in a manifest, or nothing for a plain config"""
    if not config_path or not Path(config_path).exists():
        return {}
    try:
        document = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return {}
    if isinstance(document, dict) and "subcommand" in document:
        return dict(document.get("inputs") or {})
    return {}


def _require(path: Optional[str], what: str, hint: str, error=CheckpointError) -> str:
    if not path:
        raise error(f"No {what} given: {hint}")
    if not Path(path).exists():
        raise error(f"{what.capitalize()} not found at {path}: {hint}")
    return path


def _load_codec(path: Optional[str]) -> StringAutoencoder:
    return StringAutoencoder.load(_require(path, "autoencoder checkpoint", "run train-autoencoder first "
                                                                          "and pass --autoencoder"))


def _load_classifier(path: str, codec: StringAutoencoder) -> ClassifierModel:
    model = ClassifierModel.load(_require(path, "classifier checkpoint", "run train-classifier or adv-train first"))
    if model.latent_size != codec.latent_size:
        raise ShapeError("load_classifier", (model.latent_size,), (codec.latent_size,),
                         detail=f"{path} was trained on a different latent size than the autoencoder")
    return model


def _read_bags(path: Optional[str], what: str) -> List[Bag]:
    bags = DatasetFile.read(_require(path, what, "run gen-data first", DatasetError)).bags
    if not bags:
        raise DatasetError(f"{what.capitalize()} {path} is empty")
    return bags


def _eval_subset(bags: List[Bag], config: ExperimentConfig) -> List[Bag]:
    limit = config.runtime.eval_limit
    return bags[:limit] if limit else bags


def _seed_tag(seed: int) -> str:
    return f"seed{seed}"


# --- gen-data ---

def cmd_gen_data(ctx: RunContext) -> RunContext:
    spec = ctx.config.corpus
    dataset = generate(spec)
    cutoff = ctx.config.runtime.split_timestamp
    cutoff = spec.split_timestamp() if cutoff is None else cutoff
    train, test = temporal_split(dataset.bags, cutoff)
    ctx.record(dataset.write(ctx.path("dataset.jsonl")))
    ctx.record(DatasetFile(train).write(ctx.path("train.jsonl")))
    ctx.record(DatasetFile(test).write(ctx.path("test.jsonl")))
    ctx.inputs["split_timestamp"] = cutoff
    return ctx


# --- train-autoencoder ---

def cmd_train_autoencoder(ctx: RunContext, train_file: Optional[str]) -> RunContext:
    bags = _read_bags(train_file, "training dataset")
    strings = list(dict.fromkeys(p for bag in bags for p in bag.paths))
    model, report = train_autoencoder(strings, ctx.config.autoencoder)
    ctx.record(model.save(ctx.path("autoencoder.npz")))
    frame = pd.DataFrame([e.model_dump() for e in report.epochs])
    ctx.record(write_table(frame, ctx.output_dir, "autoencoder_metrics"))
    logger.info(f"Autoencoder reconstruction accuracy {report.final_accuracy:.4f} "
                f"on {report.validation_size or report.train_size} held-out strings")
    return ctx


# --- train-classifier ---

def cmd_train_classifier(ctx: RunContext, autoencoder: Optional[str], train_file: Optional[str],
                         test_file: Optional[str]) -> RunContext:
    codec = _load_codec(autoencoder)
    train = _read_bags(train_file, "training dataset")
    test = _read_bags(test_file, "test dataset") if test_file else None
    rows, accuracy_rows = [], []
    for seed in ctx.config.runtime.seeds:
        config = ctx.config.classifier.model_copy(update={"seed": seed})
        model, report = train_classifier(train, codec, config, test)
        ctx.record(model.save(ctx.path("classifiers", f"classifier_{_seed_tag(seed)}.npz")))
        rows.extend(dict(e.model_dump(), seed=seed) for e in report.epochs)
        accuracy_rows.append({"model": "non-robust", "seed": seed,
                              "standard_accuracy": report.final_test_accuracy})
    ctx.record(write_table(pd.DataFrame(rows), ctx.output_dir, "classifier_metrics"))
    _write_accuracy_table(ctx, accuracy_rows)
    return ctx


def _accuracy_summary(frame: pd.DataFrame) -> Tuple[pd.DataFrame, str]:
    """Mean/std of standard accuracy per model, and its Model | Standard Accuracy text"""
    summary = frame.groupby("model", sort=False)["standard_accuracy"].agg(["mean", "std"]).reset_index()
    cells = [format_mean_std(m, s, percent=True) for m, s in zip(summary["mean"], summary["std"])]
    text = pd.DataFrame({"Model": summary["model"], "Standard Accuracy": cells}).to_string(index=False)
    return summary, text


def _write_accuracy_table(ctx: RunContext, rows: Sequence[dict]) -> None:
    frame = pd.DataFrame(rows)
    _, text = _accuracy_summary(frame)
    ctx.record(write_table(frame, ctx.output_dir, "standard_accuracy", text=text))


# --- adv-train ---

def cmd_adv_train(ctx: RunContext, autoencoder: Optional[str], train_file: Optional[str],
                  test_file: Optional[str], alphas: Optional[Sequence[float]] = None,
                  attacker: Optional[str] = None, sweep: bool = False) -> RunContext:
    adversarial = ctx.config.adversarial
    if adversarial.mode == "standard":
        raise ConfigError("adv-train needs adversarial.mode to be 'latent' or 'full'")
    codec = _load_codec(autoencoder)
    train = _read_bags(train_file, "training dataset")
    test = _read_bags(test_file, "test dataset") if test_file else None
    if sweep:
        alphas = adversarial.full_alphas if adversarial.mode == "full" else adversarial.latent_alphas
    alphas = list(alphas) if alphas else [adversarial.inner_attack.alpha]
    ctx.inputs["alpha"] = alphas

    attack_results: Optional[List[AttackResult]] = None
    if attacker:
        if not test:
            raise ConfigError("Robustness against an attacker needs --test")
        attacker_model = _load_classifier(attacker, codec)
        evaluation = _eval_subset(test, ctx.config)
        attack_results, _ = batch_attack(attacker_model, codec, evaluation, ctx.config.attack,
                                         threads=ctx.config.runtime.threads,
                                         latents=encode_bags(codec, evaluation))

    rows, table = [], []
    for alpha in alphas:
        mode = TrainMode.from_config(adversarial, alpha=alpha)
        for seed in ctx.config.runtime.seeds:
            config = ctx.config.classifier.model_copy(update={"seed": seed})
            model, report = train_robust(train, codec, mode, config, test, threads=ctx.config.runtime.threads)
            ctx.record(model.save(ctx.path("classifiers", f"{mode.label}_{_seed_tag(seed)}.npz")))
            rows.extend(dict(e.model_dump(), seed=seed, alpha=alpha) for e in report.epochs)
            row = {"mode": adversarial.mode, "alpha": alpha, "seed": seed,
                   "standard_accuracy": report.final_test_accuracy}
            if attack_results is not None:
                row["robustness"] = robustness_against(model, codec, attack_results).robustness
            table.append(row)
    ctx.record(write_table(pd.DataFrame(rows), ctx.output_dir, "adversarial_metrics"))

    frame = pd.DataFrame(table)
    columns = ["standard_accuracy"] + (["robustness"] if attack_results is not None else [])
    summary = aggregate_frames([g for _, g in frame.groupby("seed", sort=False)], key="alpha", columns=columns)
    text = pd.DataFrame({
        "Model": [f"{adversarial.mode.capitalize()} - alpha={a:g}" for a in summary["alpha"]],
        **{name.replace("_", " ").title(): [format_mean_std(m, s, percent=True)
                                            for m, s in zip(summary[name], summary[f"{name}_std"])]
           for name in columns},
    }).to_string(index=False)
    ctx.record(write_table(frame, ctx.output_dir, "tradeoff", text=text))
    if attacker:
        ctx.inputs["attacker"] = attacker
    return ctx


# --- attack ---

def resolve_grid(config: ExperimentConfig, grid: Optional[str]) -> List[AttackConfig]:
    if grid == "table":
        return table_grid()
    if grid:
        return [AttackConfig.parse(item) for item in grid.split(";") if item.strip()]
    return list(config.attack_grid) if config.attack_grid else [config.attack]


def cmd_attack(ctx: RunContext, autoencoder: Optional[str], classifiers: Sequence[str], dataset: Optional[str],
               grid: Optional[str] = None) -> RunContext:
    if not classifiers:
        raise CheckpointError("No classifier checkpoint given: pass --classifier (repeatable)")
    codec = _load_codec(autoencoder)
    models = {Path(p).stem: _load_classifier(p, codec) for p in classifiers}
    bags = _eval_subset(_read_bags(dataset, "evaluation dataset"), ctx.config)
    latents = encode_bags(codec, bags)
    methods = resolve_grid(ctx.config, grid)
    threads = ctx.config.runtime.threads

    run_frames, pooled_rlds, examples = [], {}, []
    for name, model in models.items():
        trace = AttackTraceLogger(str(ctx.output_dir / "traces" / name))
        summaries = []
        for method in methods:
            results, summary = batch_attack(model, codec, bags, method, threads=threads, trace=trace, latents=latents)
            ctx.record(trace.trace_file(method))
            summaries.append(summary)
            pooled_rlds.setdefault(method.slug, []).extend(summary.rlds)
            if not examples:
                examples = [r for r in results if r.success][:ctx.config.runtime.examples_limit]
        frame = summary_frame(summaries)
        frame.insert(0, "classifier", name)
        run_frames.append(frame)

    per_run = pd.concat(run_frames, ignore_index=True)
    ctx.record(write_table(per_run, ctx.output_dir, "attack_summary_runs"))
    table = aggregate_frames([f.drop(columns=["classifier", "pareto"]) for f in run_frames], key="method",
                             columns=["success_rate", "mean_rld", "successes", "failures", "already_misclassified",
                                      "empty_decodes"])
    table = mark_pareto(table)
    ctx.record(write_table(table, ctx.output_dir, "attack_summary", text=attack_table_text(table)))
    for method in methods:
        written = write_ecdf(ctx.path("ecdf", f"{method.slug}.csv"), pooled_rlds.get(method.slug, []))
        if written:
            ctx.record(written)
    examples_path = ctx.path("examples.txt")
    examples_path.write_text(render_examples(examples, limit=ctx.config.runtime.examples_limit), encoding="utf-8")
    ctx.record(examples_path)
    ctx.config = ctx.config.model_copy(update={"attack_grid": methods})
    return ctx


# --- cross-eval ---

def parse_model_list(items: Sequence[str]) -> Dict[str, str]:
    """`name=path` pairs; a bare path is named after its file stem"""
    models: Dict[str, str] = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).stem, item
        if name in models:
            raise ConfigError(f"Duplicate model name '{name}'")
        models[name] = path
    return models


def cmd_cross_eval(ctx: RunContext, autoencoder: Optional[str], model_items: Sequence[str],
                   dataset: Optional[str]) -> RunContext:
    paths = parse_model_list(model_items)
    if len(paths) < 2:
        raise ConfigError("cross-eval needs at least two models (--model name=path, repeatable)")
    codec = _load_codec(autoencoder)
    models = {name: _load_classifier(path, codec) for name, path in paths.items()}
    all_bags = _read_bags(dataset, "evaluation dataset")
    bags = _eval_subset(all_bags, ctx.config)

    robustness, support = cross_matrix(models, bags, codec, ctx.config.attack, threads=ctx.config.runtime.threads)
    text = robustness.apply(lambda column: column.map(lambda v: format_mean_std(v, percent=True))).to_string()
    ctx.record(write_table(robustness.reset_index(), ctx.output_dir, "robustness_matrix", text=text))
    ctx.record(write_table(support.reset_index(), ctx.output_dir, "robustness_support"))

    clean = LatentDataset.from_bags(codec, all_bags)
    rows = [{"model": name, "seed": model.config.seed, "standard_accuracy": accuracy(model, clean)}
            for name, model in models.items()]
    _write_accuracy_table(ctx, rows)
    ctx.inputs["models"] = paths
    return ctx


# --- report ---

def cmd_report(ctx: RunContext, run_dirs: Sequence[str]) -> RunContext:
    """Mean +/- std tables over several run directories"""
    if not run_dirs:
        raise ConfigError("report needs at least one run directory")
    produced = False
    attack = [pd.read_csv(Path(d) / "attack_summary.csv") for d in run_dirs
              if (Path(d) / "attack_summary.csv").exists()]
    if attack:
        frames = [f[["method", "success_rate", "mean_rld"]] for f in attack]
        table = mark_pareto(aggregate_frames(frames, key="method", columns=["success_rate", "mean_rld"]))
        ctx.record(write_table(table, ctx.output_dir, "attack_summary", text=attack_table_text(table)))
        produced = True
    accuracy_frames = [pd.read_csv(Path(d) / "standard_accuracy.csv") for d in run_dirs
                       if (Path(d) / "standard_accuracy.csv").exists()]
    if accuracy_frames:
        summary, text = _accuracy_summary(pd.concat(accuracy_frames, ignore_index=True))
        ctx.record(write_table(summary, ctx.output_dir, "standard_accuracy", text=text))
        produced = True
    matrices = [pd.read_csv(Path(d) / "robustness_matrix.csv", index_col="attacker") for d in run_dirs
                if (Path(d) / "robustness_matrix.csv").exists()]
    if matrices:
        stacked = pd.concat(matrices)
        mean = stacked.groupby(level=0, sort=False).mean()
        std = stacked.groupby(level=0, sort=False).std(ddof=1)
        text = pd.DataFrame({c: [format_mean_std(m, s, percent=True) for m, s in zip(mean[c], std[c])]
                             for c in mean.columns}, index=mean.index).to_string()
        ctx.record(write_table(mean.reset_index(), ctx.output_dir, "robustness_matrix", text=text))
        produced = True
    if not produced:
        raise DatasetError(f"No metric files found in {', '.join(run_dirs)}")
    ctx.inputs["runs"] = list(run_dirs)
    return ctx
