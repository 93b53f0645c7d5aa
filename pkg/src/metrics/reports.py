"""
Tabular reports built with pandas: attack summaries, accuracy tables and
mean +/- std aggregation across runs
"""

from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from ..attacks.config import AttackResult, AttackSummary
from .frontier import MethodPoint, ecdf, pareto_front
from .strings import render_diff

FLOAT_FORMAT = "%.6f"


def summary_frame(summaries: Sequence[AttackSummary]) -> pd.DataFrame:
    """One row per attack method, Pareto-optimal rows flagged"""
    columns = ["method", "success_rate", "mean_rld", "successes", "failures", "already_misclassified",
               "empty_decodes"]
    frame = pd.DataFrame([[s.method, s.success_rate, s.mean_rld, s.successes, s.failures,
                           s.already_misclassified, s.empty_decodes] for s in summaries], columns=columns)
    frame["success_rate"] = frame["success_rate"].astype(float)
    frame["mean_rld"] = frame["mean_rld"].astype(float)
    return mark_pareto(frame)


def mark_pareto(frame: pd.DataFrame) -> pd.DataFrame:
    front = {p.method for p in pareto_front(method_points(frame))}
    frame["pareto"] = frame["method"].isin(front)
    return frame


def method_points(frame: pd.DataFrame) -> List[MethodPoint]:
    """Rows with a defined rate and RLD as points in the rate/similarity plane"""
    points = []
    for row in frame.itertuples(index=False):
        if pd.isna(row.success_rate) or pd.isna(row.mean_rld):
            continue
        rate_std = getattr(row, "success_rate_std", None)
        rld_std = getattr(row, "mean_rld_std", None)
        points.append(MethodPoint(method=row.method, success_rate=float(row.success_rate),
                                  mean_rld=float(row.mean_rld),
                                  success_rate_std=None if rate_std is None or pd.isna(rate_std) else float(rate_std),
                                  mean_rld_std=None if rld_std is None or pd.isna(rld_std) else float(rld_std)))
    return points


def format_mean_std(mean: Optional[float], std: Optional[float] = None, percent: bool = False) -> str:
    if mean is None or pd.isna(mean):
        return "n/a"
    scale, unit, digits = (100.0, "%", 2) if percent else (1.0, "", 3)
    text = f"{mean * scale:.{digits}f}{unit}"
    if std is not None and not pd.isna(std):
        text += f" ± {std * scale:.{digits}f}{unit}"
    return text


def attack_table_text(frame: pd.DataFrame) -> str:
    """Method | Attack Success Rate | Average RLD | Pareto"""
    has_std = "success_rate_std" in frame.columns
    no_std = [None] * len(frame)
    rate_std = frame["success_rate_std"] if has_std else no_std
    rld_std = frame["mean_rld_std"] if has_std else no_std
    view = pd.DataFrame({
        "Method": frame["method"],
        "Attack Success Rate": [format_mean_std(r, s, percent=True) for r, s in zip(frame["success_rate"], rate_std)],
        "Average RLD": [format_mean_std(r, s) for r, s in zip(frame["mean_rld"], rld_std)],
        "Pareto": ["*" if flag else "" for flag in frame["pareto"]],
    })
    return view.to_string(index=False)


def write_table(frame: pd.DataFrame, directory, stem: str, text: Optional[str] = None) -> Path:
    """Write <stem>.csv and a human-readable <stem>.txt"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frame.to_csv(directory / f"{stem}.csv", index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    (directory / f"{stem}.txt").write_text((text if text is not None else frame.to_string(index=False)) + "\n",
                                           encoding="utf-8")
    logger.info(f"Wrote {directory / stem}.csv")
    return directory / f"{stem}.csv"


def write_ecdf(path, values: Sequence[float]) -> Optional[Path]:
    if not len(values):
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(ecdf(values), columns=["rld", "F"]).to_csv(path, index=False, float_format=FLOAT_FORMAT,
                                                           lineterminator="\n")
    return path


def render_examples(results: Iterable[AttackResult], limit: int = 10) -> str:
    """Original vs adversarial bags with changed spans in brackets"""
    blocks = []
    for result in results:
        if not result.success:
            continue
        lines = [f"label={result.true_label} iterations={result.iterations_used} epsilon={result.epsilon_used:g}"]
        for i, original in enumerate(result.original_paths):
            adversarial = result.adversarial_paths[i] if i < len(result.adversarial_paths) else ""
            marked_original, marked_adversarial = render_diff(original, adversarial)
            lines.append(f"  original:    {marked_original}")
            lines.append(f"  adversarial: {marked_adversarial if adversarial else '(empty decode)'}")
        blocks.append("\n".join(lines))
        if len(blocks) >= limit:
            break
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def aggregate_frames(frames: Sequence[pd.DataFrame], key: str, columns: Sequence[str]) -> pd.DataFrame:
    """Mean and sample std of `columns` per `key` across runs (std only with 2+ runs)"""
    stacked = pd.concat(frames, ignore_index=True)
    grouped = stacked.groupby(key, sort=False)[list(columns)]
    means = grouped.mean()
    stds = grouped.std(ddof=1) if len(frames) > 1 else means * np.nan
    out = means.copy()
    for column in columns:
        out[f"{column}_std"] = stds[column]
    out["runs"] = grouped.size()
    return out.reset_index()
