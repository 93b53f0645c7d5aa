"""
Method comparison: Pareto front over (success rate, mean RLD) and eCDF step points
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, field_validator


class MethodPoint(BaseModel):
    """One attack method in the rate/similarity plane"""

    method: str
    success_rate: float
    mean_rld: float
    success_rate_std: Optional[float] = None
    mean_rld_std: Optional[float] = None

    @field_validator("success_rate", "mean_rld")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("method point coordinates must be finite")
        return value


def dominates(a: MethodPoint, b: MethodPoint) -> bool:
    """a is at least as good on both axes and strictly better on one"""
    no_worse = a.success_rate >= b.success_rate and a.mean_rld <= b.mean_rld
    better = a.success_rate > b.success_rate or a.mean_rld < b.mean_rld
    return no_worse and better


def pareto_front(points: Sequence[MethodPoint]) -> List[MethodPoint]:
    """Non-dominated points (maximise success rate, minimise mean RLD), input order kept"""
    return [p for p in points if not any(dominates(q, p) for q in points)]


def ecdf(values: Sequence[float]) -> List[Tuple[float, float]]:
    """Step points (x, fraction of values <= x) at each distinct x"""
    data = np.sort(np.asarray(values, dtype=np.float64))
    if data.size == 0:
        raise ValueError("ecdf needs at least one value")
    xs, counts = np.unique(data, return_counts=True)
    cumulative = np.cumsum(counts) / data.size
    return [(float(x), float(f)) for x, f in zip(xs, cumulative)]
