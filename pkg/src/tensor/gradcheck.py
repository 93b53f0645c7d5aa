"""
Central finite-difference check of analytic gradients
"""

from typing import Callable, Optional

import numpy as np

from .tensor import Tensor, grad


def finite_difference_check(parameter: Tensor, loss_closure: Callable[[], Tensor], step: float = 1e-5,
                            max_samples: Optional[int] = 64,
                            rng: Optional[np.random.Generator] = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    `loss_closure` must rebuild the forward pass from `parameter.data` on each
    call and return a scalar Tensor. Relative error per coordinate is
    |a - n| / max(|a|, |n|, 1e-8), so zero-vs-zero scores 0.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    analytic = grad(loss_closure(), [parameter])[0]

    flat_count = parameter.data.size
    coords = np.arange(flat_count)
    if max_samples is not None and flat_count > max_samples:
        rng = rng or np.random.default_rng(0)
        coords = rng.choice(flat_count, size=max_samples, replace=False)

    worst = 0.0
    for flat in coords:
        idx = np.unravel_index(int(flat), parameter.data.shape)
        original = parameter.data[idx]
        parameter.data[idx] = original + step
        plus = float(loss_closure().data)
        parameter.data[idx] = original - step
        minus = float(loss_closure().data)
        parameter.data[idx] = original
        numeric = (plus - minus) / (2.0 * step)
        a = float(analytic[idx])
        denom = max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, abs(a - numeric) / denom)
    return worst
