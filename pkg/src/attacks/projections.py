"""
Projections of a k x d perturbation back onto the allowed set
"""

import numpy as np

from .config import Projection


def project_linf(delta: np.ndarray, epsilon: float) -> np.ndarray:
    return np.clip(delta, -epsilon, epsilon)


def project_l2(delta: np.ndarray, epsilon: float) -> np.ndarray:
    """Rescale each instance row whose L2 norm exceeds epsilon"""
    delta = np.asarray(delta, dtype=np.float64)
    norms = np.linalg.norm(delta, axis=-1, keepdims=True)
    scale = np.where(norms > epsilon, epsilon / np.maximum(norms, 1e-300), 1.0)
    return delta * scale


def project(delta: np.ndarray, epsilon: float, projection: Projection) -> np.ndarray:
    if projection == Projection.LINF:
        return project_linf(delta, epsilon)
    if projection == Projection.L2:
        return project_l2(delta, epsilon)
    return delta


def radius(delta: np.ndarray, projection: Projection) -> float:
    """Size of a perturbation in the geometry of its projection"""
    if projection == Projection.LINF:
        return float(np.max(np.abs(delta))) if delta.size else 0.0
    return float(np.max(np.linalg.norm(delta, axis=-1))) if delta.size else 0.0
