"""Quality indicators for Pareto front approximations."""

from typing import Sequence

import numpy as np
from pymoo.indicators.hv import HV


def pareto_mask(points: np.ndarray) -> np.ndarray:
    """True for the rows of ``points`` no other row dominates (minimization)."""
    points = np.asarray(points, dtype=float)
    mask = np.ones(len(points), dtype=bool)
    for i, p in enumerate(points):
        no_worse = np.all(points <= p, axis=1)
        better = np.any(points < p, axis=1)
        if np.any(no_worse & better):
            mask[i] = False
    return mask


def hypervolume(points: np.ndarray, ref_point: Sequence[float]) -> float:
    """Objective-space volume dominated by ``points`` and bounded by ``ref_point``."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return 0.0
    if points.ndim != 2:
        raise ValueError(f"points must be a 2-D array, got shape {points.shape}")
    ref = np.asarray(ref_point, dtype=float)
    inside = points[np.all(points < ref, axis=1)]
    if len(inside) == 0:
        return 0.0
    return float(HV(ref_point=ref)(inside))


def pareto_front(points: np.ndarray) -> np.ndarray:
    """Non-dominated rows of ``points``, duplicates removed, sorted by the first objective."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return points.reshape(0, points.shape[-1] if points.ndim == 2 else 0)
    front = np.unique(points[pareto_mask(points)], axis=0)
    return front[np.lexsort(front.T[::-1])]
