"""Least-squares fit of a power law on log-log axes."""

from typing import Iterable, Tuple

import numpy as np

from utils.errors import DegenerateGrid


def fit_loglog_slope(points: Iterable[Tuple[float, float]]) -> Tuple[float, float]:
    """
    Ordinary least squares of log(y) on log(x).

    Args:
        points: (x, y) pairs with x, y > 0

    Returns:
        (slope, intercept)

    Raises:
        DegenerateGrid: with fewer than two distinct x values
    """
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise DegenerateGrid("need at least two (x, y) points")
    if np.any(pts <= 0.0):
        raise ValueError("log-log fit needs strictly positive coordinates")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    centered = lx - lx.mean()
    sxx = float(np.dot(centered, centered))
    if len(np.unique(pts[:, 0])) < 2 or sxx == 0.0:
        raise DegenerateGrid("all x values coincide; slope is undefined")
    slope = float(np.dot(centered, ly - ly.mean()) / sxx)
    return slope, float(ly.mean() - slope * lx.mean())
