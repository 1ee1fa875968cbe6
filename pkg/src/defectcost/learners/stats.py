"""Spearman rank correlation with average-rank ties and pairwise NaN handling."""

from __future__ import annotations

import numpy as np

from ..extmath import UNDEFINED
from ..metrics import average_ranks


def spearman(x, y) -> float:
    """Pearson correlation of mid-ranks; undefined-marker entries are dropped
    pairwise and fewer than two surviving pairs yield the undefined marker."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("inputs must have the same length")
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    if len(x) < 2:
        return UNDEFINED
    rx = average_ranks(x)
    ry = average_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    den = np.sqrt(np.sum(rx * rx) * np.sum(ry * ry))
    if den == 0:
        return UNDEFINED
    return float(np.sum(rx * ry) / den)


def spearman_matrix(columns: np.ndarray) -> np.ndarray:
    """Pairwise Spearman matrix over the columns of a (n, k) array."""
    columns = np.asarray(columns, dtype=np.float64)
    k = columns.shape[1]
    out = np.full((k, k), UNDEFINED)
    for i in range(k):
        out[i, i] = 1.0
        for j in range(i + 1, k):
            rho = spearman(columns[:, i], columns[:, j])
            out[i, j] = rho
            out[j, i] = rho
    return out
