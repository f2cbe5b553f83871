"""The three agreement criteria: PLCC, SRCC and RMSE.

Kept dependency-free (numpy only) so the evaluation protocol does not
drift with library defaults; tests cross-check the implementations against
brute-force definitions and scipy.
"""

from __future__ import annotations

import numpy as np

from .exceptions import LengthMismatch, ZeroVariance


def _as_pair(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"length mismatch: {x.size} vs {y.size}")
    return x, y


def plcc(xs, ys) -> float:
    """Pearson linear correlation coefficient."""
    x, y = _as_pair(xs, ys)
    if x.size < 2:
        raise ZeroVariance("need at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.dot(dx, dx))
    sy = np.sqrt(np.dot(dy, dy))
    if sx == 0 or sy == 0:
        raise ZeroVariance("constant input has no linear correlation")
    return float(np.dot(dx, dy) / (sx * sy))


def average_ranks(values) -> np.ndarray:
    """Ranks 1..n with ties assigned the mean of their positions."""
    v = np.asarray(values, dtype=float).ravel()
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=float)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def srcc(xs, ys) -> float:
    """Spearman rank-order correlation (average ranks for ties)."""
    x, y = _as_pair(xs, ys)
    return plcc(average_ranks(x), average_ranks(y))


def rmse(predicted, observed) -> float:
    """Root mean square error between two equal-length vectors."""
    p, o = _as_pair(predicted, observed)
    if p.size == 0:
        raise LengthMismatch("need at least one point")
    d = p - o
    return float(np.sqrt(np.dot(d, d) / d.size))
