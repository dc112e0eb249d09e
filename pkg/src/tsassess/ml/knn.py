"""Nearest-neighbour baseline for the time-class comparison table."""

from __future__ import annotations

from collections import Counter

import numpy as np


def knn_predict(x_train: np.ndarray, y_train, x_test: np.ndarray, k: int = 1) -> list[str]:
    """Majority label among the k closest training rows (earliest row wins distance ties,
    the label of the nearest member wins vote ties)."""
    x_train = np.asarray(x_train, dtype=float)
    x_test = np.atleast_2d(np.asarray(x_test, dtype=float))
    y = [str(v) for v in y_train]
    d = ((x_test[:, None, :] - x_train[None, :, :]) ** 2).sum(axis=2)
    k = min(k, len(y))
    out = []
    for row in d:
        near = np.argsort(row, kind="stable")[:k]
        counts = Counter(y[i] for i in near)
        top = max(counts.values())
        out.append(next(y[i] for i in near if counts[y[i]] == top))
    return out


def knn_trainer(k: int = 1):
    def fit(xt, yt):
        return lambda xs: knn_predict(xt, yt, xs, k)
    return fit
