"""Stratified k-fold cross-validation and exhaustive grid search."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .svm import SvmParams, median_distance, train_svm_ovo

log = logging.getLogger(__name__)

DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)
DEFAULT_SCALE_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)


class KTooLarge(ConfigError):
    pass


def stratified_folds(labels: Sequence, k: int, seed: int) -> np.ndarray:
    """Fold index per row: rows are shuffled by ``seed``, then dealt round-robin class by class.

    The dealing position carries over from one class to the next so fold
    sizes stay within one of each other.
    """
    n = len(labels)
    if k < 2:
        raise ConfigError("k must be at least 2")
    if k > n:
        raise KTooLarge(f"k = {k} exceeds the {n} available rows")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    lab = [str(labels[i]) for i in order]
    folds = np.empty(n, dtype=int)
    pos = 0
    for cls in sorted(set(lab)):
        for r in (order[t] for t in range(n) if lab[t] == cls):
            folds[r] = pos % k
            pos += 1
    return folds


@dataclass(frozen=True)
class CvResult:
    fold_accuracies: tuple[float, ...]
    folds: tuple[int, ...]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))


Trainer = Callable[[np.ndarray, list], Callable[[np.ndarray], list]]


def cross_validate(x: np.ndarray, labels: Sequence, k: int, seed: int, trainer: Trainer) -> CvResult:
    """``trainer(x_train, y_train)`` returns a predictor mapping rows to labels."""
    labels = [str(v) for v in labels]
    folds = stratified_folds(labels, k, seed)
    accs = []
    for f in range(k):
        test = folds == f
        train = ~test
        predict = trainer(x[train], [labels[i] for i in np.flatnonzero(train)])
        pred = predict(x[test])
        truth = [labels[i] for i in np.flatnonzero(test)]
        accs.append(float(np.mean([p == t for p, t in zip(pred, truth)])))
    return CvResult(tuple(accs), tuple(int(v) for v in folds))


def svm_trainer(params: SvmParams, base_scale: float) -> Trainer:
    """Trainer with a fixed kernel base scale.

    A single-class training fold yields a constant predictor.
    """
    def fit(xt, yt):
        if len(set(yt)) < 2:
            only = yt[0]
            return lambda xs: [only] * len(xs)
        model = train_svm_ovo(xt, yt, params, base_scale=base_scale)
        return lambda xs: model.predict_many(xs)[0]
    return fit


@dataclass(frozen=True)
class GridPoint:
    c: float
    scale_multiplier: float
    cv_accuracy: float


@dataclass(frozen=True)
class GridResult:
    best: SvmParams
    best_accuracy: float
    points: tuple[GridPoint, ...]
    base_scale: float


def _evaluate(args):
    x, labels, k, seed, params, base = args
    return cross_validate(x, labels, k, seed, svm_trainer(params, base)).mean_accuracy


def grid_search(x: np.ndarray, labels: Sequence, k: int = 20, seed: int = 0,
                c_grid: Sequence[float] = DEFAULT_C_GRID, scale_grid: Sequence[float] = DEFAULT_SCALE_GRID,
                class_costs: tuple = (), tol: float = 1e-3, max_iter: int = 100_000,
                jobs: int = 1) -> GridResult:
    """Cross-validate every (C, scale multiplier) pair and keep the most accurate.

    Ties go to the smaller C, then the smaller multiplier. The kernel base
    scale is the median pairwise distance of all rows, fixed across folds.
    """
    if not c_grid or not scale_grid:
        raise ConfigError("grids must be non-empty")
    x = np.asarray(x, dtype=float)
    labels = [str(v) for v in labels]
    base = median_distance(x)
    grid = sorted(itertools.product(sorted(c_grid), sorted(scale_grid)))
    tasks = [(x, labels, k, seed, SvmParams(c, s, tuple(class_costs), tol, max_iter), base) for c, s in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            accs = list(ex.map(_evaluate, tasks))
    else:
        accs = [_evaluate(t) for t in tasks]
    points = tuple(GridPoint(c, s, a) for (c, s), a in zip(grid, accs))
    best_i = max(range(len(points)), key=lambda i: (points[i].cv_accuracy, -i))
    bp = points[best_i]
    log.info("grid search best C=%g scale x%g accuracy %.4f", bp.c, bp.scale_multiplier, bp.cv_accuracy)
    return GridResult(SvmParams(bp.c, bp.scale_multiplier, tuple(class_costs), tol, max_iter),
                      bp.cv_accuracy, points, base)
