"""Quadratic-kernel support vector machines, SMO-trained, combined one-vs-one."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from ..errors import NonFinite, SingleClass
from .mlp import DimensionMismatch

log = logging.getLogger(__name__)

_TAU = 1e-12


def poly_kernel(x: np.ndarray, z: np.ndarray, scale: float) -> np.ndarray:
    """K(x, z) = (1 + x.z / s)^2 for every row pair."""
    return (1.0 + (np.atleast_2d(x) @ np.atleast_2d(z).T) / scale) ** 2


def median_distance(x: np.ndarray) -> float:
    """Median pairwise Euclidean distance, falling back to 1 for degenerate sets."""
    if len(x) < 2:
        return 1.0
    m = float(np.median(pdist(x)))
    return m if m > 0 else 1.0


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    iterations: int
    kkt_gap: float
    converged: bool
    dual_history: list[float] = field(default_factory=list)


def smo(k: np.ndarray, y: np.ndarray, c: np.ndarray, tol: float = 1e-3, max_iter: int = 100_000,
        record: bool = False) -> SmoResult:
    """Solve the soft-margin dual with per-sample box bounds ``c``.

    Working pairs are picked by maximal violation for the first index and
    second-order gain for the second. ``kkt_gap`` is the final
    max-violating-pair gap m(a) - M(a); convergence means it is below ``tol``.
    With ``record`` the dual objective after every step is kept.
    """
    n = len(y)
    y = np.asarray(y, dtype=float)
    q = (y[:, None] * y[None, :]) * k
    qd = np.diag(q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a
    history = [0.0] if record else []
    gap = np.inf
    it = 0
    while it < max_iter:
        yg = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        m_up = yg[i]
        m_low = float(np.min(yg[low]))
        gap = m_up - m_low
        if gap < tol:
            break
        cand = low & (yg < m_up)
        b = m_up - yg[cand]
        a = qd[i] + qd[cand] - 2.0 * y[i] * y[cand] * q[i, cand]
        a = np.where(a > 0, a, _TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(b * b) / a)])

        ai, aj = alpha[i], alpha[j]
        ci, cj = c[i], c[j]
        if y[i] != y[j]:
            quad = max(qd[i] + qd[j] + 2.0 * q[i, j], _TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > ci - cj:
                if ni > ci:
                    ni, nj = ci, ci - diff
            elif nj > cj:
                nj, ni = cj, cj + diff
        else:
            quad = max(qd[i] + qd[j] - 2.0 * q[i, j], _TAU)
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > ci:
                if ni > ci:
                    ni, nj = ci, total - ci
            elif nj < 0:
                nj, ni = 0.0, total
            if total > cj:
                if nj > cj:
                    nj, ni = cj, total - cj
            elif ni < 0:
                ni, nj = 0.0, total
        grad += q[:, i] * (ni - ai) + q[:, j] * (nj - aj)
        alpha[i], alpha[j] = ni, nj
        it += 1
        if record:
            history.append(float(alpha.sum() - 0.5 * (alpha @ (grad + 1.0))))
    converged = gap < tol
    return SmoResult(alpha, _bias(alpha, grad, y, c), it, float(gap), bool(converged), history)


def _bias(alpha, grad, y, c) -> float:
    yg = -y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        return float(np.mean(yg[free]))
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
    hi = yg[up].max() if up.any() else 0.0
    lo = yg[low].min() if low.any() else 0.0
    return float(0.5 * (hi + lo))


@dataclass
class SvmBinaryModel:
    """Decision f(x) > 0 selects ``positive``."""
    positive: str
    negative: str
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha * y
    bias: float
    scale: float
    c: float
    class_costs: dict[str, float]
    converged: bool = True
    kkt_gap: float = 0.0

    def decision(self, xs: np.ndarray) -> np.ndarray:
        if len(self.dual_coef) == 0:
            return np.full(np.atleast_2d(xs).shape[0], self.bias)
        return poly_kernel(xs, self.support_vectors, self.scale) @ self.dual_coef + self.bias


def train_binary(x, is_positive, c, scale, positive="+", negative="-", costs=None, tol=1e-3,
                 max_iter=100_000) -> SvmBinaryModel:
    costs = costs or {}
    y = np.where(is_positive, 1.0, -1.0)
    box = c * np.where(is_positive, costs.get(positive, 1.0), costs.get(negative, 1.0))
    res = smo(poly_kernel(x, x, scale), y, box, tol=tol, max_iter=max_iter)
    if not res.converged:
        log.warning("SMO hit the iteration cap (%s vs %s, gap %.3g)", positive, negative, res.kkt_gap)
    sv = res.alpha > 0
    return SvmBinaryModel(positive, negative, x[sv].copy(), (res.alpha * y)[sv], res.bias, scale, c,
                          {positive: costs.get(positive, 1.0), negative: costs.get(negative, 1.0)},
                          res.converged, res.kkt_gap)


@dataclass(frozen=True)
class SvmParams:
    c: float = 1.0
    scale_multiplier: float = 1.0
    class_costs: tuple[tuple[str, float], ...] = ()
    tol: float = 1e-3
    max_iter: int = 100_000


@dataclass
class SvmMulticlassModel:
    vocabulary: list[str]
    machines: dict[tuple[str, str], SvmBinaryModel]
    scale: float
    params: SvmParams
    standardizer: object = None
    warnings: list[str] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        for m in self.machines.values():
            return m.support_vectors.shape[1] if m.support_vectors.size else -1
        return -1

    def predict_many(self, xs: np.ndarray) -> tuple[list[str], np.ndarray]:
        """Labels and vote matrix (rows x vocabulary) for standardized rows."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        nf = self.n_features
        if nf >= 0 and xs.shape[1] != nf:
            raise DimensionMismatch(f"model expects {nf} features, got {xs.shape[1]}")
        pos = {lab: i for i, lab in enumerate(self.vocabulary)}
        votes = np.zeros((len(xs), len(self.vocabulary)), dtype=int)
        strength = np.zeros((len(xs), len(self.vocabulary)))
        for (a, b), m in self.machines.items():
            f = m.decision(xs)
            win_a = f > 0
            votes[win_a, pos[a]] += 1
            votes[~win_a, pos[b]] += 1
            strength[win_a, pos[a]] += np.abs(f[win_a])
            strength[~win_a, pos[b]] += np.abs(f[~win_a])
        labels = []
        for r in range(len(xs)):
            top = np.flatnonzero(votes[r] == votes[r].max())
            if len(top) > 1:
                s = strength[r, top]
                top = top[s == s.max()]
            labels.append(self.vocabulary[int(top[0])])
        return labels, votes


def train_svm_ovo(x: np.ndarray, labels, params: SvmParams | None = None, standardizer=None,
                  base_scale: float | None = None) -> SvmMulticlassModel:
    """One machine per label pair on standardized rows; vocabulary kept in sorted order.

    ``base_scale`` defaults to the median pairwise distance of ``x``.
    """
    from ..features import label_sort_key

    params = params or SvmParams()
    x = np.asarray(x, dtype=float)
    labels = list(labels)
    if not np.all(np.isfinite(x)):
        raise NonFinite("training rows must be finite")
    vocab = sorted(set(labels), key=label_sort_key)
    if len(vocab) < 2:
        raise SingleClass("need at least two classes")
    base = median_distance(x) if base_scale is None else base_scale
    scale = base * params.scale_multiplier
    costs = dict(params.class_costs)
    lab_arr = np.array(labels, dtype=object)
    machines = {}
    warnings = []
    for a, b in itertools.combinations(vocab, 2):
        rows = (lab_arr == a) | (lab_arr == b)
        m = train_binary(x[rows], lab_arr[rows] == a, params.c, scale, a, b, costs, params.tol, params.max_iter)
        if not m.converged:
            warnings.append(f"no convergence for pair {a}/{b}")
        machines[(a, b)] = m
    return SvmMulticlassModel(vocab, machines, scale, params, standardizer, warnings)


def predict_svm(model: SvmMulticlassModel, x, standardizer=None) -> tuple[str, dict[str, int]]:
    """Voted label and per-label vote counts for one raw feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("predict_svm takes a single feature vector")
    if not np.all(np.isfinite(x)):
        raise NonFinite("input features must be finite")
    std = standardizer if standardizer is not None else model.standardizer
    xs = std.transform(x) if std is not None else x
    labels, votes = model.predict_many(xs[None, :])
    return labels[0], {lab: int(v) for lab, v in zip(model.vocabulary, votes[0])}
