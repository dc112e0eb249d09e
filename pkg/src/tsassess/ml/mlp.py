"""One-hidden-layer binary classifier trained by scaled conjugate gradient."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import LengthMismatch, NonFinite, SingleClass

log = logging.getLogger(__name__)


class DimensionMismatch(LengthMismatch):
    pass


@dataclass(frozen=True)
class MlpConfig:
    hidden: int = 10
    max_epochs: int = 3000
    loss_tol: float = 1e-6
    optimizer: str = "scg"  # or "gd"
    init_range: float = 0.5


@dataclass
class MlpModel:
    w1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray
    w2: np.ndarray  # (hidden,)
    b2: float
    meta: dict = field(default_factory=dict)

    @property
    def layer_sizes(self) -> tuple[int, int, int]:
        return (self.w1.shape[1], self.w1.shape[0], 1)

    def score(self, xs: np.ndarray) -> np.ndarray:
        """Network output in (0, 1) for standardized inputs."""
        xs = np.atleast_2d(xs)
        if xs.shape[1] != self.w1.shape[1]:
            raise DimensionMismatch(f"model expects {self.w1.shape[1]} features, got {xs.shape[1]}")
        z = np.tanh(xs @ self.w1.T + self.b1) @ self.w2 + self.b2
        return _sigmoid(z)


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def _unpack(theta, n_in, n_hid):
    a = n_hid * n_in
    w1 = theta[:a].reshape(n_hid, n_in)
    b1 = theta[a:a + n_hid]
    w2 = theta[a + n_hid:a + 2 * n_hid]
    return w1, b1, w2, theta[-1]


def loss_and_grad(theta, x, y, n_hid):
    """Mean cross-entropy of the logistic output and its gradient."""
    n, n_in = x.shape
    w1, b1, w2, b2 = _unpack(theta, n_in, n_hid)
    h = np.tanh(x @ w1.T + b1)
    z = h @ w2 + b2
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    dz = (_sigmoid(z) - y) / n
    dh = np.outer(dz, w2) * (1.0 - h * h)
    grad = np.concatenate([(dh.T @ x).ravel(), dh.sum(axis=0), h.T @ dz, [dz.sum()]])
    return loss, grad


def scg(fun, theta, max_iter, loss_tol, sigma0=1e-4, lambda0=1e-6):
    """Møller's scaled conjugate gradient.

    ``fun(theta) -> (loss, grad)``. Steps are taken only when the comparison
    ratio is non-negative, so the accepted loss sequence never increases.
    Returns (theta, loss history, accepted steps).
    """
    n = theta.size
    f, g = fun(theta)
    r = -g
    p = r.copy()
    lam, lam_bar = lambda0, 0.0
    success = True
    history = [f]
    k = 0
    for it in range(max_iter):
        if f < loss_tol:
            break
        p2 = float(p @ p)
        if p2 < 1e-300:
            break
        if success:
            sigma = sigma0 / np.sqrt(p2)
            _, g_s = fun(theta + sigma * p)
            s = (g_s + r) / sigma  # r = -grad
            delta = float(p @ s)
        delta += (lam - lam_bar) * p2
        if delta <= 0:
            lam_bar = 2.0 * (lam - delta / p2)
            delta = -delta + lam * p2
            lam = lam_bar
        mu = float(p @ r)
        alpha = mu / delta
        trial = theta + alpha * p
        f_new, g_new = fun(trial)
        if not np.isfinite(f_new):
            raise NonFinite(f"loss became non-finite at iteration {it}")
        cmp = 2.0 * delta * (f - f_new) / (mu * mu) if mu != 0 else -1.0
        if cmp >= 0:
            theta, f = trial, f_new
            r_new = -g_new
            lam_bar = 0.0
            success = True
            k += 1
            if k % n == 0:
                p = r_new
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p = r_new + beta * p
            r = r_new
            history.append(f)
            if cmp >= 0.75:
                lam *= 0.25
        else:
            lam_bar = lam
            success = False
        if cmp < 0.25:
            lam += delta * (1.0 - cmp) / p2
        if lam > 1e100 or float(r @ r) < 1e-30:
            break
    return theta, history, k


def gradient_descent(fun, theta, max_iter, loss_tol, step0=1.0):
    """Full-batch steepest descent with Armijo backtracking."""
    f, g = fun(theta)
    history = [f]
    step = step0
    for _ in range(max_iter):
        if f < loss_tol or float(g @ g) < 1e-30:
            break
        while True:
            trial = theta - step * g
            f_new, g_new = fun(trial)
            if np.isfinite(f_new) and f_new <= f - 1e-4 * step * float(g @ g):
                break
            step *= 0.5
            if step < 1e-12:
                return theta, history, len(history) - 1
        theta, f, g = trial, f_new, g_new
        history.append(f)
        step *= 2.0
    return theta, history, len(history) - 1


def init_params(n_in, n_hid, rng, init_range=0.5):
    size = n_hid * n_in + 2 * n_hid + 1
    return rng.uniform(-init_range, init_range, size=size)


def train_mlp(xs: np.ndarray, stable: np.ndarray, cfg: MlpConfig | None = None, seed: int = 0) -> MlpModel:
    """Fit the classifier on standardized rows; target 1 means stable."""
    cfg = cfg or MlpConfig()
    xs = np.asarray(xs, dtype=float)
    y = np.asarray(stable, dtype=float)
    if xs.shape[0] < 2:
        raise SingleClass("need at least two rows")
    if np.all(y == y[0]):
        raise SingleClass("training data holds a single class")
    n_in = xs.shape[1]
    rng = np.random.default_rng(seed)
    theta0 = init_params(n_in, cfg.hidden, rng, cfg.init_range)

    def fun(t):
        return loss_and_grad(t, xs, y, cfg.hidden)

    if cfg.optimizer == "scg":
        theta, hist, steps = scg(fun, theta0, cfg.max_epochs, cfg.loss_tol)
    elif cfg.optimizer == "gd":
        theta, hist, steps = gradient_descent(fun, theta0, cfg.max_epochs, cfg.loss_tol)
    else:
        raise ValueError(f"unknown optimizer {cfg.optimizer!r}")
    if not np.all(np.isfinite(theta)):
        raise NonFinite("weights became non-finite")
    w1, b1, w2, b2 = _unpack(theta, n_in, cfg.hidden)
    log.debug("mlp trained: %d accepted steps, loss %.3e", steps, hist[-1])
    meta = {"seed": seed, "epochs": steps, "final_loss": hist[-1], "optimizer": cfg.optimizer,
            "loss_history": hist}
    return MlpModel(w1.copy(), b1.copy(), w2.copy(), float(b2), meta)


def predict_mlp(model: MlpModel, x, standardizer=None) -> tuple[bool, float, float]:
    """(stable, score, confidence) for one raw feature vector.

    Confidence is twice the distance of the score from the 0.5 decision point.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("predict_mlp takes a single feature vector")
    if not np.all(np.isfinite(x)):
        raise NonFinite("input features must be finite")
    xs = standardizer.transform(x) if standardizer is not None else x
    score = float(model.score(xs)[0])
    return score >= 0.5, score, 2.0 * abs(score - 0.5)
