import numpy as np
import pytest

from tsassess.errors import NonFinite, SingleClass
from tsassess.ml.mlp import (
    DimensionMismatch, MlpConfig, MlpModel, gradient_descent, init_params, loss_and_grad, predict_mlp, scg,
    train_mlp,
)


def _separable(n=20, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    y = x[:, 0] + 0.5 * x[:, 1] > 0
    return x, y


def _accuracy(model, x, y):
    return float(np.mean((model.score(x) >= 0.5) == y))


def test_separable_toy_set():
    x, y = _separable()
    model = train_mlp(x, y, seed=1)
    assert _accuracy(model, x, y) == 1.0
    assert model.layer_sizes == (2, 10, 1)


def test_xor():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([False, True, True, False])
    model = train_mlp(x, y, MlpConfig(hidden=10), seed=3)
    assert _accuracy(model, x, y) == 1.0


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n_in, n_hid, n = int(rng.integers(1, 6)), int(rng.integers(1, 8)), int(rng.integers(3, 15))
    x = rng.normal(size=(n, n_in))
    y = (rng.random(n) > 0.5).astype(float)
    theta = rng.uniform(-1, 1, n_hid * n_in + 2 * n_hid + 1)
    _, g = loss_and_grad(theta, x, y, n_hid)
    h = 1e-5
    fd = np.empty_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        fd[i] = (loss_and_grad(theta + e, x, y, n_hid)[0] - loss_and_grad(theta - e, x, y, n_hid)[0]) / (2 * h)
    assert np.linalg.norm(g - fd) / max(np.linalg.norm(g), np.linalg.norm(fd)) < 1e-5


@pytest.mark.parametrize("optimizer", ["scg", "gd"])
def test_loss_history_non_increasing(optimizer):
    x, y = _separable(40, seed=5)
    y[:3] = ~y[:3]  # not separable, so training runs to the epoch cap
    model = train_mlp(x, y, MlpConfig(max_epochs=300, optimizer=optimizer), seed=2)
    hist = np.array(model.meta["loss_history"])
    assert np.all(np.diff(hist) <= 1e-12)
    assert hist[-1] < hist[0]


def test_optimizers_on_quadratic():
    a = np.diag([1.0, 10.0, 100.0])

    def fun(t):
        return 0.5 * float(t @ a @ t), a @ t

    for opt in (scg, gradient_descent):
        theta, hist, _ = opt(fun, np.ones(3), 2000, 1e-12)
        assert hist[-1] < 1e-10
        assert np.all(np.diff(hist) <= 1e-12)


def test_deterministic_given_seed():
    x, y = _separable()
    a, b = train_mlp(x, y, seed=7), train_mlp(x, y, seed=7)
    assert np.array_equal(a.w1, b.w1) and a.b2 == b.b2


def test_init_range():
    theta = init_params(17, 10, np.random.default_rng(0))
    assert theta.shape == (17 * 10 + 21,) and np.all(np.abs(theta) <= 0.5)


def test_single_class_rejected():
    x, _ = _separable()
    with pytest.raises(SingleClass):
        train_mlp(x, np.ones(len(x), dtype=bool))


def _fixed_model(b2):
    return MlpModel(np.zeros((1, 2)), np.zeros(1), np.zeros(1), b2)


class TestPredict:
    def test_half_score_has_zero_confidence(self):
        stable, score, conf = predict_mlp(_fixed_model(0.0), np.zeros(2))
        assert score == 0.5 and conf == 0.0 and stable

    def test_confident_stable(self):
        stable, score, conf = predict_mlp(_fixed_model(800.0), np.zeros(2))
        assert stable and score == 1.0 and conf == 1.0

    def test_confident_unstable(self):
        stable, score, conf = predict_mlp(_fixed_model(-800.0), np.zeros(2))
        assert not stable and score == 0.0 and conf == 1.0

    def test_repeatable(self):
        x, y = _separable()
        m = train_mlp(x, y, seed=1)
        assert predict_mlp(m, x[0]) == predict_mlp(m, x[0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            predict_mlp(_fixed_model(0.0), np.zeros(3))

    def test_non_finite_input(self):
        with pytest.raises(NonFinite):
            predict_mlp(_fixed_model(0.0), np.array([np.nan, 0.0]))
