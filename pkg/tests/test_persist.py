import json

import numpy as np
import pytest

from tsassess.errors import CorruptFile, FormatVersionMismatch
from tsassess.features import fit_standardizer
from tsassess.ml.mlp import predict_mlp, train_mlp
from tsassess.ml.persist import TrainedModels, load_model, save_model
from tsassess.ml.svm import SvmParams, predict_svm, train_svm_ovo


def _raw_data(seed=0, n=60):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 4)) * [1.0, 50.0, 0.01, 3.0] + [0.0, 200.0, 1.0, -5.0]
    z = (x - x.mean(0)) / x.std(0)
    stable = z[:, 0] + z[:, 1] > 0
    classes = np.where(z[:, 2] > 0.5, "0.8", np.where(z[:, 3] > 0, "1.2", "2.0"))
    return x, stable, list(classes)


def _models(x, stable, classes, seed=0):
    std = fit_standardizer(x)
    xs = std.transform(x)
    mlp = train_mlp(xs, stable, seed=seed)
    unstable = ~stable
    svm = train_svm_ovo(xs[unstable], [c for c, u in zip(classes, unstable) if u], SvmParams(c=10),
                        standardizer=std)
    return TrainedModels("5-7", ("f0", "f1", "f2", "f3"), std, mlp, svm, {"seed": seed})


@pytest.fixture(scope="module")
def saved(tmp_path_factory):
    x, stable, classes = _raw_data()
    models = _models(x, stable, classes)
    path = tmp_path_factory.mktemp("m") / "model.json"
    save_model(models, path)
    return models, path


def test_round_trip_predictions_identical(saved):
    models, path = saved
    back = load_model(path)
    probes = np.random.default_rng(5).normal(size=(100, 4)) * [1.0, 50.0, 0.01, 3.0] + [0.0, 200.0, 1.0, -5.0]
    for v in probes:
        assert predict_mlp(back.mlp, v, back.standardizer) == predict_mlp(models.mlp, v, models.standardizer)
        assert predict_svm(back.svm, v) == predict_svm(models.svm, v)
    assert back.line == "5-7" and back.feature_names == models.feature_names


def test_save_is_deterministic(saved, tmp_path):
    models, path = saved
    save_model(load_model(path), tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_bumped_version(saved, tmp_path):
    _, path = saved
    doc = json.loads(path.read_text())
    doc["format_version"] += 1
    bad = tmp_path / "bumped.json"
    bad.write_text(json.dumps(doc))
    with pytest.raises(FormatVersionMismatch):
        load_model(bad)


def test_truncated_file(saved, tmp_path):
    _, path = saved
    text = path.read_text()
    bad = tmp_path / "cut.json"
    bad.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptFile):
        load_model(bad)


def test_missing_field(saved, tmp_path):
    _, path = saved
    doc = json.loads(path.read_text())
    del doc["standardizer"]
    bad = tmp_path / "partial.json"
    bad.write_text(json.dumps(doc))
    with pytest.raises(CorruptFile):
        load_model(bad)


def test_scaling_a_raw_column_keeps_decisions():
    x, stable, classes = _raw_data(seed=3)
    a = _models(x, stable, classes)
    x10 = x.copy()
    x10[:, 1] *= 10.0
    b = _models(x10, stable, classes)
    for va, vb in zip(x, x10):
        assert predict_mlp(a.mlp, va, a.standardizer)[0] == predict_mlp(b.mlp, vb, b.standardizer)[0]
        assert predict_svm(a.svm, va)[0] == predict_svm(b.svm, vb)[0]
