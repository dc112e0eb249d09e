"""Versioned JSON model file.

Floats are written with Python's shortest round-trip repr, so a loaded model
predicts exactly as the saved one.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CorruptFile, FormatVersionMismatch
from ..features import Standardizer
from .mlp import MlpModel
from .svm import SvmBinaryModel, SvmMulticlassModel, SvmParams

FORMAT_VERSION = 1


@dataclass
class TrainedModels:
    line: str
    feature_names: tuple[str, ...]
    standardizer: Standardizer
    mlp: MlpModel | None = None
    svm: SvmMulticlassModel | None = None
    meta: dict = field(default_factory=dict)


def _arr(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _mlp_doc(m: MlpModel) -> dict:
    meta = {k: v for k, v in m.meta.items() if k != "loss_history"}
    return {"shapes": list(m.layer_sizes), "w1": _arr(m.w1), "b1": _arr(m.b1), "w2": _arr(m.w2),
            "b2": float(m.b2), "meta": meta}


def _svm_doc(m: SvmMulticlassModel) -> dict:
    p = m.params
    return {
        "vocabulary": list(m.vocabulary),
        "scale": m.scale,
        "params": {"c": p.c, "scale_multiplier": p.scale_multiplier,
                   "class_costs": [[k, v] for k, v in p.class_costs], "tol": p.tol, "max_iter": p.max_iter},
        "warnings": list(m.warnings),
        "machines": [
            {"positive": b.positive, "negative": b.negative, "support_vectors": _arr(b.support_vectors),
             "dual_coef": _arr(b.dual_coef), "bias": b.bias, "scale": b.scale, "c": b.c,
             "class_costs": [[k, b.class_costs[k]] for k in sorted(b.class_costs)],
             "converged": b.converged, "kkt_gap": b.kkt_gap}
            for b in m.machines.values()
        ],
    }


def to_document(models: TrainedModels) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "line": models.line,
        "feature_names": list(models.feature_names),
        "standardizer": {"mean": _arr(models.standardizer.mean), "std": _arr(models.standardizer.std)},
        "mlp": _mlp_doc(models.mlp) if models.mlp is not None else None,
        "svm": _svm_doc(models.svm) if models.svm is not None else None,
        "meta": models.meta,
    }


def dumps(models: TrainedModels) -> str:
    return json.dumps(to_document(models), indent=1, allow_nan=False) + "\n"


def save_model(models: TrainedModels, path) -> None:
    """Write atomically: a temporary sibling file is renamed into place."""
    path = Path(path)
    text = dumps(models)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def from_document(doc: dict) -> TrainedModels:
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CorruptFile("model file has no format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise FormatVersionMismatch(f"model format {doc['format_version']!r}, expected {FORMAT_VERSION}")
    try:
        std = Standardizer(np.array(doc["standardizer"]["mean"], dtype=float),
                           np.array(doc["standardizer"]["std"], dtype=float))
        mlp = None
        if doc["mlp"] is not None:
            d = doc["mlp"]
            n_in, n_hid, _ = d["shapes"]
            mlp = MlpModel(np.array(d["w1"], dtype=float).reshape(n_hid, n_in), np.array(d["b1"], dtype=float),
                           np.array(d["w2"], dtype=float), float(d["b2"]), dict(d["meta"]))
        svm = None
        if doc["svm"] is not None:
            d = doc["svm"]
            p = d["params"]
            params = SvmParams(p["c"], p["scale_multiplier"], tuple((k, v) for k, v in p["class_costs"]),
                               p["tol"], p["max_iter"])
            machines = {}
            n_feat = len(doc["feature_names"])
            for md in d["machines"]:
                sv = np.array(md["support_vectors"], dtype=float).reshape(-1, n_feat)
                machines[(md["positive"], md["negative"])] = SvmBinaryModel(
                    md["positive"], md["negative"], sv, np.array(md["dual_coef"], dtype=float), md["bias"],
                    md["scale"], md["c"], {k: v for k, v in md["class_costs"]}, md["converged"], md["kkt_gap"])
            svm = SvmMulticlassModel(list(d["vocabulary"]), machines, d["scale"], params, std, list(d["warnings"]))
        return TrainedModels(doc["line"], tuple(doc["feature_names"]), std, mlp, svm, dict(doc["meta"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"model file is malformed: {exc}") from exc


def load_model(path) -> TrainedModels:
    try:
        text = Path(path).read_text(encoding="utf-8")
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"cannot parse model file {path}: {exc}") from exc
    return from_document(doc)
