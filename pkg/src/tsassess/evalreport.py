"""Evaluation metrics and run reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, LengthMismatch
from .tables import write_csv, write_text


class UnknownLabel(InputError):
    pass


class Empty(InputError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are actual labels, columns predicted labels."""
    vocabulary: tuple[str, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def percentages(self) -> np.ndarray:
        return self.counts * 100.0 / self.total if self.total else np.zeros_like(self.counts, dtype=float)

    @property
    def error_pct(self) -> float:
        return 100.0 * (self.total - np.trace(self.counts)) / self.total if self.total else 0.0


def confusion(preds, actuals, vocabulary) -> ConfusionMatrix:
    preds, actuals = list(preds), list(actuals)
    if len(preds) != len(actuals):
        raise LengthMismatch(f"{len(preds)} predictions for {len(actuals)} actual labels")
    pos = {v: i for i, v in enumerate(vocabulary)}
    counts = np.zeros((len(pos), len(pos)), dtype=int)
    for p, a in zip(preds, actuals):
        if p not in pos or a not in pos:
            raise UnknownLabel(f"label {p if p not in pos else a!r} is not in the vocabulary")
        counts[pos[a], pos[p]] += 1
    return ConfusionMatrix(tuple(vocabulary), counts)


def mae(pred_times, actual_times) -> float:
    """Mean absolute difference between predicted and actual times."""
    p = np.asarray(pred_times, dtype=float)
    a = np.asarray(actual_times, dtype=float)
    if p.shape != a.shape:
        raise LengthMismatch(f"{p.size} predicted times for {a.size} actual")
    if p.size == 0:
        raise Empty("no times to compare")
    return float(np.sum(np.abs(p - a)) / p.size)


def credibility(preds, training_vocabulary) -> float:
    preds = list(preds)
    if not preds:
        raise Empty("no predictions")
    vocab = set(training_vocabulary)
    return sum(p in vocab for p in preds) / len(preds)


@dataclass(frozen=True)
class Incident:
    scenario_id: int
    actual: float
    predicted: float

    @property
    def abs_error(self) -> float:
        return abs(self.predicted - self.actual)


@dataclass
class EvalReport:
    n_rows: int
    binary: ConfusionMatrix
    false_stable_pct: float  # missed unstable cases over all rows
    false_unstable_pct: float
    stable_recall: float
    unstable_recall: float
    n_unstable: int
    time_classes: ConfusionMatrix | None
    labeling_error_pct: float
    mae_s: float
    mae_raw_s: float
    credibility: float
    mean_actual_t: float
    mean_predicted_t: float
    var_actual_t: float
    var_predicted_t: float
    incidents: list[Incident] = field(default_factory=list)

    @property
    def binary_error_pct(self) -> float:
        return self.binary.error_pct

    def metrics(self) -> list[tuple[str, object]]:
        return [
            ("n_rows", self.n_rows),
            ("binary_error_pct", self.binary_error_pct),
            ("false_stable_pct", self.false_stable_pct),
            ("false_unstable_pct", self.false_unstable_pct),
            ("stable_recall", self.stable_recall),
            ("unstable_recall", self.unstable_recall),
            ("n_unstable", self.n_unstable),
            ("labeling_error_pct", self.labeling_error_pct),
            ("mae_s", self.mae_s),
            ("mae_raw_s", self.mae_raw_s),
            ("credibility", self.credibility),
            ("mean_actual_t", self.mean_actual_t),
            ("mean_predicted_t", self.mean_predicted_t),
            ("var_actual_t", self.var_actual_t),
            ("var_predicted_t", self.var_predicted_t),
            ("n_incidents", len(self.incidents)),
        ]


BINARY_VOCAB = ("stable", "unstable")


def _word(stable: bool) -> str:
    return "stable" if stable else "unstable"


def evaluate(scenario_ids, actual_stable, predicted_stable, actual_classes, predicted_classes, t_instab,
             training_vocabulary) -> EvalReport:
    """Binary metrics over every row; time-class metrics over the truly unstable rows.

    ``predicted_classes`` holds the SVM label for each truly unstable row (in
    row order); times are compared on the class values in seconds.
    """
    ids = np.asarray(scenario_ids, dtype=int)
    act = np.asarray(actual_stable, dtype=bool)
    pred = np.asarray(predicted_stable, dtype=bool)
    if not (len(ids) == len(act) == len(pred)):
        raise LengthMismatch("row counts differ between ids and labels")
    if len(ids) == 0:
        raise Empty("nothing to evaluate")
    cm = confusion([_word(p) for p in pred], [_word(a) for a in act], BINARY_VOCAB)
    n = len(ids)
    false_stable = int(np.sum(~act & pred))
    false_unstable = int(np.sum(act & ~pred))
    n_st, n_un = int(act.sum()), int((~act).sum())
    unstable_rows = np.flatnonzero(~act)
    a_cls = [actual_classes[i] for i in unstable_rows]
    p_cls = list(predicted_classes)
    if len(p_cls) != len(a_cls):
        raise LengthMismatch(f"{len(p_cls)} class predictions for {len(a_cls)} unstable rows")
    nan = float("nan")
    if a_cls:
        vocab = sorted(set(training_vocabulary) | set(a_cls) | set(p_cls), key=float)
        tcm = confusion(p_cls, a_cls, vocab)
        a_t = np.array([float(c) for c in a_cls])
        p_t = np.array([float(c) for c in p_cls])
        incidents = [Incident(int(ids[r]), float(a), float(p))
                     for r, a, p in zip(unstable_rows, a_cls, p_cls) if a != p]
        incidents.sort(key=lambda inc: inc.scenario_id)
        stats = (tcm.error_pct, mae(p_t, a_t), mae(p_t, np.asarray(t_instab, dtype=float)[unstable_rows]),
                 credibility(p_cls, training_vocabulary), float(a_t.mean()), float(p_t.mean()),
                 float(a_t.var()), float(p_t.var()))
    else:
        tcm, incidents = None, []
        stats = (nan,) * 8
    return EvalReport(n, cm, 100.0 * false_stable / n, 100.0 * false_unstable / n,
                      (n_st - false_unstable) / n_st if n_st else nan,
                      (n_un - false_stable) / n_un if n_un else nan,
                      n_un, tcm, *stats, incidents=incidents)


def _md_table(cm: ConfusionMatrix) -> list[str]:
    lines = ["| actual \\ predicted | " + " | ".join(cm.vocabulary) + " |",
             "|---" * (len(cm.vocabulary) + 1) + "|"]
    pct = cm.percentages
    for i, lab in enumerate(cm.vocabulary):
        cells = [f"{cm.counts[i, j]} ({pct[i, j]:.2f}%)" for j in range(len(cm.vocabulary))]
        lines.append(f"| {lab} | " + " | ".join(cells) + " |")
    return lines


def render_report(rep: EvalReport, title: str = "Evaluation report", extra: list[str] | None = None) -> str:
    def g(v):
        return "n/a" if isinstance(v, float) and np.isnan(v) else (f"{v:.6g}" if isinstance(v, float) else str(v))

    out = [f"# {title}", "",
           "Binary error counts misclassifications of both classes over all rows. The false-stable",
           "rate counts only unstable rows predicted stable, also over all rows. The labeling error",
           "counts time-class misclassifications over the truly unstable rows. Times are compared",
           "on class values in seconds (mae_s); mae_raw_s compares predicted classes with the",
           "unbinned simulated times.", ""]
    out += ["## Metrics", "", "| metric | value |", "|---|---|"]
    out += [f"| {k} | {g(v)} |" for k, v in rep.metrics()]
    out += ["", "## Stability confusion", ""] + _md_table(rep.binary)
    if rep.time_classes is not None:
        out += ["", "## Time-class confusion", ""] + _md_table(rep.time_classes)
    out += ["", f"## Misclassified incidents ({len(rep.incidents)})", ""]
    if rep.incidents:
        out += ["| scenario_id | actual | predicted | abs_error |", "|---|---|---|---|"]
        out += [f"| {i.scenario_id} | {i.actual:g} | {i.predicted:g} | {i.abs_error:.6g} |" for i in rep.incidents]
    else:
        out.append("none")
    if extra:
        out += [""] + extra
    return "\n".join(out) + "\n"


def summarize(rep: EvalReport, out_dir, title: str = "Evaluation report", extra: list[str] | None = None) -> None:
    """Write report.md, metrics.csv, incidents.csv and confusion.csv."""
    out_dir = Path(out_dir)
    write_text(out_dir / "report.md", render_report(rep, title, extra))
    write_csv(out_dir / "metrics.csv", ["metric", "value"], rep.metrics())
    write_csv(out_dir / "incidents.csv", ["scenario_id", "actual", "predicted", "abs_error"],
              ([i.scenario_id, i.actual, i.predicted, i.abs_error] for i in rep.incidents))
    rows = []
    for name, cm in (("stability", rep.binary), ("time_class", rep.time_classes)):
        if cm is None:
            continue
        pct = cm.percentages
        for i, a in enumerate(cm.vocabulary):
            for j, p in enumerate(cm.vocabulary):
                rows.append([name, a, p, int(cm.counts[i, j]), pct[i, j]])
    write_csv(out_dir / "confusion.csv", ["matrix", "actual", "predicted", "count", "percent"], rows)
