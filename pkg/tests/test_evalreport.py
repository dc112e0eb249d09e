import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tsassess.errors import LengthMismatch
from tsassess.evalreport import (
    Empty, UnknownLabel, confusion, credibility, evaluate, mae, render_report, summarize,
)


class TestConfusion:
    def test_perfect(self):
        labels = ["stable", "unstable"] * 5
        cm = confusion(labels, labels, ("stable", "unstable"))
        assert np.array_equal(cm.percentages, [[50.0, 0.0], [0.0, 50.0]])
        assert cm.error_pct == 0.0

    def test_all_wrong(self):
        act = ["stable", "unstable"] * 5
        pred = ["unstable", "stable"] * 5
        cm = confusion(pred, act, ("stable", "unstable"))
        assert np.array_equal(cm.percentages, [[0.0, 50.0], [50.0, 0.0]])
        assert cm.error_pct == 100.0

    def test_one_error_in_699(self):
        act = ["stable"] * 699
        pred = ["unstable"] + ["stable"] * 698
        assert round(confusion(pred, act, ("stable", "unstable")).error_pct, 3) == 0.143

    def test_unknown_label(self):
        with pytest.raises(UnknownLabel):
            confusion(["x"], ["stable"], ("stable", "unstable"))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion(["stable"], [], ("stable",))


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=200))
def test_percentages_reproduce_counts(pairs):
    vocab = ("a", "b", "c", "d")
    cm = confusion([vocab[p] for p, _ in pairs], [vocab[a] for _, a in pairs], vocab)
    back = cm.percentages * cm.total / 100
    assert np.array_equal(np.rint(back).astype(int), cm.counts)
    assert np.max(np.abs(back - cm.counts)) < 1e-9


class TestMae:
    def test_identical(self):
        assert mae([1.0, 2.5], [1.0, 2.5]) == 0.0

    def test_hand_computed(self):
        assert mae([1.7, 2.0], [2.0, 2.0]) == pytest.approx(0.15, abs=1e-15)
        assert mae([1.5, 2.0, 1.0], [1.6, 2.0, 1.3]) == pytest.approx(0.4 / 3, abs=1e-15)

    def test_matches_definition(self):
        p, a = [0.8, 1.1, 2.9, 0.5], [1.0, 1.1, 0.9, 0.7]
        expected = sum(abs(x - y) for x, y in zip(p, a)) / 4
        assert mae(p, a) == expected

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            mae([1.0], [1.0, 2.0])
        with pytest.raises(Empty):
            mae([], [])


@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=50))
def test_mae_symmetric(pairs):
    p, a = [x for x, _ in pairs], [y for _, y in pairs]
    assert mae(p, a) == mae(a, p)
    assert mae(p, p) == 0.0


class TestCredibility:
    def test_all_inside(self):
        assert credibility(["1.0", "2.0"], ["1.0", "2.0", "3.0"]) == 1.0

    def test_one_outside(self):
        assert credibility(["1.0", "2.0", "9.9", "1.0"], ["1.0", "2.0"]) == 0.75

    def test_empty(self):
        with pytest.raises(Empty):
            credibility([], ["1.0"])


def _run(n_unstable=60, wrong=48, binary_wrong=0):
    ids = list(range(100))
    stable = [i >= n_unstable for i in ids]
    pred = list(stable)
    for i in range(binary_wrong):
        pred[n_unstable + i] = False
    actual = ["1.0" if i % 2 else "2.0" for i in range(n_unstable)] + [""] * (100 - n_unstable)
    predicted = [("2.0" if i % 2 else "1.0") if i < wrong else actual[i] for i in range(n_unstable)]
    t = [float(c) + 0.01 if c else -1.0 for c in actual]
    return evaluate(ids, stable, pred, actual, predicted, t, ["1.0", "2.0"])


def test_incident_table_has_48_rows(tmp_path):
    rep = _run()
    assert len(rep.incidents) == 48
    assert rep.labeling_error_pct == pytest.approx(80.0)
    assert rep.mae_s == pytest.approx(0.8)
    summarize(rep, tmp_path)
    assert len((tmp_path / "incidents.csv").read_text().splitlines()) == 49


def test_clean_run(tmp_path):
    rep = _run(wrong=0)
    assert rep.incidents == [] and rep.mae_s == 0.0 and rep.credibility == 1.0
    assert rep.mean_actual_t == rep.mean_predicted_t == 1.5
    summarize(rep, tmp_path)
    assert (tmp_path / "incidents.csv").read_text() == "scenario_id,actual,predicted,abs_error\n"


def test_binary_rates():
    rep = _run(binary_wrong=4)
    assert rep.binary_error_pct == 4.0
    assert rep.false_unstable_pct == 4.0 and rep.false_stable_pct == 0.0
    assert rep.stable_recall == pytest.approx(36 / 40)


def test_emission_is_byte_identical(tmp_path):
    rep = _run()
    summarize(rep, tmp_path / "a", extra=["note"])
    summarize(_run(), tmp_path / "b", extra=["note"])
    for name in ("report.md", "metrics.csv", "incidents.csv", "confusion.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "Misclassified incidents (48)" in render_report(rep)


def test_all_stable_has_no_time_metrics():
    rep = evaluate([0, 1], [True, True], [True, True], ["", ""], [], [-1.0, -1.0], [])
    assert rep.time_classes is None and np.isnan(rep.mae_s)


def test_class_count_mismatch():
    with pytest.raises(LengthMismatch):
        evaluate([0, 1], [False, True], [False, True], ["1.0", ""], [], [1.0, -1.0], ["1.0"])
