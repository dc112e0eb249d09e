import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tsassess.errors import LengthMismatch
from tsassess.features import (
    LineNotInLabels, NotUnstable, TooFewRows, UnknownBranch, bin_time_label, build_dataset, extract_features,
    feature_names, fit_standardizer, label_sort_key,
)
from tsassess.tables import read_dataset, write_dataset
from tsassess.tdsim import STABLE, StabilityLabel


class TestExtract:
    def test_length_and_names(self, case9, base_op):
        fv = extract_features(case9, base_op, "5-7")
        assert len(fv.values) == 17 and len(fv.names) == 17
        assert fv.names[:6] == ("p_load_5", "q_load_5", "p_load_6", "q_load_6", "p_load_8", "q_load_8")
        assert fv.names[-1] == "cost"

    def test_load_values_at_base(self, case9, base_op):
        fv = extract_features(case9, base_op, "5-7")
        assert np.allclose(fv.values[:6], [125, 50, 90, 30, 100, 35])
        assert fv.values[-1] == base_op.objective

    def test_line_end_voltages(self, case9, base_op):
        v = extract_features(case9, base_op, "5-7")
        fv = dict(zip(v.names, v.values))
        br, idx = case9.branch("5-7"), case9.bus_index
        assert fv["vm_from"] == base_op.solution.vm[idx[br.from_bus]]
        assert fv["va_to"] == base_op.solution.va[idx[br.to_bus]]

    def test_deterministic(self, case9, base_op):
        a = extract_features(case9, base_op, "5-7").values
        b = extract_features(case9, base_op, "5-7").values
        assert np.array_equal(a, b)

    def test_unknown_branch(self, case9, base_op):
        with pytest.raises(UnknownBranch):
            extract_features(case9, base_op, "1-9")


class TestBinning:
    @pytest.mark.parametrize("t,label", [(1.66, "1.7"), (2.04, "2.0"), (1.75, "1.8"), (0.05, "0.1"),
                                         (0.792, "0.8"), (4.95, "5.0")])
    def test_examples(self, t, label):
        assert bin_time_label(t) == label

    def test_other_width(self):
        assert bin_time_label(1.26, 0.25) == "1.25"

    @pytest.mark.parametrize("t", [0.0, -1.0, STABLE])
    def test_rejects_stable(self, t):
        with pytest.raises(NotUnstable):
            bin_time_label(t)

    @given(st.floats(0.05, 10.0))
    def test_idempotent_and_close(self, t):
        lab = bin_time_label(t)
        assert bin_time_label(float(lab)) == lab
        assert abs(float(lab) - t) <= 0.05 + 1e-9

    def test_sort_key_numeric(self):
        assert sorted(["1.0", "0.8", "10.0", "2.0"], key=label_sort_key) == ["0.8", "1.0", "2.0", "10.0"]


class TestStandardizer:
    def test_zero_mean_unit_std(self):
        x = np.random.default_rng(0).normal(5, 3, size=(50, 4))
        z = fit_standardizer(x).transform(x)
        assert np.all(np.abs(z.mean(0)) < 1e-10)
        assert np.all(np.abs(z.std(0) - 1) < 1e-10)

    def test_constant_column(self):
        x = np.column_stack([np.arange(5.0), np.full(5, 7.0)])
        z = fit_standardizer(x).transform(x)
        assert np.all(z[:, 1] == 0) and np.all(np.isfinite(z))

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            fit_standardizer(np.ones((1, 3)))

    def test_length_mismatch(self):
        s = fit_standardizer(np.random.default_rng(1).normal(size=(5, 3)))
        with pytest.raises(LengthMismatch):
            s.transform(np.ones(4))


@given(arrays(float, st.tuples(st.integers(2, 30), st.integers(1, 5)), elements=st.floats(-1e3, 1e3)))
def test_standardized_means_vanish(x):
    z = fit_standardizer(x).transform(x)
    assert np.all(np.isfinite(z))
    spread = x.std(axis=0) >= 1e-12
    assert np.all(np.abs(z.mean(0)[spread]) < 1e-8)


def _labels(ids, unstable_times):
    return [StabilityLabel(i, "5-7", i not in unstable_times, unstable_times.get(i, STABLE)) for i in ids]


class TestDataset:
    def test_rows_and_classes(self, case9, base_op):
        from dataclasses import replace
        ops = [replace(base_op, scenario_id=i) for i in range(4)]
        data = build_dataset(case9, ops, _labels(range(4), {1: 0.83, 3: 2.04}), "5-7")
        assert len(data) == 4 and data.x.shape == (4, 17)
        assert data.class_labels == ["", "0.8", "", "2.0"]
        assert data.vocabulary == ["0.8", "2.0"]
        assert len(data.unstable()) == 2

    def test_all_stable_has_empty_vocabulary(self, case9, base_op):
        data = build_dataset(case9, [base_op], _labels([0], {}), "5-7")
        assert data.vocabulary == []

    def test_infeasible_rows_skipped(self, case9, base_op):
        from dataclasses import replace
        ops = [base_op, replace(base_op, scenario_id=1, feasible=False)]
        data = build_dataset(case9, ops, _labels([0, 1], {}), "5-7")
        assert list(data.scenario_ids) == [0]

    def test_line_missing(self, case9, base_op):
        with pytest.raises(LineNotInLabels):
            build_dataset(case9, [base_op], _labels([0], {}), "7-8")

    def test_csv_round_trip(self, case9, base_op, tmp_path):
        from dataclasses import replace
        ops = [replace(base_op, scenario_id=i) for i in range(3)]
        data = build_dataset(case9, ops, _labels(range(3), {2: 1.234567890123}), "5-7")
        data.x[1, 3] = 1 / 3
        write_dataset(tmp_path / "d.csv", data)
        back = read_dataset(tmp_path / "d.csv")
        assert np.array_equal(back.x, data.x)
        assert np.array_equal(back.t_instab, data.t_instab)
        assert np.array_equal(back.stable, data.stable)
        assert back.class_labels == data.class_labels
        assert back.feature_names == tuple(feature_names(case9))
