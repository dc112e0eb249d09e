import math
from importlib import resources

import numpy as np
import pytest
import tomli
import tomli_w
from hypothesis import given
from hypothesis import strategies as st

from tsassess.criticality import (
    EmptyInput, check_subclass_property, group_generators, machine_distances, rank_lines,
)
from tsassess.errors import ConfigError
from tsassess.netcase import parse_case
from tsassess.tdsim import STABLE, StabilityLabel

BRANCHES = ["4-5", "5-7", "7-8", "8-9"]


def _labels(unstable: dict[str, dict[int, float]], n=20, branches=BRANCHES):
    out = []
    for b in branches:
        bad = unstable.get(b, {})
        for sid in range(n):
            if sid in bad:
                out.append(StabilityLabel(sid, b, False, bad[sid]))
            else:
                out.append(StabilityLabel(sid, b, True, STABLE))
    return out


def _case_text():
    return resources.files("tsassess").joinpath("data/wscc9.case").read_text()


def _two_area_case():
    d = tomli.loads(_case_text())
    buses = d["buses"] + [dict(b, id=b["id"] + 10, kind="pv" if b["kind"] == "slack" else b["kind"])
                          for b in d["buses"]]
    branches = d["branches"] + [dict(b, from_bus=b["from_bus"] + 10, to_bus=b["to_bus"] + 10)
                                for b in d["branches"]]
    branches.append({"from_bus": 5, "to_bus": 15, "r": 0.0, "x": 2.0, "b_charging": 0.0, "tap": 1.0,
                     "rating": 100.0})
    gens = d["generators"] + [dict(g, bus=g["bus"] + 10) for g in d["generators"]]
    loads = d["loads"] + [dict(ld, bus=ld["bus"] + 10) for ld in d["loads"]]
    return parse_case(tomli_w.dumps(dict(d, buses=buses, branches=branches, generators=gens, loads=loads)))


class TestGrouping:
    def test_nine_bus_is_one_group(self, case9):
        assert group_generators(case9).groups == ((1, 2, 3),)

    def test_zero_threshold_gives_singletons(self, case9):
        assert group_generators(case9, threshold=0.0).groups == ((1,), (2,), (3,))

    def test_two_area_fixture(self):
        assert group_generators(_two_area_case()).groups == ((1, 2, 3), (11, 12, 13))

    def test_distances_symmetric(self, case9):
        d = machine_distances(case9)
        assert np.allclose(d, d.T) and np.all(np.diag(d) == 0) and np.all(d[~np.eye(3, dtype=bool)] > 0)

    def test_permutation_equivariance(self, case9):
        d = tomli.loads(_case_text())
        d["generators"] = list(reversed(d["generators"]))
        perm = parse_case(tomli_w.dumps(d))
        ref = machine_distances(case9)
        got = machine_distances(perm)
        assert np.allclose(got, ref[::-1, ::-1], atol=1e-12)
        for thr in (0.0, 0.02, 0.04, 1.0):
            assert group_generators(perm, thr).groups == group_generators(case9, thr).groups


class TestRankLines:
    def test_constructed_counts(self):
        labels = _labels({"5-7": {i: 1.0 for i in range(10)}, "7-8": {i: 2.0 for i in range(4)},
                          "8-9": {0: 3.0}})
        rep = rank_lines(labels)
        assert rep.ranking[:3] == ("5-7", "7-8", "8-9")
        assert rep.weak_set == ("5-7",)
        assert rep.stats["5-7"].unstable_count == 10
        assert rep.stats["5-7"].unstable_fraction == pytest.approx(0.5)
        assert rep.stats["7-8"].median_t_instab == 2.0
        assert math.isnan(rep.stats["4-5"].median_t_instab)
        assert not rep.degenerate

    def test_all_stable_is_degenerate(self):
        rep = rank_lines(_labels({}))
        assert rep.degenerate
        assert rep.weak_set == ("4-5",)
        assert all(s.unstable_count == 0 for s in rep.stats.values())

    def test_tie_break_by_branch_id(self):
        rep = rank_lines(_labels({"8-9": {1: 1.0}, "5-7": {2: 1.0}}))
        assert rep.ranking[:2] == ("5-7", "8-9")
        assert rep.weak_set == ("5-7", "8-9")

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            rank_lines([])

    @pytest.mark.parametrize("frac", [0.0, 1.5])
    def test_weak_fraction_range(self, frac):
        with pytest.raises(ConfigError):
            rank_lines(_labels({}), frac)


unstable_maps = st.dictionaries(
    st.sampled_from(BRANCHES),
    st.dictionaries(st.integers(0, 19), st.floats(0.01, 5.0, allow_nan=False), max_size=20),
)


@given(unstable_maps, st.randoms(use_true_random=False))
def test_rank_invariant_to_row_order(unstable, rnd):
    labels = _labels(unstable)
    shuffled = list(labels)
    rnd.shuffle(shuffled)
    a, b = rank_lines(labels), rank_lines(shuffled)
    assert a.ranking == b.ranking and a.weak_set == b.weak_set
    for bid in BRANCHES:
        assert a.stats[bid].unstable_ids == b.stats[bid].unstable_ids
        assert a.stats[bid].median_t_instab == b.stats[bid].median_t_instab or math.isnan(
            a.stats[bid].median_t_instab)


@given(unstable_maps, st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_weak_set_monotone_in_fraction(unstable, f1, f2):
    lo, hi = sorted((f1, f2))
    labels = _labels(unstable)
    assert set(rank_lines(labels, hi).weak_set) <= set(rank_lines(labels, lo).weak_set)
    rep = rank_lines(labels, lo)
    assert sorted(rep.ranking) == sorted(BRANCHES) and set(rep.weak_set) <= set(rep.ranking)


class TestSubclass:
    def test_full_containment(self):
        labels = _labels({"5-7": {i: 0.8 for i in range(8)}, "7-8": {1: 1.0, 2: 1.2}, "8-9": {3: 1.5}})
        rep = check_subclass_property(labels)
        assert rep.weakest == "5-7"
        got = {e.branch_id: e.containment for e in rep.entries if not math.isnan(e.containment)}
        assert got == {"7-8": 1.0, "8-9": 1.0}
        assert rep.mean_containment == 1.0 and rep.stiff_slower

    def test_partial_containment_is_reported(self):
        labels = _labels({"5-7": {i: 1.0 for i in range(8)}, "7-8": {0: 0.5, 1: 1.5, 2: 1.5, 15: 1.5}})
        rep = check_subclass_property(labels)
        entry = next(e for e in rep.entries if e.branch_id == "7-8")
        assert entry.containment == pytest.approx(0.75)
        assert entry.median_gap == pytest.approx(0.5) and entry.timing_sign == 1

    def test_faster_stiff_line_flagged(self):
        labels = _labels({"5-7": {i: 1.0 for i in range(8)}, "7-8": {0: 0.5}})
        assert not check_subclass_property(labels).stiff_slower

    def test_needs_unstable_cases(self):
        with pytest.raises(EmptyInput):
            check_subclass_property(_labels({}))
