import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tsassess.errors import CaseSyntaxError, InvariantError, RefError
from tsassess.netcase import (Branch, branch_key, build_ybus, parse_case, serialize_case, validate_case)

from .conftest import TWO_BUS, two_bus


def test_bundled_case_shape(case9):
    assert (len(case9.buses), len(case9.branches), len(case9.generators), len(case9.loads)) == (9, 9, 3, 3)
    assert case9.branch("5-7").id == "5-7"
    assert sum(ld.p_base for ld in case9.loads) == 315.0


def test_minimal_two_bus_case_is_valid():
    case = two_bus()
    assert [b.kind for b in case.buses] == ["slack", "pq"]
    assert list(case.branch_ids) == ["1-2"]


def test_missing_bus_reference_names_the_bus(case9):
    text = serialize_case(case9).replace("to_bus = 5\n", "to_bus = 99\n", 1)
    with pytest.raises(RefError, match="99"):
        parse_case(text)


def test_two_slack_buses_rejected(case9):
    text = serialize_case(case9).replace('kind = "pv"', 'kind = "slack"', 1)
    with pytest.raises(InvariantError, match="slack"):
        parse_case(text)


def test_unknown_key_reports_line_and_field():
    text = TWO_BUS.format(r=0, x=0.1, p=1, q=0).replace("base_kv = 230.0\n", "base_kv = 230.0\ncolour = 1\n", 1)
    with pytest.raises(CaseSyntaxError) as err:
        parse_case(text)
    assert err.value.field == "colour"
    assert text.splitlines()[err.value.line - 1].startswith("colour")


def test_malformed_document_is_syntax_error():
    with pytest.raises(CaseSyntaxError):
        parse_case("base_mva = = 3")


def test_zero_reactance_rejected():
    with pytest.raises(InvariantError):
        two_bus(x=0.0)


def test_branch_key_is_canonical():
    assert branch_key(7, 5) == "5-7"
    assert Branch(9, 6, 0.0, 0.1).id == "6-9"


def test_two_bus_ybus():
    case = two_bus(r=0.01, x=0.1)
    y = 1 / complex(0.01, 0.1)
    np.testing.assert_allclose(build_ybus(case), [[y, -y], [-y, y]], atol=1e-14)
    np.testing.assert_array_equal(build_ybus(case, exclude="1-2"), np.zeros((2, 2)))


def test_unknown_exclude_is_ref_error(case9):
    with pytest.raises(RefError):
        build_ybus(case9, exclude="1-9")


def test_nine_bus_ybus_entries(case9):
    y = build_ybus(case9)
    idx = case9.bus_index
    br = case9.branch("5-7")
    assert y.shape == (9, 9)
    assert abs(y[idx[5], idx[7]] + 1 / complex(br.r, br.x)) < 1e-12
    assert np.max(np.abs(y - y.T)) < 1e-12


def test_kirchhoff_row_sums(case9):
    bare = dataclasses.replace(case9, branches=tuple(dataclasses.replace(b, b_charging=0.0) for b in case9.branches))
    assert np.max(np.abs(build_ybus(bare).sum(axis=1))) < 1e-12


def test_serialize_round_trip(case9):
    assert parse_case(serialize_case(case9)) == case9


@given(r=st.floats(0, 0.1), x=st.floats(0.01, 1.0), b=st.floats(0, 0.5), g=st.floats(0, 0.2),
       bsh=st.floats(-0.2, 0.2))
def test_symmetry_and_shunt_row_sums(r, x, b, g, bsh):
    case = two_bus(r=r, x=x)
    case = dataclasses.replace(
        case,
        branches=(dataclasses.replace(case.branches[0], b_charging=b),),
        buses=(case.buses[0], dataclasses.replace(case.buses[1], shunt_g=g, shunt_b=bsh)),
    )
    validate_case(case)
    y = build_ybus(case)
    assert np.max(np.abs(y - y.T)) < 1e-12
    shunt = np.array([0.5j * b, 0.5j * b + complex(g, bsh)])
    np.testing.assert_allclose(y.sum(axis=1), shunt, atol=1e-12)
