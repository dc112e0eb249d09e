import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tsassess.dispatch import solve_acopf
from tsassess.netcase import load_bundled_case, parse_case
from tsassess.powerflow import solve_powerflow

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TWO_BUS = """
name = "two-bus"
base_mva = 100.0

[[buses]]
id = 1
kind = "slack"
base_kv = 230.0

[[buses]]
id = 2
kind = "pq"
base_kv = 230.0

[[branches]]
from_bus = 1
to_bus = 2
r = {r}
x = {x}

[[generators]]
bus = 1
pmin = 0.0
pmax = 500.0
qmin = -500.0
qmax = 500.0
vset = 1.0
cost_a = 0.0
cost_b = 10.0
cost_c = 0.01
inertia_h = 5.0
xdp = 0.2

[[loads]]
bus = 2
p_base = {p}
q_base = {q}
"""


def two_bus(r=0.0, x=0.1, p=50.0, q=0.0):
    return parse_case(TWO_BUS.format(r=r, x=x, p=p, q=q))


@pytest.fixture(scope="session")
def case9():
    return load_bundled_case("wscc9")


@pytest.fixture(scope="session")
def base_loads(case9):
    return case9.base_loads()


@pytest.fixture(scope="session")
def base_op(case9, base_loads):
    p, q = base_loads
    return solve_acopf(case9, p, q, scenario_id=0)


@pytest.fixture(scope="session")
def base_pf(case9, base_loads):
    """Power flow at the customary published dispatch (163 and 85 MW)."""
    p, q = base_loads
    return solve_powerflow(case9, p, q, np.array([0.0, 163.0, 85.0]))
