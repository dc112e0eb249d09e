"""Classical multimachine transient simulation and stability labelling.

Machines are constant EMFs behind transient reactance, loads are constant
admittances taken from the pre-fault power-flow voltages, and the network is
Kron-reduced to the machine internal nodes for each of the pre-fault,
fault-on and post-fault topologies. The swing equations

    dδ/dt = ω_s·ω
    2H·dω/dt = pm − pe − D·ω          (ω in per unit of synchronous speed)

are integrated with fixed-step RK4. The fault-on network applies on steps
starting before ``t_clear`` and the post-fault network afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NotConverged, SingularBlock, StepError
from .netcase import NetworkCase, build_ybus, connected_component
from .powerflow import PowerFlowSolution

FAULT_ADMITTANCE = 1e7
STABLE = -1.0


@dataclass(frozen=True)
class FaultSpec:
    branch_id: str
    faulted_end: str = "from"
    t_clear: float = 0.1
    trip_line: bool = True

    def __post_init__(self):
        if self.faulted_end not in ("from", "to"):
            raise ConfigError("faulted_end must be 'from' or 'to'")
        if self.t_clear < 0:
            raise ConfigError("t_clear must be non-negative")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_end: float = 5.0
    angle_threshold: float = math.pi
    tau_response: float | None = None
    freq_hz: float = 60.0

    def __post_init__(self):
        if not 0 < self.dt <= 0.01:
            raise ConfigError("dt must lie in (0, 0.01] s")
        if self.t_end < 1.0:
            raise ConfigError("t_end must be at least 1 s")
        if self.angle_threshold <= 0:
            raise ConfigError("angle_threshold must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def omega_s(self) -> float:
        return 2 * math.pi * self.freq_hz


@dataclass(frozen=True)
class MachineState:
    delta: float
    omega: float
    emf: float
    pm: float


@dataclass(frozen=True)
class ReducedNetwork:
    pre: np.ndarray
    fault: np.ndarray
    post: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    deltas: np.ndarray  # (steps, machines)
    omegas: np.ndarray
    inertia: np.ndarray


@dataclass(frozen=True)
class StabilityLabel:
    scenario_id: int
    branch_id: str
    stable: bool
    t_instab: float


def kron_reduce(y_aug: np.ndarray, retained) -> np.ndarray:
    """Eliminate every node not in ``retained``: Y_rr − Y_re·Y_ee⁻¹·Y_er."""
    retained = np.asarray(retained, dtype=int)
    n = y_aug.shape[0]
    elim = np.setdiff1d(np.arange(n), retained)
    y_rr = y_aug[np.ix_(retained, retained)]
    if elim.size == 0:
        return y_rr.copy()
    y_re = y_aug[np.ix_(retained, elim)]
    y_ee = y_aug[np.ix_(elim, elim)]
    y_er = y_aug[np.ix_(elim, retained)]
    try:
        x = np.linalg.solve(y_ee, y_er)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock("eliminated admittance block is singular") from exc
    if not np.all(np.isfinite(x)):
        raise SingularBlock("eliminated admittance block is singular")
    return y_rr - y_re @ x


def load_admittances(case: NetworkCase, solution: PowerFlowSolution) -> np.ndarray:
    """Constant-impedance equivalent of each bus load at its pre-fault voltage (pu)."""
    s = (solution.p_load + 1j * solution.q_load) / case.base_mva
    return np.conj(s) / solution.vm**2


def augmented_admittance(case: NetworkCase, solution: PowerFlowSolution, exclude: str | None = None,
                         fault_bus: int | None = None) -> np.ndarray:
    """Bus admittance with loads folded in and machine internal nodes appended after the buses."""
    n, m = len(case.buses), len(case.generators)
    y = np.zeros((n + m, n + m), dtype=complex)
    y[:n, :n] = build_ybus(case, exclude=exclude)
    y[np.arange(n), np.arange(n)] += load_admittances(case, solution)
    for k, (i, xd) in enumerate(zip(case.gen_index, case.machine_xdp())):
        yg = 1.0 / (1j * xd)
        y[i, i] += yg
        y[n + k, n + k] += yg
        y[i, n + k] -= yg
        y[n + k, i] -= yg
    if fault_bus is not None:
        j = case.bus_index[fault_bus]
        y[j, j] += FAULT_ADMITTANCE
    return y


def islands_machine(case: NetworkCase, branch_id: str) -> bool:
    """True when removing the branch separates some machine from the others."""
    gen_buses = {g.bus for g in case.generators}
    comp = connected_component(case, case.generators[0].bus, exclude=branch_id)
    return not gen_buses <= comp


def faulted_bus(case: NetworkCase, fault: FaultSpec) -> int:
    br = case.branch(fault.branch_id)
    return br.from_bus if fault.faulted_end == "from" else br.to_bus


def reduced_networks(case: NetworkCase, solution: PowerFlowSolution, fault: FaultSpec) -> ReducedNetwork:
    n, m = len(case.buses), len(case.generators)
    keep = np.arange(n, n + m)
    case.branch(fault.branch_id)
    if fault.trip_line and islands_machine(case, fault.branch_id):
        raise SingularBlock(f"tripping branch {fault.branch_id} isolates a machine")
    pre = kron_reduce(augmented_admittance(case, solution), keep)
    on = kron_reduce(augmented_admittance(case, solution, fault_bus=faulted_bus(case, fault)), keep)
    if fault.trip_line:
        post = kron_reduce(augmented_admittance(case, solution, exclude=fault.branch_id), keep)
    else:
        post = pre.copy()
    return ReducedNetwork(pre=pre, fault=on, post=post)


def init_equilibrium(solution: PowerFlowSolution, case: NetworkCase) -> list[MachineState]:
    """Internal EMF and mechanical power of each machine from the power-flow state."""
    if not solution.converged:
        raise NotConverged("initialisation needs a converged power flow")
    v = solution.voltage[case.gen_index]
    s = (solution.pg + 1j * solution.qg) / case.base_mva
    i_term = np.conj(s / v)
    e = v + 1j * case.machine_xdp() * i_term
    pm = (e * np.conj(i_term)).real
    return [MachineState(delta=float(np.angle(ek)), omega=0.0, emf=float(abs(ek)), pm=float(p))
            for ek, p in zip(e, pm)]


def electrical_power(y_red: np.ndarray, emf: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Air-gap power of every machine; ``delta`` may carry leading batch axes."""
    e = emf * np.exp(1j * delta)
    cur = y_red[..., :, 0] * e[..., None, 0]
    for j in range(1, e.shape[-1]):
        cur = cur + y_red[..., :, j] * e[..., None, j]
    return (e * np.conj(cur)).real


def coi_deviation(deltas: np.ndarray, inertia: np.ndarray) -> np.ndarray:
    """max_i |δ_i − δ_COI| along the last axis."""
    coi = (deltas * inertia).sum(axis=-1) / inertia.sum()
    return np.max(np.abs(deltas - coi[..., None]), axis=-1)


def _crossing_time(t0, dev0, dev1, threshold, dt):
    return t0 + (threshold - dev0) / (dev1 - dev0) * dt


def clearing_step(t_clear: float, dt: float) -> int:
    return int(math.ceil(t_clear / dt - 1e-9))


def integrate(delta0, omega0, emf, pm, inertia, damping, y_fault, y_post, n_clear, config: SimConfig,
              record: bool = False):
    """RK4 over a batch of machine sets.

    ``delta0``/``omega0``/``emf``/``pm`` are (batch, machines); ``y_fault`` and
    ``y_post`` are (batch, machines, machines). Returns the first threshold
    crossing time per batch member (``STABLE`` if none) and, if requested,
    the recorded (steps+1, batch, machines) angle and speed histories.
    """
    dt, ws, thr = config.dt, config.omega_s, config.angle_threshold
    steps = config.n_steps
    two_h = 2.0 * inertia
    delta = np.array(delta0, dtype=float)
    omega = np.array(omega0, dtype=float)
    batch = delta.shape[0]

    def rhs(y, d, w):
        return ws * w, (pm - electrical_power(y, emf, d) - damping * w) / two_h

    t_cross = np.full(batch, STABLE)
    dev_prev = coi_deviation(delta, inertia)
    hit = dev_prev > thr
    t_cross[hit] = dt  # already beyond the threshold at t=0
    if record:
        d_hist = np.empty((steps + 1, batch, delta.shape[1]))
        w_hist = np.empty_like(d_hist)
        d_hist[0], w_hist[0] = delta, omega
    for k in range(steps):
        y = y_fault if k < n_clear else y_post
        k1d, k1w = rhs(y, delta, omega)
        k2d, k2w = rhs(y, delta + 0.5 * dt * k1d, omega + 0.5 * dt * k1w)
        k3d, k3w = rhs(y, delta + 0.5 * dt * k2d, omega + 0.5 * dt * k2w)
        k4d, k4w = rhs(y, delta + dt * k3d, omega + dt * k3w)
        delta = delta + dt / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
        omega = omega + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(omega))):
            raise StepError(f"non-finite machine state at t = {(k + 1) * dt:.6f} s", time=(k + 1) * dt)
        if record:
            d_hist[k + 1], w_hist[k + 1] = delta, omega
        dev = coi_deviation(delta, inertia)
        new = (~hit) & (dev > thr)
        if new.any():
            t_cross[new] = _crossing_time(k * dt, dev_prev[new], dev[new], thr, dt)
            hit |= new
        dev_prev = dev
    if record:
        return t_cross, d_hist, w_hist
    return t_cross


def simulate_fault(case: NetworkCase, solution: PowerFlowSolution, fault: FaultSpec,
                   config: SimConfig) -> Trajectory:
    """Trajectory of a three-phase fault at one branch end, cleared at ``t_clear``."""
    states = init_equilibrium(solution, case)
    nets = reduced_networks(case, solution, fault)
    inertia = case.machine_h()
    _, d_hist, w_hist = integrate(
        np.array([[s.delta for s in states]]),
        np.array([[s.omega for s in states]]),
        np.array([[s.emf for s in states]]),
        np.array([[s.pm for s in states]]),
        inertia,
        case.machine_d(),
        nets.fault[None],
        nets.post[None],
        clearing_step(fault.t_clear, config.dt),
        config,
        record=True,
    )
    times = np.arange(config.n_steps + 1) * config.dt
    return Trajectory(times=times, deltas=d_hist[:, 0, :], omegas=w_hist[:, 0, :], inertia=inertia)


def label_stability(traj: Trajectory, config: SimConfig, scenario_id: int = -1, branch_id: str = "") -> StabilityLabel:
    """Unstable at the first step where some machine strays beyond the threshold from the centre of inertia."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    dev = coi_deviation(traj.deltas, traj.inertia)
    over = np.nonzero(dev > config.angle_threshold)[0]
    if over.size == 0:
        return StabilityLabel(scenario_id, branch_id, True, STABLE)
    k = int(over[0])
    if k == 0:
        t = config.dt
    else:
        dt = traj.times[k] - traj.times[k - 1]
        t = _crossing_time(traj.times[k - 1], dev[k - 1], dev[k], config.angle_threshold, dt)
    return StabilityLabel(scenario_id, branch_id, False, float(t))


def is_operationally_safe(label: StabilityLabel, config: SimConfig) -> bool:
    """Stable, or unstable slowly enough for a fast resource with response time τ to act."""
    if config.tau_response is None:
        raise ConfigError("tau_response is not set")
    return label.stable or label.t_instab > config.tau_response


def default_fault_scan(case: NetworkCase, t_clear: float = 0.1) -> list[FaultSpec]:
    """One fault per branch at its higher-voltage end (from end on ties).

    Branches whose outage would isolate a machine (generator step-up
    transformers) are cleared without tripping.
    """
    kv = {b.id: b.base_kv for b in case.buses}
    scan = []
    for br in sorted(case.branches, key=lambda b: tuple(map(int, b.id.split("-")))):
        end = "to" if kv[br.to_bus] > kv[br.from_bus] else "from"
        scan.append(FaultSpec(br.id, end, t_clear, trip_line=not islands_machine(case, br.id)))
    return scan


def label_batch(case: NetworkCase, solutions: list[PowerFlowSolution], fault: FaultSpec,
                config: SimConfig) -> np.ndarray:
    """Time of instability (``STABLE`` sentinel) for one fault across many operating points."""
    if not solutions:
        return np.empty(0)
    states = [init_equilibrium(s, case) for s in solutions]
    nets = [reduced_networks(case, s, fault) for s in solutions]
    return integrate(
        np.array([[m.delta for m in st] for st in states]),
        np.array([[m.omega for m in st] for st in states]),
        np.array([[m.emf for m in st] for st in states]),
        np.array([[m.pm for m in st] for st in states]),
        case.machine_h(),
        case.machine_d(),
        np.stack([n.fault for n in nets]),
        np.stack([n.post for n in nets]),
        clearing_step(fault.t_clear, config.dt),
        config,
    )
