"""Full Newton-Raphson AC power flow in polar coordinates."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, SingularJacobian
from .netcase import NetworkCase, build_ybus

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 30
_Q_TOL = 1e-6  # MVAr slack before a PV bus is switched


@dataclass(frozen=True)
class PowerFlowSolution:
    vm: np.ndarray
    va: np.ndarray
    pg: np.ndarray
    qg: np.ndarray
    p_load: np.ndarray
    q_load: np.ndarray
    p_loss: float
    iterations: int
    converged: bool
    max_mismatch: float
    s_from: np.ndarray
    s_to: np.ndarray
    q_limited: tuple[int, ...] = ()

    @property
    def voltage(self) -> np.ndarray:
        return self.vm * np.exp(1j * self.va)


def _dsbus(ybus, v):
    ibus = ybus @ v
    vnorm = v / np.abs(v)
    dva = 1j * np.diag(v) @ np.conj(np.diag(ibus) - ybus @ np.diag(v))
    dvm = np.diag(v) @ np.conj(ybus @ np.diag(vnorm)) + np.conj(np.diag(ibus)) @ np.diag(vnorm)
    return dva, dvm


def compute_flows(case: NetworkCase, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complex power (MVA) entering each branch at its from and to ends."""
    idx = case.bus_index
    sf = np.zeros(len(case.branches), dtype=complex)
    st = np.zeros(len(case.branches), dtype=complex)
    for k, br in enumerate(case.branches):
        f, t = idx[br.from_bus], idx[br.to_bus]
        ys = br.series_admittance
        ysh = 0.5j * br.b_charging
        i_f = (ys + ysh) / br.tap**2 * v[f] - ys / br.tap * v[t]
        i_t = -ys / br.tap * v[f] + (ys + ysh) * v[t]
        sf[k] = v[f] * np.conj(i_f) * case.base_mva
        st[k] = v[t] * np.conj(i_t) * case.base_mva
    return sf, st


def _newton(ybus, sbus, v, pv, pq, tol, max_iter):
    pvpq = np.r_[pv, pq]
    npvpq = len(pvpq)
    va, vm = np.angle(v), np.abs(v)

    def mismatch(v):
        mis = v * np.conj(ybus @ v) - sbus
        return np.r_[mis[pvpq].real, mis[pq].imag]

    f = mismatch(v)
    norm = np.max(np.abs(f)) if f.size else 0.0
    it = 0
    while norm >= tol and it < max_iter:
        dva, dvm = _dsbus(ybus, v)
        jac = np.block([
            [dva[np.ix_(pvpq, pvpq)].real, dvm[np.ix_(pvpq, pq)].real],
            [dva[np.ix_(pq, pvpq)].imag, dvm[np.ix_(pq, pq)].imag],
        ])
        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian("power-flow Jacobian is singular") from exc
        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:]
        v = vm * np.exp(1j * va)
        it += 1
        f = mismatch(v)
        norm = np.max(np.abs(f)) if f.size else 0.0
        if not np.isfinite(norm):
            break
    return v, it, norm


def solve_powerflow(
    case: NetworkCase,
    p_load,
    q_load,
    pg,
    vset=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    enforce_q_limits: bool = True,
) -> PowerFlowSolution:
    """Solve the AC power flow from a flat start.

    ``p_load``/``q_load`` are per-bus MW/MVAr, ``pg`` and ``vset`` are per
    generator (the slack entry of ``pg`` is ignored). A non-converged run
    returns its best iterate with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = len(case.buses)
    p_load = np.asarray(p_load, dtype=float)
    q_load = np.asarray(q_load, dtype=float)
    pg = np.asarray(pg, dtype=float)
    if p_load.shape != (n,) or q_load.shape != (n,):
        raise LengthMismatch(f"expected {n} per-bus load values")
    if pg.shape != (len(case.generators),):
        raise LengthMismatch(f"expected {len(case.generators)} generator set-points")
    vset = np.array([g.vset for g in case.generators]) if vset is None else np.asarray(vset, dtype=float)

    base = case.base_mva
    ybus = build_ybus(case)
    gidx = case.gen_index
    slack = case.slack_index
    kinds = [b.kind for b in case.buses]

    q_fixed = {}  # gen position -> MVAr, for PV buses switched to PQ
    total_it = 0
    v = np.ones(n, dtype=complex)
    v[gidx] = vset

    for _ in range(2 * len(case.generators) + 2):
        pv = np.array([i for i, k in enumerate(kinds) if k == "pv"], dtype=int)
        pq = np.array([i for i, k in enumerate(kinds) if k == "pq"], dtype=int)
        p_inj = -p_load.copy()
        q_inj = -q_load.copy()
        for k, i in enumerate(gidx):
            if i != slack:
                p_inj[i] += pg[k]
            if k in q_fixed:
                q_inj[i] += q_fixed[k]
        sbus = (p_inj + 1j * q_inj) / base
        v, it, norm = _newton(ybus, sbus, v, pv, pq, tol, max_iter)
        total_it += it
        converged = bool(norm < tol)
        if not (converged and enforce_q_limits):
            break
        s_calc = v * np.conj(ybus @ v) * base
        changed = False
        for k, g in enumerate(case.generators):
            i = gidx[k]
            if i == slack:
                continue
            if k in q_fixed:
                # a limited unit returns to voltage control once the voltage crosses back over its set-point
                at_max = q_fixed[k] == g.qmax
                if (at_max and abs(v[i]) > vset[k]) or (not at_max and abs(v[i]) < vset[k]):
                    del q_fixed[k]
                    kinds[i] = "pv"
                    v[i] = vset[k] * np.exp(1j * np.angle(v[i]))
                    changed = True
                continue
            qg = s_calc[i].imag + q_load[i]
            if qg > g.qmax + _Q_TOL:
                q_fixed[k], kinds[i], changed = g.qmax, "pq", True
            elif qg < g.qmin - _Q_TOL:
                q_fixed[k], kinds[i], changed = g.qmin, "pq", True
        if not changed:
            break
    else:
        log.debug("reactive-limit switching did not settle")

    s_calc = v * np.conj(ybus @ v) * base
    pg_out = s_calc[gidx].real + p_load[gidx]
    qg_out = s_calc[gidx].imag + q_load[gidx]
    sf, st = compute_flows(case, v)
    p_shunt = sum(b.shunt_g * abs(v[i]) ** 2 for i, b in enumerate(case.buses)) * base
    p_loss = float(np.sum(sf.real + st.real) + p_shunt)
    if not converged:
        log.debug("power flow did not converge: mismatch %.3e after %d iterations", norm, total_it)
    return PowerFlowSolution(
        vm=np.abs(v),
        va=np.angle(v) - np.angle(v[slack]),
        pg=pg_out,
        qg=qg_out,
        p_load=p_load.copy(),
        q_load=q_load.copy(),
        p_loss=p_loss,
        iterations=total_it,
        converged=converged,
        max_mismatch=float(norm),
        s_from=sf,
        s_to=st,
        q_limited=tuple(sorted(q_fixed)),
    )
