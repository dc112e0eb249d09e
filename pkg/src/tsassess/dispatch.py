"""Minimum-cost dispatch for a load scenario.

The non-slack generator set-points are searched by projected coordinate
descent, each candidate evaluated by a full Newton power flow. Operating
limits enter through an exact (L1 plus quadratic) penalty whose weight is
swept upwards; limits are tightened by a small margin during the search so
the final point passes the screen against the true limits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import Diverged, Infeasible
from .netcase import NetworkCase
from .powerflow import DEFAULT_MAX_ITER, DEFAULT_TOL, PowerFlowSolution, solve_powerflow

log = logging.getLogger(__name__)

LIMIT_TOL = 1e-6
_VM_SCALE = 100.0  # 0.01 pu voltage excursion weighs like 1 MW


@dataclass(frozen=True)
class Violation:
    kind: str
    element: str
    magnitude: float


@dataclass(frozen=True)
class DispatchResult:
    pg_set: np.ndarray
    vset: np.ndarray
    objective: float
    feasible: bool
    violations: tuple[Violation, ...]
    solution: PowerFlowSolution
    scenario_id: int | None = None


@dataclass(frozen=True)
class DispatchOptions:
    pf_tol: float = DEFAULT_TOL
    pf_max_iter: int = DEFAULT_MAX_ITER
    step0: float = 8.0
    step_min: float = 1e-3
    penalties: tuple[float, ...] = (10.0, 1e3, 1e5)
    margin: float = 1e-3
    max_evals: int = 4000


def objective_of(case: NetworkCase, pg) -> float:
    return float(sum(g.cost(p) for g, p in zip(case.generators, pg)))


def _violations(case: NetworkCase, sol: PowerFlowSolution, margin: float = 0.0, tol: float = 0.0):
    out = []
    vm_margin = margin / _VM_SCALE
    for g, p, q in zip(case.generators, sol.pg, sol.qg):
        name = f"gen {g.bus}"
        if p < g.pmin + margin - tol:
            out.append(Violation("pg_lower", name, g.pmin + margin - p))
        if p > g.pmax - margin + tol:
            out.append(Violation("pg_upper", name, p - g.pmax + margin))
        if q < g.qmin + margin - tol:
            out.append(Violation("qg_lower", name, g.qmin + margin - q))
        if q > g.qmax - margin + tol:
            out.append(Violation("qg_upper", name, q - g.qmax + margin))
    for b, vm in zip(case.buses, sol.vm):
        if vm < b.vmin + vm_margin - tol:
            out.append(Violation("vm_lower", f"bus {b.id}", b.vmin + vm_margin - vm))
        if vm > b.vmax - vm_margin + tol:
            out.append(Violation("vm_upper", f"bus {b.id}", vm - b.vmax + vm_margin))
    for br, sf, st in zip(case.branches, sol.s_from, sol.s_to):
        flow = max(abs(sf), abs(st))
        if flow > br.rating - margin + tol:
            out.append(Violation("flow", f"branch {br.id}", flow - br.rating + margin))
    return out


def check_limits(result: DispatchResult, case: NetworkCase) -> list[Violation]:
    """Ordered limit violations of a converged dispatch; empty iff feasible."""
    return _violations(case, result.solution, tol=LIMIT_TOL)


def evaluate_dispatch(case: NetworkCase, p_load, q_load, pg_set, opts: DispatchOptions | None = None,
                      scenario_id: int | None = None) -> DispatchResult:
    """Solve the power flow at fixed set-points and screen the limits."""
    opts = opts or DispatchOptions()
    pg_set = np.asarray(pg_set, dtype=float)
    vset = np.array([g.vset for g in case.generators])
    sol = solve_powerflow(case, p_load, q_load, pg_set, vset, tol=opts.pf_tol, max_iter=opts.pf_max_iter)
    pg_set = pg_set.copy()
    pg_set[case.slack_gen] = sol.pg[case.slack_gen]
    if sol.converged:
        viol = tuple(_violations(case, sol, tol=LIMIT_TOL))
    else:
        viol = (Violation("pf_diverged", "network", sol.max_mismatch),)
    return DispatchResult(pg_set=pg_set, vset=vset, objective=objective_of(case, sol.pg),
                          feasible=not viol, violations=viol, solution=sol, scenario_id=scenario_id)


def economic_start(case: NetworkCase, total_mw: float) -> np.ndarray:
    """Lossless equal-incremental-cost dispatch, used as the search start."""
    b = np.array([g.cost_b for g in case.generators])
    c = np.array([g.cost_c for g in case.generators])
    lo = np.array([g.pmin for g in case.generators])
    hi = np.array([g.pmax for g in case.generators])

    def out(lam):
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(c > 0, (lam - b) / (2 * c), np.where(lam >= b, hi, lo))
        return np.clip(p, lo, hi)

    a, z = float(np.min(b + 2 * c * lo)) - 1.0, float(np.max(b + 2 * c * hi)) + 1.0
    for _ in range(200):
        m = 0.5 * (a + z)
        if out(m).sum() < total_mw:
            a = m
        else:
            z = m
    return out(0.5 * (a + z))


def solve_acopf(case: NetworkCase, p_load, q_load, opts: DispatchOptions | None = None,
                scenario_id: int | None = None, raise_infeasible: bool = False) -> DispatchResult:
    """Minimum-cost limit-respecting dispatch with generator voltages held at their set-points."""
    opts = opts or DispatchOptions()
    p_load = np.asarray(p_load, dtype=float)
    q_load = np.asarray(q_load, dtype=float)
    if np.any(p_load < 0):
        raise ValueError("scenario loads must be non-negative")
    vset = np.array([g.vset for g in case.generators])
    lo = np.array([g.pmin for g in case.generators])
    hi = np.array([g.pmax for g in case.generators])
    free = [k for k in range(len(case.generators)) if k != case.slack_gen]

    evals = 0
    cache: dict[bytes, tuple[float, float, PowerFlowSolution]] = {}

    def evaluate(x):
        nonlocal evals
        key = x.tobytes()
        if key not in cache:
            evals += 1
            sol = solve_powerflow(case, p_load, q_load, x, vset, tol=opts.pf_tol, max_iter=opts.pf_max_iter)
            if not sol.converged:
                cache[key] = (np.inf, np.inf, sol)
            else:
                mags = np.array([v.magnitude * (_VM_SCALE if v.kind.startswith("vm") else 1.0)
                                 for v in _violations(case, sol, margin=opts.margin)])
                cache[key] = (objective_of(case, sol.pg), float(np.sum(mags + mags**2)), sol)
        return cache[key]

    x = economic_start(case, float(p_load.sum()))
    for w in opts.penalties:
        cost, pen, _ = evaluate(x)
        fx = cost + w * pen
        step = opts.step0
        while step >= opts.step_min and evals < opts.max_evals:
            improved = False
            for k in free:
                for sign in (1.0, -1.0):
                    cand = x.copy()
                    cand[k] = min(max(x[k] + sign * step, lo[k]), hi[k])
                    if cand[k] == x[k]:
                        continue
                    c_cost, c_pen, _ = evaluate(cand)
                    fc = c_cost + w * c_pen
                    if fc < fx:
                        x, fx, improved = cand, fc, True
                        break
            if not improved:
                step *= 0.5
        if evaluate(x)[1] == 0.0:
            break

    _, _, sol = evaluate(x)
    if not sol.converged:
        if not any(np.isfinite(v[0]) for v in cache.values()):
            raise Diverged("no converged power flow found for this scenario", solution=sol)
    pg_set = x.copy()
    pg_set[case.slack_gen] = sol.pg[case.slack_gen]
    if sol.converged:
        viol = tuple(_violations(case, sol, tol=LIMIT_TOL))
    else:
        viol = (Violation("pf_diverged", "network", sol.max_mismatch),)
    result = DispatchResult(pg_set=pg_set, vset=vset, objective=objective_of(case, sol.pg),
                            feasible=not viol, violations=viol, solution=sol, scenario_id=scenario_id)
    log.debug("dispatch scenario %s: %d power flows, objective %.4f, feasible=%s",
              scenario_id, evals, result.objective, result.feasible)
    if raise_infeasible and not result.feasible:
        raise Infeasible("no limit-respecting dispatch found", result=result)
    return result
