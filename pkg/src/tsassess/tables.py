"""CSV files exchanged between pipeline stages.

Floats are written with 17 significant digits so every table reads back to
the exact values that produced it. Writes are atomic.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .criticality import LineCriticalityReport, SubclassReport
from .dispatch import DispatchResult, Violation
from .errors import InputError
from .features import Dataset
from .netcase import NetworkCase, branch_sort_key
from .powerflow import PowerFlowSolution, compute_flows
from .scenario import LoadScenario
from .tdsim import StabilityLabel


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.17g}"
    return str(v)


def parse_bool(s: str) -> bool:
    if s == "true":
        return True
    if s == "false":
        return False
    raise InputError(f"expected true/false, got {s!r}")


def write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    write_text(path, buf.getvalue())


def read_csv(path, required=()) -> tuple[list[str], list[dict[str, str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rd = csv.DictReader(fh)
            header = list(rd.fieldnames or [])
            rows = list(rd)
    except FileNotFoundError as exc:
        raise InputError(f"missing input file {path}") from exc
    missing = [c for c in required if c not in header]
    if missing:
        raise InputError(f"{path}: missing columns {', '.join(missing)}")
    for i, r in enumerate(rows, start=2):
        if None in r or any(v is None for v in r.values()):
            raise InputError(f"{path}: line {i} has the wrong number of fields")
    return header, rows


def _num(path, row, col, conv=float):
    try:
        return conv(row[col])
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}: bad value in column {col!r}: {row.get(col)!r}") from exc


# scenarios

def _load_buses(case: NetworkCase) -> list[int]:
    return [ld.bus for ld in sorted(case.loads, key=lambda ld: ld.bus)]


def write_scenarios(path, scenarios: list[LoadScenario], case: NetworkCase) -> None:
    header = ["scenario_id"] + [f"coeff_{b}" for b in _load_buses(case)]
    write_csv(path, header, ([s.id, *s.coeffs] for s in scenarios))


def read_scenarios(path, case: NetworkCase) -> list[LoadScenario]:
    cols = [f"coeff_{b}" for b in _load_buses(case)]
    _, rows = read_csv(path, ["scenario_id", *cols])
    return [LoadScenario(_num(path, r, "scenario_id", int), tuple(_num(path, r, c) for c in cols)) for r in rows]


# operating points

def _op_header(case: NetworkCase) -> list[str]:
    gens = [g.bus for g in case.generators]
    buses = case.bus_ids
    return (["scenario_id", "feasible", "converged", "objective"]
            + [f"pg_set_{b}" for b in gens]
            + [f"p_load_{b}" for b in buses] + [f"q_load_{b}" for b in buses]
            + [f"pg_{b}" for b in gens] + [f"qg_{b}" for b in gens]
            + [f"vm_{b}" for b in buses] + [f"va_{b}" for b in buses]
            + ["p_loss", "iterations", "max_mismatch", "violations"])


def _viol_text(viols) -> str:
    return ";".join(f"{v.kind}|{v.element}|{fmt(v.magnitude)}" for v in viols)


def _viol_parse(text: str) -> tuple[Violation, ...]:
    out = []
    for part in filter(None, text.split(";")):
        kind, element, mag = part.split("|")
        out.append(Violation(kind, element, float(mag)))
    return tuple(out)


def write_operating_points(path, ops: list[DispatchResult], case: NetworkCase) -> None:
    """Angles are in radians, powers in MW/MVAr."""
    rows = []
    for op in sorted(ops, key=lambda o: o.scenario_id):
        s = op.solution
        rows.append([op.scenario_id, op.feasible, s.converged, op.objective, *op.pg_set, *s.p_load, *s.q_load,
                     *s.pg, *s.qg, *s.vm, *s.va, s.p_loss, s.iterations, s.max_mismatch,
                     _viol_text(op.violations)])
    write_csv(path, _op_header(case), rows)


def read_operating_points(path, case: NetworkCase) -> list[DispatchResult]:
    header = _op_header(case)
    _, rows = read_csv(path, header)
    gens = [g.bus for g in case.generators]
    buses = case.bus_ids
    vset = np.array([g.vset for g in case.generators])
    out = []
    for r in rows:
        def vec(prefix, ids):
            return np.array([_num(path, r, f"{prefix}_{i}") for i in ids])
        vm, va = vec("vm", buses), vec("va", buses)
        converged = parse_bool(r["converged"])
        if converged:
            s_from, s_to = compute_flows(case, vm * np.exp(1j * va))
        else:
            s_from = s_to = np.full(len(case.branches), np.nan + 0j)
        sol = PowerFlowSolution(vm=vm, va=va, pg=vec("pg", gens), qg=vec("qg", gens), p_load=vec("p_load", buses),
                                q_load=vec("q_load", buses), p_loss=_num(path, r, "p_loss"),
                                iterations=_num(path, r, "iterations", int), converged=converged,
                                max_mismatch=_num(path, r, "max_mismatch"), s_from=s_from, s_to=s_to)
        try:
            viols = _viol_parse(r["violations"])
        except ValueError as exc:
            raise InputError(f"{path}: bad violations field {r['violations']!r}") from exc
        out.append(DispatchResult(pg_set=vec("pg_set", gens), vset=vset.copy(), objective=_num(path, r, "objective"),
                                  feasible=parse_bool(r["feasible"]), violations=viols, solution=sol,
                                  scenario_id=_num(path, r, "scenario_id", int)))
    return out


# labels

LABEL_HEADER = ["scenario_id", "branch_id", "stable", "t_instab"]


def write_labels(path, labels: list[StabilityLabel]) -> None:
    ordered = sorted(labels, key=lambda lab: (lab.scenario_id, branch_sort_key(lab.branch_id)))
    write_csv(path, LABEL_HEADER, ([lab.scenario_id, lab.branch_id, lab.stable, lab.t_instab] for lab in ordered))


def read_labels(path) -> list[StabilityLabel]:
    _, rows = read_csv(path, LABEL_HEADER)
    return [StabilityLabel(_num(path, r, "scenario_id", int), r["branch_id"], parse_bool(r["stable"]),
                           _num(path, r, "t_instab")) for r in rows]


# criticality

CRITICALITY_HEADER = ["branch_id", "unstable_count", "unstable_fraction", "median_t_instab", "is_weak", "rank",
                      "n_scenarios", "containment", "median_gap"]


def write_criticality(path, report: LineCriticalityReport, sub: SubclassReport | None) -> None:
    entries = {e.branch_id: e for e in sub.entries} if sub else {}
    rows = []
    for k, bid in enumerate(report.ranking, start=1):
        st = report.stats[bid]
        e = entries.get(bid)
        if sub is not None and bid == sub.weakest:
            cont, gap = 1.0, 0.0
        else:
            cont = e.containment if e else float("nan")
            gap = e.median_gap if e else float("nan")
        rows.append([bid, st.unstable_count, st.unstable_fraction, st.median_t_instab, bid in report.weak_set, k,
                     st.n_scenarios, cont, gap])
    write_csv(path, CRITICALITY_HEADER, rows)


def read_criticality(path) -> list[dict]:
    _, rows = read_csv(path, CRITICALITY_HEADER)
    out = []
    for r in rows:
        out.append({"rank": int(r["rank"]), "branch_id": r["branch_id"], "unstable_count": int(r["unstable_count"]),
                    "n_scenarios": int(r["n_scenarios"]), "unstable_fraction": float(r["unstable_fraction"]),
                    "median_t_instab": float(r["median_t_instab"]), "is_weak": parse_bool(r["is_weak"]),
                    "containment": float(r["containment"]), "median_gap": float(r["median_gap"])})
    return out


# dataset

def write_dataset(path, data: Dataset) -> None:
    header = ["scenario_id", *data.feature_names, "stable", "t_instab", "class_label"]
    rows = ([sid, *row, st, t, cl] for sid, row, st, t, cl in
            zip(data.scenario_ids, data.x, data.stable, data.t_instab, data.class_labels))
    write_csv(path, header, rows)


def read_dataset(path) -> Dataset:
    header, rows = read_csv(path, ["scenario_id", "stable", "t_instab", "class_label"])
    names = tuple(h for h in header if h not in ("scenario_id", "stable", "t_instab", "class_label"))
    x = np.array([[_num(path, r, n) for n in names] for r in rows], dtype=float).reshape(len(rows), len(names))
    return Dataset(np.array([_num(path, r, "scenario_id", int) for r in rows], dtype=int), x, names,
                   np.array([parse_bool(r["stable"]) for r in rows], dtype=bool),
                   np.array([_num(path, r, "t_instab") for r in rows], dtype=float),
                   [r["class_label"] for r in rows])
