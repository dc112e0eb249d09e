"""Classifier inputs: feature extraction, standardisation, time-class binning, datasets."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .dispatch import DispatchResult
from .errors import InputError, LengthMismatch, NonFinite
from .netcase import NetworkCase
from .tdsim import StabilityLabel

log = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH = 0.1


class UnknownBranch(InputError):
    pass


class LineNotInLabels(InputError):
    pass


class NotUnstable(InputError):
    pass


class TooFewRows(InputError):
    pass


def feature_names(case: NetworkCase) -> list[str]:
    names = []
    for ld in sorted(case.loads, key=lambda ld: ld.bus):
        names += [f"p_load_{ld.bus}", f"q_load_{ld.bus}"]
    for g in sorted(case.generators, key=lambda g: g.bus):
        names += [f"p_gen_{g.bus}", f"q_gen_{g.bus}"]
    return names + ["vm_from", "va_from", "vm_to", "va_to", "cost"]


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray


def extract_features(case: NetworkCase, op: DispatchResult, line: str) -> FeatureVector:
    """Static pre-fault quantities of one operating point, in canonical order.

    Load and generator P/Q by ascending bus id, then voltage magnitude and
    angle (rad) at the from and to ends of ``line``, then the dispatch cost.
    """
    sol = op.solution
    if not sol.converged:
        raise InputError("operating point has no converged power flow")
    try:
        br = case.branch(line)
    except KeyError as exc:
        raise UnknownBranch(f"unknown branch {line!r}") from exc
    idx = case.bus_index
    vals = []
    for ld in sorted(case.loads, key=lambda ld: ld.bus):
        i = idx[ld.bus]
        vals += [sol.p_load[i], sol.q_load[i]]
    order = sorted(range(len(case.generators)), key=lambda k: case.generators[k].bus)
    for k in order:
        vals += [sol.pg[k], sol.qg[k]]
    f, t = idx[br.from_bus], idx[br.to_bus]
    vals += [sol.vm[f], sol.va[f], sol.vm[t], sol.va[t], op.objective]
    values = np.array(vals, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NonFinite(f"non-finite feature in scenario {op.scenario_id}")
    return FeatureVector(tuple(feature_names(case)), values)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.mean.shape[0]:
            raise LengthMismatch(f"expected {self.mean.shape[0]} features, got {x.shape[-1]}")
        return (x - self.mean) / self.std


def fit_standardizer(x) -> Standardizer:
    """Per-column z-score statistics; near-constant columns pass through unscaled."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise TooFewRows("at least two rows are needed to fit a standardizer")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return Standardizer(mean, std)


def transform(s: Standardizer, x) -> np.ndarray:
    return s.transform(x)


def bin_time_label(t_instab: float, width: float = DEFAULT_BIN_WIDTH) -> str:
    """Round a time of instability to the nearest multiple of ``width`` (ties up)."""
    if not t_instab > 0:
        raise NotUnstable("only unstable cases (t_instab > 0) carry a time class")
    w = Decimal(repr(width))
    k = (Decimal(repr(float(t_instab))) / w).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    places = max(1, -w.normalize().as_tuple().exponent)
    return f"{float(k * w):.{places}f}"


def label_sort_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


@dataclass
class Dataset:
    scenario_ids: np.ndarray
    x: np.ndarray
    feature_names: tuple[str, ...]
    stable: np.ndarray
    t_instab: np.ndarray
    class_labels: list[str]
    standardizer: Standardizer | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.scenario_ids)

    @property
    def vocabulary(self) -> list[str]:
        return sorted({c for c in self.class_labels if c}, key=label_sort_key)

    def unstable(self) -> "Dataset":
        keep = ~self.stable
        return Dataset(self.scenario_ids[keep], self.x[keep], self.feature_names, self.stable[keep],
                       self.t_instab[keep], [c for c, k in zip(self.class_labels, keep) if k], self.standardizer)


def build_dataset(case: NetworkCase, ops: list[DispatchResult], labels: list[StabilityLabel], line: str,
                  bin_width: float = DEFAULT_BIN_WIDTH) -> Dataset:
    """One row per labelled scenario that has a feasible operating point."""
    mine = {lab.scenario_id: lab for lab in labels if lab.branch_id == line}
    if not mine:
        raise LineNotInLabels(f"no labels for branch {line!r}")
    by_id = {op.scenario_id: op for op in ops}
    rows, ids, stable, times, classes = [], [], [], [], []
    for sid in sorted(mine):
        op = by_id.get(sid)
        if op is None:
            log.info("scenario %d skipped: no operating point", sid)
            continue
        if not op.feasible:
            log.info("scenario %d skipped: infeasible dispatch", sid)
            continue
        lab = mine[sid]
        rows.append(extract_features(case, op, line).values)
        ids.append(sid)
        stable.append(lab.stable)
        times.append(lab.t_instab)
        classes.append("" if lab.stable else bin_time_label(lab.t_instab, bin_width))
    names = tuple(feature_names(case))
    x = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return Dataset(np.array(ids, dtype=int), x, names, np.array(stable, dtype=bool),
                   np.array(times, dtype=float), classes)
