"""Generator grouping and critical-line screening over fault-scan labels."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, SingularBlock
from .netcase import NetworkCase, branch_sort_key, build_ybus
from .tdsim import StabilityLabel

DEFAULT_GROUP_THRESHOLD = 0.04
DEFAULT_WEAK_FRACTION = 0.8


class EmptyInput(InputError):
    pass


@dataclass(frozen=True)
class GeneratorGrouping:
    groups: tuple[tuple[int, ...], ...]
    machines: tuple[int, ...]
    distance_matrix: np.ndarray


def machine_distances(case: NetworkCase) -> np.ndarray:
    """Inertia-scaled Thevenin impedance between every pair of machine buses.

    d_ij = |Z_ii + Z_jj - 2 Z_ij| * 2 / (H_i + H_j), with Z the inverse of the
    load-free Y-bus (pseudo-inverse when the network has no shunt path).
    """
    y = build_ybus(case)
    try:
        z = np.linalg.inv(y)
    except np.linalg.LinAlgError:
        z = np.linalg.pinv(y)
    if not np.all(np.isfinite(z)):
        raise SingularBlock("load-free network admittance cannot be inverted")
    gidx = case.gen_index
    zg = z[np.ix_(gidx, gidx)]
    diag = np.diag(zg)
    zth = np.abs(diag[:, None] + diag[None, :] - 2 * zg)
    h = case.machine_h()
    d = zth * 2.0 / (h[:, None] + h[None, :])
    np.fill_diagonal(d, 0.0)
    return d


def group_generators(case: NetworkCase, threshold: float = DEFAULT_GROUP_THRESHOLD) -> GeneratorGrouping:
    """Single-linkage agglomeration of machines on inertia-scaled electrical distance."""
    d = machine_distances(case)
    machines = tuple(g.bus for g in case.generators)
    clusters = [{k} for k in range(len(machines))]
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                link = min(d[i, j] for i in clusters[a] for j in clusters[b])
                if best is None or link < best[0]:
                    best = (link, a, b)
        link, a, b = best
        if not link < threshold:
            break
        clusters[a] |= clusters.pop(b)
    groups = sorted(tuple(sorted(machines[k] for k in cl)) for cl in clusters)
    return GeneratorGrouping(groups=tuple(groups), machines=machines, distance_matrix=d)


@dataclass(frozen=True)
class LineStats:
    branch_id: str
    unstable_count: int
    n_scenarios: int
    unstable_ids: tuple[int, ...]
    median_t_instab: float

    @property
    def unstable_fraction(self) -> float:
        return self.unstable_count / self.n_scenarios if self.n_scenarios else 0.0


@dataclass(frozen=True)
class LineCriticalityReport:
    stats: dict[str, LineStats]
    ranking: tuple[str, ...]
    weak_set: tuple[str, ...]
    degenerate: bool = False


def _collect(labels) -> dict[str, list[StabilityLabel]]:
    by_branch: dict[str, list[StabilityLabel]] = defaultdict(list)
    for lab in labels:
        by_branch[lab.branch_id].append(lab)
    if not by_branch:
        raise EmptyInput("no stability labels given")
    return by_branch


def rank_lines(labels, weak_fraction: float = DEFAULT_WEAK_FRACTION) -> LineCriticalityReport:
    """Count unstable scenarios per branch and pick the weak set.

    A branch is weak when its count reaches ``weak_fraction`` of the largest
    count. With no unstable case anywhere, the result is flagged degenerate
    and only the lowest branch id is kept.
    """
    if not 0 < weak_fraction <= 1:
        raise ConfigError("weak_fraction must lie in (0, 1]")
    stats = {}
    for bid, labs in _collect(labels).items():
        bad = [lab for lab in labs if not lab.stable]
        ids = tuple(sorted(lab.scenario_id for lab in bad))
        med = float(np.median([lab.t_instab for lab in bad])) if bad else float("nan")
        stats[bid] = LineStats(bid, len(bad), len(labs), ids, med)
    ranking = tuple(sorted(stats, key=lambda b: (-stats[b].unstable_count, branch_sort_key(b))))
    top = stats[ranking[0]].unstable_count
    if top == 0:
        return LineCriticalityReport(stats, ranking, (ranking[0],), degenerate=True)
    weak = tuple(b for b in ranking if stats[b].unstable_count >= weak_fraction * top)
    return LineCriticalityReport(stats, ranking, weak)


@dataclass(frozen=True)
class SubclassEntry:
    branch_id: str
    unstable_count: int
    containment: float  # nan when the branch has no unstable case
    median_gap: float  # median t_instab(branch) - median t_instab(weakest); nan if undefined

    @property
    def timing_sign(self) -> int:
        return 0 if np.isnan(self.median_gap) else int(np.sign(self.median_gap))


@dataclass(frozen=True)
class SubclassReport:
    weakest: str
    entries: tuple[SubclassEntry, ...]

    @property
    def mean_containment(self) -> float:
        vals = [e.containment for e in self.entries if not np.isnan(e.containment)]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def stiff_slower(self) -> bool:
        """Every branch with unstable cases has a median time no shorter than the weakest."""
        return all(e.median_gap >= 0 for e in self.entries if not np.isnan(e.median_gap))


def check_subclass_property(labels) -> SubclassReport:
    """How far each other branch's unstable scenarios nest inside the weakest branch's.

    Violations are reported as fractions below one, never raised.
    """
    rep = rank_lines(labels)
    if rep.degenerate:
        raise EmptyInput("no unstable cases, so there is no weakest branch")
    weakest = rep.ranking[0]
    if len(rep.ranking) > 1 and rep.stats[rep.ranking[1]].unstable_count == rep.stats[weakest].unstable_count:
        raise EmptyInput("weakest branch is not unique")
    weak_ids = set(rep.stats[weakest].unstable_ids)
    weak_med = rep.stats[weakest].median_t_instab
    entries = []
    for bid in rep.ranking[1:]:
        st = rep.stats[bid]
        if st.unstable_count:
            contained = sum(i in weak_ids for i in st.unstable_ids) / st.unstable_count
            gap = st.median_t_instab - weak_med
        else:
            contained, gap = float("nan"), float("nan")
        entries.append(SubclassEntry(bid, st.unstable_count, contained, gap))
    return SubclassReport(weakest, tuple(entries))
