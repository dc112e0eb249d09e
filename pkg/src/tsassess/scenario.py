"""Seeded, stratified load-scenario generation around benchmark loads."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LengthMismatch
from .netcase import NetworkCase

_MAX_DRAWS = 1000


@dataclass(frozen=True)
class ScenarioConfig:
    n_scenarios: int = 455
    coeff_min: float = 0.3
    coeff_max: float = 1.7
    sum_band: tuple[float, float] = (0.7, 1.7)
    seed: int = 42
    strata: int = 10

    def validate(self) -> None:
        lo, hi = self.sum_band
        if self.n_scenarios < 1:
            raise ConfigError("n_scenarios must be at least 1")
        if not 0 < self.coeff_min <= self.coeff_max:
            raise ConfigError("require 0 < coeff_min <= coeff_max")
        if lo > hi:
            raise ConfigError("sum_band low bound exceeds high bound")
        if lo < self.coeff_min or hi > self.coeff_max:
            raise ConfigError("sum_band must lie within [coeff_min, coeff_max]; feasible region is empty")
        if self.strata < 1:
            raise ConfigError("strata must be at least 1")


@dataclass(frozen=True)
class LoadScenario:
    id: int
    coeffs: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.coeffs))


def stratum_edges(config: ScenarioConfig) -> np.ndarray:
    lo, hi = config.sum_band
    return np.linspace(lo, hi, config.strata + 1)


def _draw(rng, n_loads, cmin, cmax, lo, hi):
    """One coefficient vector with mean in [lo, hi].

    The first n-1 coefficients are uniform; the last one is drawn uniformly
    from the interval that puts the mean inside the band, redrawing the
    others only when that interval is empty. Thin bands that keep failing
    fall back to drawing every coefficient from its still-feasible interval.
    """
    for _ in range(_MAX_DRAWS):
        head = rng.uniform(cmin, cmax, size=n_loads - 1)
        s = float(head.sum())
        a = max(cmin, n_loads * lo - s)
        b = min(cmax, n_loads * hi - s)
        if a > b:
            continue
        last = a if a == b else float(rng.uniform(a, b))
        coeffs = np.append(head, min(max(last, cmin), cmax))
        m = float(np.mean(coeffs))
        if lo <= m <= hi:
            return coeffs
    return _draw_sequential(rng, n_loads, cmin, cmax, lo, hi)


def _draw_sequential(rng, n_loads, cmin, cmax, lo, hi):
    coeffs = np.empty(n_loads)
    s = 0.0
    for i in range(n_loads):
        rest = n_loads - 1 - i
        a = max(cmin, n_loads * lo - s - rest * cmax)
        b = min(cmax, n_loads * hi - s - rest * cmin)
        if a > b + 1e-12:
            raise ConfigError(f"could not place a scenario with mean in [{lo}, {hi}]")
        c = a if a >= b else float(rng.uniform(a, b))
        coeffs[i] = min(max(c, cmin), cmax)
        s += coeffs[i]
    m = float(np.mean(coeffs))
    if not lo - 1e-12 <= m <= hi + 1e-12:
        raise ConfigError(f"could not place a scenario with mean in [{lo}, {hi}]")
    return coeffs


def generate_scenarios(config: ScenarioConfig, case: NetworkCase) -> list[LoadScenario]:
    """Draw ``n_scenarios`` coefficient vectors, spread evenly over the loading strata.

    Scenario ``i`` belongs to stratum ``i % strata``, so every stratum holds
    floor(n/strata) or ceil(n/strata) scenarios and the sequence alternates
    between light and heavy loading.
    """
    config.validate()
    n_loads = len(case.loads)
    if n_loads < 1:
        raise ConfigError("case has no loads")
    edges = stratum_edges(config)
    rng = np.random.default_rng(config.seed)
    out = []
    for i in range(config.n_scenarios):
        k = i % config.strata
        coeffs = _draw(rng, n_loads, config.coeff_min, config.coeff_max, edges[k], edges[k + 1])
        out.append(LoadScenario(id=i, coeffs=tuple(float(c) for c in coeffs)))
    return out


def apply_scenario(case: NetworkCase, s: LoadScenario) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus MW/MVAr for a scenario (constant power factor)."""
    if len(s.coeffs) != len(case.loads):
        raise LengthMismatch(f"scenario {s.id} has {len(s.coeffs)} coefficients, case has {len(case.loads)} loads")
    p = np.zeros(len(case.buses))
    q = np.zeros(len(case.buses))
    for ld, c in zip(sorted(case.loads, key=lambda ld: ld.bus), s.coeffs):
        p[case.bus_index[ld.bus]] += c * ld.p_base
        q[case.bus_index[ld.bus]] += c * ld.q_base
    return p, q
