"""Static network model: case-file parsing, validation and Y-bus assembly."""

from __future__ import annotations

import re
from dataclasses import MISSING, asdict, dataclass, fields
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .errors import CaseSyntaxError, InvariantError, RefError

BUS_KINDS = ("slack", "pv", "pq")


def branch_key(f: int, t: int) -> str:
    """Canonical branch id, lower bus number first."""
    return f"{min(f, t)}-{max(f, t)}"


def branch_sort_key(branch_id: str):
    a, b = branch_id.split("-")
    return int(a), int(b)


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    base_kv: float
    vmin: float = 0.9
    vmax: float = 1.1
    shunt_g: float = 0.0
    shunt_b: float = 0.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    tap: float = 1.0
    rating: float = 9999.0

    @property
    def id(self) -> str:
        return branch_key(self.from_bus, self.to_bus)

    @property
    def series_admittance(self) -> complex:
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class Generator:
    bus: int
    pmin: float
    pmax: float
    qmin: float
    qmax: float
    vset: float
    cost_a: float
    cost_b: float
    cost_c: float
    inertia_h: float
    xdp: float
    damping_d: float = 0.0
    mbase: float | None = None

    def cost(self, pg):
        return self.cost_a + self.cost_b * pg + self.cost_c * pg * pg


@dataclass(frozen=True)
class LoadSpec:
    bus: int
    p_base: float
    q_base: float


@dataclass(frozen=True)
class NetworkCase:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    loads: tuple[LoadSpec, ...]
    name: str = ""

    @cached_property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @cached_property
    def slack_index(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.kind == "slack")

    @cached_property
    def gen_index(self) -> np.ndarray:
        """Bus position of every generator, in generator order."""
        return np.array([self.bus_index[g.bus] for g in self.generators], dtype=int)

    @cached_property
    def slack_gen(self) -> int:
        return next(k for k, g in enumerate(self.generators) if self.bus_index[g.bus] == self.slack_index)

    def branch(self, branch_id: str) -> Branch:
        for br in self.branches:
            if br.id == branch_id:
                return br
        raise RefError(f"unknown branch {branch_id!r}")

    @property
    def branch_ids(self) -> list[str]:
        return [br.id for br in self.branches]

    def machine_h(self) -> np.ndarray:
        """Inertia constants on the system base (s)."""
        return np.array([g.inertia_h * _mbase(g, self) / self.base_mva for g in self.generators])

    def machine_xdp(self) -> np.ndarray:
        """Transient reactances on the system base (pu)."""
        return np.array([g.xdp * self.base_mva / _mbase(g, self) for g in self.generators])

    def machine_d(self) -> np.ndarray:
        return np.array([g.damping_d * _mbase(g, self) / self.base_mva for g in self.generators])

    def base_loads(self) -> tuple[np.ndarray, np.ndarray]:
        """Benchmark per-bus load (MW, MVAr)."""
        p = np.zeros(len(self.buses))
        q = np.zeros(len(self.buses))
        for ld in self.loads:
            p[self.bus_index[ld.bus]] += ld.p_base
            q[self.bus_index[ld.bus]] += ld.q_base
        return p, q


def _mbase(gen: Generator, case: NetworkCase) -> float:
    return case.base_mva if gen.mbase is None else gen.mbase


_SECTIONS = {"buses": Bus, "branches": Branch, "generators": Generator, "loads": LoadSpec}
_TOP_KEYS = {"name", "base_mva", *_SECTIONS}


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*\"?{re.escape(key)}\"?\s*=")
    for n, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return n
    return None


def _build_record(cls, raw, text, section, pos):
    if not isinstance(raw, dict):
        raise CaseSyntaxError(f"{section}[{pos}] must be a table", field=section)
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise CaseSyntaxError(f"unknown key in {section}[{pos}]", line=_line_of(text, key), field=key)
    required = {f.name for f in fields(cls) if f.default is MISSING}
    for key in required:
        if key not in raw:
            raise CaseSyntaxError(f"missing key in {section}[{pos}]", field=key)
    kwargs = {}
    for f in fields(cls):
        if f.name not in raw:
            continue
        val = raw[f.name]
        if f.name in ("id", "bus", "from_bus", "to_bus"):
            if not isinstance(val, int) or isinstance(val, bool):
                raise CaseSyntaxError(f"{section}[{pos}] expects an integer", line=_line_of(text, f.name), field=f.name)
        elif f.name == "kind":
            if val not in BUS_KINDS:
                raise CaseSyntaxError(f"bus kind must be one of {BUS_KINDS}", line=_line_of(text, f.name), field=f.name)
        elif isinstance(val, bool) or not isinstance(val, (int, float)):
            raise CaseSyntaxError(f"{section}[{pos}] expects a number", line=_line_of(text, f.name), field=f.name)
        else:
            val = float(val)
        kwargs[f.name] = val
    return cls(**kwargs)


def parse_case(text: str) -> NetworkCase:
    """Parse and validate a TOML case document."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise CaseSyntaxError(f"malformed case document: {exc}", line=int(m.group(1)) if m else None) from exc
    for key in doc:
        if key not in _TOP_KEYS:
            raise CaseSyntaxError("unknown top-level key", line=_line_of(text, key), field=key)
    if "base_mva" not in doc:
        raise CaseSyntaxError("missing key", field="base_mva")
    base = doc["base_mva"]
    if isinstance(base, bool) or not isinstance(base, (int, float)) or base <= 0:
        raise CaseSyntaxError("base_mva must be a positive number", line=_line_of(text, "base_mva"), field="base_mva")
    parts = {}
    for section, cls in _SECTIONS.items():
        raw = doc.get(section, [])
        if not isinstance(raw, list):
            raise CaseSyntaxError("expected an array of records", field=section)
        parts[section] = tuple(_build_record(cls, r, text, section, i) for i, r in enumerate(raw))
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise CaseSyntaxError("name must be a string", field="name")
    case = NetworkCase(base_mva=float(base), name=name, **parts)
    validate_case(case)
    return case


def validate_case(case: NetworkCase) -> None:
    ids = [b.id for b in case.buses]
    if not ids:
        raise InvariantError("case has no buses")
    if len(set(ids)) != len(ids):
        raise InvariantError("bus ids are not unique")
    known = set(ids)
    for b in case.buses:
        if b.id <= 0:
            raise InvariantError(f"bus id {b.id} is not positive")
        if not 0 < b.vmin <= b.vmax:
            raise InvariantError(f"bus {b.id}: require 0 < vmin <= vmax")
    n_slack = sum(b.kind == "slack" for b in case.buses)
    if n_slack != 1:
        raise InvariantError(f"expected exactly one slack bus, found {n_slack}")

    seen = set()
    for br in case.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                raise RefError(f"branch {br.from_bus}-{br.to_bus} references missing bus {end}")
        if br.from_bus == br.to_bus:
            raise InvariantError(f"branch {br.id} connects a bus to itself")
        if br.x == 0:
            raise InvariantError(f"branch {br.id} has zero reactance")
        if br.rating <= 0:
            raise InvariantError(f"branch {br.id} has non-positive rating")
        if br.tap <= 0:
            raise InvariantError(f"branch {br.id} has non-positive tap")
        if br.id in seen:
            raise InvariantError(f"duplicate branch {br.id} (parallel branches are not supported)")
        seen.add(br.id)

    gen_buses = set()
    for g in case.generators:
        if g.bus not in known:
            raise RefError(f"generator references missing bus {g.bus}")
        if g.bus in gen_buses:
            raise InvariantError(f"more than one generator at bus {g.bus}")
        gen_buses.add(g.bus)
        if g.pmin > g.pmax:
            raise InvariantError(f"generator {g.bus}: pmin > pmax")
        if g.qmin > g.qmax:
            raise InvariantError(f"generator {g.bus}: qmin > qmax")
        if g.inertia_h <= 0 or g.xdp <= 0:
            raise InvariantError(f"generator {g.bus}: inertia_h and xdp must be positive")
        if g.mbase is not None and g.mbase <= 0:
            raise InvariantError(f"generator {g.bus}: mbase must be positive")
    for b in case.buses:
        if b.kind in ("slack", "pv") and b.id not in gen_buses:
            raise InvariantError(f"{b.kind} bus {b.id} has no generator")
        if b.kind == "pq" and b.id in gen_buses:
            raise InvariantError(f"pq bus {b.id} carries a generator")
    for ld in case.loads:
        if ld.bus not in known:
            raise RefError(f"load references missing bus {ld.bus}")
        if ld.p_base < 0:
            raise InvariantError(f"load at bus {ld.bus} has negative p_base")

    if not is_connected(case):
        raise InvariantError("network graph is not connected")


def is_connected(case: NetworkCase, exclude: str | None = None) -> bool:
    return len(connected_component(case, case.buses[0].id, exclude)) == len(case.buses)


def connected_component(case: NetworkCase, start: int, exclude: str | None = None) -> set[int]:
    adj: dict[int, set[int]] = {b.id: set() for b in case.buses}
    for br in case.branches:
        if br.id == exclude:
            continue
        adj[br.from_bus].add(br.to_bus)
        adj[br.to_bus].add(br.from_bus)
    seen, stack = {start}, [start]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen


def serialize_case(case: NetworkCase) -> str:
    doc = {"name": case.name, "base_mva": case.base_mva}
    for section in _SECTIONS:
        recs = []
        for rec in getattr(case, section):
            d = asdict(rec)
            recs.append({k: v for k, v in d.items() if v is not None})
        doc[section] = recs
    return tomli_w.dumps(doc)


def load_case(path) -> NetworkCase:
    return parse_case(Path(path).read_text(encoding="utf-8"))


def bundled_case_path(name: str = "wscc9") -> Path:
    return Path(str(resources.files("tsassess") / "data" / f"{name}.case"))


def load_bundled_case(name: str = "wscc9") -> NetworkCase:
    return load_case(bundled_case_path(name))


def build_ybus(case: NetworkCase, exclude: str | None = None) -> np.ndarray:
    """Dense bus admittance matrix (pu), optionally without one branch."""
    if exclude is not None:
        case.branch(exclude)
    n = len(case.buses)
    idx = case.bus_index
    y = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        if br.id == exclude:
            continue
        f, t = idx[br.from_bus], idx[br.to_bus]
        ys = br.series_admittance
        ysh = 0.5j * br.b_charging
        y[f, f] += (ys + ysh) / br.tap**2
        y[t, t] += ys + ysh
        y[f, t] -= ys / br.tap
        y[t, f] -= ys / br.tap
    for i, b in enumerate(case.buses):
        y[i, i] += complex(b.shunt_g, b.shunt_b)
    return y
