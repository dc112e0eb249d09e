"""Run configuration: one TOML document plus command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .dispatch import DispatchOptions
from .errors import ConfigError
from .ml.mlp import MlpConfig
from .netcase import NetworkCase, bundled_case_path, load_case
from .scenario import ScenarioConfig
from .tdsim import SimConfig

DEFAULT_CONFIG = Path(__file__).parent / "data" / "default_run.toml"


@dataclass(frozen=True)
class SvmConfig:
    c_grid: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    scale_grid: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    class_costs: tuple[tuple[str, float], ...] = ()
    k_folds: int = 20
    tol: float = 1e-3
    max_iter: int = 100_000


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 42
    bin_width: float = 0.1
    mlp: MlpConfig = field(default_factory=MlpConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)


@dataclass(frozen=True)
class RunConfig:
    case: str = "wscc9"
    line: str = ""
    jobs: int = 1
    training: ScenarioConfig = field(default_factory=ScenarioConfig)
    validation: ScenarioConfig = field(default_factory=lambda: ScenarioConfig(
        n_scenarios=699, coeff_min=0.25, coeff_max=1.85, seed=43))
    sim: SimConfig = field(default_factory=SimConfig)
    t_clear: float = 0.1
    weak_fraction: float = 0.8
    dispatch: DispatchOptions = field(default_factory=DispatchOptions)
    ml: TrainConfig = field(default_factory=TrainConfig)
    base_dir: Path = field(default=Path("."), compare=False)

    def load_case(self) -> NetworkCase:
        return load_case(self.case_path())

    def case_path(self) -> Path:
        p = Path(self.case)
        if not p.is_absolute():
            p = self.base_dir / p
        if p.is_file():
            return p
        bundled = bundled_case_path(self.case)
        if bundled.is_file():
            return bundled
        raise ConfigError(f"case {self.case!r} is neither a file nor a bundled case")

    def validate(self) -> None:
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        self.training.validate()
        self.validation.validate()
        if self.ml.svm.k_folds < 2:
            raise ConfigError("k_folds must be at least 2")
        if not self.ml.svm.c_grid or not self.ml.svm.scale_grid:
            raise ConfigError("SVM grids must be non-empty")
        if self.ml.bin_width <= 0:
            raise ConfigError("bin_width must be positive")
        if self.t_clear < 0:
            raise ConfigError("t_clear must be non-negative")
        self.case_path()


def _take(table: dict, allowed: set[str], where: str) -> dict:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    return table


def _scenario(table: dict, base: ScenarioConfig, where: str) -> ScenarioConfig:
    names = {f.name for f in dataclasses.fields(ScenarioConfig)}
    t = dict(_take(table, names, where))
    if "sum_band" in t:
        band = t["sum_band"]
        if not isinstance(band, list) or len(band) != 2:
            raise ConfigError(f"[{where}] sum_band must be a two-element list")
        t["sum_band"] = (float(band[0]), float(band[1]))
    return dataclasses.replace(base, **t)


def parse_run_config(text: str, base_dir: Path = Path(".")) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed run config: {exc}") from exc
    _take(doc, {"case", "line", "jobs", "training", "validation", "simulation", "criticality", "dispatch", "ml"},
          "top level")
    cfg = RunConfig(base_dir=base_dir)
    try:
        top = {k: doc[k] for k in ("case", "line", "jobs") if k in doc}
        cfg = dataclasses.replace(cfg, **top)
        if "training" in doc:
            cfg = dataclasses.replace(cfg, training=_scenario(doc["training"], cfg.training, "training"))
        if "validation" in doc:
            cfg = dataclasses.replace(cfg, validation=_scenario(doc["validation"], cfg.validation, "validation"))
        if "simulation" in doc:
            sim = dict(_take(doc["simulation"], {f.name for f in dataclasses.fields(SimConfig)} | {"t_clear"},
                             "simulation"))
            t_clear = sim.pop("t_clear", cfg.t_clear)
            cfg = dataclasses.replace(cfg, sim=SimConfig(**sim), t_clear=float(t_clear))
        if "criticality" in doc:
            crit = _take(doc["criticality"], {"weak_fraction"}, "criticality")
            cfg = dataclasses.replace(cfg, weak_fraction=float(crit.get("weak_fraction", cfg.weak_fraction)))
        if "dispatch" in doc:
            d = dict(_take(doc["dispatch"], {f.name for f in dataclasses.fields(DispatchOptions)}, "dispatch"))
            if "penalties" in d:
                d["penalties"] = tuple(d["penalties"])
            cfg = dataclasses.replace(cfg, dispatch=DispatchOptions(**d))
        if "ml" in doc:
            ml = dict(_take(doc["ml"], {"seed", "bin_width", "mlp", "svm"}, "ml"))
            mlp = MlpConfig(**_take(ml.pop("mlp", {}), {f.name for f in dataclasses.fields(MlpConfig)}, "ml.mlp"))
            s = dict(_take(ml.pop("svm", {}), {f.name for f in dataclasses.fields(SvmConfig)}, "ml.svm"))
            for k in ("c_grid", "scale_grid"):
                if k in s:
                    s[k] = tuple(float(v) for v in s[k])
            if "class_costs" in s:
                s["class_costs"] = tuple(sorted((str(k), float(v)) for k, v in s["class_costs"].items()))
            cfg = dataclasses.replace(cfg, ml=TrainConfig(mlp=mlp, svm=SvmConfig(**s), **ml))
    except TypeError as exc:
        raise ConfigError(f"bad run config value: {exc}") from exc
    return cfg


def load_run_config(path=None) -> RunConfig:
    path = Path(path) if path is not None else DEFAULT_CONFIG
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    base = path.parent if path != DEFAULT_CONFIG else Path(".")
    return parse_run_config(text, base)


def with_overrides(cfg: RunConfig, case=None, seed=None, jobs=None, line=None, tau=None) -> RunConfig:
    """Apply command-line flags. ``seed`` seeds training scenarios and learning;
    validation scenarios use ``seed + 1``."""
    if case is not None:
        cfg = dataclasses.replace(cfg, case=str(case), base_dir=Path("."))
    if seed is not None:
        cfg = dataclasses.replace(cfg, training=dataclasses.replace(cfg.training, seed=seed),
                                  validation=dataclasses.replace(cfg.validation, seed=seed + 1),
                                  ml=dataclasses.replace(cfg.ml, seed=seed))
    if jobs is not None:
        cfg = dataclasses.replace(cfg, jobs=jobs)
    if line is not None:
        cfg = dataclasses.replace(cfg, line=line)
    if tau is not None:
        cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, tau_response=tau))
    return cfg
