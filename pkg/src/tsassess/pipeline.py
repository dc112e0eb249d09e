"""Pipeline stages. Each stage reads and writes the CSV tables in ``tables``."""

from __future__ import annotations

import hashlib
import logging
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tables
from .config import RunConfig, TrainConfig
from .criticality import EmptyInput, check_subclass_property, rank_lines
from .dispatch import DispatchOptions, DispatchResult, Violation, solve_acopf
from .errors import ConfigError, Diverged, Infeasible, InputError
from .evalreport import EvalReport, evaluate, summarize
from .features import Dataset, build_dataset, fit_standardizer
from .ml.cv import cross_validate, grid_search
from .ml.knn import knn_trainer
from .ml.mlp import train_mlp
from .ml.persist import TrainedModels, load_model, save_model
from .ml.svm import train_svm_ovo
from .netcase import NetworkCase
from .powerflow import solve_powerflow
from .scenario import LoadScenario, ScenarioConfig, apply_scenario, generate_scenarios
from .tdsim import STABLE, FaultSpec, SimConfig, StabilityLabel, default_fault_scan, label_batch

log = logging.getLogger(__name__)

STAGE_FILES = ("scenarios.csv", "operating_points.csv", "labels.csv", "criticality_report.csv", "dataset.csv")


# scenarios and dispatch

def run_scenarios(case: NetworkCase, cfg: ScenarioConfig, out: Path) -> list[LoadScenario]:
    scen = generate_scenarios(cfg, case)
    tables.write_scenarios(out, scen, case)
    return scen


def _diverged_result(case: NetworkCase, p, q, sid: int, exc: Diverged) -> DispatchResult:
    sol = exc.solution
    if sol is None:
        sol = solve_powerflow(case, p, q, np.array([g.pmin for g in case.generators]))
    nan = np.full(len(case.generators), np.nan)
    return DispatchResult(pg_set=nan, vset=np.array([g.vset for g in case.generators]), objective=float("nan"),
                          feasible=False, violations=(Violation("pf_diverged", "network", sol.max_mismatch),),
                          solution=sol, scenario_id=sid)


def dispatch_all(case: NetworkCase, scenarios: list[LoadScenario], opts: DispatchOptions) -> list[DispatchResult]:
    """Optimal dispatch per scenario. Scenarios without any converging power flow are kept as infeasible rows."""
    ops = []
    for s in scenarios:
        p, q = apply_scenario(case, s)
        try:
            ops.append(solve_acopf(case, p, q, opts, scenario_id=s.id))
        except Diverged as exc:
            log.warning("scenario %d: %s", s.id, exc)
            ops.append(_diverged_result(case, p, q, s.id, exc))
    n_ok = sum(op.feasible for op in ops)
    log.info("dispatch: %d of %d scenarios feasible", n_ok, len(ops))
    if ops and n_ok == 0:
        raise Infeasible("no scenario has a feasible dispatch", None)
    return ops


def run_dispatch(case: NetworkCase, scenarios_csv: Path, out: Path, opts: DispatchOptions) -> list[DispatchResult]:
    ops = dispatch_all(case, tables.read_scenarios(scenarios_csv, case), opts)
    tables.write_operating_points(out, ops, case)
    return ops


# simulation

def fault_scan(case: NetworkCase, t_clear: float, branches=None) -> list[FaultSpec]:
    scan = default_fault_scan(case, t_clear)
    if branches:
        known = {f.branch_id for f in scan}
        ids = [case.branch(b).id for b in branches]
        missing = [b for b in ids if b not in known]
        if missing:
            raise InputError(f"unknown branches {missing}")
        scan = [f for f in scan if f.branch_id in ids]
    return scan


def _simulate_one(args) -> list[StabilityLabel]:
    case, ops, fault, sim = args
    t = label_batch(case, [op.solution for op in ops], fault, sim)
    return [StabilityLabel(op.scenario_id, fault.branch_id, bool(ti == STABLE), float(ti)) for op, ti in zip(ops, t)]


def simulate_all(case: NetworkCase, ops: list[DispatchResult], scan: list[FaultSpec], sim: SimConfig,
                 jobs: int = 1) -> list[StabilityLabel]:
    """Label every feasible operating point under every fault of the scan."""
    usable = sorted((op for op in ops if op.feasible and op.solution.converged), key=lambda o: o.scenario_id)
    if not usable:
        raise Infeasible("no feasible operating point to simulate", None)
    tasks = [(case, usable, f, sim) for f in scan]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_simulate_one, tasks))
    else:
        parts = [_simulate_one(t) for t in tasks]
    return [lab for part in parts for lab in part]


def run_simulate(case: NetworkCase, ops_csv: Path, out: Path, sim: SimConfig, t_clear: float,
                 branches=None, jobs: int = 1) -> list[StabilityLabel]:
    labels = simulate_all(case, tables.read_operating_points(ops_csv, case), fault_scan(case, t_clear, branches),
                          sim, jobs)
    tables.write_labels(out, labels)
    return labels


# ranking and datasets

def run_rank(labels_csv: Path, out: Path, weak_fraction: float = 0.8):
    labels = tables.read_labels(labels_csv)
    rep = rank_lines(labels, weak_fraction)
    try:
        sub = None if rep.degenerate else check_subclass_property(labels)
    except EmptyInput as exc:
        log.warning("subclass check skipped: %s", exc)
        sub = None
    tables.write_criticality(out, rep, sub)
    return rep, sub


def run_dataset(case: NetworkCase, ops_csv: Path, labels_csv: Path, line: str, out: Path,
                bin_width: float = 0.1) -> Dataset:
    line = case.branch(line).id
    data = build_dataset(case, tables.read_operating_points(ops_csv, case), tables.read_labels(labels_csv), line,
                         bin_width)
    if len(data) == 0:
        raise Infeasible(f"dataset for {line} is empty", None)
    tables.write_dataset(out, data)
    return data


# learning

@dataclass
class TrainOutcome:
    models: TrainedModels
    log_text: str


def train_models(data: Dataset, cfg: TrainConfig, line: str, jobs: int = 1) -> TrainOutcome:
    """Fit the standardizer, the stability MLP on every row and the time-class SVM on unstable rows."""
    std = fit_standardizer(data.x)
    xs = std.transform(data.x)
    mlp = train_mlp(xs, data.stable, cfg.mlp, seed=cfg.seed)
    mlp_acc = float(np.mean((mlp.score(xs) >= 0.5) == data.stable))
    lines = [f"line: {line}", f"rows: {len(data)}", f"unstable rows: {int((~data.stable).sum())}",
             f"mlp optimizer: {cfg.mlp.optimizer}", f"mlp accepted steps: {mlp.meta['epochs']}",
             f"mlp final loss: {mlp.meta['final_loss']:.17g}", f"mlp training accuracy: {mlp_acc:.17g}"]
    un = data.unstable()
    svm = None
    meta = {"mlp_training_accuracy": mlp_acc, "line": line}
    if len(set(un.class_labels)) >= 2:
        xu = std.transform(un.x)
        k = cfg.svm.k_folds
        grid = grid_search(xu, un.class_labels, k=k, seed=cfg.seed, c_grid=cfg.svm.c_grid,
                           scale_grid=cfg.svm.scale_grid, class_costs=cfg.svm.class_costs, tol=cfg.svm.tol,
                           max_iter=cfg.svm.max_iter, jobs=jobs)
        svm = train_svm_ovo(xu, un.class_labels, grid.best, std, base_scale=grid.base_scale)
        svm_acc = float(np.mean(np.array(svm.predict_many(xu)[0]) == np.array(un.class_labels)))
        knn_cv = cross_validate(xu, un.class_labels, k, cfg.seed, knn_trainer(1)).mean_accuracy
        lines += [f"svm kernel base scale: {grid.base_scale:.17g}", f"svm {k}-fold grid:",
                  "  C  scale_multiplier  cv_accuracy"]
        lines += [f"  {p.c:g}  {p.scale_multiplier:g}  {p.cv_accuracy:.17g}" for p in grid.points]
        lines += [f"svm best: C={grid.best.c:g} scale_multiplier={grid.best.scale_multiplier:g} "
                  f"cv_accuracy={grid.best_accuracy:.17g}",
                  f"svm training accuracy: {svm_acc:.17g}",
                  f"1-nn {k}-fold cv accuracy: {knn_cv:.17g}"]
        lines += [f"warning: {w}" for w in svm.warnings]
        meta.update({"svm_cv_accuracy": grid.best_accuracy, "svm_training_accuracy": svm_acc,
                     "knn_cv_accuracy": knn_cv, "svm_c": grid.best.c,
                     "svm_scale_multiplier": grid.best.scale_multiplier})
    else:
        lines.append("svm skipped: fewer than two time classes among unstable rows")
    models = TrainedModels(line, data.feature_names, std, mlp, svm, meta)
    return TrainOutcome(models, "\n".join(lines) + "\n")


def run_train(dataset_csv: Path, cfg: TrainConfig, model_out: Path, log_out: Path | None = None,
              jobs: int = 1, line: str = "") -> TrainOutcome:
    data = tables.read_dataset(dataset_csv)
    outcome = train_models(data, cfg, line, jobs)
    model_out.parent.mkdir(parents=True, exist_ok=True)
    save_model(outcome.models, model_out)
    if log_out is not None:
        tables.write_text(log_out, outcome.log_text)
    return outcome


def evaluate_models(models: TrainedModels, data: Dataset) -> EvalReport:
    if tuple(data.feature_names) != tuple(models.feature_names):
        raise InputError("dataset features do not match the model")
    xs = models.standardizer.transform(data.x)
    if models.mlp is None:
        raise InputError("model file holds no stability classifier")
    pred_stable = models.mlp.score(xs) >= 0.5 if len(data) else np.zeros(0, dtype=bool)
    un = ~data.stable
    if models.svm is not None and un.any():
        pred_cls, vocab = models.svm.predict_many(xs[un])[0], models.svm.vocabulary
    else:
        pred_cls, vocab = [], []
    return evaluate(data.scenario_ids, data.stable, pred_stable, data.class_labels, pred_cls, data.t_instab, vocab)


def run_eval(model_path: Path, dataset_csv: Path, out_dir: Path, title: str = "Evaluation report") -> EvalReport:
    models = load_model(model_path)
    rep = evaluate_models(models, tables.read_dataset(dataset_csv))
    extra = [f"Model line: {models.line}"]
    summarize(rep, out_dir, title, extra)
    return rep


# end to end

def _stage_set(case: NetworkCase, cfg: RunConfig, scen_cfg: ScenarioConfig, d: Path, line: str | None):
    run_scenarios(case, scen_cfg, d / "scenarios.csv")
    run_dispatch(case, d / "scenarios.csv", d / "operating_points.csv", cfg.dispatch)
    run_simulate(case, d / "operating_points.csv", d / "labels.csv", cfg.sim, cfg.t_clear, jobs=cfg.jobs)
    rep, sub = run_rank(d / "labels.csv", d / "criticality_report.csv", cfg.weak_fraction)
    if line is None:
        line = rep.ranking[0]
    run_dataset(case, d / "operating_points.csv", d / "labels.csv", line, d / "dataset.csv", cfg.ml.bin_width)
    return line


def write_manifest(root: Path) -> None:
    rows = []
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "MANIFEST.csv":
            data = p.read_bytes()
            rows.append([p.relative_to(root).as_posix(), len(data), hashlib.sha256(data).hexdigest()])
    tables.write_csv(root / "MANIFEST.csv", ["file", "bytes", "sha256"], rows)


def reproduce(cfg: RunConfig, out: Path) -> Path:
    """Run every stage for the training and validation sets into ``out``.

    Work happens in a scratch directory next to ``out`` that replaces it only
    on success; a failed run leaves no partial tree. An existing ``out`` is
    replaced only when it holds a previous run (has a MANIFEST.csv) or is empty.
    """
    cfg.validate()
    out = Path(out)
    if out.exists() and (not out.is_dir() or (any(out.iterdir()) and not (out / "MANIFEST.csv").is_file())):
        raise ConfigError(f"refusing to overwrite {out}: not an earlier run directory")
    case = cfg.load_case()
    out.parent.mkdir(parents=True, exist_ok=True)
    work = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        line = _stage_set(case, cfg, cfg.training, work / "training", case.branch(cfg.line).id if cfg.line else None)
        _stage_set(case, cfg, cfg.validation, work / "validation", line)
        run_train(work / "training" / "dataset.csv", cfg.ml, work / "model.json", work / "training_log.txt",
                  cfg.jobs, line)
        run_eval(work / "model.json", work / "training" / "dataset.csv", work / "evaluation_training",
                 "Training-set evaluation")
        run_eval(work / "model.json", work / "validation" / "dataset.csv", work / "evaluation",
                 "Validation-set evaluation")
        write_manifest(work)
        if out.exists():
            shutil.rmtree(out)
        work.rename(out)
    except BaseException:
        shutil.rmtree(work, ignore_errors=True)
        raise
    return out
