"""Command-line entry point.

Exit codes: 0 ok, 2 configuration or usage, 3 input schema, 4 numerical
failure, 5 infeasible stage.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import pipeline, tables
from .config import RunConfig, load_run_config, with_overrides
from .errors import ConfigError, InputError, TsaError
from .features import extract_features
from .ml.mlp import predict_mlp
from .ml.persist import load_model
from .ml.svm import predict_svm
from .netcase import load_case, validate_case

log = logging.getLogger("tsassess")


def _fail(stage: str, message: str, code: int):
    click.echo(f"error [{stage}]: {message}", err=True)
    sys.exit(code)


def stage(name: str):
    """Map library errors onto exit codes with a stage-tagged message."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except TsaError as exc:
                _fail(name, str(exc), exc.exit_code)
            except np.linalg.LinAlgError as exc:
                _fail(name, f"linear algebra failure: {exc}", 4)
            except ArithmeticError as exc:
                _fail(name, f"numerical failure: {exc}", 4)
            except (ValueError, KeyError) as exc:
                _fail(name, f"invalid input: {exc}", 3)
        return wrapper
    return deco


def _config(config, case=None, seed=None, jobs=None, line=None, tau=None) -> RunConfig:
    cfg = with_overrides(load_run_config(config), case=case, seed=seed, jobs=jobs, line=line, tau=tau)
    if cfg.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return cfg


config_opt = click.option("--config", type=click.Path(dir_okay=False), default=None,
                          help="Run config (TOML). Defaults to the bundled configuration.")
case_opt = click.option("--case", type=str, default=None, help="Case file or bundled case name.")
seed_opt = click.option("--seed", type=int, default=None, help="Base seed (validation uses seed + 1).")
jobs_opt = click.option("--jobs", type=int, default=None, help="Worker processes for simulation and grid search.")


@click.group()
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
def main(verbose):
    """Transient stability assessment pipeline."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.group("case")
def case_group():
    """Network case utilities."""


@case_group.command("validate")
@click.argument("path", type=click.Path(dir_okay=False))
@stage("case")
def cmd_case_validate(path):
    """Parse a case file and check its invariants."""
    try:
        case = load_case(path)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    validate_case(case)
    p_total = sum(ld.p_base for ld in case.loads)
    click.echo(f"{case.name}: {len(case.buses)} buses, {len(case.branches)} branches, "
               f"{len(case.generators)} generators, {len(case.loads)} loads ({p_total:g} MW)")
    click.echo("ok")


@main.command("scenarios")
@config_opt
@case_opt
@seed_opt
@click.option("--set", "which", type=click.Choice(["training", "validation"]), default="training")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@stage("scenarios")
def cmd_scenarios(config, case, seed, which, out):
    """Draw load scenarios."""
    cfg = _config(config, case, seed)
    pipeline.run_scenarios(cfg.load_case(), getattr(cfg, which), Path(out))


@main.command("dispatch")
@config_opt
@case_opt
@click.option("--scenarios", "scenarios_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@stage("dispatch")
def cmd_dispatch(config, case, scenarios_csv, out):
    """Optimal dispatch for every scenario."""
    cfg = _config(config, case)
    pipeline.run_dispatch(cfg.load_case(), Path(scenarios_csv), Path(out), cfg.dispatch)


@main.command("simulate")
@config_opt
@case_opt
@jobs_opt
@click.option("--operating-points", "ops_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--line", "lines", multiple=True, help="Restrict the fault scan (repeatable).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@stage("simulate")
def cmd_simulate(config, case, jobs, ops_csv, lines, out):
    """Fault every branch at every feasible operating point and label stability."""
    cfg = _config(config, case, jobs=jobs)
    pipeline.run_simulate(cfg.load_case(), Path(ops_csv), Path(out), cfg.sim, cfg.t_clear, lines or None, cfg.jobs)


@main.command("rank")
@config_opt
@click.option("--labels", "labels_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@stage("rank")
def cmd_rank(config, labels_csv, out):
    """Rank branches by unstable-scenario count."""
    cfg = _config(config)
    rep, _ = pipeline.run_rank(Path(labels_csv), Path(out), cfg.weak_fraction)
    click.echo(f"weakest: {rep.ranking[0]}")


@main.command("dataset")
@config_opt
@case_opt
@click.option("--operating-points", "ops_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--labels", "labels_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--line", type=str, required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@stage("dataset")
def cmd_dataset(config, case, ops_csv, labels_csv, line, out):
    """Feature table for one faulted branch."""
    cfg = _config(config, case)
    pipeline.run_dataset(cfg.load_case(), Path(ops_csv), Path(labels_csv), line, Path(out), cfg.ml.bin_width)


@main.command("train")
@config_opt
@seed_opt
@jobs_opt
@click.option("--dataset", "dataset_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--line", type=str, default="", help="Branch recorded in the model file.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Model file to write.")
@click.option("--log", "log_out", type=click.Path(dir_okay=False), default=None, help="Training log file.")
@stage("train")
def cmd_train(config, seed, jobs, dataset_csv, line, out, log_out):
    """Train the stability and time-class classifiers."""
    cfg = _config(config, seed=seed, jobs=jobs)
    res = pipeline.run_train(Path(dataset_csv), cfg.ml, Path(out), Path(log_out) if log_out else None,
                             cfg.jobs, line or cfg.line)
    if log_out is None:
        click.echo(res.log_text, nl=False)


@main.command("eval")
@click.option("--model", "model_path", type=click.Path(dir_okay=False), required=True)
@click.option("--dataset", "dataset_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@stage("eval")
def cmd_eval(model_path, dataset_csv, out):
    """Score a model on a dataset and write the report files."""
    rep = pipeline.run_eval(Path(model_path), Path(dataset_csv), Path(out))
    click.echo(f"binary error {rep.binary_error_pct:.4g}%, labeling error {rep.labeling_error_pct:.4g}%, "
               f"MAE {rep.mae_s:.4g} s")


@main.command("predict")
@config_opt
@case_opt
@click.option("--model", "model_path", type=click.Path(dir_okay=False), required=True)
@click.option("--features", type=str, default=None, help="Comma-separated raw feature vector.")
@click.option("--operating-points", "ops_csv", type=click.Path(dir_okay=False), default=None)
@click.option("--scenario-id", type=int, default=None)
@click.option("--tau", type=float, default=None, help="Response time of the fast corrective resource (s).")
@stage("predict")
def cmd_predict(config, case, model_path, features, ops_csv, scenario_id, tau):
    """Classify one operating point; prints a JSON object."""
    models = load_model(model_path)
    if (features is None) == (ops_csv is None):
        raise ConfigError("give exactly one of --features or --operating-points")
    if features is not None:
        try:
            x = np.array([float(v) for v in features.split(",")])
        except ValueError as exc:
            raise InputError(f"--features must be comma-separated numbers: {exc}") from exc
    else:
        if scenario_id is None:
            raise ConfigError("--scenario-id is required with --operating-points")
        cfg = _config(config, case)
        c = cfg.load_case()
        ops = {op.scenario_id: op for op in tables.read_operating_points(Path(ops_csv), c)}
        if scenario_id not in ops:
            raise InputError(f"scenario {scenario_id} not in {ops_csv}")
        x = extract_features(c, ops[scenario_id], models.line).values
    if len(x) != len(models.feature_names):
        raise InputError(f"expected {len(models.feature_names)} features, got {len(x)}")
    stable, score, conf = predict_mlp(models.mlp, x, models.standardizer)
    out = {"stable": bool(stable), "score": score, "confidence": conf, "time_class": None, "safe": None}
    if not stable and models.svm is not None:
        label, _ = predict_svm(models.svm, x)
        out["time_class"] = label
    if tau is not None:
        out["safe"] = bool(stable) or (out["time_class"] is not None and float(out["time_class"]) > tau)
    click.echo(json.dumps(out))


@main.command("reproduce")
@config_opt
@case_opt
@seed_opt
@jobs_opt
@click.option("--line", type=str, default=None, help="Branch for the learning stage (default: weakest).")
@click.option("--tau", type=float, default=None)
@click.option("--out", type=click.Path(file_okay=False), default="run", show_default=True)
@stage("reproduce")
def cmd_reproduce(config, case, seed, jobs, line, tau, out):
    """Run the whole pipeline into one output directory."""
    cfg = _config(config, case, seed, jobs, line, tau)
    path = pipeline.reproduce(cfg, Path(out))
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
