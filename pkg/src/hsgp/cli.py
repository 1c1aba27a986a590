"""Command-line pipeline: synth, augment, train, eval, saliency, sweep.

Every command reads one JSON config file, lets ``--key value`` flags override
individual fields, writes its resolved config next to its outputs, and exits
0 on success, 2 on configuration errors, 3 on data errors, 4 on numeric
failures.  Errors are emitted as a JSON object on stderr.
"""

import csv
import dataclasses
import json
import sys
import types
from dataclasses import dataclass, fields
from pathlib import Path

import click
import numpy as np

from . import reports
from .augmentation import AugmentConfig, augment_pair, pair_similarity_stats
from .errors import (
    ConfigError,
    DataError,
    HsgpError,
    InvalidSpec,
    LabelOutOfRange,
    MissingFile,
    NumericError,
    ParseError,
)
from .hgp_layer import PoolConfig
from .model_training import (
    ModelParams,
    Sample,
    TrainingConfig,
    evaluate,
    fold_split,
    load_checkpoint,
    predict_dataset,
    save_checkpoint,
    train,
)
from .saliency import class_average_map, saliency_map
from .signal_io import load_bold_csv, save_bold_csv
from .synthetic import SyntheticSpec, generate_synthetic

SWEEPABLE = ("window_size", "mu1", "mu2", "ratio")
NODE_FEATURE_DIM = 2


@dataclass
class RunConfig:
    """One flat bag of knobs for every command.

    mu1/mu2 left unset resolve to the task-specific defaults.
    """

    task: str = "classification"
    num_classes: int = 2
    data_dir: str = "data"
    out_dir: str = "run"
    checkpoint: str = ""
    split: str = "test"
    kfolds: int = 5
    fold: int = 0
    c_hidden: int = 16
    top_k: int = 10
    metric: str = "cosine"
    # augmentation
    window_size: int = 10
    # pooling
    ratio: float = 0.5
    layers: int = 3
    # training
    batch_size: int = 128
    temperature: float = 0.2
    mu1: float | None = None
    mu2: float | None = None
    base_lr: float = 1e-4
    weight_decay: float = 1e-5
    max_epochs: int = 1000
    patience: int = 50
    seed: int = 0
    symmetrized_contrastive: bool = False
    target_train_accuracy: float | None = None
    # synthetic generation
    n_subjects: int = 64
    n_nodes: int = 32
    signal_length: int = 200
    subset_size: int = 8
    effect: float = 2.0
    noise_level: float = 1.0

    def __post_init__(self):
        if self.task not in ("classification", "regression"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.split not in ("train", "val", "test", "all"):
            raise ConfigError(f"unknown split {self.split!r}")
        if self.metric not in ("cosine", "l1", "l2"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.kfolds < 2:
            raise ConfigError("kfolds must be at least 2")
        if not 0 <= self.fold < self.kfolds:
            raise ConfigError(f"fold {self.fold} outside [0, {self.kfolds})")
        if self.c_hidden < 1:
            raise ConfigError("c_hidden must be positive")
        if self.top_k < 1:
            raise ConfigError("top_k must be positive")


def _coerce(name, annotation, raw):
    """Turn a raw JSON value or flag string into the field's declared type."""
    if isinstance(annotation, types.UnionType):
        inner = [a for a in annotation.__args__ if a is not type(None)][0]
        if raw is None or (isinstance(raw, str) and raw.lower() in ("none", "null")):
            return None
        return _coerce(name, inner, raw)
    if annotation is bool:
        if isinstance(raw, bool):
            return raw
        if isinstance(raw, str) and raw.lower() in ("true", "1", "yes"):
            return True
        if isinstance(raw, str) and raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name} expects a boolean, got {raw!r}")
    if annotation is int:
        if isinstance(raw, bool) or isinstance(raw, float) and raw != int(raw):
            raise ConfigError(f"{name} expects an integer, got {raw!r}")
        try:
            return int(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} expects an integer, got {raw!r}") from None
    if annotation is float:
        if isinstance(raw, bool):
            raise ConfigError(f"{name} expects a number, got {raw!r}")
        try:
            return float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} expects a number, got {raw!r}") from None
    if annotation is str:
        if not isinstance(raw, str):
            raise ConfigError(f"{name} expects a string, got {raw!r}")
        return raw
    raise ConfigError(f"cannot coerce field {name}")


def _parse_overrides(extra_args):
    """``--key value`` pairs from leftover CLI args."""
    overrides = {}
    args = list(extra_args)
    i = 0
    while i < len(args):
        token = args[i]
        if not token.startswith("--"):
            raise ConfigError(f"expected a --key flag, got {token!r}")
        key = token[2:].replace("-", "_")
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            i += 1
            if i >= len(args):
                raise ConfigError(f"flag --{key} is missing a value")
            value = args[i]
        overrides[key] = value
        i += 1
    return overrides


def build_config(config_path=None, overrides=None):
    """Resolved RunConfig from an optional JSON file plus flag overrides."""
    known = {f.name: f.type for f in fields(RunConfig)}
    merged = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise MissingFile(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        merged.update(loaded)
    merged.update(overrides or {})
    unknown = sorted(set(merged) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    coerced = {k: _coerce(k, known[k], v) for k, v in merged.items()}
    return RunConfig(**coerced)


def write_resolved_config(cfg, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "resolved_config.json"
    with open(path, "w") as fh:
        json.dump(dataclasses.asdict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _training_config(cfg):
    shared = dict(
        batch_size=cfg.batch_size,
        temperature=cfg.temperature,
        base_lr=cfg.base_lr,
        weight_decay=cfg.weight_decay,
        max_epochs=cfg.max_epochs,
        patience=cfg.patience,
        seed=cfg.seed,
        symmetrized_contrastive=cfg.symmetrized_contrastive,
    )
    if cfg.mu1 is not None:
        shared["mu1"] = cfg.mu1
    if cfg.mu2 is not None:
        shared["mu2"] = cfg.mu2
    return TrainingConfig.defaults_for(cfg.task, **shared)


def _pool_config(cfg):
    return PoolConfig(ratio=cfg.ratio, layers=cfg.layers)


def _parse_target(raw, cfg, path, row):
    if cfg.task == "regression":
        try:
            return float(raw)
        except ValueError:
            raise ParseError(f"{path}: bad regression target {raw!r}",
                             row=row, col=2) from None
    try:
        label = int(raw)
    except ValueError:
        raise ParseError(f"{path}: bad class label {raw!r}", row=row, col=2) from None
    if not 0 <= label < cfg.num_classes:
        raise LabelOutOfRange(f"label {label} outside [0, {cfg.num_classes})")
    return label


def load_dataset(cfg):
    """Subjects and targets from data_dir: targets.csv + bold_<id>.csv files."""
    data_dir = Path(cfg.data_dir)
    targets_path = data_dir / "targets.csv"
    if not targets_path.exists():
        raise MissingFile(f"missing {targets_path}")
    subject_ids, targets = [], []
    with open(targets_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["subject_id", "target"]:
        raise ParseError(f"{targets_path}: expected header subject_id,target",
                         row=1, col=1)
    for r, row in enumerate(rows[1:], start=2):
        if len(row) < 2:
            raise ParseError(f"{targets_path}: short row", row=r, col=1)
        subject_ids.append(row[0])
        targets.append(_parse_target(row[1], cfg, targets_path, r))
    bolds = []
    for sid in subject_ids:
        bold_path = data_dir / f"bold_{sid}.csv"
        if not bold_path.exists():
            raise MissingFile(f"missing {bold_path}")
        bolds.append(load_bold_csv(bold_path))
    return subject_ids, bolds, targets


def build_samples(cfg, subject_ids, bolds, targets):
    aug = AugmentConfig(window_size=cfg.window_size)
    return [
        Sample(augment_pair(bold, aug, sid), target)
        for sid, bold, target in zip(subject_ids, bolds, targets)
    ]


def _split_dataset(cfg, samples, subject_ids):
    train_idx, val_idx, test_idx = fold_split(
        len(samples), cfg.kfolds, cfg.fold, cfg.seed
    )
    pick = lambda idx: ([samples[i] for i in idx], [subject_ids[i] for i in idx])
    return {
        "train": pick(train_idx),
        "val": pick(val_idx),
        "test": pick(test_idx),
        "all": (list(samples), list(subject_ids)),
    }


def _checkpoint_path(cfg):
    if cfg.checkpoint:
        return Path(cfg.checkpoint)
    return Path(cfg.out_dir) / "checkpoint.json"


def run_synth(cfg):
    spec = SyntheticSpec(
        n_subjects=cfg.n_subjects,
        n_nodes=cfg.n_nodes,
        signal_length=cfg.signal_length,
        n_classes=cfg.num_classes,
        subset_size=cfg.subset_size,
        effect=cfg.effect,
        noise_level=cfg.noise_level,
        seed=cfg.seed,
        task=cfg.task,
    )
    dataset = generate_synthetic(spec)
    data_dir = Path(cfg.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, (bold, target) in enumerate(zip(dataset.subjects, dataset.targets)):
        sid = f"s{i:03d}"
        save_bold_csv(bold, data_dir / f"bold_{sid}.csv")
        rows.append([sid, target])
    with open(data_dir / "targets.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "target"])
        for sid, target in rows:
            writer.writerow([sid, repr(float(target)) if cfg.task == "regression"
                             else str(target)])
    with open(data_dir / "planted.json", "w") as fh:
        json.dump({"planted_nodes": list(dataset.planted_nodes),
                   "spec": dataclasses.asdict(spec)}, fh, indent=2)
        fh.write("\n")
    write_resolved_config(cfg, cfg.data_dir)
    click.echo(f"wrote {len(rows)} subjects to {data_dir}")


def run_augment(cfg):
    subject_ids, bolds, targets = load_dataset(cfg)
    samples = build_samples(cfg, subject_ids, bolds, targets)
    pairs = [s.pair for s in samples]
    inner, inter = pair_similarity_stats(pairs, metric=cfg.metric)
    report = {
        "window_size": cfg.window_size,
        "n_pairs": len(pairs),
        "metric": cfg.metric,
        "inner": inner,
        "inter": inter,
    }
    write_resolved_config(cfg, cfg.out_dir)
    paths = reports.write_augment_report(report, cfg.out_dir)
    click.echo(f"inner={inner:.6f} inter={inter:.6f}")
    for p in paths:
        click.echo(f"wrote {p}")


def run_train(cfg):
    subject_ids, bolds, targets = load_dataset(cfg)
    samples = build_samples(cfg, subject_ids, bolds, targets)
    splits = _split_dataset(cfg, samples, subject_ids)
    train_set, _ = splits["train"]
    val_set, _ = splits["val"]
    test_set, test_ids = splits["test"]

    params = ModelParams.init(
        NODE_FEATURE_DIM, cfg.c_hidden, cfg.layers, cfg.task,
        cfg.num_classes, seed=cfg.seed,
    )
    train_cfg = _training_config(cfg)
    pool_cfg = _pool_config(cfg)
    params, history = train(
        train_set, val_set, params, train_cfg, pool_cfg,
        target_train_accuracy=cfg.target_train_accuracy,
    )

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out_dir)
    save_checkpoint(params, out_dir / "checkpoint.json", seed=cfg.seed)
    reports.write_history(history, out_dir)
    metrics = {
        "epochs_run": len(history),
        "best_val_loss": min(h["val_loss"] for h in history),
        "train": evaluate(params, train_set, pool_cfg),
        "val": evaluate(params, val_set, pool_cfg),
        "test": evaluate(params, test_set, pool_cfg),
    }
    reports.write_metrics(metrics, out_dir)
    preds = predict_dataset(params, test_set, pool_cfg)
    reports.write_predictions(
        preds, [s.target for s in test_set], test_ids, cfg.task, out_dir,
        num_classes=cfg.num_classes,
    )
    click.echo(json.dumps(metrics["val"], sort_keys=True))
    click.echo(f"wrote {out_dir / 'checkpoint.json'}")


def run_eval(cfg):
    subject_ids, bolds, targets = load_dataset(cfg)
    samples = build_samples(cfg, subject_ids, bolds, targets)
    splits = _split_dataset(cfg, samples, subject_ids)
    subset, subset_ids = splits[cfg.split]
    params = load_checkpoint(_checkpoint_path(cfg))
    pool_cfg = _pool_config(cfg)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out_dir)
    metrics = {"split": cfg.split, cfg.split: evaluate(params, subset, pool_cfg)}
    reports.write_metrics(metrics, out_dir, name=f"metrics_{cfg.split}.json")
    preds = predict_dataset(params, subset, pool_cfg)
    reports.write_predictions(
        preds, [s.target for s in subset], subset_ids, cfg.task, out_dir,
        num_classes=cfg.num_classes,
    )
    click.echo(json.dumps(metrics[cfg.split], sort_keys=True))


def run_saliency(cfg):
    subject_ids, bolds, targets = load_dataset(cfg)
    samples = build_samples(cfg, subject_ids, bolds, targets)
    params = load_checkpoint(_checkpoint_path(cfg))
    pool_cfg = _pool_config(cfg)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out_dir)
    written = []
    if cfg.task == "regression":
        smap = class_average_map(
            params, [s.pair for s in samples], "regression", pool_cfg
        )
        written += reports.write_saliency(smap, out_dir, top_k=cfg.top_k)
    else:
        for label in range(cfg.num_classes):
            members = [s.pair for s in samples if s.target == label]
            if not members:
                continue
            smap = class_average_map(params, members, label, pool_cfg)
            written += reports.write_saliency(
                smap, out_dir, top_k=cfg.top_k, stem=f"saliency_class{label}"
            )
    for p in written:
        click.echo(f"wrote {p}")


def _sweep_values(param, raw_values):
    if param not in SWEEPABLE:
        raise ConfigError(
            f"sweep parameter must be one of {', '.join(SWEEPABLE)}"
        )
    annotation = {f.name: f.type for f in fields(RunConfig)}[param]
    values = []
    for chunk in raw_values.split(","):
        chunk = chunk.strip()
        if not chunk:
            raise ConfigError("empty value in sweep grid")
        values.append(_coerce(param, annotation, chunk))
    if not values:
        raise ConfigError("sweep grid is empty")
    return values


def run_sweep(cfg, param, raw_values):
    values = _sweep_values(param, raw_values)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out_dir)
    rows = []
    for value in values:
        point_cfg = dataclasses.replace(
            cfg, **{param: value},
            out_dir=str(out_dir / f"{param}_{value}"),
        )
        run_train(point_cfg)
        with open(Path(point_cfg.out_dir) / "metrics.json") as fh:
            metrics = json.load(fh)
        row = {param: value, "epochs_run": metrics["epochs_run"],
               "best_val_loss": metrics["best_val_loss"]}
        for split in ("val", "test"):
            for key, metric_value in metrics[split].items():
                row[f"{split}_{key}"] = metric_value
        rows.append(row)
    paths = reports.write_sweep(rows, param, out_dir)
    for p in paths:
        click.echo(f"wrote {p}")


def _exit_code(exc):
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, DataError):
        return 3
    if isinstance(exc, NumericError):
        return 4
    return 1


def _dispatch(runner, config, extra_args, **kw):
    try:
        cfg = build_config(config, _parse_overrides(extra_args))
        runner(cfg, **kw)
    except HsgpError as exc:
        code = _exit_code(exc)
        payload = {"error": type(exc).__name__, "message": str(exc),
                   "exit_code": code}
        click.echo(json.dumps(payload), err=True)
        sys.exit(code)


EXTRA = dict(
    context_settings=dict(ignore_unknown_options=True, allow_extra_args=True)
)


@click.group()
def main():
    """Hierarchical signed-graph pipeline for correlation networks."""


@main.command(name="synth", **EXTRA)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def synth_cmd(ctx, config):
    """Generate a seeded synthetic dataset into data_dir."""
    _dispatch(run_synth, config, ctx.args)


@main.command(name="augment", **EXTRA)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def augment_cmd(ctx, config):
    """Report hat/check pair-similarity statistics for the dataset."""
    _dispatch(run_augment, config, ctx.args)


@main.command(name="train", **EXTRA)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def train_cmd(ctx, config):
    """Train on one fold and write checkpoint, history, and metrics."""
    _dispatch(run_train, config, ctx.args)


@main.command(name="eval", **EXTRA)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def eval_cmd(ctx, config):
    """Evaluate a checkpoint on one split of the fold."""
    _dispatch(run_eval, config, ctx.args)


@main.command(name="saliency", **EXTRA)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def saliency_cmd(ctx, config):
    """Write per-class node saliency maps for a checkpoint."""
    _dispatch(run_saliency, config, ctx.args)


@main.command(name="sweep", **EXTRA)
@click.option("--config", type=click.Path(), default=None)
@click.option("--param", required=True)
@click.option("--values", required=True)
@click.pass_context
def sweep_cmd(ctx, config, param, values):
    """Train once per grid value and tabulate the resulting metrics."""
    _dispatch(run_sweep, config, ctx.args, param=param, raw_values=values)


if __name__ == "__main__":
    main()
