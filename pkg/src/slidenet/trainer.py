"""Training with best-validation selection, evaluation metrics and experiment protocols."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import datagen
from .datagen import DatasetManifest, SimRecord, to_impulse_coords
from .neural.checkpoint import load_checkpoint, save_checkpoint
from .neural.losses import loss as loss_fn
from .neural.model import ModelConfig, SlideNet
from .neural.optim import Adam, exp_decay_lr

log = logging.getLogger(__name__)

BIN_DEG = 30.0
EVAL_BATCH = 256
PROTOCOLS = ("impulse_gen", "obj_gen", "leave_one_out", "ablation")
ABLATIONS = ("full", "npp", "nic", "np_mlp", "plain_mlp")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    val_every: int = 5
    seed: int = 0
    lr_start: float = 5e-3
    lr_end: float = 1e-5
    head_weight: float = 0.1
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig.from_dict(self.model)
        if self.epochs < 1 or self.batch_size < 1 or self.val_every < 1:
            raise ValueError("epochs, batch_size and val_every must all be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def desk_config(**overrides) -> TrainConfig:
    """Narrow widths and 128-point clouds; trains in minutes on one CPU core."""
    model = ModelConfig(
        n_points=128,
        impulse_widths=(32, 64, 64),
        point_widths=(32, 64, 128),
        shape_head_widths=(128, 64),
        joint_widths=(128, 128, 64, 64, 32, 3),
        np_mlp_widths=(256, 256),
        plain_widths=(256, 256, 256, 128, 128, 128, 64, 64, 32, 16, 3),
    )
    model_over = overrides.pop("model", {})
    model = dataclasses.replace(model, **model_over)
    return TrainConfig(model=model, **{"epochs": 60, "batch_size": 64, **overrides})


# --------------------------------------------------------------------------
# batching


def build_arrays(records: list[SimRecord], model_cfg: ModelConfig) -> dict[str, np.ndarray]:
    """Stack records into network inputs and targets."""
    if not records:
        raise ValueError("no records")
    if model_cfg.use_impulse_coords:
        records = [to_impulse_coords(r) for r in records]
    n = model_cfg.n_points
    clouds = []
    for r in records:
        if r.cloud is None:
            raise ValueError(f"record {r.index} has no point cloud loaded")
        if len(r.cloud) < n:
            raise ValueError(f"record {r.index}: cloud has {len(r.cloud)} points, model needs {n}")
        clouds.append(r.cloud[:n])  # clouds are FPS-ordered, so a prefix is an FPS subsample
    return {
        "J": np.array([r.J for r in records]),
        "r": np.array([r.r for r in records]),
        "cloud": np.array(clouds),
        "final_pos": np.array([r.final_pos for r in records]),
        "total_rotation_deg": np.array([r.total_rotation_deg for r in records]),
        "mass": np.array([r.mass for r in records]),
        "inertia_z": np.array([r.inertia_z for r in records]),
        "v0_mag": np.array([math.hypot(*r.v0) for r in records]),
        "omega0": np.array([r.omega0 for r in records]),
        "index": np.array([r.index for r in records]),
    }


def _take(arrays: dict, idx) -> dict:
    return {k: v[idx] for k, v in arrays.items()}


def head_scales(arrays: dict) -> np.ndarray:
    return np.array([
        arrays["mass"].mean(), arrays["inertia_z"].mean(),
        arrays["v0_mag"].mean(), max(np.abs(arrays["omega0"]).mean(), 1e-6),
    ])


def batch_loss(model: SlideNet, arrays: dict, training: bool, head_weight: float = 0.1):
    pred = model.forward(arrays, training=training)
    return loss_fn(pred, arrays, head_weight=head_weight, head_scale=model.store.buffers["head_scale"])


def mean_loss(model: SlideNet, arrays: dict, head_weight: float = 0.1, batch: int = EVAL_BATCH) -> float:
    """Example-weighted eval-mode loss over fixed-size chunks."""
    n = len(arrays["J"])
    total = 0.0
    for s in range(0, n, batch):
        chunk = _take(arrays, slice(s, s + batch))
        val, _ = batch_loss(model, chunk, False, head_weight)
        total += float(val.data) * len(chunk["J"])
    return total / n


# --------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    model: SlideNet
    history: list[dict]
    best_val: float
    best_epoch: int
    checkpoint: Path | None = None


def train(train_records: list[SimRecord], val_records: list[SimRecord], cfg: TrainConfig | None = None,
          out_dir: str | os.PathLike | None = None) -> TrainResult:
    """Adam with exponential lr decay; keeps the weights with the lowest validation loss."""
    cfg = cfg or TrainConfig()
    if not train_records or not val_records:
        raise ValueError("training and validation sets must both be non-empty")
    mc = cfg.model
    tr = build_arrays(train_records, mc)
    va = build_arrays(val_records, mc)
    model = SlideNet(mc)
    model.set_normalization(tr["J"], tr["r"], head_scales(tr))
    opt = Adam(model.params)
    rng = np.random.default_rng(cfg.seed)
    n = len(tr["J"])
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    history: list[dict] = []
    best_val, best_epoch, best_state = math.inf, 0, None

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        sums, seen = {}, 0
        for b in range(steps_per_epoch):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            if len(idx) < 2:
                continue  # batch statistics need at least two rows
            chunk = _take(tr, idx)
            model.store.zero_grad()
            try:
                total, parts = batch_loss(model, chunk, True, cfg.head_weight)
            except FloatingPointError as exc:
                raise TrainingError(f"epoch {epoch} step {b}: {exc}") from exc
            if not math.isfinite(parts["total"]):
                raise TrainingError(f"epoch {epoch} step {b}: loss is {parts['total']}")
            total.backward()
            lr = exp_decay_lr(opt.state.step, total_steps, cfg.lr_start, cfg.lr_end)
            opt.step(lr)
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v * len(idx)
            seen += len(idx)
        row = {"epoch": epoch, "lr": exp_decay_lr(opt.state.step, total_steps, cfg.lr_start, cfg.lr_end)}
        row.update({f"train_{k}": v / seen for k, v in sums.items()})
        if epoch % cfg.val_every == 0 or epoch == cfg.epochs:
            try:
                val = mean_loss(model, va, cfg.head_weight)
            except FloatingPointError as exc:
                raise TrainingError(f"epoch {epoch} validation: {exc}") from exc
            if not math.isfinite(val):
                raise TrainingError(f"epoch {epoch}: validation loss is {val}")
            row["val_loss"] = val
            if val < best_val:
                best_val, best_epoch = val, epoch
                best_state = {k: v.copy() for k, v in model.store.state().items()}
                best_opt = {k: v.copy() for k, v in opt.state_arrays().items()}
        history.append(row)
        log.info("epoch %d train %.4f%s", epoch, row.get("train_total", float("nan")),
                 f" val {row['val_loss']:.4f}" if "val_loss" in row else "")

    model.store.load_state(best_state)
    opt.load_state_arrays(best_opt)
    ckpt = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ckpt = out / "best.ckpt"
        save_checkpoint(ckpt, model, opt, {"best_val": best_val, "best_epoch": best_epoch,
                                           "train": cfg.to_dict(), "code_version": __version__})
        write_history(history, out / "history.csv")
    return TrainResult(model=model, history=history, best_val=best_val, best_epoch=best_epoch, checkpoint=ckpt)


def write_history(history: list[dict], path) -> None:
    keys = []
    for row in history:
        keys += [k for k in row if k not in keys]
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=keys)
        wr.writeheader()
        for row in history:
            wr.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})


# --------------------------------------------------------------------------
# metrics


def rel_rot_binned(theta_hat, theta, b: float = BIN_DEG):
    """(|theta_hat - theta| / b) / max(1, ceil(|theta| / b))."""
    if not b > 0:
        raise ValueError("bin width must be positive")
    theta_hat, theta = np.asarray(theta_hat, dtype=float), np.asarray(theta, dtype=float)
    out = (np.abs(theta_hat - theta) / b) / np.maximum(1.0, np.ceil(np.abs(theta) / b))
    return out if out.ndim else float(out)


def rel_pos_error(pred, target):
    """Relative position error per row (plain distance for ||P|| < 1e-6 m)."""
    pred, target = np.atleast_2d(pred), np.atleast_2d(target)
    scale = np.linalg.norm(target, axis=1)
    return np.linalg.norm(pred - target, axis=1) / np.where(scale < 1e-6, 1.0, scale)


def rel_rot_error(pred, target):
    pred, target = np.asarray(pred, float), np.asarray(target, float)
    den = np.abs(pred) + np.abs(target)
    small = (np.abs(pred) < 1e-6) & (np.abs(target) < 1e-6)
    return np.where(small, 0.0, np.abs(pred - target) / np.where(small, 1.0, den))


@dataclass
class MetricsReport:
    index: np.ndarray
    rel_pos: np.ndarray
    abs_pos_m: np.ndarray
    rel_rot_binned: np.ndarray
    rel_rot_raw: np.ndarray
    abs_rot_deg: np.ndarray
    thresholds_pct: np.ndarray
    pos_curve: np.ndarray
    rot_curve: np.ndarray
    heads: dict = field(default_factory=dict)  # name -> per-example relative error

    def means(self) -> dict:
        out = {
            "mean_rel_pos": float(np.mean(self.rel_pos)),
            "mean_abs_pos_m": float(np.mean(self.abs_pos_m)),
            "mean_rel_rot": float(np.mean(self.rel_rot_binned)),
            "mean_rel_rot_raw": float(np.mean(self.rel_rot_raw)),
            "mean_abs_rot_deg": float(np.mean(self.abs_rot_deg)),
            "n_examples": int(len(self.rel_pos)),
        }
        for k, v in self.heads.items():
            out[f"mean_rel_{k}"] = float(np.mean(v))
        return out

    def to_json(self, protocol: str = "", variant: str = "") -> dict:
        return {**self.means(), "protocol": protocol, "variant": variant}


def cumulative_curve(errors: np.ndarray, thresholds_pct: np.ndarray) -> np.ndarray:
    """Fraction of examples with relative error <= threshold."""
    e = np.sort(np.asarray(errors, dtype=float))
    return np.searchsorted(e, thresholds_pct / 100.0, side="right") / len(e)


def report_from_predictions(pred: dict, target: dict) -> MetricsReport:
    thresholds = np.arange(101, dtype=float)
    rp = rel_pos_error(pred["final_pos"], target["final_pos"])
    rb = rel_rot_binned(pred["total_rotation_deg"], target["total_rotation_deg"])
    heads = {}
    for key, tkey in (("mass", "mass"), ("inertia_z", "inertia_z"), ("v0_mag", "v0_mag")):
        if key in pred:
            heads[key] = np.abs(pred[key] - target[tkey]) / np.maximum(np.abs(target[tkey]), 1e-6)
    if "omega0" in pred:
        heads["omega0"] = rel_rot_error(pred["omega0"], target["omega0"])
    return MetricsReport(
        index=np.asarray(target.get("index", np.arange(len(rp)))),
        rel_pos=rp,
        abs_pos_m=np.linalg.norm(pred["final_pos"] - target["final_pos"], axis=1),
        rel_rot_binned=np.atleast_1d(rb),
        rel_rot_raw=rel_rot_error(pred["total_rotation_deg"], target["total_rotation_deg"]),
        abs_rot_deg=np.abs(pred["total_rotation_deg"] - target["total_rotation_deg"]),
        thresholds_pct=thresholds,
        pos_curve=cumulative_curve(rp, thresholds),
        rot_curve=cumulative_curve(rb, thresholds),
        heads=heads,
    )


def predict_arrays(model: SlideNet, arrays: dict, batch: int = EVAL_BATCH) -> dict:
    parts = [model.predict(_take(arrays, slice(s, s + batch))) for s in range(0, len(arrays["J"]), batch)]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def evaluate(model: SlideNet | str | os.PathLike, records: list[SimRecord]) -> MetricsReport:
    """Metrics of a model (or checkpoint path) on ``records``."""
    if not records:
        raise ValueError("test set is empty")
    if not isinstance(model, SlideNet):
        model, _ = load_checkpoint(model)
    arrays = build_arrays(records, model.cfg)
    return report_from_predictions(predict_arrays(model, arrays), arrays)


def curves_csv(report: MetricsReport, path) -> None:
    if len(report.rel_pos) == 0:
        raise ValueError("empty report")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["threshold_pct", "pos_fraction", "rot_fraction"])
        for t, p, r in zip(report.thresholds_pct, report.pos_curve, report.rot_curve):
            wr.writerow([int(t), repr(float(p)), repr(float(r))])


def write_metrics(report: MetricsReport, path, protocol: str = "", variant: str = "") -> dict:
    data = report.to_json(protocol, variant)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data


# --------------------------------------------------------------------------
# protocols


def variant_config(cfg: TrainConfig, variant: str) -> TrainConfig:
    """Model config for an ablation name."""
    if variant not in ABLATIONS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {ABLATIONS}")
    m = cfg.model
    if variant == "full":
        m = dataclasses.replace(m, variant="full")
    elif variant == "npp":
        m = dataclasses.replace(m, variant="full", use_pairwise=False)
    elif variant == "nic":
        m = dataclasses.replace(m, variant="full", use_impulse_coords=False)
    else:
        m = dataclasses.replace(m, variant=variant)
    return dataclasses.replace(cfg, model=m)


def variant_name(model_cfg: ModelConfig) -> str:
    if model_cfg.variant != "full":
        return model_cfg.variant
    if not model_cfg.use_pairwise:
        return "npp"
    if not model_cfg.use_impulse_coords:
        return "nic"
    return "full"


PROTOCOL_SPLITS = {"impulse_gen": "by_sim", "obj_gen": "by_object", "leave_one_out": "leave_category_out",
                   "ablation": "by_object"}


def prepare_split(manifest: DatasetManifest, protocol: str, seed: int = 0, category: str | None = None,
                  split_mode: str | None = None, fractions=(0.8, 0.2), val_fraction: float = 0.2) -> DatasetManifest:
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    mode = split_mode or PROTOCOL_SPLITS[protocol]
    if protocol == "leave_one_out" and not category:
        raise ValueError("leave_one_out needs a category")
    manifest = datagen.split(manifest, mode, fractions, seed=seed, category=category, val_fraction=val_fraction)
    if mode != "by_sim":
        datagen.assert_no_leak(manifest)
    return manifest


def train_run(dataset: str | os.PathLike | DatasetManifest, cfg: TrainConfig, out_dir: str | os.PathLike,
              protocol: str = "obj_gen", category: str | None = None, split_mode: str | None = None,
              split_seed: int | None = None) -> tuple[TrainResult, DatasetManifest]:
    """Filter outliers, split, train; writes ``config.json``, ``splits.json``, ``history.csv``, ``best.ckpt``."""
    manifest = dataset if isinstance(dataset, DatasetManifest) else datagen.load(dataset)
    n_raw = len(manifest.records)
    manifest = datagen.filter_outliers(manifest)
    seed = cfg.seed if split_seed is None else split_seed
    manifest = prepare_split(manifest, protocol, seed=seed, category=category, split_mode=split_mode)
    train_recs, val_recs, test_recs = (manifest.subset(s) for s in ("train", "val", "test"))
    if not test_recs:
        raise datagen.DatasetError(f"protocol {protocol}: empty test split")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snapshot = {
        "protocol": protocol, "variant": variant_name(cfg.model), "category": category,
        "split": manifest.config.get("split"), "train": cfg.to_dict(), "code_version": __version__,
        "dataset": None if isinstance(dataset, DatasetManifest) else str(dataset),
        "outliers_removed": n_raw - len(manifest.records),
        "counts": {"train": len(train_recs), "val": len(val_recs), "test": len(test_recs)},
        "train_shape_ids": sorted({r.shape_id for r in train_recs}),
        "test_shape_ids": sorted({r.shape_id for r in test_recs}),
    }
    with open(out / "config.json", "w") as fh:
        json.dump(snapshot, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "splits.json", "w") as fh:
        json.dump(manifest.splits, fh, sort_keys=True)
        fh.write("\n")
    return train(train_recs, val_recs, cfg, out), manifest


def run_protocol(protocol: str, dataset: str | os.PathLike | DatasetManifest, cfg: TrainConfig,
                 out_dir: str | os.PathLike, variant: str | None = None, category: str | None = None,
                 split_mode: str | None = None, split_seed: int | None = None) -> tuple[Path, dict]:
    """Split, train, evaluate and write a run directory.

    Besides the files of :func:`train_run` the directory receives
    ``metrics.json`` and ``curves.csv``.
    """
    if variant is not None:
        cfg = variant_config(cfg, variant)
    elif protocol == "ablation":
        raise ValueError("the ablation protocol needs a variant")
    result, manifest = train_run(dataset, cfg, out_dir, protocol, category, split_mode, split_seed)
    out = Path(out_dir)
    report = evaluate(result.model, manifest.subset("test"))
    metrics = write_metrics(report, out / "metrics.json", protocol, variant_name(cfg.model))
    curves_csv(report, out / "curves.csv")
    return out, metrics
