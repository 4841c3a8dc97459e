"""Command-line entry point: ``slidenet {gen,simulate,train,eval,protocol}``.

Global flags: ``--seed``, ``--out-dir`` (relative paths resolve against it)
and ``--config`` (a JSON file or inline JSON object with optional ``gen``
and ``train`` sections that override the defaults). Exit codes: 0 success,
1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, datagen, geometry, simulator, trainer
from .neural.checkpoint import CheckpointError, load_checkpoint

log = logging.getLogger("slidenet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# --------------------------------------------------------------------------
# config plumbing


def load_overrides(text: str | None) -> dict:
    if not text:
        return {}
    try:
        if text.lstrip().startswith("{"):
            data = json.loads(text)
        else:
            with open(text) as fh:
                data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"--config: {exc}") from exc
    if not isinstance(data, dict) or set(data) - {"gen", "train"}:
        raise UsageError("--config must be a JSON object with optional 'gen' and 'train' sections")
    return data


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def gen_config(args, overrides: dict) -> datagen.GenConfig:
    d = _merge(datagen.GenConfig().to_dict(), overrides.get("gen", {}))
    for flag, key in (("density", "density"), ("cell", "cell")):
        if getattr(args, flag, None) is not None:
            d[key] = getattr(args, flag)
    for flag in ("mu", "dt", "max_time"):
        if getattr(args, flag, None) is not None:
            d["sim"][flag] = getattr(args, flag)
    try:
        return datagen.GenConfig.from_dict(d)
    except TypeError as exc:
        raise UsageError(f"bad 'gen' config: {exc}") from exc


def train_config(args, overrides: dict) -> trainer.TrainConfig:
    base = (trainer.desk_config() if args.preset == "desk" else trainer.TrainConfig()).to_dict()
    d = _merge(base, overrides.get("train", {}))
    d["seed"] = args.seed
    d["model"]["seed"] = args.seed
    for flag in ("epochs", "batch_size"):
        if getattr(args, flag, None) is not None:
            d[flag] = getattr(args, flag)
    try:
        return trainer.TrainConfig.from_dict(d)
    except TypeError as exc:
        raise UsageError(f"bad 'train' config: {exc}") from exc


def resolve(args, path) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    return p if p.is_absolute() else Path(args.out_dir) / p


def _pair(text: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from exc
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}")
    return np.array(vals)


def print_table(rows: dict, file=None) -> None:
    file = file or sys.stdout
    width = max(len(k) for k in rows)
    for k, v in rows.items():
        val = f"{v:.6g}" if isinstance(v, float) else str(v)
        print(f"{k:<{width}}  {val}", file=file)


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    overrides = load_overrides(args.config)
    cfg = gen_config(args, overrides)
    shapes = datagen.make_shapes(args.shapes, seed=args.seed)
    manifest = datagen.generate(shapes, args.n, cfg, seed=args.seed, jobs=args.jobs)
    n_raw = len(manifest.records)
    manifest = datagen.filter_outliers(manifest)
    manifest.config.update({"shapes_spec": args.shapes, "n": args.n, "overrides": overrides,
                            "outliers_removed": n_raw - len(manifest.records)})
    out = datagen.save(manifest, resolve(args, args.out))
    recs = manifest.records
    travel = [float(np.hypot(*r.final_pos)) for r in recs]
    rows = {"dataset": str(out), "records": len(recs), "outliers_removed": n_raw - len(recs)}
    if recs:
        rows.update({
            "mass_kg": f"{min(r.mass for r in recs):.3f} .. {max(r.mass for r in recs):.3f}",
            "travel_m": f"{min(travel):.3f} .. {max(travel):.3f}",
            "travel_in_0.5_5m": float(np.mean([(0.5 <= t <= 5.0) for t in travel])),
            "rotation_deg": f"{min(r.total_rotation_deg for r in recs):.1f} .. "
                            f"{max(r.total_rotation_deg for r in recs):.1f}",
        })
    print_table(rows)
    return EXIT_OK


def cmd_simulate(args) -> int:
    overrides = load_overrides(args.config)
    cfg = gen_config(args, overrides)
    if args.mesh:
        mesh = geometry.load_mesh(resolve(args, args.mesh))
    else:
        mesh = geometry.gen_primitive(args.shape, seed=args.seed)
    cell = min(cfg.cell, float(mesh.extent.min()) / cfg.min_cells_per_extent)
    grid = geometry.voxelize(mesh, cell)
    mp = geometry.mass_properties(grid, cfg.density)
    patch = geometry.contact_patch(grid, cfg.patch_points)
    imp = simulator.ImpulseSpec(J=args.impulse, r=args.at)
    out = simulator.run_to_rest(mp, patch, imp, cfg.sim, trajectory=args.trace is not None)
    if args.trace:
        trace = resolve(args, args.trace)
        trace.parent.mkdir(parents=True, exist_ok=True)
        simulator.write_trajectory_csv(out, trace)
        snap = {"command": "simulate", "seed": args.seed, "mesh": args.mesh, "shape": args.shape,
                "impulse": args.impulse.tolist(), "at": args.at.tolist(), "gen": cfg.to_dict(),
                "code_version": __version__}
        with open(trace.with_suffix(".json"), "w") as fh:
            json.dump(snap, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print_table({
        "mass_kg": mp.mass, "inertia_z": mp.inertia_z,
        "final_pos_m": f"{out.final_pos[0]:.6f},{out.final_pos[1]:.6f}",
        "distance_m": float(np.hypot(*out.final_pos)),
        "total_rotation_deg": out.total_rotation,
        "duration_s": out.duration,
        "hit_max_time": out.hit_max_time,
    })
    return EXIT_OK


def _log_progress():
    if not log.handlers and not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)


def cmd_train(args) -> int:
    cfg = train_config(args, load_overrides(args.config))
    if args.variant:
        cfg = trainer.variant_config(cfg, args.variant)
    if args.verbose:
        _log_progress()
    out = resolve(args, args.out)
    result, _ = trainer.train_run(resolve(args, args.dataset), cfg, out, protocol=args.protocol,
                                  category=args.category, split_mode=args.split)
    print_table({"run_dir": str(out), "best_epoch": result.best_epoch, "best_val_loss": result.best_val})
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = resolve(args, args.checkpoint)
    model, meta = load_checkpoint(ckpt)
    manifest = datagen.filter_outliers(datagen.load(resolve(args, args.dataset)))
    splits_file = ckpt.parent / "splits.json"
    if args.split != "all" and splits_file.exists():
        with open(splits_file) as fh:
            wanted = set(json.load(fh)[args.split])
        records = [r for r in manifest.records if r.index in wanted]
    else:
        records = manifest.records
    report = trainer.evaluate(model, records)
    out = resolve(args, args.out) if args.out else ckpt.parent
    out.mkdir(parents=True, exist_ok=True)
    variant = trainer.variant_name(model.cfg)
    metrics = trainer.write_metrics(report, out / "metrics.json", "eval", variant)
    trainer.curves_csv(report, out / "curves.csv")
    print_table(metrics)
    return EXIT_OK


def cmd_protocol(args) -> int:
    cfg = train_config(args, load_overrides(args.config))
    if args.verbose:
        _log_progress()
    name = f"{args.protocol}-{args.variant or 'full'}" + (f"-{args.category}" if args.category else "")
    out = resolve(args, args.out or name)
    _, metrics = trainer.run_protocol(args.protocol, resolve(args, args.dataset), cfg, out,
                                      variant=args.variant, category=args.category, split_mode=args.split)
    print_table({"run_dir": str(out), **metrics})
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out-dir", default=".", help="base directory for relative paths")
    common.add_argument("--config", help="JSON file or inline JSON with 'gen'/'train' overrides")

    p = _Parser(prog="slidenet", description="Simulate, learn and evaluate planar sliding after an impulse.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    physics = argparse.ArgumentParser(add_help=False)
    physics.add_argument("--density", type=float, help="kg/m^3")
    physics.add_argument("--cell", type=float, help="voxel edge in m")
    physics.add_argument("--mu", type=float, help="friction coefficient")
    physics.add_argument("--dt", type=float, help="time step in s")
    physics.add_argument("--max-time", dest="max_time", type=float, help="simulation cap in s")

    g = sub.add_parser("gen", parents=[common, physics], help="generate a dataset")
    g.add_argument("--shapes", required=True, help="e.g. 'box:1,cylinder:10' or comma-separated mesh paths")
    g.add_argument("--n", type=int, required=True, help="simulations per shape")
    g.add_argument("--out", default="dataset", help="dataset directory")
    g.add_argument("--jobs", type=int, default=1, help="worker processes")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("simulate", parents=[common, physics], help="simulate one impulse and print the outcome")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh", help="mesh file (v/f text format)")
    src.add_argument("--shape", choices=geometry.FAMILIES, help="primitive family with default size")
    s.add_argument("--impulse", type=_pair, required=True, help="Jx,Jy in N s (use --impulse=-1,0 for negatives)")
    s.add_argument("--at", type=_pair, default=np.zeros(2), help="rx,ry offset of the impulse line from the COM")
    s.add_argument("--trace", help="write the trajectory CSV here")
    s.set_defaults(func=cmd_simulate)

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--dataset", required=True, help="dataset directory")
    training.add_argument("--preset", choices=("default", "desk"), default="default",
                          help="'desk' trains a narrow model on 128-point clouds")
    training.add_argument("--epochs", type=int)
    training.add_argument("--batch-size", dest="batch_size", type=int)
    training.add_argument("--variant", choices=trainer.ABLATIONS)
    training.add_argument("--category", help="held-out family for leave_one_out")
    training.add_argument("--split", choices=("by_sim", "by_object", "leave_category_out"),
                          help="override the protocol's split mode")
    training.add_argument("-v", "--verbose", action="store_true", help="log per-epoch losses")

    t = sub.add_parser("train", parents=[common, training], help="train and keep the best-validation weights")
    t.add_argument("--protocol", choices=trainer.PROTOCOLS, default="obj_gen", help="selects the split")
    t.add_argument("--out", default="run", help="run directory")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--split", choices=("test", "val", "train", "all"), default="test",
                   help="records to score, taken from splits.json beside the checkpoint")
    e.add_argument("--out", help="directory for metrics.json and curves.csv (default: checkpoint's)")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("protocol", parents=[common, training], help="split, train, evaluate")
    r.add_argument("--protocol", choices=trainer.PROTOCOLS, required=True)
    r.add_argument("--out", help="run directory (default: <protocol>-<variant>)")
    r.set_defaults(func=cmd_protocol)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (trainer.TrainingError, simulator.SimulationError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (datagen.DatasetError, geometry.MeshError, CheckpointError, OSError, ValueError, KeyError) as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
