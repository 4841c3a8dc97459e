"""Single-file checkpoints: a JSON header line followed by raw little-endian arrays."""

from __future__ import annotations

import json
import os

import numpy as np

from .model import ModelConfig, SlideNet
from .optim import Adam

MAGIC = b"SLIDENET-CKPT\n"
VERSION = 1


class CheckpointError(ValueError):
    pass


def write_arrays(path: str | os.PathLike, arrays: dict[str, np.ndarray], meta: dict) -> None:
    entries, blobs, offset = [], [], 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": arr.nbytes})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"version": VERSION, "meta": meta, "arrays": entries}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header + b"\n")
        for b in blobs:
            fh.write(b)


def read_arrays(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        header = json.loads(fh.readline())
        if header.get("version") != VERSION:
            raise CheckpointError(f"{path}: checkpoint version {header.get('version')} != {VERSION}")
        body = fh.read()
    arrays = {}
    for e in header["arrays"]:
        raw = body[e["offset"]: e["offset"] + e["nbytes"]]
        if len(raw) != e["nbytes"]:
            raise CheckpointError(f"{path}: truncated array {e['name']}")
        arrays[e["name"]] = np.frombuffer(raw, dtype="<f8").reshape(e["shape"]).copy()
    return arrays, header["meta"]


def save_checkpoint(path, model: SlideNet, optimizer: Adam | None = None, meta: dict | None = None) -> None:
    arrays = dict(model.store.state())
    if optimizer is not None:
        arrays.update(optimizer.state_arrays())
    info = {"model": model.cfg.to_dict(), **(meta or {})}
    write_arrays(path, arrays, info)


def load_checkpoint(path, model: SlideNet | None = None, optimizer: Adam | None = None):
    """Restore a model (built from the stored config unless one is given).

    Returns ``(model, meta)``. Shape mismatches raise :class:`ValueError`.
    """
    arrays, meta = read_arrays(path)
    if model is None:
        model = SlideNet(ModelConfig.from_dict(meta["model"]))
    try:
        model.store.load_state(arrays)
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing tensor {exc}") from exc
    if optimizer is not None:
        optimizer.load_state_arrays(arrays)
    return model, meta
