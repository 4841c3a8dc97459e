"""Relative-error training losses."""

from __future__ import annotations

import numpy as np

from .model import ROT_SCALE
from .tensor import Tensor, absolute, as_tensor, norm

GUARD = 1e-6
HEAD_WEIGHT = 0.1


def relative_position_error(pred, target: np.ndarray) -> Tensor:
    """||P - P_hat|| / ||P|| per row; plain distance when ||P|| < 1e-6 m."""
    target = np.asarray(target, dtype=np.float64)
    scale = np.linalg.norm(target, axis=-1)
    scale = np.where(scale < GUARD, 1.0, scale)
    return norm(as_tensor(pred) - target, axis=-1) / scale


def relative_magnitude_error(pred, target: np.ndarray) -> Tensor:
    """|x_hat - x| / |x| for scalar targets, same guard as positions."""
    target = np.asarray(target, dtype=np.float64)
    scale = np.abs(target)
    scale = np.where(scale < GUARD, 1.0, scale)
    return absolute(as_tensor(pred) - target) / scale


def relative_rotation_error(pred, target: np.ndarray) -> Tensor:
    """|t_hat - t| / (|t_hat| + |t|); zero when both are below 1e-6."""
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    both_small = ((np.abs(pred.data) < GUARD) & (np.abs(target) < GUARD)).astype(np.float64)
    num = absolute(pred - target) * (1.0 - both_small)
    den = absolute(pred) + np.abs(target) + both_small
    return num / den


def loss(pred: dict, target: dict, head_weight: float = HEAD_WEIGHT, head_scale=None):
    """Mean training loss over a batch and its named components.

    ``pred`` holds the raw network outputs (``out`` and optional head
    tensors); ``target`` holds physical-unit arrays keyed like
    :class:`~slidenet.datagen.SimRecord` fields.
    """
    out = as_tensor(pred["out"])
    if not np.all(np.isfinite(out.data)):
        raise FloatingPointError("non-finite prediction")
    lp = relative_position_error(out[:, 0:2], target["final_pos"])
    lr = relative_rotation_error(out[:, 2] * ROT_SCALE, target["total_rotation_deg"])
    per_example = lp + lr
    parts = {"position": float(lp.data.mean()), "rotation": float(lr.data.mean())}
    scale = np.ones(4) if head_scale is None else np.asarray(head_scale, dtype=np.float64)
    if "mass_inertia" in pred:
        mi = as_tensor(pred["mass_inertia"])
        lm = relative_magnitude_error(mi[:, 0] * scale[0], target["mass"])
        li = relative_magnitude_error(mi[:, 1] * scale[1], target["inertia_z"])
        per_example = per_example + head_weight * (lm + li)
        parts.update(mass=float(lm.data.mean()), inertia=float(li.data.mean()))
    if "velocity" in pred:
        vel = as_tensor(pred["velocity"])
        lv = relative_magnitude_error(vel[:, 0] * scale[2], target["v0_mag"])
        lw = relative_rotation_error(vel[:, 1] * scale[3], target["omega0"])
        per_example = per_example + head_weight * (lv + lw)
        parts.update(v0=float(lv.data.mean()), omega0=float(lw.data.mean()))
    total = per_example.mean()
    parts["total"] = float(total.data)
    return total, parts
