"""Two-branch predictor of final position and total rotation, plus its ablations."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .layers import MLP, Linear, ParamStore
from .tensor import Tensor, concat, reshape, set_maxpool

VARIANTS = ("full", "np_mlp", "plain_mlp")
ROT_SCALE = 360.0  # network rotation output is in turns


@dataclass
class ModelConfig:
    variant: str = "full"
    n_points: int = 1024
    impulse_widths: tuple = (64, 128, 128)
    point_widths: tuple = (64, 64, 64, 128, 1024)
    shape_head_widths: tuple = (512, 256, 128)
    joint_widths: tuple = (256, 256, 128, 128, 64, 3)
    np_mlp_widths: tuple = (512, 512)
    plain_widths: tuple = (512, 512, 512, 256, 256, 256, 128, 128, 64, 32, 3)
    use_pairwise: bool = True
    use_impulse_coords: bool = True
    head_mass_inertia: bool = False
    head_velocity: bool = False
    velocity_layer: int = 4  # 1-based hidden layer of the joint head feeding the velocity head
    seed: int = 0

    def __post_init__(self):
        for name in ("impulse_widths", "point_widths", "shape_head_widths", "joint_widths",
                     "np_mlp_widths", "plain_widths"):
            setattr(self, name, tuple(int(w) for w in getattr(self, name)))
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.joint_widths[-1] != 3 or self.plain_widths[-1] != 3:
            raise ValueError("prediction layers must end in 3 outputs (x, y, rotation)")
        if self.variant in ("full", "np_mlp") and len(self.joint_widths) != 6:
            raise ValueError(f"joint head must have 6 layers, got {len(self.joint_widths)}")
        if not 1 <= self.velocity_layer < len(self.joint_widths):
            raise ValueError("velocity_layer must index a hidden layer of the joint head")

    @property
    def impulse_in(self) -> int:
        return 8 if self.use_pairwise else 4

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def impulse_features(J: np.ndarray, r: np.ndarray, pairwise: bool = True) -> np.ndarray:
    """Rows ``(Jx, Jy, rx, ry[, Jx rx, Jx ry, Jy rx, Jy ry])``."""
    J, r = np.atleast_2d(J), np.atleast_2d(r)
    cols = [J[:, 0], J[:, 1], r[:, 0], r[:, 1]]
    if pairwise:
        cols += [J[:, 0] * r[:, 0], J[:, 0] * r[:, 1], J[:, 1] * r[:, 0], J[:, 1] * r[:, 1]]
    return np.stack(cols, axis=1)


class SlideNet:
    """Impulse branch + point-set shape branch -> joint MLP.

    ``forward`` returns a dict of tensors: ``out`` (B, 3) with position in
    meters and rotation in turns, and optionally ``mass_inertia`` and
    ``velocity`` (B, 2) in units of the stored head scales.
    """

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.store = ParamStore()
        rng = np.random.default_rng(cfg.seed)
        s = self.store
        s.add_buffer("imp_mean", np.zeros(cfg.impulse_in))
        s.add_buffer("imp_std", np.ones(cfg.impulse_in))
        s.add_buffer("head_scale", np.ones(4))  # mass, inertia, |v0|, omega0

        if cfg.variant == "plain_mlp":
            self.plain = MLP(s, "plain", [cfg.n_points * 3 + cfg.impulse_in, *cfg.plain_widths], rng)
            return

        self.impulse = MLP(s, "impulse", [cfg.impulse_in, *cfg.impulse_widths], rng, norm_last=True)
        if cfg.variant == "full":
            self.points = MLP(s, "points", [3, *cfg.point_widths], rng, norm_last=True)
            global_width = cfg.point_widths[-1]
        else:
            self.points = MLP(s, "np_mlp", [cfg.n_points * 3, *cfg.np_mlp_widths], rng, norm_last=True)
            global_width = cfg.np_mlp_widths[-1]
        self.shape_head = MLP(s, "shape_head", [global_width, *cfg.shape_head_widths], rng, norm_last=True)
        joint_in = cfg.impulse_widths[-1] + cfg.shape_head_widths[-1]
        self.joint = MLP(s, "joint", [joint_in, *cfg.joint_widths], rng)
        if cfg.head_mass_inertia:
            self.mass_head = Linear(s, "head_mass", cfg.shape_head_widths[-1], 2, rng)
        if cfg.head_velocity:
            self.vel_head = Linear(s, "head_velocity", cfg.joint_widths[cfg.velocity_layer - 1], 2, rng)

    @property
    def params(self) -> dict[str, Tensor]:
        return self.store.params

    def n_params(self) -> int:
        return self.store.count()

    def set_normalization(self, J: np.ndarray, r: np.ndarray, head_scale=None) -> None:
        feats = impulse_features(J, r, self.cfg.use_pairwise)
        std = feats.std(axis=0)
        self.store.buffers["imp_mean"] = feats.mean(axis=0)
        self.store.buffers["imp_std"] = np.where(std > 1e-12, std, 1.0)
        if head_scale is not None:
            self.store.buffers["head_scale"] = np.asarray(head_scale, dtype=np.float64)

    def shape_feature(self, cloud: np.ndarray, training: bool = False) -> Tensor:
        cloud = np.asarray(cloud, dtype=np.float64)
        if cloud.ndim != 3 or cloud.shape[2] != 3:
            raise ValueError(f"point clouds must be (B, N, 3), got {cloud.shape}")
        B, N, _ = cloud.shape
        if self.cfg.variant == "full":
            h = self.points(Tensor(cloud.reshape(B * N, 3)), training)
            g = set_maxpool(reshape(h, (B, N, h.shape[1])))
        else:
            if N != self.cfg.n_points:
                raise ValueError(f"np_mlp expects {self.cfg.n_points} points, got {N}")
            g = self.points(Tensor(cloud.reshape(B, N * 3)), training)
        return self.shape_head(g, training)

    def forward(self, batch: dict, training: bool = False) -> dict[str, Tensor]:
        cfg, buf = self.cfg, self.store.buffers
        feats = (impulse_features(batch["J"], batch["r"], cfg.use_pairwise) - buf["imp_mean"]) / buf["imp_std"]
        cloud = np.asarray(batch["cloud"], dtype=np.float64)
        if cloud.shape[1] != cfg.n_points and cfg.variant != "full":
            raise ValueError(f"expected {cfg.n_points} points per cloud, got {cloud.shape[1]}")
        if cfg.variant == "plain_mlp":
            x = np.concatenate([cloud.reshape(len(cloud), -1), feats], axis=1)
            return {"out": self.plain(Tensor(x), training)}
        imp = self.impulse(Tensor(feats), training)
        shape = self.shape_feature(cloud, training)
        hidden: list = []
        out = self.joint(concat([imp, shape], axis=1), training, keep=hidden)
        res = {"out": out}
        if cfg.head_mass_inertia:
            res["mass_inertia"] = self.mass_head(shape)
        if cfg.head_velocity:
            res["velocity"] = self.vel_head(hidden[cfg.velocity_layer - 1])
        return res

    def predict(self, batch: dict) -> dict[str, np.ndarray]:
        """Eval-mode predictions in physical units."""
        res = self.forward(batch, training=False)
        out = res["out"].data
        pred = {"final_pos": out[:, :2].copy(), "total_rotation_deg": out[:, 2] * ROT_SCALE}
        scale = self.store.buffers["head_scale"]
        if "mass_inertia" in res:
            pred["mass"] = res["mass_inertia"].data[:, 0] * scale[0]
            pred["inertia_z"] = res["mass_inertia"].data[:, 1] * scale[1]
        if "velocity" in res:
            pred["v0_mag"] = res["velocity"].data[:, 0] * scale[2]
            pred["omega0"] = res["velocity"].data[:, 1] * scale[3]
        return pred

