"""Labeled simulation datasets: impulse sampling, generation, filtering, splits, IO."""

from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import (
    DEFAULT_CELL,
    DEFAULT_DENSITY,
    FAMILIES,
    MassProperties,
    TriMesh,
    contact_patch,
    family_of,
    gen_primitive,
    load_mesh,
    mass_properties,
    read_pointcloud,
    sample_pointcloud,
    scale_mesh,
    voxelize,
    write_pointcloud,
)
from .simulator import ImpulseSpec, SimConfig, apply_impulse, run_to_rest

SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")


class DatasetError(ValueError):
    pass


@dataclass
class GenConfig:
    density: float = DEFAULT_DENSITY
    cell: float = DEFAULT_CELL
    # finer cells for small shapes so mass quantization stays around 1%
    min_cells_per_extent: int = 32
    n_points: int = 1024
    oversample: int = 3
    patch_points: int = 256
    speed_range: tuple[float, float] = (0.85, 2.4)
    com_radius: float = 0.10
    com_radius_by_family: dict = field(default_factory=dict)
    scale_range: tuple[float, float] = (0.5, 1.5)
    sim: SimConfig = field(default_factory=SimConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        d = dict(d)
        sim = SimConfig(**d.pop("sim", {}))
        for key in ("speed_range", "scale_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(sim=sim, **d)


@dataclass
class SimRecord:
    index: int
    shape_id: str
    family: str
    scale: tuple
    pointcloud_ref: str
    J: np.ndarray
    r: np.ndarray
    mass: float
    inertia_z: float
    v0: np.ndarray
    omega0: float
    final_pos: np.ndarray
    total_rotation_deg: float
    seed: int
    frame: str = "world"
    signed_rotation_deg: float = 0.0
    duration: float = 0.0
    hit_max_time: bool = False
    cloud: np.ndarray | None = field(default=None, repr=False, compare=False)

    _VECTORS = ("J", "r", "v0", "final_pos")

    def __post_init__(self):
        for key in self._VECTORS:
            setattr(self, key, np.asarray(getattr(self, key), dtype=float).reshape(2))
        self.scale = tuple(float(s) for s in self.scale)

    def to_json(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "cloud":
                continue
            val = getattr(self, f.name)
            if isinstance(val, np.ndarray):
                val = [float(x) for x in val]
            elif isinstance(val, tuple):
                val = [float(x) for x in val]
            elif isinstance(val, (np.floating, np.integer, np.bool_)):
                val = val.item()
            out[f.name] = val
        return out

    @classmethod
    def from_json(cls, d: dict) -> "SimRecord":
        names = {f.name for f in dataclasses.fields(cls)} - {"cloud"}
        missing = names - set(d) - {"frame", "signed_rotation_deg", "duration", "hit_max_time"}
        if missing:
            raise DatasetError(f"record is missing fields {sorted(missing)}")
        return cls(**{k: v for k, v in d.items() if k in names})

    def same_as(self, other: "SimRecord") -> bool:
        return self.to_json() == other.to_json()


@dataclass
class DatasetManifest:
    records: list[SimRecord]
    splits: dict[str, list[int]] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def by_index(self) -> dict[int, SimRecord]:
        return {r.index: r for r in self.records}

    def subset(self, name: str) -> list[SimRecord]:
        if name not in self.splits:
            raise DatasetError(f"manifest has no {name!r} split")
        lookup = self.by_index()
        return [lookup[i] for i in self.splits[name]]

    def shape_ids(self, name: str) -> set[str]:
        return {r.shape_id for r in self.subset(name)}


# --------------------------------------------------------------------------
# impulse sampling


def silhouette_segments(mesh: TriMesh, z: float) -> np.ndarray:
    """Cross-section of the surface at height ``z`` as 2D segments, shape (S, 2, 2)."""
    tri = mesh.vertices[mesh.triangles]
    dz = tri[:, :, 2] - z
    above = dz > 0
    cut = above.any(axis=1) & (~above).any(axis=1)
    segs = []
    for t, d in zip(tri[cut], dz[cut]):
        pts = []
        for i, j in ((0, 1), (1, 2), (2, 0)):
            if (d[i] > 0) != (d[j] > 0):
                u = d[i] / (d[i] - d[j])
                pts.append(t[i, :2] + u * (t[j, :2] - t[i, :2]))
        if len(pts) == 2:
            segs.append(pts)
    return np.array(segs).reshape(-1, 2, 2)


def _line_entry(segs: np.ndarray, origin: np.ndarray, direction: np.ndarray) -> float | None:
    """Smallest line parameter at which ``origin + t * direction`` meets a segment."""
    a, b = segs[:, 0], segs[:, 1]
    e = b - a
    den = direction[0] * e[:, 1] - direction[1] * e[:, 0]
    ok = np.abs(den) > 1e-15
    if not ok.any():
        return None
    w = a[ok] - origin
    t = (w[:, 0] * e[ok, 1] - w[:, 1] * e[ok, 0]) / den[ok]
    u = (w[:, 0] * direction[1] - w[:, 1] * direction[0]) / den[ok]
    hit = (u >= 0) & (u <= 1)
    if not hit.any():
        return None
    return float(t[hit].min())


def sample_impulse(mesh: TriMesh, mp: MassProperties, speed_range=(0.85, 2.4), com_radius: float = 0.1,
                   rng: np.random.Generator | int | None = None, max_tries: int = 1000,
                   segments: np.ndarray | None = None) -> ImpulseSpec:
    """Random horizontal impulse whose line of action passes within ``com_radius`` of the COM.

    Magnitude is mass times a speed drawn uniformly from ``speed_range``.
    The application point is where the line first meets the object's
    outline at COM height.
    """
    lo, hi = speed_range
    if not (0 < lo <= hi):
        raise ValueError(f"speed_range must be positive and ordered, got {speed_range}")
    if not com_radius >= 0:
        raise ValueError("com_radius must be non-negative")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    segs = silhouette_segments(mesh, mp.com[2]) if segments is None else segments
    if len(segs) == 0:
        raise DatasetError(f"{mesh.shape_id}: empty outline at COM height {mp.com[2]:.4g}")
    com = mp.com[:2]
    for _ in range(max_tries):
        phi = rng.uniform(0.0, 2 * np.pi)
        d = rng.uniform(-com_radius, com_radius)
        speed = rng.uniform(lo, hi)
        u = np.array([math.cos(phi), math.sin(phi)])
        n = np.array([-u[1], u[0]])
        base = com + d * n
        t = _line_entry(segs, base, u)
        if t is None:
            continue
        point = base + t * u
        return ImpulseSpec(J=mp.mass * speed * u, r=point - com)
    raise DatasetError(f"{mesh.shape_id}: no impulse line met the outline after {max_tries} tries")


# --------------------------------------------------------------------------
# generation


def make_shapes(spec: str, seed: int = 0) -> list[TriMesh]:
    """Parse ``"box:1,cylinder:10"`` (or mesh file paths) into base meshes.

    Family members get ids ``<family>-<nnn>``; the box family is a single
    cube, so every box entry is the same shape.
    """
    shapes = []
    for k, item in enumerate(p.strip() for p in spec.split(",") if p.strip()):
        fam, _, count = item.partition(":")
        if fam in FAMILIES:
            n = int(count or 1)
            if n < 1:
                raise ValueError(f"shape count must be >= 1 in {item!r}")
            for i in range(n):
                sub = int(np.random.SeedSequence([seed, k, i]).generate_state(1)[0])
                shapes.append(gen_primitive(fam, seed=sub, shape_id=f"{fam}-{i:03d}"))
        elif os.path.exists(item):
            shapes.append(load_mesh(item, shape_id=f"mesh-{Path(item).stem}"))
        else:
            raise ValueError(f"unknown shape family or missing mesh file: {item!r}")
    if not shapes:
        raise ValueError("no shapes given")
    return shapes


def record_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def simulate_record(mesh: TriMesh, index: int, cfg: GenConfig, seed: int) -> SimRecord:
    """One labeled simulation of a randomly rescaled copy of ``mesh``."""
    rseed = record_seed(seed, index)
    rng = np.random.default_rng(rseed)
    scale = rng.uniform(*cfg.scale_range, size=3)
    body = scale_mesh(mesh, *scale)
    cell = min(cfg.cell, float(body.extent.min()) / cfg.min_cells_per_extent)
    grid = voxelize(body, cell)
    mp = mass_properties(grid, cfg.density)
    cloud = sample_pointcloud(body, cfg.n_points, seed=rseed, oversample=cfg.oversample, com=mp.com)
    patch = contact_patch(grid, cfg.patch_points)
    family = family_of(mesh.shape_id)
    radius = cfg.com_radius_by_family.get(family, cfg.com_radius)
    imp = sample_impulse(body, mp, cfg.speed_range, radius, rng)
    v0, om0 = apply_impulse(mp, imp)
    out = run_to_rest(mp, patch, imp, cfg.sim)
    return SimRecord(
        index=index, shape_id=mesh.shape_id, family=family, scale=tuple(scale),
        pointcloud_ref=f"shapes/{index:06d}.pc", J=imp.J, r=imp.r, mass=mp.mass,
        inertia_z=mp.inertia_z, v0=v0, omega0=om0, final_pos=out.final_pos,
        total_rotation_deg=out.total_rotation, seed=rseed,
        signed_rotation_deg=math.degrees(out.signed_rotation), duration=out.duration,
        hit_max_time=out.hit_max_time,
        cloud=cloud.astype("<f4").astype(np.float64),
    )


def _simulate_job(args):
    mesh, index, cfg, seed = args
    try:
        return simulate_record(mesh, index, cfg, seed)
    except Exception as exc:  # add record context, keep the original type visible
        raise DatasetError(f"record {index} ({mesh.shape_id}): {type(exc).__name__}: {exc}") from exc


def generate(shapes: list[TriMesh], n_per_shape: int | list[int], cfg: GenConfig | None = None, seed: int = 0,
             jobs: int = 1, progress=None) -> DatasetManifest:
    """Run ``n_per_shape`` simulations for every shape; reproducible for a given seed.

    ``n_per_shape`` is one count for all shapes or one count per shape.
    """
    cfg = cfg or GenConfig()
    if not shapes:
        raise ValueError("need at least one shape")
    counts = [int(n_per_shape)] * len(shapes) if np.isscalar(n_per_shape) else [int(n) for n in n_per_shape]
    if len(counts) != len(shapes):
        raise ValueError(f"got {len(counts)} counts for {len(shapes)} shapes")
    if min(counts) < 1:
        raise ValueError("n_per_shape must be >= 1")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    work = [(mesh, int(starts[s]) + i, cfg, seed) for s, mesh in enumerate(shapes) for i in range(counts[s])]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_simulate_job, work, chunksize=16))
    else:
        records = []
        for job in work:
            records.append(_simulate_job(job))
            if progress is not None:
                progress(len(records), len(work))
    records.sort(key=lambda r: r.index)
    snapshot = {"generation": cfg.to_dict(), "seed": seed, "n_per_shape": counts,
                "shapes": [m.shape_id for m in shapes]}
    return DatasetManifest(records=records, config=snapshot)


# --------------------------------------------------------------------------
# preprocessing


def filter_outliers(manifest: DatasetManifest, max_distance: float = 7.0,
                    max_rotation_deg: float = 3000.0) -> DatasetManifest:
    keep = [r for r in manifest.records
            if float(np.hypot(*r.final_pos)) <= max_distance and r.total_rotation_deg <= max_rotation_deg]
    kept = {r.index for r in keep}
    splits = {k: [i for i in v if i in kept] for k, v in manifest.splits.items()}
    return DatasetManifest(records=keep, splits=splits, config=dict(manifest.config))


def _rot(points: np.ndarray, c: float, s: float) -> np.ndarray:
    out = points.copy()
    out[..., 0] = c * points[..., 0] - s * points[..., 1]
    out[..., 1] = s * points[..., 0] + c * points[..., 1]
    return out


def to_impulse_coords(record: SimRecord) -> SimRecord:
    """Rotate the record about the vertical axis so the impulse points along +x."""
    jn = float(np.hypot(*record.J))
    if jn == 0:
        raise DatasetError(f"record {record.index}: zero impulse has no direction")
    if record.frame == "impulse" or (record.J[1] == 0 and record.J[0] > 0):
        return dataclasses.replace(record, frame="impulse")
    phi = math.atan2(record.J[1], record.J[0])
    c, s = math.cos(-phi), math.sin(-phi)
    return dataclasses.replace(
        record,
        J=np.array([jn, 0.0]),
        r=_rot(record.r, c, s),
        v0=_rot(record.v0, c, s),
        final_pos=_rot(record.final_pos, c, s),
        cloud=None if record.cloud is None else _rot(record.cloud, c, s),
        frame="impulse",
    )


# --------------------------------------------------------------------------
# splits


def _cut(items: list, fractions, rng: np.random.Generator) -> list[list]:
    items = list(items)
    rng.shuffle(items)
    bounds = np.round(np.cumsum(fractions) * len(items)).astype(int)
    out, prev = [], 0
    for b in bounds:
        out.append(items[prev:b])
        prev = b
    out[-1].extend(items[prev:])
    return out


def _cut_objects(ids_by_family: dict[str, list[str]], fractions, rng) -> list[set]:
    """Partition shape ids family by family; single-shape families stay in the first part."""
    parts = [set() for _ in fractions]
    for fam in sorted(ids_by_family):
        ids = sorted(ids_by_family[fam])
        if len(ids) < 2:
            parts[0].update(ids)
            continue
        rng.shuffle(ids)
        counts = [int(round(f * len(ids))) for f in fractions[1:]]
        # every non-empty held-out fraction gets at least one shape while the first part keeps one
        counts = [max(c, 1) if f > 0 else 0 for c, f in zip(counts, fractions[1:])]
        while sum(counts) > len(ids) - 1:
            counts[counts.index(max(counts))] -= 1
        start = len(ids) - sum(counts)
        parts[0].update(ids[:start])
        for p, c in zip(parts[1:], counts):
            p.update(ids[start:start + c])
            start += c
    return parts


def split(manifest: DatasetManifest, mode: str = "by_sim", fractions=(0.8, 0.2), seed: int = 0,
          category: str | None = None, val_fraction: float = 0.0) -> DatasetManifest:
    """Assign records to train/val/test.

    ``fractions`` is (train, test) or (train, val, test). With two entries,
    ``val_fraction`` of the training part (records for ``by_sim``, shapes
    otherwise) is carved out as validation.

    - ``by_sim``: records split regardless of shape
    - ``by_object``: shape ids partitioned, stratified by family
    - ``leave_category_out``: every record of ``category`` goes to test
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) not in (2, 3) or abs(sum(fractions) - 1) > 1e-9 or min(fractions) < 0:
        raise ValueError(f"fractions must be 2 or 3 non-negative numbers summing to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    recs = sorted(manifest.records, key=lambda r: r.index)
    if len(fractions) == 3:
        train_frac, val_frac, test_frac = fractions
        parts3 = (train_frac, val_frac, test_frac)
    else:
        parts3 = ((1 - val_fraction) * fractions[0], val_fraction * fractions[0], fractions[1])

    if mode == "by_sim":
        train, val, test = _cut([r.index for r in recs], parts3, rng)
    elif mode in ("by_object", "leave_category_out"):
        ids_by_family: dict[str, list[str]] = {}
        for r in recs:
            ids_by_family.setdefault(r.family, [])
            if r.shape_id not in ids_by_family[r.family]:
                ids_by_family[r.family].append(r.shape_id)
        if mode == "by_object":
            tr_ids, va_ids, te_ids = _cut_objects(ids_by_family, parts3, rng)
        else:
            if category not in ids_by_family:
                raise DatasetError(f"category {category!r} not in dataset (have {sorted(ids_by_family)})")
            te_ids = set(ids_by_family.pop(category))
            rest = sum(parts3[:2])
            tr_ids, va_ids = _cut_objects(ids_by_family, (parts3[0] / rest, parts3[1] / rest), rng)
        train = [r.index for r in recs if r.shape_id in tr_ids]
        val = [r.index for r in recs if r.shape_id in va_ids]
        test = [r.index for r in recs if r.shape_id in te_ids]
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    # too few shapes to hold any out for validation: carve it from the training simulations instead
    val_by_sim = mode != "by_sim" and not val and parts3[1] > 0 and len(train) > 1
    if val_by_sim:
        keep = parts3[0] / (parts3[0] + parts3[1])
        train, val = _cut(train, (keep, 1 - keep), rng)
    splits = {"train": sorted(train), "val": sorted(val), "test": sorted(test)}
    cfg = dict(manifest.config)
    cfg["split"] = {"mode": mode, "fractions": list(fractions), "seed": seed, "category": category,
                    "val_fraction": val_fraction, "val_by_sim": val_by_sim}
    return DatasetManifest(records=list(manifest.records), splits=splits, config=cfg)


def assert_no_leak(manifest: DatasetManifest) -> None:
    """No shape id in more than one split; validation is exempt when it was carved by simulation."""
    names = [s for s in SPLITS if s in manifest.splits]
    if manifest.config.get("split", {}).get("val_by_sim"):
        names = [s for s in names if s != "val"]
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            shared = manifest.shape_ids(a) & manifest.shape_ids(b)
            if shared:
                raise DatasetError(f"shape ids shared by {a} and {b}: {sorted(shared)[:5]}")


# --------------------------------------------------------------------------
# persistence


def save(manifest: DatasetManifest, directory: str | os.PathLike) -> Path:
    """Write ``manifest.jsonl``, ``shapes/*.pc``, ``config.json`` and (if any) ``splits.json``."""
    d = Path(directory)
    (d / "shapes").mkdir(parents=True, exist_ok=True)
    with open(d / "manifest.jsonl", "w") as fh:
        for rec in manifest.records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
            if rec.cloud is not None:
                write_pointcloud(d / rec.pointcloud_ref, rec.cloud)
    cfg = dict(manifest.config)
    cfg["schema_version"] = SCHEMA_VERSION
    cfg["code_version"] = __version__
    with open(d / "config.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if manifest.splits:
        with open(d / "splits.json", "w") as fh:
            json.dump(manifest.splits, fh, sort_keys=True)
            fh.write("\n")
    return d


def load(directory: str | os.PathLike, n_points: int | None = None) -> DatasetManifest:
    d = Path(directory)
    try:
        with open(d / "config.json") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise DatasetError(f"{d}: missing config.json") from exc
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(f"{d}: schema version {cfg.get('schema_version')} != {SCHEMA_VERSION}")
    records = []
    with open(d / "manifest.jsonl") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = SimRecord.from_json(json.loads(line))
            except (json.JSONDecodeError, TypeError) as exc:
                raise DatasetError(f"{d}/manifest.jsonl:{lineno}: {exc}") from exc
            path = d / rec.pointcloud_ref
            if not path.exists():
                raise DatasetError(f"record {rec.index}: point cloud {rec.pointcloud_ref} not found")
            rec.cloud = read_pointcloud(path, n_points)
            records.append(rec)
    splits = {}
    if (d / "splits.json").exists():
        with open(d / "splits.json") as fh:
            splits = {k: list(v) for k, v in json.load(fh).items()}
        known = {r.index for r in records}
        for name, idx in splits.items():
            if not set(idx) <= known:
                raise DatasetError(f"split {name!r} references unknown records")
    cfg.pop("schema_version", None)
    return DatasetManifest(records=records, splits=splits, config=cfg)


def manifests_equal(a: DatasetManifest, b: DatasetManifest) -> bool:
    if len(a.records) != len(b.records) or a.splits != b.splits:
        return False
    for ra, rb in zip(a.records, b.records):
        if not ra.same_as(rb):
            return False
        if (ra.cloud is None) != (rb.cloud is None):
            return False
        if ra.cloud is not None and not np.array_equal(ra.cloud, rb.cloud):
            return False
    return True
