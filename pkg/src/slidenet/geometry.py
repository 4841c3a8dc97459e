"""Shapes, voxel mass properties and canonical point clouds.

Meshes are triangle soups in meters with z pointing up. Every generated or
rescaled mesh rests on the ground plane (min z = 0) with its footprint
centered on the origin.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from numba import njit

DEFAULT_DENSITY = 300.0  # kg/m^3
DEFAULT_CELL = 0.025  # m
FAMILIES = ("box", "cylinder", "l-shape", "tapered-prism", "tube")

_MIN_TRI_AREA = 1e-12


class MeshError(ValueError):
    """Raised for malformed or unusable meshes."""


class NotWatertightError(MeshError):
    """Raised when a voxelization ray crosses the surface an odd number of times."""


@dataclass
class TriMesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64
    shape_id: str = "mesh"

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        validate_mesh(self)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def extent(self) -> np.ndarray:
        lo, hi = self.bounds
        return hi - lo

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass
class VoxelGrid:
    origin: np.ndarray  # corner of cell (0, 0, 0)
    cell: float
    occupancy: np.ndarray  # (nx, ny, nz) bool
    watertight: bool = True

    def cell_centers(self) -> np.ndarray:
        """Centers of occupied cells, shape (K, 3)."""
        idx = np.argwhere(self.occupancy)
        return self.origin + (idx + 0.5) * self.cell

    @property
    def n_occupied(self) -> int:
        return int(self.occupancy.sum())


@dataclass
class MassProperties:
    mass: float
    inertia_z: float
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    volume: float = 0.0


@dataclass
class ContactPatch:
    """Ground contact samples in the body frame (COM at the origin)."""

    points: np.ndarray  # (k, 2)
    weights: np.ndarray  # (k,), sums to 1


def validate_mesh(mesh: TriMesh) -> None:
    v, t = mesh.vertices, mesh.triangles
    if v.ndim != 2 or v.shape[1] != 3 or len(v) == 0:
        raise MeshError(f"{mesh.shape_id}: vertices must be a non-empty (V, 3) array, got {v.shape}")
    if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
        raise MeshError(f"{mesh.shape_id}: triangles must be a non-empty (T, 3) array, got {t.shape}")
    if not np.all(np.isfinite(v)):
        raise MeshError(f"{mesh.shape_id}: non-finite vertex coordinates")
    bad = np.flatnonzero((t < 0).any(axis=1) | (t >= len(v)).any(axis=1))
    if len(bad):
        raise IndexError(
            f"{mesh.shape_id}: triangle {bad[0]} has vertex index out of range [0, {len(v)})"
        )
    area = mesh.triangle_areas()
    tiny = np.flatnonzero(area <= _MIN_TRI_AREA)
    if len(tiny):
        raise MeshError(f"{mesh.shape_id}: triangle {tiny[0]} is degenerate (area {area[tiny[0]]:.3g} m^2)")


def is_watertight(mesh: TriMesh) -> bool:
    """True when every undirected edge is shared by exactly two triangles."""
    t = mesh.triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges.sort(axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return bool(np.all(counts == 2))


# --------------------------------------------------------------------------
# mesh IO


def load_mesh(path: str | os.PathLike, shape_id: str | None = None) -> TriMesh:
    """Read an ASCII vertex/face mesh (``v x y z`` and ``f i j k`` lines, 1-based).

    Polygonal faces are fan-triangulated. Texture/normal indices in
    ``f 1/2/3`` form are ignored.
    """
    verts, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = [int(p.split("/")[0]) for p in parts[1:]]
                    if len(idx) < 3:
                        raise ValueError("face needs at least 3 vertices")
                    # negative indices are relative to the end, as in OBJ
                    idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                    faces.extend([idx[0], idx[k], idx[k + 1]] for k in range(1, len(idx) - 1))
            except ValueError as exc:
                raise MeshError(f"{path}:{lineno}: cannot parse {line.strip()!r} ({exc})") from exc
    if not verts or not faces:
        raise MeshError(f"{path}: empty mesh ({len(verts)} vertices, {len(faces)} faces)")
    sid = shape_id or os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return TriMesh(np.array(verts), np.array(faces), sid)


def save_mesh(mesh: TriMesh, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {mesh.shape_id}\n")
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in (mesh.triangles + 1).tolist():
            fh.write(f"f {a} {b} {c}\n")


# --------------------------------------------------------------------------
# procedural shapes


def _ear_clip(poly: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple counter-clockwise polygon."""
    idx = list(range(len(poly)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3:
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = poly[i0], poly[i1], poly[i2]
            if cross(a, b, c) <= 1e-15:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = poly[j]
                if cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0:
                    inside = True
                    break
            if not inside:
                tris.append((i0, i1, i2))
                idx.pop(k)
                break
        guard += 1
        if guard > 10 * len(poly):
            raise MeshError("polygon triangulation failed (not simple or not counter-clockwise?)")
    tris.append(tuple(idx))
    return tris


def _prism(bottom: np.ndarray, top: np.ndarray, height: float, shape_id: str) -> TriMesh:
    """Closed solid between a CCW polygon at z=0 and a matching polygon at z=height."""
    n = len(bottom)
    verts = np.vstack([np.c_[bottom, np.zeros(n)], np.c_[top, np.full(n, height)]])
    cap = _ear_clip(bottom)
    tris = [(a, c, b) for a, b, c in cap]  # bottom faces down
    tris += [(a + n, b + n, c + n) for a, b, c in cap]
    for i in range(n):
        j = (i + 1) % n
        tris += [(i, j, j + n), (i, j + n, i + n)]
    return TriMesh(verts, np.array(tris), shape_id)


def _ngon(radius: float, n: int, phase: float = 0.0) -> np.ndarray:
    ang = phase + 2 * np.pi * np.arange(n) / n
    return radius * np.c_[np.cos(ang), np.sin(ang)]


def box_mesh(a: float, b: float, c: float, shape_id: str = "box") -> TriMesh:
    rect = 0.5 * np.array([[-a, -b], [a, -b], [a, b], [-a, b]])
    return _prism(rect, rect, c, shape_id)


def cylinder_mesh(radius: float, height: float, segments: int = 64, shape_id: str = "cylinder") -> TriMesh:
    ring = _ngon(radius, segments)
    return _prism(ring, ring, height, shape_id)


def l_shape_mesh(width: float, depth: float, arm: float, height: float, shape_id: str = "l-shape") -> TriMesh:
    """L footprint: ``width`` x ``depth`` rectangle minus the corner beyond arm thickness."""
    if not 0 < arm < min(width, depth):
        raise ValueError(f"arm thickness {arm} must be in (0, {min(width, depth)})")
    poly = np.array([[0, 0], [width, 0], [width, arm], [arm, arm], [arm, depth], [0, depth]], float)
    poly -= [width / 2, depth / 2]
    return _prism(poly, poly, height, shape_id)


def tapered_prism_mesh(radius: float, height: float, taper: float, sides: int = 4,
                       shape_id: str = "tapered-prism") -> TriMesh:
    if not 0 < taper <= 1:
        raise ValueError(f"taper must be in (0, 1], got {taper}")
    if sides < 3:
        raise ValueError("a prism needs at least 3 sides")
    base = _ngon(radius, sides, phase=np.pi / sides)
    return _prism(base, taper * base, height, shape_id)


def tube_mesh(radius: float, wall: float, height: float, segments: int = 64, shape_id: str = "tube") -> TriMesh:
    if not 0 < wall < radius:
        raise ValueError(f"wall thickness {wall} must be in (0, radius={radius})")
    n = segments
    outer, inner = _ngon(radius, n), _ngon(radius - wall, n)
    # rings: outer bottom, inner bottom, outer top, inner top
    verts = np.vstack([
        np.c_[outer, np.zeros(n)], np.c_[inner, np.zeros(n)],
        np.c_[outer, np.full(n, height)], np.c_[inner, np.full(n, height)],
    ])
    ob, ib, ot, it = 0, n, 2 * n, 3 * n
    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris += [(ob + i, ot + j, ob + j), (ob + i, ot + i, ot + j)]  # outer wall
        tris += [(ib + i, ib + j, it + j), (ib + i, it + j, it + i)]  # inner wall
        tris += [(ot + i, it + j, ot + j), (ot + i, it + i, it + j)]  # top annulus
        tris += [(ob + i, ob + j, ib + j), (ob + i, ib + j, ib + i)]  # bottom annulus
    return TriMesh(verts, np.array(tris), shape_id)


# parameter ranges used when a family member is drawn at random (meters)
FAMILY_RANGES = {
    "box": {"a": (0.30, 0.30), "b": (0.30, 0.30), "c": (0.30, 0.30)},
    "cylinder": {"radius": (0.10, 0.20), "height": (0.10, 0.30)},
    "l-shape": {"width": (0.20, 0.40), "depth": (0.20, 0.40), "arm_frac": (0.35, 0.6), "height": (0.08, 0.25)},
    "tapered-prism": {"radius": (0.10, 0.20), "height": (0.10, 0.30), "taper": (0.4, 0.9), "sides": (3, 8)},
    "tube": {"radius": (0.10, 0.20), "wall_frac": (0.15, 0.4), "height": (0.10, 0.30)},
}

def family_of(shape_id: str) -> str:
    """Family prefix of a shape id such as ``cylinder-003``."""
    for fam in sorted(FAMILIES, key=len, reverse=True):
        if shape_id == fam or shape_id.startswith(fam + "-"):
            return fam
    return shape_id.split("-")[0]


def random_params(kind: str, rng: np.random.Generator) -> dict:
    ranges = FAMILY_RANGES[kind]
    p = {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in ranges.items() if k != "sides"}
    if kind == "tapered-prism":
        p["sides"] = int(rng.integers(ranges["sides"][0], ranges["sides"][1] + 1))
    if kind == "l-shape":
        p["arm"] = p.pop("arm_frac") * min(p["width"], p["depth"])
    if kind == "tube":
        p["wall"] = p.pop("wall_frac") * p["radius"]
    return p


def gen_primitive(kind: str, params: dict | None = None, seed: int | None = None,
                  shape_id: str | None = None) -> TriMesh:
    """Build a watertight primitive resting on z=0.

    With ``params=None`` the dimensions are drawn from ``FAMILY_RANGES`` using
    ``seed``. Recognized parameters per family:

    - box: a, b, c
    - cylinder: radius, height, [segments]
    - l-shape: width, depth, arm, height
    - tapered-prism: radius, height, taper, [sides]
    - tube: radius, wall, height, [segments]
    """
    if kind not in FAMILIES:
        raise ValueError(f"unknown primitive {kind!r}; expected one of {FAMILIES}")
    if params is None:
        params = random_params(kind, np.random.default_rng(seed))
    params = dict(params)
    for key, val in params.items():
        if key not in ("segments", "sides") and not val > 0:
            raise ValueError(f"{kind}: dimension {key}={val} must be positive")
    sid = shape_id or kind
    if kind == "box":
        return box_mesh(params["a"], params["b"], params["c"], sid)
    if kind == "cylinder":
        return cylinder_mesh(params["radius"], params["height"], int(params.get("segments", 64)), sid)
    if kind == "l-shape":
        return l_shape_mesh(params["width"], params["depth"], params["arm"], params["height"], sid)
    if kind == "tapered-prism":
        return tapered_prism_mesh(params["radius"], params["height"], params["taper"],
                                  int(params.get("sides", 4)), sid)
    return tube_mesh(params["radius"], params["wall"], params["height"], int(params.get("segments", 64)), sid)


def uv_sphere(radius: float = 1.0, n_lat: int = 48, n_lon: int = 96, shape_id: str = "sphere") -> TriMesh:
    """Closed latitude/longitude sphere resting on z=0."""
    lat = np.pi * np.arange(1, n_lat) / n_lat
    lon = 2 * np.pi * np.arange(n_lon) / n_lon
    ring = np.stack([
        np.outer(np.sin(lat), np.cos(lon)), np.outer(np.sin(lat), np.sin(lon)),
        np.outer(np.cos(lat), np.ones(n_lon)),
    ], axis=-1).reshape(-1, 3)
    verts = np.vstack([[0, 0, 1], ring, [0, 0, -1]]) * radius
    verts[:, 2] += radius
    top, bot = 0, len(verts) - 1
    tris = []
    ridx = lambda i, j: 1 + i * n_lon + (j % n_lon)  # noqa: E731
    for j in range(n_lon):
        tris.append((top, ridx(0, j), ridx(0, j + 1)))
        tris.append((bot, ridx(n_lat - 2, j + 1), ridx(n_lat - 2, j)))
    for i in range(n_lat - 2):
        for j in range(n_lon):
            a, b, c, d = ridx(i, j), ridx(i, j + 1), ridx(i + 1, j), ridx(i + 1, j + 1)
            tris += [(a, c, d), (a, d, b)]
    return TriMesh(verts, np.array(tris), shape_id)


def seat(vertices: np.ndarray) -> np.ndarray:
    """Translate so the footprint is centered on the origin and min z is 0."""
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    out = vertices - [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, lo[2]]
    return out


def scale_mesh(mesh: TriMesh, sx: float, sy: float, sz: float) -> TriMesh:
    """Scale per axis about the footprint center and re-seat on the ground plane."""
    s = np.array([sx, sy, sz], dtype=float)
    if not np.all((s > 0) & (s <= 10)):
        raise ValueError(f"scale factors must lie in (0, 10], got {tuple(s)}")
    if np.all(s == 1.0):
        return TriMesh(mesh.vertices.copy(), mesh.triangles.copy(), mesh.shape_id)
    v = seat(mesh.vertices) * s
    return TriMesh(seat(v), mesh.triangles.copy(), mesh.shape_id)


# --------------------------------------------------------------------------
# voxelization and mass properties


def voxelize(mesh: TriMesh, cell: float = DEFAULT_CELL) -> VoxelGrid:
    """Fill the interior of a closed mesh by ray parity along +z.

    One vertical ray per grid column, slightly offset from the column center
    so that it never grazes an edge or vertex. A column whose ray crosses
    the surface an odd number of times means the mesh is not closed.
    """
    if not cell > 0:
        raise ValueError(f"cell must be positive, got {cell}")
    lo, hi = mesh.bounds
    ext = hi - lo
    if cell > ext.min() / 4 * (1 + 1e-9):
        raise ValueError(f"cell {cell} too coarse for smallest extent {ext.min():.4g} (need <= extent/4)")
    dims = np.maximum(np.ceil(ext / cell - 1e-9).astype(int), 1)
    origin = (lo + hi) / 2 - dims * cell / 2
    origin[2] = lo[2]  # layers start at the ground so the bottom layer is the contact layer
    nx, ny, nz = dims
    jitter = cell * np.array([1.2345678e-6, 2.3456789e-6])
    xs = origin[0] + (np.arange(nx) + 0.5) * cell + jitter[0]
    ys = origin[1] + (np.arange(ny) + 0.5) * cell + jitter[1]

    toggles = np.zeros((nx, ny, nz + 1), dtype=np.int32)
    v = mesh.vertices
    tri = v[mesh.triangles]  # (T, 3, 3)
    for a, b, c in tri:
        d = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        if abs(d) < 1e-18:
            continue  # vertical face, invisible to vertical rays
        x0, x1 = min(a[0], b[0], c[0]), max(a[0], b[0], c[0])
        y0, y1 = min(a[1], b[1], c[1]), max(a[1], b[1], c[1])
        i0, i1 = np.searchsorted(xs, x0), np.searchsorted(xs, x1, side="right")
        j0, j1 = np.searchsorted(ys, y0), np.searchsorted(ys, y1, side="right")
        if i0 >= i1 or j0 >= j1:
            continue
        px, py = np.meshgrid(xs[i0:i1], ys[j0:j1], indexing="ij")
        # barycentric coordinates of the ray in the triangle's xy projection
        l1 = ((px - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (py - a[1])) / d
        l2 = ((b[0] - a[0]) * (py - a[1]) - (px - a[0]) * (b[1] - a[1])) / d
        l0 = 1.0 - l1 - l2
        hit = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        if not hit.any():
            continue
        z = l0[hit] * a[2] + l1[hit] * b[2] + l2[hit] * c[2]
        # first cell whose center lies above the crossing
        k = np.clip(np.ceil((z - origin[2]) / cell - 0.5).astype(int), 0, nz)
        ii, jj = np.nonzero(hit)
        np.add.at(toggles, (ii + i0, jj + j0, k), 1)

    counts = toggles.sum(axis=2)
    odd = np.argwhere(counts % 2 == 1)
    if len(odd):
        i, j = odd[0]
        raise NotWatertightError(
            f"{mesh.shape_id}: ray at column ({i}, {j}) x={xs[i]:.6g} y={ys[j]:.6g} "
            f"crosses the surface {counts[i, j]} times; mesh is not watertight"
        )
    occ = (np.cumsum(toggles[:, :, :nz], axis=2) % 2).astype(bool)
    return VoxelGrid(origin=origin, cell=float(cell), occupancy=occ, watertight=True)


def mass_properties(grid: VoxelGrid, density: float = DEFAULT_DENSITY) -> MassProperties:
    """Mass, COM and vertical-axis inertia of the occupied cells.

    Each cell is treated as a small uniform cube, so the inertia includes the
    cells' own ``m_cell * cell**2 / 6`` about their vertical axes.
    """
    if not density > 0:
        raise ValueError(f"density must be positive, got {density}")
    centers = grid.cell_centers()
    if len(centers) == 0:
        raise ValueError("voxel grid is empty")
    vol_cell = grid.cell ** 3
    m_cell = vol_cell * density
    com = centers.mean(axis=0)
    d = centers[:, :2] - com[:2]
    inertia = m_cell * float(np.sum(d * d)) + len(centers) * m_cell * grid.cell ** 2 / 6
    volume = len(centers) * vol_cell
    return MassProperties(mass=volume * density, inertia_z=inertia, com=com, volume=volume)


def solid_centroid(mesh: TriMesh) -> np.ndarray:
    """Centroid of the enclosed volume via signed tetrahedra about the origin."""
    a, b, c = (mesh.vertices[mesh.triangles[:, k]] for k in range(3))
    vol = np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0
    total = vol.sum()
    if abs(total) < 1e-18:
        raise MeshError(f"{mesh.shape_id}: mesh encloses no volume")
    return (vol[:, None] * (a + b + c) / 4.0).sum(axis=0) / total


def contact_patch(grid: VoxelGrid, k: int = 256) -> ContactPatch:
    """Bottom-layer cell centers relative to the grid COM, at most ``k`` of them.

    Footprints with more than ``k`` cells are pooled into s x s blocks laid
    out symmetrically about the grid center; each block becomes one point at
    its members' mean with load proportional to its member count. Pressure
    stays uniform and the patch centroid is exact, so a symmetric body pushed
    through its COM does not pick up a spurious torque.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    bottom = np.argwhere(grid.occupancy[:, :, 0])
    if len(bottom) == 0:
        raise ValueError("voxel grid has no occupied cells in its bottom layer")
    com = grid.cell_centers().mean(axis=0)
    pts = grid.origin[:2] + (bottom + 0.5) * grid.cell - com[:2]
    if len(pts) <= k:
        return ContactPatch(points=pts, weights=np.full(len(pts), 1.0 / len(pts)))
    centred = bottom - (np.array(grid.occupancy.shape[:2]) - 1) / 2.0
    s = 2
    while True:
        u = centred / s
        blocks = np.sign(u) * np.floor(np.abs(u) + 0.5)  # half away from zero keeps mirror symmetry
        keys, inverse, counts = np.unique(blocks, axis=0, return_inverse=True, return_counts=True)
        if len(keys) <= k:
            break
        s += 1
    inverse = inverse.ravel()
    sums = np.zeros((len(keys), 2))
    np.add.at(sums, inverse, pts)
    return ContactPatch(points=sums / counts[:, None], weights=counts / counts.sum())


# --------------------------------------------------------------------------
# point clouds


@njit(cache=True)
def _fps(points, n, start):
    m = points.shape[0]
    sel = np.empty(n, dtype=np.int64)
    dist = np.empty(m)
    sel[0] = start
    for j in range(m):
        dx = points[j, 0] - points[start, 0]
        dy = points[j, 1] - points[start, 1]
        dz = points[j, 2] - points[start, 2]
        dist[j] = dx * dx + dy * dy + dz * dz
    for i in range(1, n):
        best = 0
        for j in range(1, m):
            if dist[j] > dist[best]:
                best = j
        sel[i] = best
        for j in range(m):
            dx = points[j, 0] - points[best, 0]
            dy = points[j, 1] - points[best, 1]
            dz = points[j, 2] - points[best, 2]
            d = dx * dx + dy * dy + dz * dz
            if d < dist[j]:
                dist[j] = d
    return sel


def farthest_point_sampling(points: np.ndarray, n: int, start: int = 0) -> np.ndarray:
    """Greedy FPS; returns indices in selection order (ties go to the lowest index)."""
    m = len(points)
    if n > m:
        raise ValueError(f"cannot select {n} of {m} points")
    return _fps(np.ascontiguousarray(points, dtype=np.float64), int(n), int(start))


def sample_surface(mesh: TriMesh, n: int, rng: np.random.Generator) -> np.ndarray:
    area = mesh.triangle_areas()
    tri = rng.choice(len(area), size=n, p=area / area.sum())
    u, w = rng.random(n), rng.random(n)
    su = np.sqrt(u)
    b0, b1 = 1 - su, su * (1 - w)
    v = mesh.vertices[mesh.triangles[tri]]
    return b0[:, None] * v[:, 0] + b1[:, None] * v[:, 1] + (1 - b0 - b1)[:, None] * v[:, 2]


def sample_pointcloud(mesh: TriMesh, n: int = 1024, seed: int = 0, oversample: int = 3,
                      com: np.ndarray | None = None) -> np.ndarray:
    """Uniform surface samples thinned to ``n`` points by furthest point sampling.

    The result is ordered by FPS selection, so its first ``k`` rows are
    themselves an FPS subsample of size ``k``. Coordinates are shifted so the
    solid's COM sits at x = y = 0 while z stays measured from the ground.
    """
    if n < 4:
        raise ValueError(f"need at least 4 points, got {n}")
    if oversample < 1:
        raise ValueError("oversample factor must be >= 1")
    rng = np.random.default_rng(seed)
    dense = sample_surface(mesh, oversample * n, rng)
    start = int(np.argmax(np.sum((dense - dense.mean(axis=0)) ** 2, axis=1)))
    pts = dense[farthest_point_sampling(dense, n, start)]
    c = solid_centroid(mesh) if com is None else np.asarray(com, float)
    pts[:, 0] -= c[0]
    pts[:, 1] -= c[1]
    pts[:, 2] -= mesh.vertices[:, 2].min()
    return pts


def write_pointcloud(path: str | os.PathLike, points: np.ndarray) -> None:
    """Headerless little-endian float32 (N, 3) dump."""
    np.ascontiguousarray(points, dtype="<f4").tofile(path)


def read_pointcloud(path: str | os.PathLike, n: int | None = None) -> np.ndarray:
    data = np.fromfile(path, dtype="<f4")
    if data.size % 3:
        raise ValueError(f"{path}: size {data.size} is not a multiple of 3")
    pts = data.reshape(-1, 3).astype(np.float64)
    if n is not None and len(pts) != n:
        raise ValueError(f"{path}: expected {n} points, found {len(pts)}")
    return pts
