"""Cameras and the voxelized workspace.

Depth images follow the pinhole convention: pixel (u, v) with depth d maps to
camera-frame point ((u - cx) * d / fx, (v - cy) * d / fy, d), i.e. depth is
the camera-frame z coordinate, not the ray length. Extrinsics are
camera-to-world poses.

The grid bins points with floor semantics into half-open cells
[k * s, (k + 1) * s); out-of-bounds points are reported, never clamped.
Fused cells carry occupancy, a point count and the running mean color, which
makes fusion a commutative merge: counts add, colors combine by
count-weighted mean.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .core import Observation, Pose, quat_rotate
from .errors import ConfigurationError, FormatError, ValidationError

# the magic doubles as the format version; change it on layout changes
BVOX_MAGIC = b"BVOX"
_BVOX_HEADER = struct.Struct("<4siiidddd")  # magic, dims, origin, voxel size
assert _BVOX_HEADER.size == 48


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus camera-to-world extrinsic."""

    name: str
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    extrinsic: Pose

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("image dimensions must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError("principal point must lie inside the image")


def back_project(depth: np.ndarray, rgb: np.ndarray, cam: CameraModel):
    """Lift a depth image to world-frame points with per-point colors.

    Pixels with the invalid-depth sentinel 0.0 are dropped. Returns
    (points (N, 3) float64, colors (N, 3) float64).
    """
    depth = np.asarray(depth, dtype=np.float64)
    rgb = np.asarray(rgb)
    if depth.shape != (cam.height, cam.width):
        raise ValidationError(
            f"depth shape {depth.shape} does not match camera "
            f"({cam.height}, {cam.width})")
    if rgb.shape != (cam.height, cam.width, 3):
        raise ValidationError(f"rgb shape {rgb.shape} does not match camera")

    v, u = np.nonzero(depth > 0.0)
    d = depth[v, u]
    x = (u - cam.cx) * d / cam.fx
    y = (v - cam.cy) * d / cam.fy
    pts_cam = np.stack([x, y, d], axis=1)
    pts_world = quat_rotate(cam.extrinsic.orientation, pts_cam) + cam.extrinsic.position
    return pts_world, rgb[v, u].astype(np.float64)


# ---------------------------------------------------------------------------
# voxel grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridSpec:
    """Axis-aligned voxel grid: origin corner, cell edge length, cell counts."""

    origin: np.ndarray
    voxel_size: float = 0.01
    dims: tuple[int, int, int] = (100, 100, 100)

    def __eq__(self, other):
        if not isinstance(other, GridSpec):
            return NotImplemented
        return (tuple(self.origin) == tuple(other.origin)
                and self.voxel_size == other.voxel_size
                and self.dims == other.dims)

    def __hash__(self):
        return hash((tuple(self.origin), self.voxel_size, self.dims))

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64)
        if origin.shape != (3,):
            raise ValidationError("origin must have shape (3,)")
        if self.voxel_size <= 0:
            raise ValidationError("voxel_size must be positive")
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ValidationError("dims must be three positive integers")
        origin.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "dims", dims)
        # plain-float copy for scalar hot paths (encode/decode)
        object.__setattr__(self, "_origin_xyz", tuple(origin.tolist()))

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.dims) * self.voxel_size

    @property
    def center(self) -> np.ndarray:
        return self.origin + self.extent / 2.0

    def n_cells(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz


def world_to_voxel(point, spec: GridSpec):
    """Cell index (i, j, k) containing a world point, or None if out of bounds."""
    rel = (np.asarray(point, dtype=np.float64) - spec.origin) / spec.voxel_size
    idx = np.floor(rel).astype(np.int64)
    if np.any(idx < 0) or np.any(idx >= np.asarray(spec.dims)):
        return None
    return (int(idx[0]), int(idx[1]), int(idx[2]))


def world_to_voxel_batch(points: np.ndarray, spec: GridSpec):
    """Vectorized binning. Returns (indices (N, 3) int64, in-bounds mask (N,))."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    idx = np.floor((pts - spec.origin) / spec.voxel_size).astype(np.int64)
    ok = np.all((idx >= 0) & (idx < np.asarray(spec.dims)), axis=1)
    return idx, ok


def voxel_to_world(index, spec: GridSpec) -> np.ndarray:
    """Center of cell (i, j, k). Raises on out-of-range indices."""
    idx = np.asarray(index, dtype=np.int64)
    if idx.shape != (3,):
        raise ValidationError("index must be a triple")
    if np.any(idx < 0) or np.any(idx >= np.asarray(spec.dims)):
        raise ValidationError(f"voxel index {tuple(idx)} outside dims {spec.dims}")
    return spec.origin + (idx + 0.5) * spec.voxel_size


@dataclass
class VoxelGrid:
    """Fused grid features: occupancy, per-cell point count and mean RGB."""

    spec: GridSpec
    occupancy: np.ndarray = None
    count: np.ndarray = None
    color: np.ndarray = None

    def __post_init__(self):
        if self.occupancy is None:
            self.occupancy = np.zeros(self.spec.dims, dtype=bool)
        if self.count is None:
            self.count = np.zeros(self.spec.dims, dtype=np.int64)
        if self.color is None:
            self.color = np.zeros(self.spec.dims + (3,), dtype=np.float64)
        if self.occupancy.shape != self.spec.dims:
            raise ValidationError("occupancy shape does not match spec dims")
        if self.count.shape != self.spec.dims:
            raise ValidationError("count shape does not match spec dims")
        if self.color.shape != self.spec.dims + (3,):
            raise ValidationError("color shape does not match spec dims")

    @classmethod
    def empty(cls, spec: GridSpec) -> "VoxelGrid":
        return cls(spec)

    @classmethod
    def from_points(cls, points: np.ndarray, colors: np.ndarray,
                    spec: GridSpec) -> "VoxelGrid":
        """Bin world points; out-of-bounds points are dropped."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        cols = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
        if pts.shape[0] != cols.shape[0]:
            raise ValidationError("points and colors must pair up")
        idx, ok = world_to_voxel_batch(pts, spec)
        idx, cols = idx[ok], cols[ok]
        nx, ny, nz = spec.dims
        flat = (idx[:, 0] * ny + idx[:, 1]) * nz + idx[:, 2]  # C-order offset
        count = np.bincount(flat, minlength=nx * ny * nz).reshape(spec.dims)
        color_sum = np.zeros((nx * ny * nz, 3))
        np.add.at(color_sum, flat, cols)
        color_sum = color_sum.reshape(spec.dims + (3,))
        occ = count > 0
        color = np.zeros_like(color_sum)
        np.divide(color_sum, count[..., None], out=color, where=occ[..., None])
        return cls(spec, occupancy=occ, count=count.astype(np.int64), color=color)

    def occupied_indices(self) -> np.ndarray:
        return np.argwhere(self.occupancy)

    def merge(self, other: "VoxelGrid") -> "VoxelGrid":
        """Combine two grids over the same spec: counts add, colors by weighted mean."""
        if other.spec != self.spec:
            raise ConfigurationError("cannot merge grids with different specs")
        count = self.count + other.count
        occ = count > 0
        color_sum = (self.color * self.count[..., None]
                     + other.color * other.count[..., None])
        color = np.zeros_like(color_sum)
        np.divide(color_sum, count[..., None], out=color, where=occ[..., None])
        return VoxelGrid(self.spec, occupancy=occ, count=count, color=color)


def fuse(obs: Observation, cams: Iterable[CameraModel], spec: GridSpec) -> VoxelGrid:
    """Back-project every camera image in an observation into one grid.

    Every image name must have a matching CameraModel. The result does not
    depend on camera order (counts and occupancy exactly, colors up to
    float summation order).
    """
    by_name: Mapping[str, CameraModel] = {c.name: c for c in cams}
    all_pts, all_cols = [], []
    for name, image in obs.images.items():
        cam = by_name.get(name)
        if cam is None:
            raise ConfigurationError(f"no CameraModel for image {name!r}")
        pts, cols = back_project(image.depth, image.rgb, cam)
        all_pts.append(pts)
        all_cols.append(cols)
    if not all_pts:
        return VoxelGrid.empty(spec)
    return VoxelGrid.from_points(np.concatenate(all_pts),
                                 np.concatenate(all_cols), spec)


# ---------------------------------------------------------------------------
# flat binary dump
# ---------------------------------------------------------------------------

def _x_fastest(arr: np.ndarray) -> np.ndarray:
    """Reorder an (nx, ny, nz, ...) array so cell i + nx*(j + ny*k) is linear."""
    axes = (2, 1, 0) + tuple(range(3, arr.ndim))
    return np.ascontiguousarray(arr.transpose(axes)).reshape(-1, *arr.shape[3:])


def dump_bvox(grid: VoxelGrid, path) -> None:
    """Write the fixed 48-byte header, packed occupancy bits, then RGB bytes.

    Header layout, little-endian: magic "BVOX", dims as 3 x int32, origin as
    3 x float64, voxel size as float64. Occupancy is bit-packed in x-fastest
    order; colors are one rounded RGB byte triple per cell, same order.
    """
    spec = grid.spec
    header = _BVOX_HEADER.pack(BVOX_MAGIC, *spec.dims, *spec.origin, spec.voxel_size)
    occ_bits = np.packbits(_x_fastest(grid.occupancy).astype(np.uint8))
    rgb = np.clip(np.rint(_x_fastest(grid.color)), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(header)
        f.write(occ_bits.tobytes())
        f.write(rgb.tobytes())


def load_bvox(path) -> VoxelGrid:
    """Read a dump back. Counts are not stored; occupied cells load as count 1."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _BVOX_HEADER.size:
        raise FormatError("truncated header")
    magic, nx, ny, nz, ox, oy, oz, vs = _BVOX_HEADER.unpack_from(raw)
    if magic != BVOX_MAGIC:
        raise FormatError(f"unknown magic/version {magic!r}, want {BVOX_MAGIC!r}")
    spec = GridSpec(np.array([ox, oy, oz]), vs, (nx, ny, nz))
    n = spec.n_cells()
    n_occ_bytes = (n + 7) // 8
    expected = _BVOX_HEADER.size + n_occ_bytes + 3 * n
    if len(raw) != expected:
        raise FormatError(f"expected {expected} bytes, got {len(raw)}")
    body = np.frombuffer(raw, dtype=np.uint8, offset=_BVOX_HEADER.size)
    occ_flat = np.unpackbits(body[:n_occ_bytes])[:n].astype(bool)
    rgb_flat = body[n_occ_bytes:].reshape(-1, 3).astype(np.float64)
    # x-fastest linear order back to (nx, ny, nz)
    occ = occ_flat.reshape(nz, ny, nx).transpose(2, 1, 0)
    color = rgb_flat.reshape(nz, ny, nx, 3).transpose(2, 1, 0, 3)
    color = np.where(occ[..., None], color, 0.0)
    return VoxelGrid(spec, occupancy=occ.copy(),
                     count=occ.astype(np.int64), color=color)
