"""SE(3) data augmentation applied jointly to a fused grid and its actions.

One rigid transform per sample: a uniform translation within +-max_trans per
axis and a yaw within +-max_rot_z degrees about the vertical axis through
the workspace center. Occupied voxel centers are transformed and re-binned
(cells falling outside the grid are dropped, cells landing together merge by
count-weighted color mean); action poses ride along and gripper flags are
untouched. Everything is a pure function of rng_seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .camvox import VoxelGrid, world_to_voxel_batch
from .core import BimanualAction, Pose, quat_from_axis_angle, quat_mul
from .errors import ValidationError


@dataclass(frozen=True)
class PerturbSpec:
    max_trans: float = 0.125     # meters, per axis
    max_rot_z: float = 45.0      # degrees
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_trans < 0 or self.max_rot_z < 0:
            raise ValidationError("perturbation magnitudes must be non-negative")


def _transform_pose(pose: Pose, rot_q: np.ndarray, rot_m: np.ndarray,
                    center: np.ndarray, translation: np.ndarray) -> Pose:
    pos = rot_m @ (pose.position - center) + center + translation
    return Pose(pos, quat_mul(rot_q, pose.orientation))


def apply_rigid_transform(grid: VoxelGrid, actions: list[BimanualAction],
                          translation, yaw_deg: float):
    """Apply a fixed world transform to a grid and its action list.

    Exposed separately from perturb() so call sites can probe exact
    transforms (identity, whole-voxel shifts). Returns
    (grid, actions, transform-as-Pose).
    """
    translation = np.asarray(translation, dtype=np.float64)
    if translation.shape != (3,):
        raise ValidationError("translation must have shape (3,)")
    spec = grid.spec

    if yaw_deg == 0.0 and not translation.any():
        identity = Pose.identity()
        return (VoxelGrid(spec, occupancy=grid.occupancy.copy(),
                          count=grid.count.copy(), color=grid.color.copy()),
                list(actions), identity)

    center = spec.center
    rot_q = quat_from_axis_angle([0.0, 0.0, 1.0], yaw_deg)
    rad = math.radians(yaw_deg)
    c, s = math.cos(rad), math.sin(rad)
    rot_m = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    occ_idx = grid.occupied_indices()
    new_grid = VoxelGrid.empty(spec)
    if len(occ_idx):
        centers = spec.origin + (occ_idx + 0.5) * spec.voxel_size
        moved = centers - center
        moved = moved @ rot_m.T + center + translation
        idx, ok = world_to_voxel_batch(moved, spec)
        idx = idx[ok]
        counts = grid.count[occ_idx[:, 0], occ_idx[:, 1], occ_idx[:, 2]][ok]
        colors = grid.color[occ_idx[:, 0], occ_idx[:, 1], occ_idx[:, 2]][ok]
        # scatter into the handful of hit cells; never densify the whole grid
        flat = (idx[:, 0] * spec.dims[1] + idx[:, 1]) * spec.dims[2] + idx[:, 2]
        uniq, inv = np.unique(flat, return_inverse=True)
        cell_count = np.bincount(inv, weights=counts)
        cell_color = np.zeros((len(uniq), 3))
        np.add.at(cell_color, inv, colors * counts[:, None])
        ui, uj, uk = np.unravel_index(uniq, spec.dims)
        new_grid.occupancy[ui, uj, uk] = True
        new_grid.count[ui, uj, uk] = cell_count.astype(np.int64)
        new_grid.color[ui, uj, uk] = cell_color / cell_count[:, None]

    transform = Pose(center + translation - rot_m @ center, rot_q)

    new_actions = []
    for act in actions:
        new_actions.append(BimanualAction(
            right=dc_replace(act.right, pose=_transform_pose(
                act.right.pose, rot_q, rot_m, center, translation)),
            left=dc_replace(act.left, pose=_transform_pose(
                act.left.pose, rot_q, rot_m, center, translation))))
    return new_grid, new_actions, transform


def perturb(grid: VoxelGrid, actions: list[BimanualAction],
            pspec: PerturbSpec = PerturbSpec()):
    """Sample the per-sample transform from rng_seed and apply it.

    Sampling order is fixed (three translation draws, then the yaw draw) so
    a seed fully determines the transform. Returns (grid, actions, transform).
    """
    rng = np.random.default_rng(pspec.rng_seed)
    translation = rng.uniform(-pspec.max_trans, pspec.max_trans, size=3)
    yaw = float(rng.uniform(-pspec.max_rot_z, pspec.max_rot_z))
    if pspec.max_trans == 0.0:
        translation = np.zeros(3)
    if pspec.max_rot_z == 0.0:
        yaw = 0.0
    return apply_rigid_transform(grid, actions, translation, yaw)
