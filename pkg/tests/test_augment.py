"""Joint grid + action augmentation: determinism and rigid-motion checks."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from bimankit.augment import PerturbSpec, apply_rigid_transform, perturb
from bimankit.camvox import GridSpec, VoxelGrid
from bimankit.codec import encode_arm
from bimankit.core import ArmAction, BimanualAction, Pose, pose_delta
from bimankit.errors import ValidationError


def _oracle_transform_points(points, center, translation, yaw_deg):
    rot = Rotation.from_euler("z", yaw_deg, degrees=True).as_matrix()
    return (points - center) @ rot.T + center + translation


def _spec():
    return GridSpec(origin=np.array([-0.5, -0.5, 0.3]))


def _grid(rng, spec, n=400):
    lo = spec.origin + 0.1
    hi = spec.origin + spec.extent - 0.1
    points = rng.uniform(lo, hi, size=(n, 3))
    colors = rng.uniform(0.0, 255.0, size=(n, 3))
    return VoxelGrid.from_points(points, colors, spec)


def _actions(rng, spec, n=6):
    out = []
    lo = spec.origin + 0.2
    hi = spec.origin + spec.extent - 0.2
    for _ in range(n):
        arms = []
        for _arm in range(2):
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            arms.append(ArmAction(pose=Pose(rng.uniform(lo, hi), q),
                                  open=bool(rng.integers(2)),
                                  collide=bool(rng.integers(2))))
        out.append(BimanualAction(right=arms[0], left=arms[1]))
    return out


def test_identity_transform_is_bit_exact():
    rng = np.random.default_rng(70)
    spec = _spec()
    grid = _grid(rng, spec)
    actions = _actions(rng, spec)
    out_grid, out_actions, tf = apply_rigid_transform(grid, actions, np.zeros(3), 0.0)
    assert np.array_equal(out_grid.occupancy, grid.occupancy)
    assert np.array_equal(out_grid.count, grid.count)
    assert np.array_equal(out_grid.color, grid.color)
    assert out_actions == actions
    assert np.array_equal(tf.position, np.zeros(3))
    assert np.array_equal(tf.orientation, np.array([1.0, 0.0, 0.0, 0.0]))


def test_whole_voxel_shift_moves_indices_exactly():
    # translation = 3 voxels along each axis: every occupied cell and every
    # encoded translation index must shift by exactly (3, 3, 3)
    rng = np.random.default_rng(71)
    spec = _spec()
    points = rng.uniform(spec.origin + 0.2, spec.origin + spec.extent - 0.2,
                         size=(300, 3))
    colors = rng.uniform(0.0, 255.0, size=(300, 3))
    grid = VoxelGrid.from_points(points, colors, spec)
    actions = _actions(rng, spec)

    shift = np.full(3, 3 * spec.voxel_size)
    out_grid, out_actions, _ = apply_rigid_transform(grid, actions, shift, 0.0)

    before = {tuple(ix) for ix in grid.occupied_indices()}
    after = {tuple(ix) for ix in out_grid.occupied_indices()}
    assert after == {(i + 3, j + 3, k + 3) for i, j, k in before}
    assert out_grid.count.sum() == grid.count.sum()

    for act, out in zip(actions, out_actions):
        for arm in ("right", "left"):
            d_in = encode_arm(getattr(act, arm), spec, arm)
            d_out = encode_arm(getattr(out, arm), spec, arm)
            assert d_out.trans == tuple(v + 3 for v in d_in.trans)
            assert d_out.rot == d_in.rot
            assert d_out.open == d_in.open and d_out.collide == d_in.collide


def test_matches_point_transform_oracle():
    rng = np.random.default_rng(72)
    spec = _spec()
    grid = _grid(rng, spec)
    actions = _actions(rng, spec)
    translation = np.array([0.04, -0.07, 0.02])
    yaw = 23.0

    out_grid, out_actions, tf = apply_rigid_transform(grid, actions, translation, yaw)

    # grid: transform occupied centers with scipy and re-bin by hand
    idx = grid.occupied_indices()
    centers = spec.origin + (idx + 0.5) * spec.voxel_size
    moved = _oracle_transform_points(centers, spec.center, translation, yaw)
    rel = np.floor((moved - spec.origin) / spec.voxel_size).astype(np.int64)
    ok = np.all((rel >= 0) & (rel < np.asarray(spec.dims)), axis=1)
    assert {tuple(ix) for ix in out_grid.occupied_indices()} == \
        {tuple(ix) for ix in rel[ok]}

    # actions: positions match the same point oracle
    for act, out in zip(actions, out_actions):
        for arm in ("right", "left"):
            want = _oracle_transform_points(
                getattr(act, arm).pose.position, spec.center, translation, yaw)
            np.testing.assert_allclose(getattr(out, arm).pose.position, want,
                                       atol=1e-12)

    # reported transform reproduces the map as pose composition
    probe = actions[0].right.pose.position
    np.testing.assert_allclose(
        tf.position + Rotation.from_quat(
            np.roll(tf.orientation, -1)).apply(probe),
        _oracle_transform_points(probe, spec.center, translation, yaw),
        atol=1e-12)


def test_rigid_motion_preserves_relative_geometry():
    rng = np.random.default_rng(73)
    spec = _spec()
    actions = _actions(rng, spec, n=8)
    _, out_actions, _ = apply_rigid_transform(
        VoxelGrid.empty(spec), actions, np.array([0.1, 0.0, -0.05]), 37.0)
    for i in range(len(actions) - 1):
        d_before = pose_delta(actions[i].right.pose, actions[i + 1].right.pose)
        d_after = pose_delta(out_actions[i].right.pose, out_actions[i + 1].right.pose)
        assert d_after[0] == pytest.approx(d_before[0], abs=1e-9)
        assert d_after[1] == pytest.approx(d_before[1], abs=1e-6)


def test_out_of_bounds_cells_are_dropped():
    spec = _spec()
    # single occupied cell near the +x face; a big +x shift pushes it out
    point = spec.origin + spec.extent - 0.5 * spec.voxel_size
    grid = VoxelGrid.from_points(point[None, :], np.full((1, 3), 10.0), spec)
    assert grid.count.sum() == 1
    out_grid, _, _ = apply_rigid_transform(grid, [], np.array([0.1, 0.0, 0.0]), 0.0)
    assert out_grid.count.sum() == 0
    assert not out_grid.occupancy.any()


def test_perturb_is_a_pure_function_of_seed():
    rng = np.random.default_rng(74)
    spec = _spec()
    grid = _grid(rng, spec)
    actions = _actions(rng, spec)
    pspec = PerturbSpec(rng_seed=99)

    a_grid, a_actions, a_tf = perturb(grid, actions, pspec)
    b_grid, b_actions, b_tf = perturb(grid, actions, pspec)
    assert np.array_equal(a_grid.occupancy, b_grid.occupancy)
    assert np.array_equal(a_grid.count, b_grid.count)
    assert np.array_equal(a_grid.color, b_grid.color)
    assert a_actions == b_actions
    assert np.array_equal(a_tf.position, b_tf.position)
    assert np.array_equal(a_tf.orientation, b_tf.orientation)

    c_grid, _, c_tf = perturb(grid, actions, PerturbSpec(rng_seed=100))
    assert not np.array_equal(a_tf.position, c_tf.position)
    assert not np.array_equal(a_grid.count, c_grid.count)


def test_perturb_respects_magnitude_bounds():
    rng = np.random.default_rng(75)
    spec = _spec()
    grid = VoxelGrid.empty(spec)
    for seed in range(30):
        pspec = PerturbSpec(max_trans=0.125, max_rot_z=45.0, rng_seed=seed)
        _, _, tf = perturb(grid, [], pspec)
        rot = Rotation.from_quat(np.roll(tf.orientation, -1))
        yaw = rot.magnitude() * 180.0 / np.pi
        assert yaw <= 45.0 + 1e-9
        axis = rot.as_rotvec()
        if np.linalg.norm(axis) > 1e-12:
            axis = axis / np.linalg.norm(axis)
            assert abs(axis[2]) == pytest.approx(1.0, abs=1e-12)
    del rng


def test_zero_magnitude_perturb_is_identity():
    spec = _spec()
    rng = np.random.default_rng(76)
    grid = _grid(rng, spec)
    actions = _actions(rng, spec)
    out_grid, out_actions, tf = perturb(
        grid, actions, PerturbSpec(max_trans=0.0, max_rot_z=0.0, rng_seed=5))
    assert np.array_equal(out_grid.count, grid.count)
    assert out_actions == actions
    assert np.array_equal(tf.position, np.zeros(3))


def test_invalid_inputs_rejected():
    with pytest.raises(ValidationError):
        PerturbSpec(max_trans=-0.1)
    with pytest.raises(ValidationError):
        PerturbSpec(max_rot_z=-1.0)
    spec = _spec()
    with pytest.raises(ValidationError):
        apply_rigid_transform(VoxelGrid.empty(spec), [], np.zeros(2), 0.0)
