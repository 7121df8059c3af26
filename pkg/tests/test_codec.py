"""Action discretization, targets, and the two-arm loss.

Euler extraction/recomposition is cross-checked against scipy (extrinsic
x-y-z, R = Rz @ Ry @ Rx). Loss values come from the analytic uniform-softmax
identity CE(uniform, one-hot) = ln K.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from bimankit.camvox import GridSpec, voxel_to_world
from bimankit.codec import (FLAG_CLASSES, ROT_BIN_DEG, ROT_BINS,
                            STABLE_THETA_BINS, ArmHeads, BimanualHeads,
                            DiscreteArmAction, DiscreteBimanualAction,
                            bimanual_loss, decode, decode_arm, encode,
                            encode_arm, euler_xyz_from_quat, flat_trans_index,
                            make_target, quat_from_euler_xyz,
                            sample_discrete_action, unflatten_trans_index)
from bimankit.core import (ArmAction, BimanualAction, Pose, quat_angle_deg,
                           quat_from_axis_angle)
from bimankit.errors import EncodeError, ValidationError


def _spec() -> GridSpec:
    return GridSpec(origin=np.array([-0.5, -0.5, 0.3]))


def _unit_quat(rng) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def _scipy_quat(q):
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w])


# --- Euler conversions ------------------------------------------------------

def test_euler_extraction_matches_scipy():
    rng = np.random.default_rng(61)
    for _ in range(300):
        q = _unit_quat(rng)
        psi, theta, phi = euler_xyz_from_quat(q)
        want = np.degrees(_scipy_quat(q).as_euler("xyz"))
        assert psi == pytest.approx(want[0] % 360.0, abs=1e-6) \
            or (psi % 360.0) == pytest.approx(want[0] % 360.0, abs=1e-6)
        assert theta == pytest.approx(want[1], abs=1e-6)
        assert (phi % 360.0) == pytest.approx(want[2] % 360.0, abs=1e-6)
        assert -90.0 - 1e-9 <= theta <= 90.0 + 1e-9


def test_euler_round_trip_is_same_rotation():
    rng = np.random.default_rng(62)
    for _ in range(300):
        q = _unit_quat(rng)
        back = quat_from_euler_xyz(*euler_xyz_from_quat(q))
        # acos amplifies float eps near |dot| = 1; 1e-5 deg is its floor
        assert quat_angle_deg(q, back) <= 1e-5


def test_quat_from_euler_matches_scipy():
    rng = np.random.default_rng(63)
    for _ in range(200):
        angles = rng.uniform(0, 360, 3)
        got = quat_from_euler_xyz(*angles)
        want = Rotation.from_euler("xyz", angles, degrees=True)
        w, x, y, z = got
        assert _scipy_quat(got).as_matrix() == pytest.approx(
            want.as_matrix(), abs=1e-9)


def test_gimbal_lock_extraction_still_recomposes():
    # theta = +-90: psi is pinned to 0 and phi absorbs the coupled angle
    for theta_sign in (1.0, -1.0):
        q = quat_from_euler_xyz(30.0, theta_sign * 90.0, 40.0)
        psi, theta, phi = euler_xyz_from_quat(q)
        assert psi == 0.0
        assert theta == pytest.approx(theta_sign * 90.0, abs=1e-6)
        back = quat_from_euler_xyz(psi, theta, phi)
        assert quat_angle_deg(q, back) <= 1e-6


# --- encode/decode ----------------------------------------------------------

def test_encode_identity_at_cell_center():
    spec = _spec()
    center = voxel_to_world((50, 50, 50), spec)
    a = ArmAction(Pose(center))
    d = encode_arm(a, spec)
    assert d.trans == (50, 50, 50)
    assert d.rot == (0, 0, 0)


def test_encode_seven_degrees_about_x():
    spec = _spec()
    center = voxel_to_world((10, 10, 10), spec)
    a = ArmAction(Pose(center, quat_from_axis_angle((1, 0, 0), 7.0)))
    assert encode_arm(a, spec).rot == (1, 0, 0)


def test_decode_bin_centers():
    spec = _spec()
    d = DiscreteArmAction(trans=(0, 0, 0), rot=(0, 0, 0), open=True,
                          collide=False)
    a = decode_arm(d, spec)
    assert np.allclose(a.pose.position, spec.origin + 0.005)
    want = quat_from_euler_xyz(2.5, 2.5, 2.5)
    assert quat_angle_deg(a.pose.orientation, want) <= 1e-9


def test_encode_out_of_workspace_names_arm():
    spec = _spec()
    far = ArmAction(Pose(np.array([5.0, 0.0, 0.0])))
    near = ArmAction(Pose(voxel_to_world((50, 50, 50), spec)))
    with pytest.raises(EncodeError, match="left"):
        encode(BimanualAction(right=near, left=far), spec)


def test_discrete_action_validation():
    with pytest.raises(ValidationError):
        DiscreteArmAction(trans=(0, 0), rot=(0, 0, 0), open=True, collide=False)
    with pytest.raises(ValidationError):
        DiscreteArmAction(trans=(-1, 0, 0), rot=(0, 0, 0), open=True,
                          collide=False)
    with pytest.raises(ValidationError):
        DiscreteArmAction(trans=(0, 0, 0), rot=(0, 0, 72), open=True,
                          collide=False)


def test_decode_rejects_out_of_grid_index():
    spec = _spec()
    d = DiscreteArmAction(trans=(100, 0, 0), rot=(0, 0, 0), open=True,
                          collide=False)
    with pytest.raises(ValidationError):
        decode_arm(d, spec)


def _random_bimanual(rng, spec) -> BimanualAction:
    def arm():
        pos = spec.origin + rng.uniform(0, 1, 3) * spec.extent
        return ArmAction(Pose(pos, _unit_quat(rng)),
                         open=bool(rng.integers(0, 2)),
                         collide=bool(rng.integers(0, 2)))
    return BimanualAction(right=arm(), left=arm())


def test_round_trip_bounds():
    spec = _spec()
    rng = np.random.default_rng(64)
    half_diag = 0.005 * math.sqrt(3.0)
    for _ in range(10_000):
        a = _random_bimanual(rng, spec)
        b = decode(encode(a, spec), spec)
        for arm in ("right", "left"):
            orig, back = a.arm(arm), b.arm(arm)
            trans_err = float(np.linalg.norm(orig.pose.position
                                             - back.pose.position))
            rot_err = quat_angle_deg(orig.pose.orientation,
                                     back.pose.orientation)
            assert trans_err <= half_diag + 1e-12
            assert rot_err <= 7.5 + 1e-9
            assert orig.open == back.open and orig.collide == back.collide


def test_discrete_fixed_point():
    spec = _spec()
    rng = np.random.default_rng(65)
    for _ in range(10_000):
        d = sample_discrete_action(rng, spec)
        assert encode(decode(d, spec), spec) == d


def test_sampled_theta_bins_are_stable():
    spec = _spec()
    rng = np.random.default_rng(66)
    stable = set(STABLE_THETA_BINS)
    for _ in range(500):
        d = sample_discrete_action(rng, spec)
        assert d.right.rot[1] in stable and d.left.rot[1] in stable


def test_per_axis_error_away_from_gimbal_lock():
    spec = _spec()
    rng = np.random.default_rng(67)
    checked = 0
    while checked < 2_000:
        a = _random_bimanual(rng, spec).right
        psi, theta, phi = euler_xyz_from_quat(a.pose.orientation)
        if abs(abs(theta) - 90.0) <= 5.0:
            continue
        back = decode_arm(encode_arm(a, spec), spec)
        bpsi, btheta, bphi = euler_xyz_from_quat(back.pose.orientation)
        for x, y in ((psi, bpsi), (theta, btheta), (phi, bphi)):
            circ = abs((x - y + 180.0) % 360.0 - 180.0)
            assert circ <= 2.5 + 1e-9
        checked += 1


def test_translation_equivariance_whole_voxels():
    spec = _spec()
    rng = np.random.default_rng(68)
    for _ in range(200):
        a = _random_bimanual(rng, spec).right
        d = encode_arm(a, spec)
        shift = rng.integers(-3, 4, 3)
        target = np.array(d.trans) + shift
        if np.any(target < 0) or np.any(target >= spec.dims):
            continue
        moved = ArmAction(Pose(a.pose.position + shift * spec.voxel_size,
                               a.pose.orientation),
                          open=a.open, collide=a.collide)
        d2 = encode_arm(moved, spec)
        assert d2.trans == tuple(int(v) for v in target)
        assert d2.rot == d.rot


# --- flat index -------------------------------------------------------------

def test_flat_index_x_fastest():
    spec = _spec()
    assert flat_trans_index((1, 0, 0), spec) == 1
    assert flat_trans_index((0, 1, 0), spec) == 100
    assert flat_trans_index((0, 0, 1), spec) == 100 * 100
    assert flat_trans_index((1, 2, 3), spec) == 1 + 100 * (2 + 100 * 3)


def test_flat_index_round_trip():
    spec = _spec()
    rng = np.random.default_rng(69)
    for _ in range(500):
        idx = tuple(int(v) for v in rng.integers(0, 100, 3))
        assert unflatten_trans_index(flat_trans_index(idx, spec), spec) == idx


# --- targets ----------------------------------------------------------------

def test_target_heads_are_one_hot():
    spec = _spec()
    rng = np.random.default_rng(71)
    d = sample_discrete_action(rng, spec)
    target = make_target(d, spec)
    for arm in ("right", "left"):
        heads = list(target.arm(arm).heads())
        assert len(heads) == 6
        for _, h in heads:
            assert h.sum() == 1.0
            assert np.count_nonzero(h) == 1


def test_target_open_class_order():
    spec = _spec()
    d = DiscreteBimanualAction(
        right=DiscreteArmAction((1, 2, 3), (0, 0, 0), open=True, collide=False),
        left=DiscreteArmAction((4, 5, 6), (0, 0, 0), open=False, collide=True))
    target = make_target(d, spec)
    assert tuple(target.right.open) == (0.0, 1.0)
    assert tuple(target.left.open) == (1.0, 0.0)
    assert tuple(target.right.collide) == (1.0, 0.0)
    assert tuple(target.left.collide) == (0.0, 1.0)


def test_target_argmax_reproduces_encode():
    spec = _spec()
    rng = np.random.default_rng(72)
    for _ in range(50):
        a = _random_bimanual(rng, spec)
        d = encode(a, spec)
        target = make_target(d, spec)
        for arm in ("right", "left"):
            da, ta = d.arm(arm), target.arm(arm)
            assert int(np.argmax(ta.trans)) == flat_trans_index(da.trans, spec)
            for axis in range(3):
                assert int(np.argmax(ta.rot[axis])) == da.rot[axis]
            assert int(np.argmax(ta.open)) == int(da.open)
            assert int(np.argmax(ta.collide)) == int(da.collide)


# --- loss -------------------------------------------------------------------

def _any_target(spec) -> BimanualHeads:
    d = DiscreteBimanualAction(
        right=DiscreteArmAction((1, 2, 3), (4, 5, 6), open=True, collide=False),
        left=DiscreteArmAction((7, 8, 9), (10, 11, 12), open=False, collide=True))
    return make_target(d, spec)


def test_uniform_logits_analytic_loss():
    spec = _spec()
    target = _any_target(spec)
    loss = bimanual_loss(BimanualHeads.zeros(spec), target)
    analytic = 2.0 * (math.log(spec.n_cells())
                      + 3.0 * math.log(ROT_BINS)
                      + 2.0 * math.log(FLAG_CLASSES))
    assert loss == pytest.approx(analytic, abs=1e-9)


def test_saturated_correct_logits_near_zero():
    spec = _spec()
    target = _any_target(spec)
    logits = BimanualHeads.zeros(spec)
    for arm in ("right", "left"):
        la, ta = logits.arm(arm), target.arm(arm)
        la.trans[np.argmax(ta.trans)] = 40.0
        for axis in range(3):
            la.rot[axis, np.argmax(ta.rot[axis])] = 40.0
        la.open[np.argmax(ta.open)] = 40.0
        la.collide[np.argmax(ta.collide)] = 40.0
    assert bimanual_loss(logits, target) < 1e-10


def test_arm_swap_symmetry_exact():
    spec = _spec()
    rng = np.random.default_rng(73)
    target = _any_target(spec)
    logits = BimanualHeads.zeros(spec)
    for arm in ("right", "left"):
        la = logits.arm(arm)
        la.trans[:] = rng.normal(size=la.trans.shape)
        la.rot[:] = rng.normal(size=la.rot.shape)
        la.open[:] = rng.normal(size=la.open.shape)
        la.collide[:] = rng.normal(size=la.collide.shape)
    swapped_logits = BimanualHeads(right=logits.left, left=logits.right)
    swapped_target = BimanualHeads(right=target.left, left=target.right)
    assert bimanual_loss(logits, target) == bimanual_loss(swapped_logits,
                                                          swapped_target)


def test_loss_strictly_decreasing_in_target_logit():
    spec = _spec()
    target = _any_target(spec)
    hot = int(np.argmax(target.right.open))
    losses = []
    for value in (-2.0, 0.0, 1.0, 3.0, 10.0):
        logits = BimanualHeads.zeros(spec)
        logits.right.open[hot] = value
        losses.append(bimanual_loss(logits, target))
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_loss_nonnegative():
    spec = _spec()
    rng = np.random.default_rng(74)
    target = _any_target(spec)
    for _ in range(10):
        logits = BimanualHeads.zeros(spec)
        for arm in ("right", "left"):
            la = logits.arm(arm)
            la.trans[:] = rng.normal(size=la.trans.shape)
            la.rot[:] = rng.normal(size=la.rot.shape)
            la.open[:] = rng.normal(size=la.open.shape)
            la.collide[:] = rng.normal(size=la.collide.shape)
        assert bimanual_loss(logits, target) >= 0.0


def test_loss_shape_mismatch_rejected():
    spec = _spec()
    small = GridSpec(origin=np.zeros(3), dims=(10, 10, 10))
    target = _any_target(spec)
    with pytest.raises(ValidationError):
        bimanual_loss(BimanualHeads.zeros(small), target)


def test_loss_rejects_non_finite_logits():
    spec = _spec()
    target = _any_target(spec)
    logits = BimanualHeads.zeros(spec)
    logits.right.open[0] = np.inf
    with pytest.raises(ValidationError):
        bimanual_loss(logits, target)


def test_rot_bin_geometry_constants():
    assert ROT_BINS == 72
    assert ROT_BIN_DEG == 5.0
    assert FLAG_CLASSES == 2
