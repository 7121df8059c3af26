"""Kinematic world rules, task spawns/predicates, and scripted experts."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bimankit.core import ArmAction, BimanualAction, Pose
from bimankit.errors import ValidationError
from bimankit.simworld.experts import expert, proprio_observation
from bimankit.simworld.tasks import (BALL_LIFT_Z, BUTTON_PAIRS, HANDOVER_LIFT_Z,
                                     TASKS, TASK_ORDER, TRAY_HALF, TRAY_LIFT_Z,
                                     button_pressed, get_task, reset)
from bimankit.simworld.world import (CONTACT_RADIUS, CONTROL_DT, GRIPPER_RADIUS,
                                     MAX_ROT_SPEED, MAX_TRANS_SPEED, TABLE_TOP,
                                     Box, Cylinder, GripperState, RigidBody,
                                     Sphere, WorldState, make_gripper,
                                     signed_distance, step, workspace_grid)


def _cmd(w, **overrides):
    """Hold-position command, with optional per-arm replacements."""
    arms = {}
    for arm in ("right", "left"):
        g = w.grippers[arm]
        arms[arm] = overrides.get(arm, ArmAction(pose=g.pose, open=g.open))
    return BimanualAction(right=arms["right"], left=arms["left"])


def _world(bodies, right_pos, left_pos, right_open=True, left_open=True):
    return WorldState(
        bodies=tuple(bodies),
        grippers={"right": make_gripper("right", right_pos, open=right_open),
                  "left": make_gripper("left", left_pos, open=left_open)})


# --- signed distance (frozen values, hand-computed) --------------------------

def test_signed_distance_sphere():
    b = RigidBody(id="s", shape=Sphere(0.1), pose=Pose.identity())
    assert signed_distance([0.2, 0.0, 0.0], b) == pytest.approx(0.1, abs=1e-12)
    assert signed_distance([0.05, 0.0, 0.0], b) == pytest.approx(-0.05, abs=1e-12)


def test_signed_distance_box():
    b = RigidBody(id="b", shape=Box((0.1, 0.2, 0.3)), pose=Pose.identity())
    assert signed_distance([0.3, 0.0, 0.0], b) == pytest.approx(0.2, abs=1e-12)
    assert signed_distance([0.0, 0.0, 0.0], b) == pytest.approx(-0.1, abs=1e-12)
    corner = signed_distance([0.2, 0.3, 0.4], b)
    assert corner == pytest.approx(0.1 * math.sqrt(3.0), abs=1e-12)


def test_signed_distance_cylinder():
    b = RigidBody(id="c", shape=Cylinder(0.1, 0.2), pose=Pose.identity())
    assert signed_distance([0.3, 0.0, 0.0], b) == pytest.approx(0.2, abs=1e-12)
    assert signed_distance([0.0, 0.0, 0.5], b) == pytest.approx(0.3, abs=1e-12)
    assert signed_distance([0.2, 0.0, 0.3], b) == pytest.approx(
        math.hypot(0.1, 0.1), abs=1e-12)
    assert signed_distance([0.0, 0.0, 0.0], b) == pytest.approx(-0.1, abs=1e-12)


def test_signed_distance_respects_body_orientation():
    # box rotated 90 deg about z swaps its x/y half extents in world frame
    q = np.array([math.cos(math.pi / 4), 0.0, 0.0, math.sin(math.pi / 4)])
    b = RigidBody(id="b", shape=Box((0.1, 0.2, 0.05)),
                  pose=Pose(np.zeros(3), q))
    assert signed_distance([0.25, 0.0, 0.0], b) == pytest.approx(0.05, abs=1e-9)
    assert signed_distance([0.0, 0.15, 0.0], b) == pytest.approx(0.05, abs=1e-9)


# --- stepping: motion caps and purity ----------------------------------------

def test_hold_command_is_a_fixed_point():
    w, _ = reset(get_task("lift_ball"), 0, 3)
    w2 = step(w, _cmd(w))
    assert w2.time_s == pytest.approx(CONTROL_DT)
    for arm in ("right", "left"):
        assert np.array_equal(w2.grippers[arm].pose.position,
                              w.grippers[arm].pose.position)
        assert np.array_equal(w2.grippers[arm].pose.orientation,
                              w.grippers[arm].pose.orientation)
    for b_before, b_after in zip(w.bodies, w2.bodies):
        assert np.array_equal(b_after.pose.position, b_before.pose.position)


def test_translation_speed_cap_is_exact():
    w = _world([], (0.0, -0.3, 0.8), (0.0, 0.3, 0.8))
    far = ArmAction(pose=Pose.from_xyz(1.0, -0.3, 0.8))
    w2 = step(w, _cmd(w, right=far))
    moved = w2.grippers["right"].pose.position - np.array([0.0, -0.3, 0.8])
    assert moved[0] == pytest.approx(MAX_TRANS_SPEED * CONTROL_DT, abs=1e-15)
    assert moved[1] == 0.0 and moved[2] == 0.0


def test_rotation_speed_cap_is_exact():
    from bimankit.core import quat_angle_deg, quat_from_axis_angle
    w = _world([], (0.0, -0.3, 0.8), (0.0, 0.3, 0.8))
    target = Pose(np.array([0.0, -0.3, 0.8]),
                  quat_from_axis_angle([0.0, 0.0, 1.0], 90.0))
    w2 = step(w, _cmd(w, right=ArmAction(pose=target)))
    turned = quat_angle_deg(np.array([1.0, 0.0, 0.0, 0.0]),
                            w2.grippers["right"].pose.orientation)
    assert turned == pytest.approx(MAX_ROT_SPEED * CONTROL_DT, abs=1e-9)


def test_nonfinite_command_degrades_to_hold():
    # Pose validation rejects NaNs at construction, so exercise the world's
    # own guard directly with a hand-forged pose
    from bimankit.simworld.world import _sane_target
    w = _world([], (0.0, -0.3, 0.8), (0.0, 0.3, 0.8))
    nan_pose = Pose.__new__(Pose)
    object.__setattr__(nan_pose, "position", np.array([np.nan, 0.0, 0.0]))
    object.__setattr__(nan_pose, "orientation", np.array([1.0, 0.0, 0.0, 0.0]))
    held = _sane_target(w.grippers["right"].pose, nan_pose)
    assert held is w.grippers["right"].pose


def test_step_rejects_bad_dt():
    w = _world([], (0.0, -0.3, 0.8), (0.0, 0.3, 0.8))
    with pytest.raises(ValidationError):
        step(w, _cmd(w), 0.0)


# --- coupled-body rules -------------------------------------------------------

def _push_box_world(right, left):
    box = RigidBody(id="box", shape=Box((0.1, 0.14, 0.08)),
                    pose=Pose.from_xyz(0.0, 0.0, TABLE_TOP + 0.08),
                    mass_kg=50.0, coupling="two_arm_push")
    return _world([box], right, left), box


def test_single_contact_cannot_move_heavy_box():
    # right touches the -x face, left is far away: 2 s of pushing is a no-op
    w, box = _push_box_world((-0.11, 0.0, TABLE_TOP + 0.08), (0.0, 0.4, 0.9))
    assert signed_distance(w.grippers["right"].pose.position, box) <= CONTACT_RADIUS
    target = ArmAction(pose=Pose.from_xyz(0.3, 0.0, TABLE_TOP + 0.08))
    for _ in range(20):
        w = step(w, _cmd(w, right=target))
    assert np.array_equal(w.body("box").pose.position,
                          np.array([0.0, 0.0, TABLE_TOP + 0.08]))


def test_two_contact_push_slides_box_horizontally_only():
    w, _ = _push_box_world((-0.11, -0.05, TABLE_TOP + 0.08),
                           (-0.11, 0.05, TABLE_TOP + 0.08))
    up_and_over = Pose.from_xyz(0.2, -0.05, 0.9)
    up_and_over_l = Pose.from_xyz(0.2, 0.05, 0.9)
    w2 = step(w, _cmd(w, right=ArmAction(pose=up_and_over),
                      left=ArmAction(pose=up_and_over_l)))
    d = w2.body("box").pose.position - np.array([0.0, 0.0, TABLE_TOP + 0.08])
    assert d[2] == 0.0            # the heavy box never leaves the table
    assert d[0] > 0.0
    assert d[1] == pytest.approx(0.0, abs=1e-15)


def test_antipodal_lift_tracks_mean_gripper_motion():
    r = 0.11
    side = r + 0.011
    bz = TABLE_TOP + r
    ball = RigidBody(id="ball", shape=Sphere(r),
                     pose=Pose.from_xyz(0.0, 0.0, bz),
                     mass_kg=2.0, coupling="two_arm_lift")
    w = _world([ball], (0.0, -side, bz), (0.0, side, bz))
    up_r = ArmAction(pose=Pose.from_xyz(0.0, -side, bz + 1.0))
    up_l = ArmAction(pose=Pose.from_xyz(0.0, side, bz + 1.0))
    for _ in range(25):
        w = step(w, BimanualAction(right=up_r, left=up_l))
    assert not w.collided
    assert w.body("ball").pose.position[2] == pytest.approx(bz + 1.0, abs=1e-9)


def test_same_side_contacts_fail_the_antipodal_gate():
    r = 0.11
    bz = TABLE_TOP + r
    ball = RigidBody(id="ball", shape=Sphere(r),
                     pose=Pose.from_xyz(0.0, 0.0, bz),
                     mass_kg=2.0, coupling="two_arm_lift")
    # both grippers on the -y side, 60 deg apart: cos > -0.5, no lift
    a = (r + 0.01) * np.array([math.sin(math.radians(30)),
                               -math.cos(math.radians(30)), 0.0])
    b = (r + 0.01) * np.array([-math.sin(math.radians(30)),
                               -math.cos(math.radians(30)), 0.0])
    w = _world([ball], a + [0.0, 0.0, bz], b + [0.0, 0.0, bz])
    up_r = ArmAction(pose=Pose(w.grippers["right"].pose.position + [0, 0, 0.3]))
    up_l = ArmAction(pose=Pose(w.grippers["left"].pose.position + [0, 0, 0.3]))
    w2 = step(w, BimanualAction(right=up_r, left=up_l))
    assert w2.body("ball").pose.position[2] == bz


def test_resting_body_rides_its_supporter():
    tray = RigidBody(id="tray", shape=Box(TRAY_HALF),
                     pose=Pose.from_xyz(0.0, 0.0, 0.5),
                     coupling="two_arm_lift")
    item = RigidBody(id="item", shape=Box((0.02,) * 3),
                     pose=Pose.from_xyz(0.01, 0.03, 0.5 + TRAY_HALF[2] + 0.02),
                     rests_on="tray")
    side = TRAY_HALF[1] + 0.01
    w = _world([tray, item], (0.0, -side, 0.5), (0.0, side, 0.5))
    up_r = ArmAction(pose=Pose.from_xyz(0.0, -side, 0.9))
    up_l = ArmAction(pose=Pose.from_xyz(0.0, side, 0.9))
    before = w.body("item").pose.position - w.body("tray").pose.position
    for _ in range(10):
        w = step(w, BimanualAction(right=up_r, left=up_l))
    after = w.body("item").pose.position - w.body("tray").pose.position
    np.testing.assert_allclose(after, before, atol=1e-12)
    assert w.body("tray").pose.position[2] > 0.8


# --- grasping -----------------------------------------------------------------

def _grasp_world():
    item = RigidBody(id="item", shape=Box((0.06,) * 3),
                     pose=Pose.from_xyz(0.1, -0.2, TABLE_TOP + 0.06),
                     graspable=True)
    right = (0.1, -0.2 - 0.06 - 0.01, TABLE_TOP + 0.06)
    return _world([item], right, (0.0, 0.4, 0.9))


def test_close_near_surface_attaches_and_body_follows():
    w = _grasp_world()
    g = w.grippers["right"]
    w = step(w, _cmd(w, right=ArmAction(pose=g.pose, open=False)))
    assert w.grippers["right"].attached == "item"
    assert not w.grippers["right"].open

    start = w.body("item").pose.position.copy()
    offset = start - w.grippers["right"].pose.position
    dest = ArmAction(pose=Pose(w.grippers["right"].pose.position
                               + np.array([0.15, 0.1, 0.2])), open=False)
    for _ in range(10):
        w = step(w, _cmd(w, right=dest))
    new_offset = w.body("item").pose.position - w.grippers["right"].pose.position
    np.testing.assert_allclose(new_offset, offset, atol=1e-12)
    assert not np.allclose(w.body("item").pose.position, start)


def test_open_releases_in_place():
    w = _grasp_world()
    g = w.grippers["right"]
    w = step(w, _cmd(w, right=ArmAction(pose=g.pose, open=False)))
    held = w.body("item").pose.position.copy()
    w = step(w, _cmd(w, right=ArmAction(pose=w.grippers["right"].pose, open=True)))
    assert w.grippers["right"].attached is None
    assert w.grippers["right"].open
    np.testing.assert_array_equal(w.body("item").pose.position, held)
    # moving away afterwards leaves the item behind
    away = ArmAction(pose=Pose(w.grippers["right"].pose.position + [0, 0, 0.3]))
    for _ in range(8):
        w = step(w, _cmd(w, right=away))
    np.testing.assert_array_equal(w.body("item").pose.position, held)


def test_far_close_attaches_nothing():
    w = _grasp_world()
    far = ArmAction(pose=w.grippers["left"].pose, open=False)
    w = step(w, _cmd(w, left=far))
    assert w.grippers["left"].attached is None
    assert not w.grippers["left"].open


def test_second_gripper_steals_the_grasp():
    w = _grasp_world()
    w = step(w, _cmd(w, right=ArmAction(pose=w.grippers["right"].pose, open=False)))
    assert w.grippers["right"].attached == "item"
    # park the left gripper on the opposite face, then close it
    opp = np.array([0.1, -0.2 + 0.06 + 0.01, TABLE_TOP + 0.06])
    move = ArmAction(pose=Pose(opp))
    hold_r = ArmAction(pose=w.grippers["right"].pose, open=False)
    for _ in range(20):
        w = step(w, _cmd(w, right=hold_r, left=move))
        if np.allclose(w.grippers["left"].pose.position, opp, atol=1e-9):
            break
    w = step(w, _cmd(w, right=hold_r,
                     left=ArmAction(pose=w.grippers["left"].pose, open=False)))
    assert w.grippers["left"].attached == "item"
    assert w.grippers["right"].attached is None


# --- collision ------------------------------------------------------------------

def test_gripper_overlap_freezes_the_world():
    w = _world([], (0.0, -0.2, 0.8), (0.0, 0.2, 0.8))
    meet_r = ArmAction(pose=Pose.from_xyz(0.0, 0.0, 0.8))
    meet_l = ArmAction(pose=Pose.from_xyz(0.0, 0.0, 0.8))
    for _ in range(10):
        w = step(w, BimanualAction(right=meet_r, left=meet_l))
        if w.collided:
            break
    assert w.collided
    frozen_r = w.grippers["right"].pose.position.copy()
    t = w.time_s
    w2 = step(w, BimanualAction(right=meet_r, left=meet_l))
    assert w2.collided
    assert w2.time_s == pytest.approx(t + CONTROL_DT)
    np.testing.assert_array_equal(w2.grippers["right"].pose.position, frozen_r)
    gap = np.linalg.norm(w.grippers["right"].pose.position
                         - w.grippers["left"].pose.position)
    assert gap >= 2 * GRIPPER_RADIUS  # freeze happens before overlap is realized


# --- validation ----------------------------------------------------------------

def test_world_validation():
    with pytest.raises(ValidationError):
        Box((0.0, 0.1, 0.1))
    with pytest.raises(ValidationError):
        Sphere(-0.1)
    with pytest.raises(ValidationError):
        Cylinder(0.1, 0.0)
    with pytest.raises(ValidationError):
        RigidBody(id="x", shape=Sphere(0.1), pose=Pose.identity(),
                  coupling="rope")
    with pytest.raises(ValidationError):
        GripperState(arm="center", pose=Pose.identity())
    with pytest.raises(ValidationError):
        GripperState(arm="right", pose=Pose.identity(), open=True,
                     attached="item", attach_offset=Pose.identity())
    b = RigidBody(id="x", shape=Sphere(0.1), pose=Pose.identity())
    with pytest.raises(ValidationError):
        WorldState(bodies=(b, b),
                   grippers={"right": make_gripper("right", (0, -0.3, 0.8)),
                             "left": make_gripper("left", (0, 0.3, 0.8))})
    with pytest.raises(ValidationError):
        WorldState(bodies=(),
                   grippers={"right": make_gripper("right", (0, -0.3, 0.8))})


# --- task registry and spawns ---------------------------------------------------

def test_registry_contents_and_reference_stats():
    assert TASK_ORDER == ("push_box", "lift_ball", "push_buttons",
                          "lift_tray", "handover_easy")
    stats = {tid: (TASKS[tid].reference_duration_s,
                   TASKS[tid].reference_keyframes,
                   TASKS[tid].item_count,
                   TASKS[tid].n_variations()) for tid in TASK_ORDER}
    assert stats == {
        "push_box": (4.33, 2.1, 1, 1),
        "lift_ball": (4.40, 4.0, 1, 1),
        "push_buttons": (3.47, 4.0, 3, 5),
        "lift_tray": (3.77, 5.1, 1, 1),
        "handover_easy": (7.17, 7.5, 1, 1),
    }


def test_taxonomy_flags():
    flags = {tid: TASKS[tid].taxonomy.as_tuple() for tid in TASK_ORDER}
    assert flags == {
        "push_box": (True, True, False, True, True),
        "lift_ball": (True, True, True, True, True),
        "push_buttons": (True, False, False, True, False),
        "lift_tray": (True, True, True, True, True),
        "handover_easy": (True, True, True, False, False),
    }


def test_reset_is_deterministic_and_seed_sensitive():
    task = get_task("lift_tray")
    w1, g1 = reset(task, 0, 42)
    w2, g2 = reset(task, 0, 42)
    assert g1 == g2
    for a, b in zip(w1.bodies, w2.bodies):
        assert a.id == b.id
        np.testing.assert_array_equal(a.pose.position, b.pose.position)
    w3, _ = reset(task, 0, 43)
    moved = any(not np.array_equal(a.pose.position, b.pose.position)
                for a, b in zip(w1.bodies, w3.bodies))
    assert moved


def test_reset_rejects_bad_variation():
    with pytest.raises(ValidationError):
        reset(get_task("push_box"), 1, 0)
    with pytest.raises(ValidationError):
        reset(get_task("push_buttons"), 5, 0)
    with pytest.raises(ValidationError):
        get_task("fold_laundry")


def test_button_variations_name_both_colors():
    task = get_task("push_buttons")
    for v, pair in enumerate(BUTTON_PAIRS):
        w, goal = reset(task, v, 11)
        assert pair[0] in goal and pair[1] in goal
        names = {b.id for b in w.bodies}
        assert {f"button_{pair[0]}", f"button_{pair[1]}"} <= names
        assert sum(1 for n in names if n.startswith("button_")) == 3


def test_spawns_stay_inside_the_workspace():
    spec = workspace_grid()
    lo = spec.origin
    hi = spec.origin + spec.extent
    for tid in TASK_ORDER:
        task = get_task(tid)
        for seed in range(15):
            for v in range(task.n_variations()):
                w, _ = reset(task, v, seed)
                for b in w.bodies:
                    assert np.all(b.pose.position >= lo - 1e-12), (tid, b.id)
                    assert np.all(b.pose.position < hi), (tid, b.id)


# --- success predicate boundaries ------------------------------------------------

def _with_body_z(w, body_id, z):
    b = w.body(body_id)
    pos = b.pose.position.copy()
    pos[2] = z
    from dataclasses import replace
    return w.with_bodies({body_id: replace(b, pose=Pose(pos, b.pose.orientation))})


def test_lift_ball_threshold_is_strict():
    task = get_task("lift_ball")
    w, _ = reset(task, 0, 0)
    assert task.success(_with_body_z(w, "ball", BALL_LIFT_Z + 0.001))
    assert not task.success(_with_body_z(w, "ball", BALL_LIFT_Z - 0.001))
    assert not task.success(_with_body_z(w, "ball", BALL_LIFT_Z))


def test_lift_tray_needs_tray_and_item_up_and_together():
    task = get_task("lift_tray")
    w, _ = reset(task, 0, 0)
    item_xy = w.body("tray_item").pose.position[:2]
    tray_xy = w.body("tray").pose.position[:2]
    assert np.all(np.abs(item_xy - tray_xy) <= np.array(TRAY_HALF[:2]))

    up = _with_body_z(_with_body_z(w, "tray", TRAY_LIFT_Z + 0.001),
                      "tray_item", TRAY_LIFT_Z + 0.05)
    assert task.success(up)
    assert not task.success(_with_body_z(up, "tray", TRAY_LIFT_Z - 0.001))
    # item left behind on the table: no success even with the tray high up
    dropped = _with_body_z(up, "tray_item", TABLE_TOP + 0.025)
    assert not task.success(dropped)
    # item off the tray footprint entirely
    b = up.body("tray_item")
    far = b.pose.position.copy()
    far[1] += TRAY_HALF[1] + 0.05
    from dataclasses import replace
    slid = up.with_bodies({"tray_item": replace(b, pose=Pose(far))})
    assert not task.success(slid)


def test_handover_needs_one_holder_and_one_empty_open_hand():
    task = get_task("handover_easy")
    w, _ = reset(task, 0, 0)
    item = w.body("item")

    def _state(z, holder, other_open, other_attached=None):
        from dataclasses import replace
        pos = item.pose.position.copy()
        pos[2] = z
        body = replace(item, pose=Pose(pos, item.pose.orientation))
        offset = Pose.identity()
        grippers = {}
        for arm in ("right", "left"):
            if arm == holder:
                grippers[arm] = GripperState(
                    arm=arm, pose=Pose(pos), open=False,
                    attached="item", attach_offset=offset)
            else:
                attached = other_attached
                grippers[arm] = GripperState(
                    arm=arm, pose=Pose.from_xyz(0.0, 0.4 if arm == "left" else -0.4, 0.9),
                    open=other_open and attached is None,
                    attached=attached,
                    attach_offset=offset if attached else None)
        return WorldState(bodies=(body,), grippers=grippers)

    assert task.success(_state(HANDOVER_LIFT_Z + 0.001, "left", True))
    assert not task.success(_state(HANDOVER_LIFT_Z - 0.001, "left", True))
    assert not task.success(_state(HANDOVER_LIFT_Z + 0.001, "left", False))


def test_button_press_geometry():
    task = get_task("push_buttons")
    w, _ = reset(task, 0, 7)
    pair = BUTTON_PAIRS[0]
    btn = w.body(f"button_{pair[0]}")
    top = btn.pose.position + np.array([0.0, 0.0, btn.shape.half_height])

    def _press(dx, dz):
        g = GripperState(arm="right", pose=Pose(top + np.array([dx, 0.0, dz])))
        probe = WorldState(bodies=w.bodies,
                           grippers={"right": g,
                                     "left": w.grippers["left"]},
                           variation_id=w.variation_id)
        return button_pressed(probe, probe.body(btn.id))

    assert _press(0.0, 0.007)
    assert _press(0.014, 0.0)          # touching the cap on-axis counts
    assert not _press(0.016, 0.007)    # off-axis
    assert not _press(0.0, 0.016)      # hovering too high
    assert not _press(0.0, -0.005)     # below the cap plane


def test_push_box_success_is_position_overlap():
    task = get_task("push_box")
    w, _ = reset(task, 0, 1)
    from dataclasses import replace
    target = w.body("target_area")
    box = w.body("box")
    centered = w.with_bodies({"box": replace(
        box, pose=Pose(target.pose.position + np.array([0.0, 0.0, 0.08])))})
    assert task.success(centered)
    off = w.with_bodies({"box": replace(
        box, pose=Pose(target.pose.position + np.array([0.08, 0.0, 0.08])))})
    assert not task.success(off)


# --- scripted experts -------------------------------------------------------------

def test_experts_solve_every_task_and_variation():
    for tid in TASK_ORDER:
        task = get_task(tid)
        for v in range(task.n_variations()):
            for seed in (0, 1):
                w, goal = reset(task, v, seed)
                demo, final = expert(task, w, goal)
                assert not final.collided, (tid, v, seed)
                assert task.success(final), (tid, v, seed)
                assert demo.task_id == tid
                assert demo.variation_id == v and demo.seed == seed
                assert len(demo.steps) >= 2
                assert demo.steps[0].time_s == 0.0


def test_expert_streams_are_deterministic():
    task = get_task("handover_easy")
    w1, g1 = reset(task, 0, 5)
    w2, g2 = reset(task, 0, 5)
    d1, _ = expert(task, w1, g1)
    d2, _ = expert(task, w2, g2)
    assert len(d1.steps) == len(d2.steps)
    for s1, s2 in zip(d1.steps, d2.steps):
        assert s1.time_s == s2.time_s
        for arm in ("right", "left"):
            a1, a2 = s1.action.arm(arm), s2.action.arm(arm)
            assert np.array_equal(a1.pose.position, a2.pose.position)
            assert a1.open == a2.open and a1.collide == a2.collide


def test_expert_gripper_edges_and_duration():
    task = get_task("lift_ball")
    w, goal = reset(task, 0, 9)
    demo, _ = expert(task, w, goal)
    edges = 0
    for prev, cur in zip(demo.steps, demo.steps[1:]):
        for arm in ("right", "left"):
            if prev.action.arm(arm).open != cur.action.arm(arm).open:
                edges += 1
    assert edges >= 2                       # both arms close on the ball
    assert demo.duration_s > 1.0
    assert demo.steps[1].time_s - demo.steps[0].time_s == pytest.approx(CONTROL_DT)


def test_no_body_sinks_below_the_table():
    from bimankit.simworld.experts import expert_segments, run_script
    for tid in ("lift_ball", "lift_tray", "push_box"):
        task = get_task(tid)
        w, _ = reset(task, 0, 2)
        states, _, _ = run_script(w, expert_segments(task, w))
        for s in states:
            for b in s.bodies:
                if b.id == "table":
                    continue
                floor = TABLE_TOP + b.shape.bottom_offset
                assert b.pose.position[2] >= floor - 1e-9, (tid, b.id)


def test_proprio_observation_mirrors_gripper_state():
    w, _ = reset(get_task("push_box"), 0, 0)
    obs = proprio_observation(w, 0.25)
    assert obs.images == {}
    assert obs.timestep_fraction == 0.25
    for arm in ("right", "left"):
        assert obs.proprio[arm].gripper_open == w.grippers[arm].open
        np.testing.assert_array_equal(obs.proprio[arm].ee_pose.position,
                                      w.grippers[arm].pose.position)
