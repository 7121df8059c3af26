"""Deterministic kinematic task suite for two-arm desk manipulation."""

from .world import (ANTIPODAL_MAX_COS, Box, CONTACT_RADIUS, CONTROL_DT,
                    Cylinder, GRASP_RADIUS, GRIPPER_RADIUS, GripperState,
                    MAX_ROT_SPEED, MAX_TRANS_SPEED, RigidBody, Sphere,
                    TABLE_TOP, WORKSPACE_ORIGIN, WorldState, grippers_reached,
                    make_gripper, signed_distance, step, workspace_grid)
from .tasks import (BALL_LIFT_Z, BUTTON_PAIRS, BUTTON_PALETTE, DOCUMENTED_ONLY,
                    DocumentedTask, HANDOVER_LIFT_Z, TARGET_AREA_HALF, TASKS,
                    TASK_ORDER, TRAY_LIFT_Z, TaskSpec, Taxonomy,
                    button_pressed, get_task, reset)
from .experts import (ArmTarget, Segment, expert, expert_segments,
                      proprio_observation, run_script)
from .render import (WRIST_CAMERAS, default_rig, look_at, make_observer,
                     render, render_camera, resolve_extrinsics,
                     wrist_extrinsics)

__all__ = [
    "ANTIPODAL_MAX_COS", "BALL_LIFT_Z", "BUTTON_PAIRS", "BUTTON_PALETTE",
    "Box", "CONTACT_RADIUS", "CONTROL_DT", "Cylinder", "DOCUMENTED_ONLY",
    "DocumentedTask", "GRASP_RADIUS", "GRIPPER_RADIUS", "GripperState",
    "HANDOVER_LIFT_Z", "MAX_ROT_SPEED", "MAX_TRANS_SPEED", "RigidBody",
    "Segment", "ArmTarget", "Sphere", "TABLE_TOP", "TARGET_AREA_HALF",
    "TASKS", "TASK_ORDER", "TRAY_LIFT_Z", "TaskSpec", "Taxonomy",
    "WORKSPACE_ORIGIN", "WRIST_CAMERAS", "WorldState", "button_pressed",
    "default_rig", "expert", "expert_segments", "get_task",
    "grippers_reached", "look_at", "make_gripper", "make_observer",
    "proprio_observation", "render", "render_camera", "reset",
    "resolve_extrinsics", "run_script", "signed_distance", "step",
    "workspace_grid", "wrist_extrinsics",
]
