"""Scripted experts: per-task waypoint segments executed at the control rate.

A script is a list of segments; each segment gives every arm a target
(pose, gripper flag, collide annotation) or lets it hold position, then
dwells a few ticks once both arms have arrived. Dwells of three ticks or
more are what register as settle keyframes downstream, and gripper toggles
always ride on a short move so consecutive keyframes never share an arm
pose exactly.

The recorded action stream is the executed gripper state at 10 Hz plus the
segment's collide annotation, which is what the discretizer trains against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from ..core import (ARMS, ArmAction, ArmProprio, BimanualAction, DemoStep,
                    Demonstration, Observation, Pose)
from ..errors import ValidationError
from .tasks import (BALL_RADIUS, BOX_HALF, BUTTON_HALF_HEIGHT, TRAY_HALF,
                    HANDOVER_ITEM_HALF, TaskSpec)
from .world import CONTROL_DT, WorldState, grippers_reached, step

_MAX_SEGMENT_TICKS = 200


@dataclass(frozen=True)
class ArmTarget:
    pose: Pose
    open: bool = True
    collide: bool = False


@dataclass(frozen=True)
class Segment:
    """Simultaneous per-arm targets; None keeps that arm where it is."""

    right: Optional[ArmTarget] = None
    left: Optional[ArmTarget] = None
    dwell_ticks: int = 0


def _at(x, y, z, open=True, collide=False) -> ArmTarget:
    return ArmTarget(Pose.from_xyz(float(x), float(y), float(z)),
                     open=open, collide=collide)


# ---------------------------------------------------------------------------
# per-task scripts
# ---------------------------------------------------------------------------

def _script_push_box(w: WorldState) -> list[Segment]:
    bx, by, bz = w.body("box").pose.position
    behind = bx - BOX_HALF[0] - 0.06
    grip_x = bx - BOX_HALF[0] - 0.01
    push_x = 0.32 - BOX_HALF[0] - 0.01  # box center lands on the target
    return [
        Segment(right=_at(behind, by - 0.09, 0.70),
                left=_at(behind, by + 0.09, 0.70)),
        Segment(right=_at(grip_x - 0.05, by - 0.09, bz, collide=True),
                left=_at(grip_x - 0.05, by + 0.09, bz, collide=True),
                dwell_ticks=4),
        Segment(right=_at(push_x, by - 0.09, bz, collide=True),
                left=_at(push_x, by + 0.09, bz, collide=True),
                dwell_ticks=4),
    ]


def _script_lift_ball(w: WorldState) -> list[Segment]:
    bx, by, bz = w.body("ball").pose.position
    side = BALL_RADIUS + 0.011
    return [
        Segment(right=_at(bx, by - 0.18, 0.72), left=_at(bx, by + 0.18, 0.72)),
        Segment(right=_at(bx, by - 0.18, bz), left=_at(bx, by + 0.18, bz),
                dwell_ticks=4),
        Segment(right=_at(bx, by - side, bz, collide=True),
                left=_at(bx, by + side, bz, collide=True), dwell_ticks=4),
        Segment(right=_at(bx, by - side, bz + 0.025, open=False, collide=True),
                left=_at(bx, by + side, bz + 0.025, open=False, collide=True)),
        Segment(right=_at(bx, by - side, 1.005, open=False, collide=True),
                left=_at(bx, by + side, 1.005, open=False, collide=True),
                dwell_ticks=4),
    ]


def _script_push_buttons(w: WorldState) -> list[Segment]:
    from .tasks import BUTTON_PAIRS
    pair = BUTTON_PAIRS[w.variation_id]
    buttons = sorted((w.body(f"button_{c}") for c in pair),
                     key=lambda b: float(b.pose.position[1]))
    r_btn, l_btn = buttons[0], buttons[1]  # right arm takes the lower-y slot
    press_z = {}
    hover = {}
    for name, btn in (("r", r_btn), ("l", l_btn)):
        top = float(btn.pose.position[2]) + BUTTON_HALF_HEIGHT
        press_z[name] = top + 0.007
        hover[name] = (float(btn.pose.position[0]), float(btn.pose.position[1]))
    return [
        Segment(right=_at(*hover["r"], 0.62), left=_at(*hover["l"], 0.62),
                dwell_ticks=4),
        Segment(right=_at(*hover["r"], press_z["r"], open=False, collide=True),
                left=_at(*hover["l"], press_z["l"], open=False, collide=True),
                dwell_ticks=5),
    ]


def _script_lift_tray(w: WorldState) -> list[Segment]:
    tx, ty, tz = w.body("tray").pose.position
    outer = TRAY_HALF[1] + 0.035
    inner = TRAY_HALF[1] + 0.009
    return [
        Segment(right=_at(tx, ty - 0.26, 0.66), left=_at(tx, ty + 0.26, 0.66),
                dwell_ticks=4),
        Segment(right=_at(tx, ty - outer, tz), left=_at(tx, ty + outer, tz),
                dwell_ticks=4),
        Segment(right=_at(tx, ty - inner, tz, open=False, collide=True),
                left=_at(tx, ty + inner, tz, open=False, collide=True)),
        Segment(right=_at(tx, ty - inner, 0.90, open=False, collide=True),
                left=_at(tx, ty + inner, 0.90, open=False, collide=True),
                dwell_ticks=4),
        Segment(right=_at(tx, ty - inner, 1.262, open=False, collide=True),
                left=_at(tx, ty + inner, 1.262, open=False, collide=True),
                dwell_ticks=4),
    ]


def _script_handover_easy(w: WorldState) -> list[Segment]:
    ix, iy, iz = w.body("item").pose.position
    grasp = HANDOVER_ITEM_HALF + 0.005
    hx, hz = 0.10, 0.75
    return [
        Segment(right=_at(ix, iy - grasp - 0.02, iz), dwell_ticks=4),
        Segment(right=_at(ix, iy - grasp, iz, open=False, collide=True)),
        Segment(right=_at(hx, -grasp, hz, open=False),
                left=_at(hx, grasp + 0.02, hz), dwell_ticks=4),
        Segment(left=_at(hx, grasp, hz, open=False, collide=True)),
        Segment(right=_at(hx, -0.28, 0.80, open=True), dwell_ticks=4),
        Segment(left=_at(hx, grasp, 0.88, open=False), dwell_ticks=4),
    ]


_SCRIPTS: dict[str, Callable[[WorldState], list[Segment]]] = {
    "push_box": _script_push_box,
    "lift_ball": _script_lift_ball,
    "push_buttons": _script_push_buttons,
    "lift_tray": _script_lift_tray,
    "handover_easy": _script_handover_easy,
}


def expert_segments(task: TaskSpec, w: WorldState) -> list[Segment]:
    try:
        script = _SCRIPTS[task.id]
    except KeyError:
        raise ValidationError(f"no scripted expert for task {task.id!r}")
    return script(w)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def proprio_observation(w: WorldState, fraction: float = 0.0) -> Observation:
    """Camera-free observation; the harness swaps in a rendering observer."""
    return Observation(
        images={},
        proprio={arm: ArmProprio(gripper_open=w.grippers[arm].open,
                                 ee_pose=w.grippers[arm].pose)
                 for arm in ARMS},
        timestep_fraction=fraction)


def _segment_cmd(w: WorldState, seg: Segment) -> tuple[BimanualAction, dict]:
    arm_actions = {}
    collide = {}
    for arm, target in (("right", seg.right), ("left", seg.left)):
        g = w.grippers[arm]
        if target is None:
            arm_actions[arm] = ArmAction(pose=g.pose, open=g.open, collide=False)
            collide[arm] = False
        else:
            arm_actions[arm] = ArmAction(pose=target.pose, open=target.open,
                                         collide=target.collide)
            collide[arm] = target.collide
    return BimanualAction(right=arm_actions["right"],
                          left=arm_actions["left"]), collide


def run_script(w: WorldState, segments: list[Segment]):
    """Execute segments at 10 Hz. Returns (states, recorded actions, final).

    states[i] pairs with actions[i]; index 0 is the untouched start state
    with the grippers' resting action.
    """
    states = [w]
    actions = [BimanualAction(
        right=ArmAction(pose=w.grippers["right"].pose, open=w.grippers["right"].open),
        left=ArmAction(pose=w.grippers["left"].pose, open=w.grippers["left"].open))]

    for seg in segments:
        cmd, collide = _segment_cmd(w, seg)
        ticks = 0
        while True:
            w = step(w, cmd, CONTROL_DT)
            states.append(w)
            actions.append(BimanualAction(
                right=ArmAction(pose=w.grippers["right"].pose,
                                open=w.grippers["right"].open,
                                collide=collide["right"]),
                left=ArmAction(pose=w.grippers["left"].pose,
                               open=w.grippers["left"].open,
                               collide=collide["left"])))
            ticks += 1
            if w.collided:
                return states, actions, w
            if grippers_reached(w, cmd):
                break
            if ticks > _MAX_SEGMENT_TICKS:
                raise RuntimeError("expert segment failed to converge")
        for _ in range(seg.dwell_ticks):
            w = step(w, cmd, CONTROL_DT)
            states.append(w)
            actions.append(BimanualAction(
                right=ArmAction(pose=w.grippers["right"].pose,
                                open=w.grippers["right"].open,
                                collide=collide["right"]),
                left=ArmAction(pose=w.grippers["left"].pose,
                               open=w.grippers["left"].open,
                               collide=collide["left"])))
    return states, actions, w


def expert(task: TaskSpec, w: WorldState, goal: str,
           observe: Callable[[WorldState, float], Observation] = proprio_observation
           ) -> tuple[Demonstration, WorldState]:
    """Run the scripted expert and package the rollout as a Demonstration."""
    segments = expert_segments(task, w)
    states, actions, final = run_script(w, segments)
    n = len(states)
    steps = [
        DemoStep(time_s=i * CONTROL_DT,
                 obs=observe(states[i], i / (n - 1)),
                 action=actions[i])
        for i in range(n)
    ]
    demo = Demonstration(task_id=task.id, variation_id=w.variation_id,
                         seed=w.seed, goal=goal, steps=steps)
    return demo, final
