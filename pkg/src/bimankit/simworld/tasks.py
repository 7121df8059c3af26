"""Task registry: five simulated desk tasks plus documented-only entries.

Each simulated task contributes a spawn builder (seeded, variation-aware),
a pure success predicate over WorldState, a language goal, coordination
taxonomy flags and reference demonstration statistics. Tasks that the suite
documents but does not simulate are listed separately so tooling can name
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import Pose
from ..errors import ValidationError
from .world import (ARMS, Box, Cylinder, RigidBody, Sphere,
                    TABLE_TOP, WorldState, make_gripper)

# success thresholds (meters); all comparisons are strict
BALL_LIFT_Z = 0.95
TRAY_LIFT_Z = 1.2
HANDOVER_LIFT_Z = 0.8
TARGET_AREA_HALF = 0.075        # the 0.15 m square target region
BUTTON_PRESS_XY = 0.015         # press = tip within this of the button axis...
BUTTON_PRESS_Z = 0.015          # ...and within this above the button top

RIGHT_HOME = (-0.05, -0.35, 0.85)
LEFT_HOME = (-0.05, 0.35, 0.85)

BUTTON_PALETTE = {
    "red": (220, 45, 45),
    "green": (45, 190, 70),
    "blue": (50, 100, 230),
    "yellow": (235, 215, 60),
    "white": (245, 245, 245),
}
BUTTON_PAIRS = (("red", "green"), ("red", "blue"), ("green", "blue"),
                ("yellow", "red"), ("blue", "yellow"))


@dataclass(frozen=True)
class Taxonomy:
    """Coupling/coordination flags: temporal, spatial, physical coupling;
    symmetric and synchronous coordination."""

    temporal: bool
    spatial: bool
    physical: bool
    symmetric: bool
    synchronous: bool

    def as_tuple(self):
        return (self.temporal, self.spatial, self.physical,
                self.symmetric, self.synchronous)


@dataclass(frozen=True)
class TaskSpec:
    id: str
    language: str                      # goal template
    taxonomy: Taxonomy
    item_count: int
    variations: tuple
    build: Callable                    # (variation_index, rng) -> (bodies, goal)
    success: Callable                  # (WorldState) -> bool
    reference_duration_s: float        # demo statistics the experts target
    reference_keyframes: float

    def n_variations(self) -> int:
        return len(self.variations)


@dataclass(frozen=True)
class DocumentedTask:
    """A task the suite describes but does not simulate."""

    id: str
    language: str
    summary: str


def _table_body() -> RigidBody:
    return RigidBody(id="table", shape=Box((0.6, 0.6, 0.02)),
                     pose=Pose.from_xyz(0.0, 0.0, TABLE_TOP - 0.02),
                     mass_kg=100.0, color=(70, 70, 75))


def _uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(rng.uniform(lo, hi))


# ---------------------------------------------------------------------------
# (a) push_box
# ---------------------------------------------------------------------------

BOX_HALF = (0.10, 0.14, 0.08)


def _build_push_box(variation: int, rng: np.random.Generator):
    bx = _uniform(rng, 0.0, 0.10)
    by = _uniform(rng, -0.06, 0.06)
    bodies = (
        _table_body(),
        RigidBody(id="box", shape=Box(BOX_HALF),
                  pose=Pose.from_xyz(bx, by, TABLE_TOP + BOX_HALF[2]),
                  mass_kg=50.0, color=(90, 110, 200), coupling="two_arm_push"),
        RigidBody(id="target_area", shape=Box((TARGET_AREA_HALF, TARGET_AREA_HALF, 0.002)),
                  pose=Pose.from_xyz(0.32, 0.0, TABLE_TOP + 0.002),
                  color=(210, 45, 45)),
    )
    return bodies, "Push the box to the red area."


def _success_push_box(w: WorldState) -> bool:
    box = w.body("box")
    target = w.body("target_area")
    d = box.pose.position - target.pose.position
    return abs(d[0]) <= TARGET_AREA_HALF and abs(d[1]) <= TARGET_AREA_HALF


# ---------------------------------------------------------------------------
# (b) lift_ball
# ---------------------------------------------------------------------------

BALL_RADIUS = 0.11


def _build_lift_ball(variation: int, rng: np.random.Generator):
    bx = _uniform(rng, 0.0, 0.10)
    by = _uniform(rng, -0.06, 0.06)
    bodies = (
        _table_body(),
        RigidBody(id="ball", shape=Sphere(BALL_RADIUS),
                  pose=Pose.from_xyz(bx, by, TABLE_TOP + BALL_RADIUS),
                  mass_kg=2.0, color=(235, 140, 40), coupling="two_arm_lift"),
    )
    return bodies, "Lift the ball."


def _success_lift_ball(w: WorldState) -> bool:
    return float(w.body("ball").pose.position[2]) > BALL_LIFT_Z


# ---------------------------------------------------------------------------
# (c) push_buttons
# ---------------------------------------------------------------------------

BUTTON_RADIUS = 0.025
BUTTON_HALF_HEIGHT = 0.0125
BUTTON_SLOTS_Y = (-0.12, 0.0, 0.12)


def _build_push_buttons(variation: int, rng: np.random.Generator):
    pair = BUTTON_PAIRS[variation]
    distractor_pool = sorted(set(BUTTON_PALETTE) - set(pair))
    distractor = distractor_pool[int(rng.integers(0, len(distractor_pool)))]
    colors = list(pair) + [distractor]
    order = rng.permutation(3)

    cx = 0.08 + _uniform(rng, -0.02, 0.02)
    cy = _uniform(rng, -0.02, 0.02)
    base_top = TABLE_TOP + 0.02 + 0.01
    bodies = [
        _table_body(),
        RigidBody(id="base", shape=Box((0.16, 0.18, 0.01)),
                  pose=Pose.from_xyz(cx, cy, base_top - 0.01),
                  color=(120, 120, 130)),
    ]
    for slot, which in enumerate(order):
        color_name = colors[which]
        bodies.append(RigidBody(
            id=f"button_{color_name}",
            shape=Cylinder(BUTTON_RADIUS, BUTTON_HALF_HEIGHT),
            pose=Pose.from_xyz(cx, cy + BUTTON_SLOTS_Y[slot],
                               base_top + BUTTON_HALF_HEIGHT),
            color=BUTTON_PALETTE[color_name], coupling="button"))
    goal = f"Push the {pair[0]} and the {pair[1]} button."
    return tuple(bodies), goal


def button_pressed(w: WorldState, button: RigidBody) -> bool:
    """A gripper tip hovers just above the button cap, close to its axis."""
    top = button.pose.position + np.array([0.0, 0.0, button.shape.half_height])
    for arm in ARMS:
        g = w.grippers[arm].pose.position
        horiz = math.hypot(g[0] - top[0], g[1] - top[1])
        if horiz <= BUTTON_PRESS_XY and 0.0 <= g[2] - top[2] <= BUTTON_PRESS_Z:
            return True
    return False


def _success_push_buttons(w: WorldState) -> bool:
    pair = BUTTON_PAIRS[w.variation_id]
    return all(button_pressed(w, w.body(f"button_{color}")) for color in pair)


# ---------------------------------------------------------------------------
# (k) lift_tray
# ---------------------------------------------------------------------------

TRAY_HALF = (0.07, 0.20, 0.008)
TRAY_ITEM_HALF = 0.025


def _build_lift_tray(variation: int, rng: np.random.Generator):
    cx = 0.08 + _uniform(rng, -0.03, 0.03)
    cy = _uniform(rng, -0.03, 0.03)
    holder_top = TABLE_TOP + 0.04
    tray_z = holder_top + TRAY_HALF[2]
    ix = cx + _uniform(rng, -0.02, 0.02)
    iy = cy + _uniform(rng, -0.05, 0.05)
    bodies = (
        _table_body(),
        RigidBody(id="holder", shape=Box((0.06, 0.10, 0.02)),
                  pose=Pose.from_xyz(cx, cy, holder_top - 0.02),
                  color=(120, 100, 80)),
        RigidBody(id="tray", shape=Box(TRAY_HALF),
                  pose=Pose.from_xyz(cx, cy, tray_z),
                  mass_kg=1.5, color=(150, 110, 70), coupling="two_arm_lift"),
        RigidBody(id="tray_item", shape=Box((TRAY_ITEM_HALF,) * 3),
                  pose=Pose.from_xyz(ix, iy, tray_z + TRAY_HALF[2] + TRAY_ITEM_HALF),
                  mass_kg=0.2, color=(60, 170, 200), rests_on="tray"),
    )
    return bodies, "Lift the tray."


def _success_lift_tray(w: WorldState) -> bool:
    tray = w.body("tray")
    item = w.body("tray_item")
    if float(tray.pose.position[2]) <= TRAY_LIFT_Z:
        return False
    if float(item.pose.position[2]) <= TRAY_LIFT_Z:
        return False
    rel = item.pose.position - tray.pose.position
    return (abs(float(rel[0])) <= TRAY_HALF[0]
            and abs(float(rel[1])) <= TRAY_HALF[1])


# ---------------------------------------------------------------------------
# (l) handover_easy
# ---------------------------------------------------------------------------

HANDOVER_ITEM_HALF = 0.06


def _build_handover_easy(variation: int, rng: np.random.Generator):
    ix = 0.10 + _uniform(rng, -0.04, 0.04)
    iy = -0.18 + _uniform(rng, -0.05, 0.05)
    bodies = (
        _table_body(),
        RigidBody(id="item", shape=Box((HANDOVER_ITEM_HALF,) * 3),
                  pose=Pose.from_xyz(ix, iy, TABLE_TOP + HANDOVER_ITEM_HALF),
                  mass_kg=0.5, color=(220, 45, 45), graspable=True),
    )
    return bodies, "Handover the item."


def _success_handover_easy(w: WorldState) -> bool:
    item = w.body("item")
    if float(item.pose.position[2]) <= HANDOVER_LIFT_Z:
        return False
    holder = None
    for arm in ARMS:
        if w.grippers[arm].attached == "item":
            holder = arm
    if holder is None:
        return False
    other = w.grippers["left" if holder == "right" else "right"]
    return other.open and other.attached is None


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

TASKS: dict[str, TaskSpec] = {}


def _register(spec: TaskSpec) -> TaskSpec:
    TASKS[spec.id] = spec
    return spec


PUSH_BOX = _register(TaskSpec(
    id="push_box", language="Push the box to the red area.",
    taxonomy=Taxonomy(True, True, False, True, True),
    item_count=1, variations=(0,),
    build=_build_push_box, success=_success_push_box,
    reference_duration_s=4.33, reference_keyframes=2.1))

LIFT_BALL = _register(TaskSpec(
    id="lift_ball", language="Lift the ball.",
    taxonomy=Taxonomy(True, True, True, True, True),
    item_count=1, variations=(0,),
    build=_build_lift_ball, success=_success_lift_ball,
    reference_duration_s=4.40, reference_keyframes=4.0))

PUSH_BUTTONS = _register(TaskSpec(
    id="push_buttons", language="Push the (color A) and the (color B) button.",
    taxonomy=Taxonomy(True, False, False, True, False),
    item_count=3, variations=BUTTON_PAIRS,
    build=_build_push_buttons, success=_success_push_buttons,
    reference_duration_s=3.47, reference_keyframes=4.0))

LIFT_TRAY = _register(TaskSpec(
    id="lift_tray", language="Lift the tray.",
    taxonomy=Taxonomy(True, True, True, True, True),
    item_count=1, variations=(0,),
    build=_build_lift_tray, success=_success_lift_tray,
    reference_duration_s=3.77, reference_keyframes=5.1))

HANDOVER_EASY = _register(TaskSpec(
    id="handover_easy", language="Handover the item.",
    taxonomy=Taxonomy(True, True, True, False, False),
    item_count=1, variations=(0,),
    build=_build_handover_easy, success=_success_handover_easy,
    reference_duration_s=7.17, reference_keyframes=7.5))

TASK_ORDER = tuple(TASKS)

DOCUMENTED_ONLY = (
    DocumentedTask("pick_up_plate", "Pick up the plate.",
                   "Grasp a plate from the table with both arms and lift it."),
    DocumentedTask("put_item_in_drawer", "Put the item in the drawer.",
                   "One arm opens the drawer, the other places the item inside."),
    DocumentedTask("put_bottle_in_fridge", "Put the bottle in the fridge.",
                   "One arm opens the fridge door, the other inserts the bottle."),
    DocumentedTask("handover_item", "Hand over the (color) item.",
                   "Pick the named item among distractors and pass it between arms."),
    DocumentedTask("pick_up_notebook", "Pick up the notebook.",
                   "One arm tilts the notebook so the other can grasp and lift it."),
    DocumentedTask("straighten_rope", "Straighten the rope.",
                   "Both arms pull the rope ends until it lies straight."),
    DocumentedTask("sweep_dustpan", "Sweep the dust into the dustpan.",
                   "One arm holds the dustpan while the other sweeps debris in."),
    DocumentedTask("take_tray_out_of_oven", "Take the tray out of the oven.",
                   "One arm opens the oven door, the other withdraws the tray."),
)


def get_task(task_id: str) -> TaskSpec:
    try:
        return TASKS[task_id]
    except KeyError:
        raise ValidationError(
            f"unknown task {task_id!r}; simulated tasks: {', '.join(TASK_ORDER)}")


def reset(task: TaskSpec, variation: int, seed: int) -> tuple[WorldState, str]:
    """Deterministically spawn an episode. Same inputs, same world."""
    if not 0 <= variation < task.n_variations():
        raise ValidationError(
            f"variation {variation} out of range for {task.id} "
            f"({task.n_variations()} available)")
    task_index = TASK_ORDER.index(task.id)
    rng = np.random.default_rng(np.random.SeedSequence([task_index, variation, seed]))
    bodies, goal = task.build(variation, rng)
    w = WorldState(
        bodies=bodies,
        grippers={"right": make_gripper("right", RIGHT_HOME),
                  "left": make_gripper("left", LEFT_HOME)},
        time_s=0.0, seed=seed, variation_id=variation)
    return w, goal
