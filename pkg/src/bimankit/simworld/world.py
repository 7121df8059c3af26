"""Quasi-static kinematic world for desk-scale two-arm manipulation.

There is no physics engine: grippers are points with collision spheres that
move toward commanded poses at capped speeds, and bodies move only through a
small set of deterministic rules evaluated every step:

  * an attached (grasped) body follows its gripper rigidly
  * a `two_arm_push` body translates horizontally with the mean gripper
    motion while BOTH grippers touch it (the heavy-box rule)
  * a `two_arm_lift` body translates with the mean gripper motion while
    both grippers hold antipodal contact
  * a body resting on another copies its supporter's translation
  * nothing ever sinks below the table plane

Closing a gripper within the grasp radius of a graspable body attaches it
(stealing it from the other gripper if needed); opening releases it in
place - there is no gravity drop. If the two gripper collision spheres
would overlap, the world freezes and flags the collision. Given equal
commands, step() is a pure function, so whole episodes are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np

from ..camvox import GridSpec
from ..core import (ARMS, BimanualAction, Pose, pose_compose, quat_angle_deg,
                    quat_normalize, quat_rotate)
from ..errors import ValidationError

# world layout
TABLE_TOP = 0.45                    # z of the table surface, meters
WORKSPACE_ORIGIN = (-0.5, -0.5, 0.3)

# motion and interaction limits
CONTROL_DT = 0.1                    # 10 Hz recording / control
MAX_TRANS_SPEED = 0.5               # m/s
MAX_ROT_SPEED = 90.0                # deg/s
GRASP_RADIUS = 0.02                 # attach reach, meters from body surface
CONTACT_RADIUS = 0.03               # push/lift contact reach, meters
GRIPPER_RADIUS = 0.05               # gripper collision sphere
ANTIPODAL_MAX_COS = -0.5            # contact directions at least 120 deg apart

COUPLINGS = ("none", "two_arm_push", "two_arm_lift", "button")


def workspace_grid() -> GridSpec:
    """The canonical 1 m^3, 100^3-cell workspace grid."""
    return GridSpec(np.array(WORKSPACE_ORIGIN), 0.01, (100, 100, 100))


# ---------------------------------------------------------------------------
# bodies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    half_extents: tuple[float, float, float]

    def __post_init__(self):
        he = tuple(float(h) for h in self.half_extents)
        if len(he) != 3 or any(h <= 0 for h in he):
            raise ValidationError("box half extents must be three positive floats")
        object.__setattr__(self, "half_extents", he)

    @property
    def bottom_offset(self) -> float:
        return self.half_extents[2]


@dataclass(frozen=True)
class Sphere:
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValidationError("sphere radius must be positive")

    @property
    def bottom_offset(self) -> float:
        return self.radius


@dataclass(frozen=True)
class Cylinder:
    """Capped cylinder, axis along local z."""

    radius: float
    half_height: float

    def __post_init__(self):
        if self.radius <= 0 or self.half_height <= 0:
            raise ValidationError("cylinder dimensions must be positive")

    @property
    def bottom_offset(self) -> float:
        return self.half_height


Shape = Box | Sphere | Cylinder


@dataclass(frozen=True)
class RigidBody:
    id: str
    shape: Shape
    pose: Pose
    mass_kg: float = 1.0
    color: tuple[int, int, int] = (200, 200, 200)
    graspable: bool = False
    coupling: str = "none"
    rests_on: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("body id must be non-empty")
        if self.mass_kg <= 0:
            raise ValidationError("mass must be positive")
        if self.coupling not in COUPLINGS:
            raise ValidationError(f"unknown coupling {self.coupling!r}")


def signed_distance(point: np.ndarray, body: RigidBody) -> float:
    """Signed distance from a world point to the body surface (< 0 inside)."""
    p = np.asarray(point, dtype=np.float64)
    local = quat_rotate(
        np.array([body.pose.orientation[0], *(-body.pose.orientation[1:])]),
        p - body.pose.position)
    s = body.shape
    if isinstance(s, Sphere):
        return float(np.linalg.norm(local)) - s.radius
    if isinstance(s, Box):
        d = np.abs(local) - np.asarray(s.half_extents)
        outside = float(np.linalg.norm(np.maximum(d, 0.0)))
        inside = float(min(np.max(d), 0.0))
        return outside + inside
    if isinstance(s, Cylinder):
        radial = math.hypot(local[0], local[1]) - s.radius
        axial = abs(local[2]) - s.half_height
        outside = math.hypot(max(radial, 0.0), max(axial, 0.0))
        inside = min(max(radial, axial), 0.0)
        return outside + inside
    raise ValidationError(f"unknown shape {type(s).__name__}")


# ---------------------------------------------------------------------------
# grippers and world state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GripperState:
    arm: str
    pose: Pose
    open: bool = True
    attached: Optional[str] = None
    attach_offset: Optional[Pose] = None  # attached body pose in gripper frame

    def __post_init__(self):
        if self.arm not in ARMS:
            raise ValidationError(f"unknown arm {self.arm!r}")
        if self.attached is not None and self.open:
            raise ValidationError("an open gripper cannot hold a body")
        if (self.attached is None) != (self.attach_offset is None):
            raise ValidationError("attached body and offset must come together")


@dataclass(frozen=True)
class WorldState:
    bodies: tuple[RigidBody, ...]
    grippers: Mapping[str, GripperState]
    time_s: float = 0.0
    seed: int = 0
    variation_id: int = 0
    collided: bool = False

    def __post_init__(self):
        bodies = tuple(self.bodies)
        ids = [b.id for b in bodies]
        if len(set(ids)) != len(ids):
            raise ValidationError("body ids must be unique")
        grippers = dict(self.grippers)
        if set(grippers) != set(ARMS):
            raise ValidationError(f"grippers must cover {ARMS}")
        object.__setattr__(self, "bodies", bodies)
        object.__setattr__(self, "grippers", grippers)

    def body(self, body_id: str) -> RigidBody:
        for b in self.bodies:
            if b.id == body_id:
                return b
        raise ValidationError(f"no body {body_id!r}")

    def with_bodies(self, updated: Mapping[str, RigidBody]) -> "WorldState":
        return replace(self, bodies=tuple(
            updated.get(b.id, b) for b in self.bodies))


def _slerp(qa: np.ndarray, qb: np.ndarray, frac: float) -> np.ndarray:
    if float(np.dot(qa, qb)) < 0.0:
        qb = -qb
    dot = min(1.0, max(-1.0, float(np.dot(qa, qb))))
    omega = math.acos(dot)
    if omega < 1e-9:
        return qa
    sin_o = math.sin(omega)
    return quat_normalize((math.sin((1 - frac) * omega) / sin_o) * qa
                          + (math.sin(frac * omega) / sin_o) * qb)


def _move_toward(pose: Pose, target: Pose, dt: float) -> Pose:
    d = target.position - pose.position
    dist = float(np.linalg.norm(d))
    cap = MAX_TRANS_SPEED * dt
    pos = target.position if dist <= cap else pose.position + d * (cap / dist)

    angle = quat_angle_deg(pose.orientation, target.orientation)
    rot_cap = MAX_ROT_SPEED * dt
    if angle <= rot_cap:
        q = target.orientation
    else:
        q = _slerp(pose.orientation, target.orientation, rot_cap / angle)
    return Pose(pos, q)


def _sane_target(current: Pose, commanded: Pose) -> Pose:
    """Invalid commands (non-finite values) degrade to holding position."""
    if (np.all(np.isfinite(commanded.position))
            and np.all(np.isfinite(commanded.orientation))):
        return commanded
    return current


def _clamp_to_table(body: RigidBody, new_pos: np.ndarray) -> np.ndarray:
    floor = TABLE_TOP + body.shape.bottom_offset
    if new_pos[2] < floor:
        new_pos = new_pos.copy()
        new_pos[2] = floor
    return new_pos


def step(w: WorldState, cmd: BimanualAction, dt: float = CONTROL_DT) -> WorldState:
    """Advance the world one control tick under a bimanual command."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if w.collided:
        return replace(w, time_s=w.time_s + dt)

    old = {arm: w.grippers[arm] for arm in ARMS}
    new_pose = {}
    delta = {}
    for arm in ARMS:
        target = _sane_target(old[arm].pose, cmd.arm(arm).pose)
        new_pose[arm] = _move_toward(old[arm].pose, target, dt)
        delta[arm] = new_pose[arm].position - old[arm].pose.position

    gap = float(np.linalg.norm(new_pose["right"].position - new_pose["left"].position))
    if gap < 2 * GRIPPER_RADIUS:
        return replace(w, collided=True, time_s=w.time_s + dt)

    # gripper open/close transitions; right is resolved before left
    grippers = {}
    attachments = {arm: (old[arm].attached, old[arm].attach_offset) for arm in ARMS}
    for arm in ARMS:
        want_open = cmd.arm(arm).open
        was_open = old[arm].open
        if was_open and not want_open:
            best = None
            for b in w.bodies:
                if not b.graspable:
                    continue
                sd = signed_distance(new_pose[arm].position, b)
                if sd <= GRASP_RADIUS and (best is None or sd < best[0]):
                    best = (sd, b)
            if best is not None:
                body = best[1]
                other = "left" if arm == "right" else "right"
                if attachments[other][0] == body.id:
                    attachments[other] = (None, None)
                offset = pose_compose(_pose_inverse(new_pose[arm]), body.pose)
                attachments[arm] = (body.id, offset)
        elif not was_open and want_open:
            attachments[arm] = (None, None)

    for arm in ARMS:
        attached, offset = attachments[arm]
        grippers[arm] = GripperState(arm=arm, pose=new_pose[arm],
                                     open=cmd.arm(arm).open and attached is None,
                                     attached=attached, attach_offset=offset)

    # body motion rules
    moved: dict[str, RigidBody] = {}
    body_delta: dict[str, np.ndarray] = {}

    for arm in ARMS:
        g = grippers[arm]
        if g.attached is not None:
            body = w.body(g.attached)
            target = pose_compose(g.pose, g.attach_offset)
            pos = _clamp_to_table(body, target.position)
            moved[body.id] = replace(body, pose=Pose(pos, target.orientation))
            body_delta[body.id] = pos - body.pose.position

    mean_delta = (delta["right"] + delta["left"]) / 2.0
    for body in w.bodies:
        if body.id in moved or body.coupling not in ("two_arm_push", "two_arm_lift"):
            continue
        contacts = []
        for arm in ARMS:
            sd = signed_distance(old[arm].pose.position, body)
            if sd <= CONTACT_RADIUS:
                contacts.append(old[arm].pose.position - body.pose.position)
        if len(contacts) != 2:
            continue
        if body.coupling == "two_arm_lift":
            n0 = contacts[0] / (np.linalg.norm(contacts[0]) + 1e-12)
            n1 = contacts[1] / (np.linalg.norm(contacts[1]) + 1e-12)
            if float(np.dot(n0, n1)) > ANTIPODAL_MAX_COS:
                continue
            d3 = mean_delta
        else:  # heavy box: slides on the table, never lifts
            d3 = np.array([mean_delta[0], mean_delta[1], 0.0])
        pos = _clamp_to_table(body, body.pose.position + d3)
        moved[body.id] = replace(body, pose=Pose(pos, body.pose.orientation))
        body_delta[body.id] = pos - body.pose.position

    # resting bodies ride their supporter
    for body in w.bodies:
        if body.rests_on and body.rests_on in body_delta and body.id not in moved:
            d3 = body_delta[body.rests_on]
            pos = _clamp_to_table(body, body.pose.position + d3)
            moved[body.id] = replace(body, pose=Pose(pos, body.pose.orientation))

    out = w.with_bodies(moved)
    return replace(out, grippers=grippers, time_s=w.time_s + dt)


def _pose_inverse(p: Pose) -> Pose:
    qc = np.array([p.orientation[0], *(-p.orientation[1:])])
    return Pose(-quat_rotate(qc, p.position), qc)


def make_gripper(arm: str, position, open: bool = True) -> GripperState:
    return GripperState(arm=arm, pose=Pose(np.asarray(position, dtype=np.float64)),
                        open=open)


def grippers_reached(w: WorldState, cmd: BimanualAction,
                     pos_tol: float = 1e-6, rot_tol_deg: float = 1e-4) -> bool:
    """Both arms arrived at the commanded poses (open flags already applied)."""
    for arm in ARMS:
        g = w.grippers[arm]
        target = _sane_target(g.pose, cmd.arm(arm).pose)
        if float(np.linalg.norm(g.pose.position - target.position)) > pos_tol:
            return False
        if quat_angle_deg(g.pose.orientation, target.orientation) > rot_tol_deg:
            return False
    return True
