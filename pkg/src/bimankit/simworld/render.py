"""Analytic ray-cast rendering of the kinematic world.

Rays go through pixel centers with unnormalized direction
((u - cx) / fx, (v - cy) / fy, 1) in the camera frame, so the ray parameter
IS the camera-frame z depth; back-projecting a rendered depth image
reproduces the hit points exactly. Shading is flat: each pixel takes the
color of the nearest body, and rays that miss everything get the 0.0
invalid-depth sentinel and a black pixel.

The two wrist cameras are named wrist_right / wrist_left and follow the
gripper poses rigidly; their CameraModel extrinsics are placeholders that
render() replaces per state.
"""

from __future__ import annotations

import math
from dataclasses import replace as dc_replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..camvox import CameraModel
from ..core import (ARMS, ArmProprio, CameraImage, Observation, Pose,
                    pose_compose, quat_to_matrix)
from ..errors import ValidationError
from .world import (GRIPPER_RADIUS, Box, Cylinder, RigidBody, Sphere,
                    WorldState)

_EPS = 1e-6

WRIST_CAMERAS = ("wrist_right", "wrist_left")

# camera 12 cm behind the fingers along the gripper z axis, looking down it
WRIST_CAM_OFFSET = Pose(np.array([0.0, 0.0, 0.12]),
                        np.array([0.0, 1.0, 0.0, 0.0]))  # Rx(180)


def quat_from_matrix(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) for a proper rotation matrix."""
    t = float(np.trace(r))
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        return np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s,
                         (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    i = int(np.argmax(np.diag(r)))
    j, k = (i + 1) % 3, (i + 2) % 3
    s = math.sqrt(max(1e-12, 1.0 + r[i, i] - r[j, j] - r[k, k])) * 2.0
    q = np.empty(4)
    q[0] = (r[k, j] - r[j, k]) / s
    q[1 + i] = 0.25 * s
    q[1 + j] = (r[j, i] + r[i, j]) / s
    q[1 + k] = (r[k, i] + r[i, k]) / s
    return q / np.linalg.norm(q)


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Camera-to-world pose with +z forward, +x image-right, +y image-down."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    n = float(np.linalg.norm(fwd))
    if n < 1e-9:
        raise ValidationError("camera eye and target coincide")
    fwd = fwd / n
    x = np.cross(fwd, np.asarray(up, dtype=np.float64))
    nx = float(np.linalg.norm(x))
    if nx < 1e-9:
        raise ValidationError("camera forward is parallel to up")
    x = x / nx
    y = np.cross(fwd, x)
    rot = np.stack([x, y, fwd], axis=1)
    return Pose(eye, quat_from_matrix(rot))


def default_rig(width: int = 256, height: int = 256) -> list[CameraModel]:
    """Front, two shoulder and two wrist cameras."""
    f = 0.75 * width
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0

    def cam(name, extrinsic):
        return CameraModel(name=name, width=width, height=height,
                           fx=f, fy=f, cx=cx, cy=cy, extrinsic=extrinsic)

    return [
        cam("front", look_at((0.95, 0.0, 0.95), (0.05, 0.0, 0.55))),
        cam("left_shoulder", look_at((-0.42, 0.50, 1.05), (0.08, 0.0, 0.50))),
        cam("right_shoulder", look_at((-0.42, -0.50, 1.05), (0.08, 0.0, 0.50))),
        cam("wrist_right", Pose.identity()),
        cam("wrist_left", Pose.identity()),
    ]


def wrist_extrinsics(cams: Iterable[CameraModel],
                     gripper_poses: Mapping[str, Pose]) -> list[CameraModel]:
    """Pin wrist camera extrinsics to the given end-effector poses.

    Static cameras pass through unchanged. Useful when replaying saved
    episodes, where gripper poses come from recorded proprioception.
    """
    out = []
    for cam in cams:
        if cam.name in WRIST_CAMERAS:
            arm = cam.name.split("_", 1)[1]
            pose = pose_compose(gripper_poses[arm], WRIST_CAM_OFFSET)
            cam = dc_replace(cam, extrinsic=pose)
        out.append(cam)
    return out


def resolve_extrinsics(cams: Iterable[CameraModel], w: WorldState) -> list[CameraModel]:
    """Pin wrist camera extrinsics to the current gripper poses."""
    return wrist_extrinsics(cams, {arm: w.grippers[arm].pose for arm in ARMS})


# ---------------------------------------------------------------------------
# ray / primitive intersections (t is in camera-depth units)
# ---------------------------------------------------------------------------

def _ray_sphere(o, d, body: RigidBody):
    m = o - body.pose.position
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,j->i", d, m)
    c = float(np.dot(m, m)) - body.shape.radius ** 2
    disc = b * b - 4.0 * a * c
    hit = disc >= 0.0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t0 = (-b - sq) / (2.0 * a)
    t1 = (-b + sq) / (2.0 * a)
    t = np.where(t0 > _EPS, t0, t1)
    return np.where(hit & (t > _EPS), t, np.inf)


def _to_body_frame(o, d, body: RigidBody):
    r = quat_to_matrix(body.pose.orientation)
    ob = (o - body.pose.position) @ r
    db = d @ r
    return ob, db


def _ray_box(o, d, body: RigidBody):
    ob, db = _to_body_frame(o, d, body)
    h = np.asarray(body.shape.half_extents)
    db = np.where(np.abs(db) < 1e-12, 1e-12, db)
    t_lo = (-h - ob) / db
    t_hi = (h - ob) / db
    t_near = np.max(np.minimum(t_lo, t_hi), axis=1)
    t_far = np.min(np.maximum(t_lo, t_hi), axis=1)
    t = np.where(t_near > _EPS, t_near, t_far)
    return np.where((t_near <= t_far) & (t > _EPS), t, np.inf)


def _ray_cylinder(o, d, body: RigidBody):
    ob, db = _to_body_frame(o, d, body)
    r, hh = body.shape.radius, body.shape.half_height
    a = db[:, 0] ** 2 + db[:, 1] ** 2
    b = 2.0 * (ob[0] * db[:, 0] + ob[1] * db[:, 1])
    c = ob[0] ** 2 + ob[1] ** 2 - r * r
    disc = b * b - 4.0 * a * c
    ok = (disc >= 0.0) & (a > 1e-16)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    best = np.full(len(db), np.inf)
    for sign in (-1.0, 1.0):
        t = np.where(ok, (-b + sign * sq) / (2.0 * np.where(a > 1e-16, a, 1.0)), np.inf)
        z = ob[2] + t * db[:, 2]
        t = np.where((t > _EPS) & (np.abs(z) <= hh), t, np.inf)
        best = np.minimum(best, t)
    dz = np.where(np.abs(db[:, 2]) < 1e-12, 1e-12, db[:, 2])
    for cap in (-hh, hh):
        t = (cap - ob[2]) / dz
        x = ob[0] + t * db[:, 0]
        y = ob[1] + t * db[:, 1]
        t = np.where((t > _EPS) & (x * x + y * y <= r * r), t, np.inf)
        best = np.minimum(best, t)
    return best


_INTERSECT = {Sphere: _ray_sphere, Box: _ray_box, Cylinder: _ray_cylinder}

_GRIPPER_COLORS = {"right": (250, 210, 40), "left": (40, 210, 250)}


def _gripper_bodies(w: WorldState) -> list[RigidBody]:
    # the arms must show up in camera views, like a real robot's would
    return [RigidBody(id=f"gripper_{arm}", shape=Sphere(GRIPPER_RADIUS),
                      pose=w.grippers[arm].pose, color=_GRIPPER_COLORS[arm])
            for arm in ARMS]


def render_camera(w: WorldState, cam: CameraModel) -> CameraImage:
    u = np.arange(cam.width, dtype=np.float64)
    v = np.arange(cam.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    dirs_cam = np.stack([(uu - cam.cx) / cam.fx,
                         (vv - cam.cy) / cam.fy,
                         np.ones_like(uu)], axis=-1).reshape(-1, 3)
    rot = quat_to_matrix(cam.extrinsic.orientation)
    dirs = dirs_cam @ rot.T
    origin = cam.extrinsic.position

    scene = list(w.bodies) + _gripper_bodies(w)
    best_t = np.full(len(dirs), np.inf)
    best_body = np.full(len(dirs), -1, dtype=np.int32)
    for i, body in enumerate(scene):
        t = _INTERSECT[type(body.shape)](origin, dirs, body)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_body = np.where(closer, i, best_body)

    hit = np.isfinite(best_t)
    depth = np.where(hit, best_t, 0.0).astype(np.float32)
    colors = np.array([b.color for b in scene] + [(0, 0, 0)], dtype=np.uint8)
    rgb = colors[best_body]
    return CameraImage(rgb=rgb.reshape(cam.height, cam.width, 3),
                       depth=depth.reshape(cam.height, cam.width))


def render(w: WorldState, cams: Sequence[CameraModel],
           fraction: float = 0.0) -> Observation:
    """Observation with one RGB-D frame per camera plus proprioception."""
    images = {}
    for cam in resolve_extrinsics(cams, w):
        images[cam.name] = render_camera(w, cam)
    return Observation(
        images=images,
        proprio={arm: ArmProprio(gripper_open=w.grippers[arm].open,
                                 ee_pose=w.grippers[arm].pose)
                 for arm in ARMS},
        timestep_fraction=fraction)


def make_observer(cams: Sequence[CameraModel]):
    """Adapter matching the expert's observe callable signature."""
    def observe(w: WorldState, fraction: float = 0.0) -> Observation:
        return render(w, cams, fraction)
    return observe
