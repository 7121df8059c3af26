"""Core data model: poses, per-arm actions, observations, demonstrations.

Conventions used everywhere downstream:
  * positions are meters in a fixed world frame, float64
  * orientations are unit quaternions in (w, x, y, z) order
  * compose(a, b) expresses b in a's frame (local post-multiply), so the
    homogeneous-matrix equivalent is M_a @ M_b
  * the two arms are named "right" and "left", in that order
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

ARMS = ("right", "left")

_UNIT_TOL = 1e-9


# ---------------------------------------------------------------------------
# quaternion helpers (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = float(np.linalg.norm(q))
    if n < 1e-12:
        raise ValidationError("quaternion has near-zero norm")
    return q / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Rotate one point (3,) or a batch (N, 3) by a unit quaternion."""
    p = np.asarray(points, dtype=np.float64)
    u = np.asarray(q[1:], dtype=np.float64)
    w = float(q[0])
    uv = np.cross(u, p)
    return p + 2.0 * (w * uv + np.cross(u, uv))


def quat_from_axis_angle(axis: Sequence[float], angle_deg: float) -> np.ndarray:
    ax = np.asarray(axis, dtype=np.float64)
    n = float(np.linalg.norm(ax))
    if n < 1e-12:
        raise ValidationError("rotation axis has near-zero norm")
    half = math.radians(angle_deg) / 2.0
    return np.concatenate(([math.cos(half)], math.sin(half) / n * ax))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_angle_deg(qa: np.ndarray, qb: np.ndarray) -> float:
    """Geodesic angle between two unit quaternions, degrees in [0, 180].

    Uses the absolute dot product, so q and -q compare as identical
    rotations.
    """
    dot = abs(float(np.dot(qa, qb)))
    return math.degrees(2.0 * math.acos(min(1.0, dot)))


# ---------------------------------------------------------------------------
# poses
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: translation plus unit quaternion (w, x, y, z)."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __eq__(self, other):
        # exact componentwise equality; use pose_delta for tolerant checks
        if not isinstance(other, Pose):
            return NotImplemented
        return (np.array_equal(self.position, other.position)
                and np.array_equal(self.orientation, other.orientation))

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        if pos.shape != (3,):
            raise ValidationError(f"position must have shape (3,), got {pos.shape}")
        px, py, pz = pos.tolist()
        if not (math.isfinite(px) and math.isfinite(py) and math.isfinite(pz)):
            raise ValidationError("position must be finite")
        q = np.asarray(self.orientation, dtype=np.float64)
        if q.shape != (4,):
            raise ValidationError(f"orientation must have shape (4,), got {q.shape}")
        qw, qx, qy, qz = q.tolist()
        n = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
        if not math.isfinite(n) or abs(n - 1.0) > _UNIT_TOL:
            q = quat_normalize(q)
        pos.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", q)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3))

    @staticmethod
    def _trusted(position: np.ndarray, orientation: np.ndarray) -> "Pose":
        """Wrap pre-validated float64 arrays without re-checking them.

        Only for internal call sites that construct positions and unit
        quaternions by arithmetic (e.g. decoding at cell centers), where
        validation is pure overhead.
        """
        position.setflags(write=False)
        orientation.setflags(write=False)
        p = object.__new__(Pose)
        object.__setattr__(p, "position", position)
        object.__setattr__(p, "orientation", orientation)
        return p

    @classmethod
    def from_xyz(cls, x: float, y: float, z: float, orientation=None) -> "Pose":
        q = np.array([1.0, 0.0, 0.0, 0.0]) if orientation is None else orientation
        return cls(np.array([x, y, z], dtype=np.float64), q)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix equivalent."""
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.orientation)
        m[:3, 3] = self.position
        return m

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        return quat_rotate(self.orientation, points) + self.position


def pose_compose(a: Pose, b: Pose) -> Pose:
    """Pose of b expressed in a's frame (local post-multiply)."""
    return Pose(a.position + quat_rotate(a.orientation, b.position),
                quat_mul(a.orientation, b.orientation))


def pose_inverse(p: Pose) -> Pose:
    qc = quat_conjugate(p.orientation)
    return Pose(-quat_rotate(qc, p.position), qc)


def pose_delta(a: Pose, b: Pose) -> tuple[float, float]:
    """(translation distance in meters, geodesic rotation angle in degrees)."""
    trans = float(np.linalg.norm(a.position - b.position))
    return trans, quat_angle_deg(a.orientation, b.orientation)


# ---------------------------------------------------------------------------
# actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArmAction:
    """Continuous action of one arm: target pose plus binary flags.

    `open` is the commanded gripper state; `collide` marks motions that are
    allowed to contact the scene on the way.
    """

    pose: Pose
    open: bool = True
    collide: bool = False


@dataclass(frozen=True)
class BimanualAction:
    right: ArmAction
    left: ArmAction

    def arm(self, name: str) -> ArmAction:
        if name == "right":
            return self.right
        if name == "left":
            return self.left
        raise ValidationError(f"unknown arm {name!r}")

    def swapped(self) -> "BimanualAction":
        return BimanualAction(right=self.left, left=self.right)


# ---------------------------------------------------------------------------
# observations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CameraImage:
    """One RGB-D frame. rgb is (H, W, 3) uint8, depth is (H, W) float32 meters.

    Depth 0.0 is the invalid-ray sentinel and never back-projects.
    """

    rgb: np.ndarray
    depth: np.ndarray

    def __post_init__(self):
        rgb = np.asarray(self.rgb)
        depth = np.asarray(self.depth)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValidationError(f"rgb must be (H, W, 3), got {rgb.shape}")
        if rgb.dtype != np.uint8:
            raise ValidationError(f"rgb must be uint8, got {rgb.dtype}")
        if depth.shape != rgb.shape[:2]:
            raise ValidationError(
                f"depth shape {depth.shape} does not match rgb {rgb.shape[:2]}")
        if depth.dtype != np.float32:
            depth = depth.astype(np.float32)
        if depth.size and float(depth.min()) < 0.0:
            raise ValidationError("depth must be non-negative")
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "depth", depth)


@dataclass(frozen=True)
class ArmProprio:
    gripper_open: bool
    ee_pose: Pose


@dataclass(frozen=True)
class Observation:
    """Multi-camera RGB-D snapshot plus proprioception for one timestep."""

    images: Mapping[str, CameraImage]
    proprio: Mapping[str, ArmProprio]
    timestep_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.timestep_fraction <= 1.0:
            raise ValidationError(
                f"timestep_fraction must be in [0, 1], got {self.timestep_fraction}")
        object.__setattr__(self, "images", dict(self.images))
        object.__setattr__(self, "proprio", dict(self.proprio))


# ---------------------------------------------------------------------------
# demonstrations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DemoStep:
    time_s: float
    obs: Observation
    action: BimanualAction


@dataclass(frozen=True)
class Demonstration:
    """A recorded episode: fixed-rate stream of observations and actions."""

    task_id: str
    variation_id: int
    seed: int
    goal: str
    steps: Sequence[DemoStep]

    def __post_init__(self):
        steps = tuple(self.steps)
        if len(steps) < 2:
            raise ValidationError("demonstration needs at least 2 steps")
        times = [s.time_s for s in steps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("step timestamps must be strictly increasing")
        object.__setattr__(self, "steps", steps)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def duration_s(self) -> float:
        return self.steps[-1].time_s - self.steps[0].time_s

    @property
    def actions(self) -> list[BimanualAction]:
        return [s.action for s in self.steps]
