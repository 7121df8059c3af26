"""Discretization of bimanual actions and the matching training targets.

Translation discretizes to the voxel cell containing the arm position.
Rotation discretizes each fixed-axis X-Y-Z Euler angle (psi about x, theta
about y, phi about z, with R = Rz @ Ry @ Rx) independently into 72 bins of
5 degrees; angles wrap into [0, 360) and decode at bin centers. The open and
collide flags are 2-way classes with index 0 = False.

Extraction is canonical with theta in [-90, 90], so the encoder's image
covers only the theta bins whose centers fall inside that range (the Euler
double cover maps the other half onto it). decode . encode stays within
half a bin per axis, hence within sqrt(3)/2 voxel diagonal translation and
7.5 degrees geodesic rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camvox import GridSpec
from .core import ArmAction, BimanualAction, Pose
from .errors import EncodeError, ValidationError

ROT_BINS = 72
ROT_BIN_DEG = 360.0 / ROT_BINS
FLAG_CLASSES = 2  # index 0 = False, 1 = True

# theta bins whose centers re-extract canonically; the encoder never emits
# the other half (see module docstring)
STABLE_THETA_BINS = tuple(range(0, 18)) + tuple(range(54, 72))


# ---------------------------------------------------------------------------
# Euler (fixed-axis x-y-z) extraction and recomposition
# ---------------------------------------------------------------------------

def euler_xyz_from_quat(q: np.ndarray) -> tuple[float, float, float]:
    """Canonical (psi, theta, phi) in degrees with theta in [-90, 90].

    R = Rz(phi) @ Ry(theta) @ Rx(psi). At the theta = +-90 singularity only
    psi -+ phi is determined; psi is pinned to 0 there. Works on the needed
    rotation-matrix entries directly; this sits on the codec hot path.
    """
    w, x, y, z = np.asarray(q, dtype=np.float64).tolist()
    n = math.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / n, x / n, y / n, z / n
    sin_theta = -(2.0 * (x * z - w * y))            # -R[2,0]
    sin_theta = min(1.0, max(-1.0, sin_theta))
    theta = math.asin(sin_theta)
    if abs(sin_theta) < 1.0 - 1e-9:
        psi = math.atan2(2.0 * (y * z + w * x),     # R[2,1]
                         1.0 - 2.0 * (x * x + y * y))   # R[2,2]
        phi = math.atan2(2.0 * (x * y + w * z),     # R[1,0]
                         1.0 - 2.0 * (y * y + z * z))   # R[0,0]
    else:
        # Gimbal lock: only phi -/+ psi is observable, so pin psi to zero.
        # At either pole atan2(-R[0,1], R[1,1]) already recovers the
        # compound angle with the sign that recomposes exactly.
        psi = 0.0
        phi = math.atan2(-(2.0 * (x * y - w * z)),  # -R[0,1]
                         1.0 - 2.0 * (x * x + z * z))   # R[1,1]
    return math.degrees(psi), math.degrees(theta), math.degrees(phi)


def quat_from_euler_xyz(psi_deg: float, theta_deg: float, phi_deg: float) -> np.ndarray:
    """Quaternion for R = Rz(phi) @ Ry(theta) @ Rx(psi), angles in degrees.

    The product qz * qy * qx is expanded by hand (hot path as well).
    """
    hx = math.radians(psi_deg) / 2.0
    hy = math.radians(theta_deg) / 2.0
    hz = math.radians(phi_deg) / 2.0
    cx, sx = math.cos(hx), math.sin(hx)
    cy, sy = math.cos(hy), math.sin(hy)
    cz, sz = math.cos(hz), math.sin(hz)
    # qy * qx = (cy cx, cy sx, sy cx, -sy sx), then left-multiply by qz
    w2, x2, y2, z2 = cy * cx, cy * sx, sy * cx, -sy * sx
    return np.array([cz * w2 - sz * z2, cz * x2 - sz * y2,
                     cz * y2 + sz * x2, cz * z2 + sz * w2])


def _angle_to_bin(angle_deg: float) -> int:
    wrapped = angle_deg % 360.0
    b = int(wrapped / ROT_BIN_DEG)  # non-negative, so int() == floor
    return min(b, ROT_BINS - 1)  # guards wrapped == 360.0 - epsilon rounding


# half-angle cos/sin of every bin center, same arithmetic as
# quat_from_euler_xyz so decoded quaternions match it bit for bit
_BIN_HALF = tuple(
    (math.cos(math.radians((b + 0.5) * ROT_BIN_DEG) / 2.0),
     math.sin(math.radians((b + 0.5) * ROT_BIN_DEG) / 2.0))
    for b in range(ROT_BINS))


# ---------------------------------------------------------------------------
# discrete actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteArmAction:
    """Voxel index, three rotation bins, and the two binary flags."""

    trans: tuple[int, int, int]
    rot: tuple[int, int, int]
    open: bool
    collide: bool

    def __post_init__(self):
        try:
            i, j, k = self.trans
            a, b, c = self.rot
        except (TypeError, ValueError):
            raise ValidationError("trans and rot must each hold three values") from None
        trans = (int(i), int(j), int(k))
        rot = (int(a), int(b), int(c))
        if trans[0] < 0 or trans[1] < 0 or trans[2] < 0:
            raise ValidationError("trans must be three non-negative indices")
        if not (0 <= rot[0] < ROT_BINS and 0 <= rot[1] < ROT_BINS and 0 <= rot[2] < ROT_BINS):
            raise ValidationError(f"rotation bins must be in [0, {ROT_BINS})")
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "rot", rot)


@dataclass(frozen=True)
class DiscreteBimanualAction:
    right: DiscreteArmAction
    left: DiscreteArmAction

    def arm(self, name: str) -> DiscreteArmAction:
        if name == "right":
            return self.right
        if name == "left":
            return self.left
        raise ValidationError(f"unknown arm {name!r}")


def encode_arm(action: ArmAction, spec: GridSpec, arm: str = "?") -> DiscreteArmAction:
    # scalar equivalent of world_to_voxel, skipping array construction
    px, py, pz = action.pose.position.tolist()
    ox, oy, oz = spec._origin_xyz
    vs = spec.voxel_size
    i = math.floor((px - ox) / vs)
    j = math.floor((py - oy) / vs)
    k = math.floor((pz - oz) / vs)
    nx, ny, nz = spec.dims
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise EncodeError(
            f"{arm} arm position {action.pose.position.tolist()} "
            "is outside the workspace grid")
    psi, theta, phi = euler_xyz_from_quat(action.pose.orientation)
    rot = (_angle_to_bin(psi), _angle_to_bin(theta), _angle_to_bin(phi))
    # indices and bins are in range by construction; skip re-validation
    d = object.__new__(DiscreteArmAction)
    object.__setattr__(d, "trans", (i, j, k))
    object.__setattr__(d, "rot", rot)
    object.__setattr__(d, "open", action.open)
    object.__setattr__(d, "collide", action.collide)
    return d


def decode_arm(d: DiscreteArmAction, spec: GridSpec) -> ArmAction:
    i, j, k = d.trans
    nx, ny, nz = spec.dims
    if i >= nx or j >= ny or k >= nz:
        raise ValidationError(f"trans index {d.trans} outside grid dims {spec.dims}")
    ox, oy, oz = spec._origin_xyz
    vs = spec.voxel_size
    pos = np.array([ox + (i + 0.5) * vs, oy + (j + 0.5) * vs, oz + (k + 0.5) * vs])
    # table-driven quat_from_euler_xyz at the three bin centers
    cx, sx = _BIN_HALF[d.rot[0]]
    cy, sy = _BIN_HALF[d.rot[1]]
    cz, sz = _BIN_HALF[d.rot[2]]
    w2, x2, y2, z2 = cy * cx, cy * sx, sy * cx, -sy * sx
    q = np.array([cz * w2 - sz * z2, cz * x2 - sz * y2,
                  cz * y2 + sz * x2, cz * z2 + sz * w2])
    return ArmAction(pose=Pose._trusted(pos, q), open=d.open, collide=d.collide)


def encode(action: BimanualAction, spec: GridSpec) -> DiscreteBimanualAction:
    return DiscreteBimanualAction(
        right=encode_arm(action.right, spec, "right"),
        left=encode_arm(action.left, spec, "left"))


def decode(d: DiscreteBimanualAction, spec: GridSpec) -> BimanualAction:
    return BimanualAction(right=decode_arm(d.right, spec),
                          left=decode_arm(d.left, spec))


def flat_trans_index(trans: tuple[int, int, int], spec: GridSpec) -> int:
    """Flatten a voxel index x-fastest: i + nx * (j + ny * k)."""
    i, j, k = trans
    nx, ny, nz = spec.dims
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise ValidationError(f"voxel index {trans} outside dims {spec.dims}")
    return i + nx * (j + ny * k)


def unflatten_trans_index(flat: int, spec: GridSpec) -> tuple[int, int, int]:
    nx, ny, nz = spec.dims
    if not 0 <= flat < nx * ny * nz:
        raise ValidationError("flat index out of range")
    i = flat % nx
    j = (flat // nx) % ny
    k = flat // (nx * ny)
    return (i, j, k)


def sample_discrete_action(rng: np.random.Generator, spec: GridSpec,
                           arm_count: int = 2):
    """Random discrete action from the encoder's image (stable theta bins)."""
    def one():
        trans = tuple(int(rng.integers(0, n)) for n in spec.dims)
        rot = (int(rng.integers(0, ROT_BINS)),
               int(rng.choice(STABLE_THETA_BINS)),
               int(rng.integers(0, ROT_BINS)))
        return DiscreteArmAction(trans=trans, rot=rot,
                                 open=bool(rng.integers(0, 2)),
                                 collide=bool(rng.integers(0, 2)))
    if arm_count == 1:
        return one()
    return DiscreteBimanualAction(right=one(), left=one())


# ---------------------------------------------------------------------------
# training targets and logits
# ---------------------------------------------------------------------------

@dataclass
class ArmHeads:
    """Per-head arrays for one arm: flattened translation grid, 3 x 72
    rotation rows, and the two 2-way flags."""

    trans: np.ndarray
    rot: np.ndarray
    open: np.ndarray
    collide: np.ndarray

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ArmHeads":
        return cls(trans=np.zeros(spec.n_cells()),
                   rot=np.zeros((3, ROT_BINS)),
                   open=np.zeros(FLAG_CLASSES),
                   collide=np.zeros(FLAG_CLASSES))

    def heads(self):
        yield "trans", self.trans
        for axis in range(3):
            yield f"rot{'xyz'[axis]}", self.rot[axis]
        yield "open", self.open
        yield "collide", self.collide


@dataclass
class BimanualHeads:
    right: ArmHeads
    left: ArmHeads

    @classmethod
    def zeros(cls, spec: GridSpec) -> "BimanualHeads":
        return cls(right=ArmHeads.zeros(spec), left=ArmHeads.zeros(spec))

    def arm(self, name: str) -> ArmHeads:
        if name == "right":
            return self.right
        if name == "left":
            return self.left
        raise ValidationError(f"unknown arm {name!r}")


# a target is one-hot per head; logits are unnormalized scores of equal shape
TrainingTarget = BimanualHeads
HeadLogits = BimanualHeads


def _one_hot(n: int, index: int) -> np.ndarray:
    v = np.zeros(n)
    v[index] = 1.0
    return v


def make_target(d: DiscreteBimanualAction, spec: GridSpec) -> TrainingTarget:
    """One-hot training target for a discrete bimanual action."""
    def arm_target(da: DiscreteArmAction) -> ArmHeads:
        rot = np.zeros((3, ROT_BINS))
        for axis in range(3):
            rot[axis, da.rot[axis]] = 1.0
        return ArmHeads(
            trans=_one_hot(spec.n_cells(), flat_trans_index(da.trans, spec)),
            rot=rot,
            open=_one_hot(FLAG_CLASSES, int(da.open)),
            collide=_one_hot(FLAG_CLASSES, int(da.collide)))
    return TrainingTarget(right=arm_target(d.right), left=arm_target(d.left))


def _cross_entropy(logits: np.ndarray, one_hot: np.ndarray) -> float:
    if logits.shape != one_hot.shape:
        raise ValidationError(
            f"logits shape {logits.shape} does not match target {one_hot.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValidationError("logits must be finite")
    m = float(np.max(logits))
    log_z = m + math.log(float(np.sum(np.exp(logits - m))))
    return log_z - float(np.dot(logits, one_hot))


def bimanual_loss(logits: HeadLogits, target: TrainingTarget) -> float:
    """Sum of softmax cross-entropies over both arms and every head.

    Per arm that is one translation head, three rotation heads and the two
    flag heads; uniform (all-zero) logits therefore cost
    2 * (ln n_cells + 3 ln 72 + 2 ln 2).
    """
    total = 0.0
    for arm in ("right", "left"):
        la, ta = logits.arm(arm), target.arm(arm)
        # accumulate per arm so swapping arms reorders nothing inside a sum
        # and the symmetry L(swap(l), swap(t)) == L(l, t) holds bit-exactly
        arm_total = 0.0
        for (name, lh), (tname, th) in zip(la.heads(), ta.heads()):
            if name != tname:
                raise ValidationError("mismatched head ordering")
            if not math.isclose(float(th.sum()), 1.0, abs_tol=1e-9):
                raise ValidationError(f"target head {name} is not one-hot")
            arm_total += _cross_entropy(lh, th)
        total += arm_total
    return total
