"""Episode and target serialization.

Layout of a generated dataset:

    out/<task>/manifest.json            dataset manifest (written last)
    out/<task>/episode_<idx>/
        manifest.json                   per-episode record
        steps.bin                       trajectory, see STEP_DTYPE below
        cam_<name>/rgb_<step>.png       8-bit RGB
        cam_<name>/depth_<step>.bin     float32 meters, row-major

steps.bin is little-endian: a u32 step count, then one packed record per
step: time f64, then for the right arm and then the left arm a 7 x f64
pose (x y z qw qx qy qz), an open u8 and a collide u8. The layout itself
carries no version field; the format version lives in manifest.json and
readers reject manifests they do not understand.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from ..camvox import CameraModel, GridSpec
from ..codec import DiscreteArmAction, DiscreteBimanualAction
from ..core import (ARMS, ArmAction, ArmProprio, BimanualAction, CameraImage,
                    Demonstration, DemoStep, Observation, Pose)
from ..errors import FormatError, ValidationError

FORMAT_VERSION = "1"

STEP_DTYPE = np.dtype([
    ("time", "<f8"),
    ("right_pose", "<f8", (7,)), ("right_open", "u1"), ("right_collide", "u1"),
    ("left_pose", "<f8", (7,)), ("left_open", "u1"), ("left_collide", "u1"),
])
assert STEP_DTYPE.itemsize == 8 + 2 * (56 + 2)

_COUNT = struct.Struct("<I")


def _pose_to_floats(pose: Pose) -> np.ndarray:
    return np.concatenate([pose.position, pose.orientation])


def _pose_from_floats(vals) -> Pose:
    vals = np.asarray(vals, dtype=np.float64)
    return Pose(vals[:3], vals[3:])


def write_steps(path, demo: Demonstration) -> None:
    rec = np.zeros(len(demo.steps), dtype=STEP_DTYPE)
    for i, s in enumerate(demo.steps):
        rec[i]["time"] = s.time_s
        for arm in ARMS:
            a = s.action.arm(arm)
            rec[i][f"{arm}_pose"] = _pose_to_floats(a.pose)
            rec[i][f"{arm}_open"] = a.open
            rec[i][f"{arm}_collide"] = a.collide
    with open(path, "wb") as f:
        f.write(_COUNT.pack(len(rec)))
        f.write(rec.tobytes())


def read_steps(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _COUNT.size:
        raise FormatError(f"{path}: truncated step file")
    (n,) = _COUNT.unpack_from(raw)
    expected = _COUNT.size + n * STEP_DTYPE.itemsize
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype=STEP_DTYPE, offset=_COUNT.size)


def camera_to_json(cam: CameraModel) -> dict:
    return {"name": cam.name, "width": cam.width, "height": cam.height,
            "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
            "extrinsic": _pose_to_floats(cam.extrinsic).tolist()}


def camera_from_json(obj: dict) -> CameraModel:
    return CameraModel(name=obj["name"], width=obj["width"], height=obj["height"],
                       fx=obj["fx"], fy=obj["fy"], cx=obj["cx"], cy=obj["cy"],
                       extrinsic=_pose_from_floats(obj["extrinsic"]))


def grid_spec_to_json(spec: GridSpec) -> dict:
    return {"origin": spec.origin.tolist(), "voxel_size": spec.voxel_size,
            "dims": list(spec.dims)}


def grid_spec_from_json(obj: dict) -> GridSpec:
    return GridSpec(np.asarray(obj["origin"], dtype=np.float64),
                    obj["voxel_size"], tuple(obj["dims"]))


def write_episode(ep_dir, demo: Demonstration, success: bool,
                  keyframe_count: int, cams=()) -> dict:
    """Write one episode directory; returns its manifest dict."""
    ep_dir = Path(ep_dir)
    ep_dir.mkdir(parents=True, exist_ok=True)
    write_steps(ep_dir / "steps.bin", demo)
    for cam in cams:
        cam_dir = ep_dir / f"cam_{cam.name}"
        cam_dir.mkdir(exist_ok=True)
        for i, s in enumerate(demo.steps):
            image = s.obs.images[cam.name]
            Image.fromarray(image.rgb).save(cam_dir / f"rgb_{i}.png")
            (cam_dir / f"depth_{i}.bin").write_bytes(
                np.ascontiguousarray(image.depth, dtype="<f4").tobytes())
    manifest = {
        "format_version": FORMAT_VERSION,
        "task_id": demo.task_id,
        "variation": demo.variation_id,
        "seed": demo.seed,
        "goal": demo.goal,
        "success": bool(success),
        "duration_s": demo.duration_s,
        "keyframe_count": int(keyframe_count),
        "steps": len(demo.steps),
        "cameras": [camera_to_json(c) for c in cams],
    }
    (ep_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def _check_version(manifest: dict, where) -> None:
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{where}: unsupported format version {version!r}, "
                          f"this reader understands {FORMAT_VERSION!r}")


def read_episode_manifest(ep_dir) -> dict:
    path = Path(ep_dir) / "manifest.json"
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: corrupt manifest: {exc}") from exc
    _check_version(manifest, path)
    return manifest


def load_episode(ep_dir, with_images: bool = False) -> Demonstration:
    """Rebuild a Demonstration from an episode directory.

    Proprioception is reconstructed from the recorded per-step action
    stream (the demos record achieved state, so the two coincide).
    """
    ep_dir = Path(ep_dir)
    manifest = read_episode_manifest(ep_dir)
    rec = read_steps(ep_dir / "steps.bin")
    cams = [camera_from_json(c) for c in manifest["cameras"]] if with_images else []
    n = len(rec)
    steps = []
    for i in range(n):
        actions = {}
        for arm in ARMS:
            actions[arm] = ArmAction(pose=_pose_from_floats(rec[i][f"{arm}_pose"]),
                                     open=bool(rec[i][f"{arm}_open"]),
                                     collide=bool(rec[i][f"{arm}_collide"]))
        images = {}
        for cam in cams:
            rgb = np.asarray(Image.open(ep_dir / f"cam_{cam.name}" / f"rgb_{i}.png"))
            depth = np.frombuffer(
                (ep_dir / f"cam_{cam.name}" / f"depth_{i}.bin").read_bytes(),
                dtype="<f4").reshape(cam.height, cam.width)
            images[cam.name] = CameraImage(rgb=rgb, depth=depth)
        obs = Observation(
            images=images,
            proprio={arm: ArmProprio(gripper_open=actions[arm].open,
                                     ee_pose=actions[arm].pose) for arm in ARMS},
            timestep_fraction=i / (n - 1) if n > 1 else 0.0)
        steps.append(DemoStep(time_s=float(rec[i]["time"]), obs=obs,
                              action=BimanualAction(right=actions["right"],
                                                    left=actions["left"])))
    return Demonstration(task_id=manifest["task_id"],
                         variation_id=manifest["variation"],
                         seed=manifest["seed"], goal=manifest["goal"],
                         steps=steps)


# ---------------------------------------------------------------------------
# dataset manifest
# ---------------------------------------------------------------------------

_EPISODE_KEYS = ("dir", "variation", "seed", "goal", "success",
                 "duration_s", "keyframe_count")


def write_dataset_manifest(task_dir, manifest: dict) -> None:
    (Path(task_dir) / "manifest.json").write_text(json.dumps(manifest, indent=2))


def read_dataset_manifest(task_dir) -> dict:
    task_dir = Path(task_dir)
    path = task_dir / "manifest.json"
    if not path.exists():
        raise ValidationError(f"{task_dir}: no dataset manifest")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: corrupt manifest: {exc}") from exc
    _check_version(manifest, path)
    for entry in manifest.get("episodes", []):
        missing = [k for k in _EPISODE_KEYS if k not in entry]
        if missing:
            raise ValidationError(
                f"{path}: episode {entry.get('dir', '?')} is missing {missing}")
        if not (task_dir / entry["dir"]).is_dir():
            raise ValidationError(
                f"{path}: episode directory {entry['dir']} does not exist")
    return manifest


# ---------------------------------------------------------------------------
# training targets
# ---------------------------------------------------------------------------

# magic's trailing digit is the format version
TARGETS_MAGIC = b"BTG1"

TARGET_DTYPE = np.dtype([
    ("obs_step", "<u4"), ("keyframe_step", "<u4"),
    ("right_trans", "<u2", (3,)), ("right_rot", "<u2", (3,)),
    ("right_open", "u1"), ("right_collide", "u1"),
    ("left_trans", "<u2", (3,)), ("left_rot", "<u2", (3,)),
    ("left_open", "u1"), ("left_collide", "u1"),
])


def write_targets(path, records) -> None:
    """records: sequence of (obs_step, keyframe_step, DiscreteBimanualAction)."""
    rec = np.zeros(len(records), dtype=TARGET_DTYPE)
    for i, (obs_step, kf_step, action) in enumerate(records):
        rec[i]["obs_step"] = obs_step
        rec[i]["keyframe_step"] = kf_step
        for arm in ARMS:
            a = action.arm(arm)
            rec[i][f"{arm}_trans"] = a.trans
            rec[i][f"{arm}_rot"] = a.rot
            rec[i][f"{arm}_open"] = a.open
            rec[i][f"{arm}_collide"] = a.collide
    with open(path, "wb") as f:
        f.write(TARGETS_MAGIC)
        f.write(_COUNT.pack(len(rec)))
        f.write(rec.tobytes())


def read_targets(path):
    raw = Path(path).read_bytes()
    if raw[:4] != TARGETS_MAGIC:
        raise FormatError(f"{path}: unknown magic/version {raw[:4]!r}")
    (n,) = _COUNT.unpack_from(raw, 4)
    expected = 4 + _COUNT.size + n * TARGET_DTYPE.itemsize
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    rec = np.frombuffer(raw, dtype=TARGET_DTYPE, offset=4 + _COUNT.size)
    out = []
    for row in rec:
        arms = {}
        for arm in ARMS:
            arms[arm] = DiscreteArmAction(
                trans=tuple(int(x) for x in row[f"{arm}_trans"]),
                rot=tuple(int(x) for x in row[f"{arm}_rot"]),
                open=bool(row[f"{arm}_open"]), collide=bool(row[f"{arm}_collide"]))
        out.append((int(row["obs_step"]), int(row["keyframe_step"]),
                    DiscreteBimanualAction(right=arms["right"], left=arms["left"])))
    return out
