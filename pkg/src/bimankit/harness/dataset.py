"""Seeded generation of expert demonstration datasets."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..keyframes import KeyframeParams, extract_keyframes
from ..simworld import (expert, get_task, make_observer, proprio_observation,
                        reset, workspace_grid)
from .io import (FORMAT_VERSION, grid_spec_to_json, camera_to_json,
                 load_episode, read_dataset_manifest, write_dataset_manifest,
                 write_episode)


def episode_seed(base_seed: int, slot: int, attempt: int) -> int:
    """Deterministic per-attempt seed; regeneration reproduces it exactly."""
    ss = np.random.SeedSequence([base_seed, slot, attempt])
    return int(ss.generate_state(1, np.uint32)[0])


def generate_dataset(task, n: int, seed: int, out_dir, cams=(),
                     params: KeyframeParams = KeyframeParams()) -> dict:
    """Write n successful expert episodes under out_dir/<task>/.

    Episode slot i runs variation i mod n_variations. A slot whose expert
    rollout collides, stalls, or misses the success predicate is retried
    with a freshly derived seed; more than 10*n total failures abort the
    run. Returns the dataset manifest (also written to manifest.json).
    """
    if isinstance(task, str):
        task = get_task(task)
    if n < 0:
        raise ValidationError("episode count must be non-negative")
    task_dir = Path(out_dir) / task.id
    task_dir.mkdir(parents=True, exist_ok=True)
    observe = make_observer(cams) if cams else proprio_observation

    entries, failures, failed_log = [], 0, []
    for slot in range(n):
        variation = slot % task.n_variations()
        for attempt in range(10 * n + 1):
            if failures > 10 * n:
                raise ValidationError(
                    f"{task.id}: generation aborted after {failures} expert "
                    f"failures ({len(entries)}/{n} episodes written)")
            ep_seed = episode_seed(seed, slot, attempt)
            w, goal = reset(task, variation, ep_seed)
            try:
                demo, final = expert(task, w, goal, observe)
            except RuntimeError as exc:
                failures += 1
                failed_log.append({"slot": slot, "seed": ep_seed, "reason": str(exc)})
                continue
            if final.collided or not task.success(final):
                failures += 1
                failed_log.append({"slot": slot, "seed": ep_seed,
                                   "reason": "collision" if final.collided
                                   else "predicate"})
                continue
            break
        else:
            raise ValidationError(f"{task.id}: no successful episode for slot {slot}")

        ep_name = f"episode_{slot}"
        keyframes = extract_keyframes(demo, params)
        write_episode(task_dir / ep_name, demo, success=True,
                      keyframe_count=len(keyframes.indices), cams=cams)
        entries.append({
            "dir": ep_name,
            "variation": variation,
            "seed": ep_seed,
            "goal": goal,
            "success": True,
            "duration_s": demo.duration_s,
            "keyframe_count": len(keyframes.indices),
        })

    manifest = {
        "format_version": FORMAT_VERSION,
        "task_id": task.id,
        "episode_count": len(entries),
        "seed": seed,
        "expert_failures": failures,
        "failed_attempts": failed_log,
        "cameras": [camera_to_json(c) for c in cams],
        "grid_spec": grid_spec_to_json(workspace_grid()),
        "episodes": entries,
    }
    write_dataset_manifest(task_dir, manifest)
    return manifest


def load_dataset(task_dir, with_images: bool = False):
    """Read back a generated task dataset.

    Returns (manifest, demonstrations) in manifest order.
    """
    task_dir = Path(task_dir)
    manifest = read_dataset_manifest(task_dir)
    demos = [load_episode(task_dir / entry["dir"], with_images=with_images)
             for entry in manifest["episodes"]]
    return manifest, demos
