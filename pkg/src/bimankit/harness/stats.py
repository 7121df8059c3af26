"""Per-task dataset statistics (durations, keyframes, items, variations)."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

from ..errors import ValidationError
from ..simworld import TASKS
from .io import read_dataset_manifest

CSV_COLUMNS = ("task_id", "episodes", "avg_duration_s", "avg_keyframes",
               "item_count", "variation_count")


@dataclass(frozen=True)
class TaskStats:
    task_id: str
    episodes: int
    avg_duration_s: float
    avg_keyframes: float
    item_count: int
    variation_count: int


def task_stats(task_dir) -> TaskStats:
    """Aggregate one task directory's manifest."""
    manifest = read_dataset_manifest(task_dir)
    task_id = manifest["task_id"]
    entries = manifest["episodes"]
    if not entries:
        raise ValidationError(f"{task_dir}: dataset has no episodes")
    item_count = TASKS[task_id].item_count if task_id in TASKS else 0
    return TaskStats(
        task_id=task_id,
        episodes=len(entries),
        avg_duration_s=sum(e["duration_s"] for e in entries) / len(entries),
        avg_keyframes=sum(e["keyframe_count"] for e in entries) / len(entries),
        item_count=item_count,
        variation_count=len({e["variation"] for e in entries}),
    )


def dataset_stats(root) -> list[TaskStats]:
    """One row per task directory under root, sorted by task id."""
    root = Path(root)
    task_dirs = sorted(p.parent for p in root.glob("*/manifest.json"))
    if (root / "manifest.json").exists():
        task_dirs.insert(0, root)
    if not task_dirs:
        raise ValidationError(f"{root}: no dataset manifests found")
    rows = [task_stats(d) for d in task_dirs]
    return sorted(rows, key=lambda r: r.task_id)


def stats_to_json(rows: list[TaskStats]) -> list[dict]:
    return [asdict(r) for r in rows]


def write_csv(rows: list[TaskStats], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))
