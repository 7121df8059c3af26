"""Dataset generation, closed-loop evaluation, statistics and the CLI."""

from .dataset import episode_seed, generate_dataset, load_dataset
from .evaluate import (FAILURE_COLLISION, FAILURE_PROTOCOL,
                       FAILURE_TIMEOUT, LEG_TIMEOUT_S, MAX_LEGS,
                       EpisodeResult, EvalReport, evaluate, run_episode)
from .io import (FORMAT_VERSION, STEP_DTYPE, TARGETS_MAGIC, camera_from_json,
                 camera_to_json, grid_spec_from_json, grid_spec_to_json,
                 load_episode, read_dataset_manifest, read_episode_manifest,
                 read_steps, read_targets, write_dataset_manifest,
                 write_episode, write_steps, write_targets)
from .stats import TaskStats, dataset_stats, stats_to_json, task_stats, write_csv

__all__ = [
    "FAILURE_COLLISION", "FAILURE_PROTOCOL", "FAILURE_TIMEOUT",
    "FORMAT_VERSION", "LEG_TIMEOUT_S", "MAX_LEGS", "STEP_DTYPE",
    "TARGETS_MAGIC", "EpisodeResult", "EvalReport", "TaskStats",
    "camera_from_json", "camera_to_json", "dataset_stats", "episode_seed",
    "evaluate", "generate_dataset", "grid_spec_from_json", "grid_spec_to_json",
    "load_dataset", "load_episode", "read_dataset_manifest",
    "read_episode_manifest", "read_steps", "read_targets", "run_episode",
    "stats_to_json", "task_stats", "write_csv", "write_dataset_manifest",
    "write_episode", "write_steps", "write_targets",
]
