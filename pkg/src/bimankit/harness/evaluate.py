"""Closed-loop policy evaluation.

The loop is keyframe-granular: at each decision point the world is
rendered, fused into a voxel grid and handed to the policy; the discrete
answer is decoded back to continuous targets and the kinematic controller
drives toward them for at most 10 s of sim time. An episode succeeds when
the task predicate holds at the end of a leg, and fails on collision, on a
malformed policy response, or when the 25-leg budget runs out.

Episodes are independent: seeds are derived for all of them up front, and
each gets a fresh policy from the caller's factory, so a run is
reproducible regardless of how many worker threads execute it.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ..agents import AgentInput
from ..camvox import GridSpec, fuse
from ..codec import decode_arm
from ..core import ARMS, ArmProprio, BimanualAction
from ..errors import ValidationError
from ..simworld import (CONTROL_DT, get_task, grippers_reached, render, reset,
                        resolve_extrinsics, step, workspace_grid)

FAILURE_COLLISION = "collision"
FAILURE_PROTOCOL = "protocol"
FAILURE_TIMEOUT = "timeout"

MAX_LEGS = 25
LEG_TIMEOUT_S = 10.0


@dataclass(frozen=True)
class EpisodeResult:
    index: int
    seed: int
    variation: int
    success: bool
    failure: Optional[str]   # one of the FAILURE_* tags, None on success
    legs: int
    sim_time_s: float


@dataclass(frozen=True)
class EvalReport:
    task_id: str
    policy_id: str
    topology: str
    episodes: int
    successes: int
    success_rate: float
    failures: dict[str, int]
    episode_seeds: list[int]
    results: list[EpisodeResult] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))


def run_episode(task, variation: int, seed: int, policy, cams=(),
                spec: Optional[GridSpec] = None, max_legs: int = MAX_LEGS,
                leg_timeout_s: float = LEG_TIMEOUT_S,
                index: int = 0) -> EpisodeResult:
    """One closed-loop episode with an already-constructed policy."""
    if isinstance(task, str):
        task = get_task(task)
    spec = spec or workspace_grid()
    w, goal = reset(task, variation, seed)
    hook = getattr(policy, "on_episode_start", None)
    if hook is not None:
        hook(task, w, goal)

    leg_ticks = max(1, int(round(leg_timeout_s / CONTROL_DT)))

    def result(success, failure, legs):
        return EpisodeResult(index=index, seed=seed, variation=variation,
                             success=success, failure=failure, legs=legs,
                             sim_time_s=w.time_s)

    if task.success(w):
        return result(True, None, 0)
    for leg in range(1, max_legs + 1):
        obs = render(w, cams, fraction=min(1.0, leg / max_legs))
        grid = fuse(obs, resolve_extrinsics(cams, w), spec)
        inp = AgentInput(
            grid=grid,
            proprio={arm: ArmProprio(gripper_open=w.grippers[arm].open,
                                     ee_pose=w.grippers[arm].pose)
                     for arm in ARMS},
            goal=goal)
        try:
            discrete = policy(inp)
            cmd = BimanualAction(right=decode_arm(discrete.right, spec),
                                 left=decode_arm(discrete.left, spec))
        except ValidationError:
            return result(False, FAILURE_PROTOCOL, leg)
        for _ in range(leg_ticks):
            w = step(w, cmd, CONTROL_DT)
            if w.collided:
                return result(False, FAILURE_COLLISION, leg)
            if grippers_reached(w, cmd):
                break
        if task.success(w):
            return result(True, None, leg)
    return result(False, FAILURE_TIMEOUT, max_legs)


def evaluate(task, make_policy: Callable[[], object], *, episodes: int,
             seed: int, policy_id: str = "policy", topology: str = "joint",
             cams: Sequence = (), spec: Optional[GridSpec] = None,
             workers: int = 1, max_legs: int = MAX_LEGS,
             leg_timeout_s: float = LEG_TIMEOUT_S) -> EvalReport:
    """Evaluate a policy over seeded episodes; deterministic given seed.

    make_policy is called once per episode so stateful policies (like the
    privileged oracle) stay isolated; a stateless policy may simply return
    one shared instance. Episode i runs variation i mod n_variations with
    the i-th derived seed, in index order regardless of worker count.
    """
    if isinstance(task, str):
        task = get_task(task)
    if episodes < 0 or workers < 1:
        raise ValidationError("episodes must be >= 0 and workers >= 1")
    spec = spec or workspace_grid()
    children = np.random.SeedSequence(seed).spawn(episodes)
    seeds = [int(c.generate_state(1, np.uint32)[0]) for c in children]
    variations = [i % task.n_variations() for i in range(episodes)]

    def job(i: int) -> EpisodeResult:
        return run_episode(task, variations[i], seeds[i], make_policy(),
                           cams=cams, spec=spec, max_legs=max_legs,
                           leg_timeout_s=leg_timeout_s, index=i)

    if workers == 1 or episodes <= 1:
        results = [job(i) for i in range(episodes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(episodes)))

    successes = sum(r.success for r in results)
    failures: dict[str, int] = {}
    for r in results:
        if r.failure is not None:
            failures[r.failure] = failures.get(r.failure, 0) + 1
    return EvalReport(
        task_id=task.id, policy_id=policy_id, topology=topology,
        episodes=episodes, successes=successes,
        success_rate=successes / episodes if episodes else 0.0,
        failures=dict(sorted(failures.items())),
        episode_seeds=seeds, results=results)
