"""Policy composition: how two arms share (or don't share) information.

Three topologies cover the design space:

  Independent     two single-arm parts, each seeing only its own arm's
                  proprioception and no leader action
  LeaderFollower  the leader part answers first; the follower additionally
                  receives the leader's *discrete* action
  Joint           one part controls both arms and sees everything

Parts are pure callables. Single-arm parts map AgentInput to a
DiscreteArmAction; joint parts map AgentInput to a DiscreteBimanualAction.
A part may define on_episode_start(task, world, goal) to receive privileged
episode context; the harness forwards it through compose().

Two reference parts live here: a privileged oracle that replays the
scripted expert's waypoints through the discretizer, and a nearest-neighbor
policy over a replay dataset keyed by voxel occupancy.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .camvox import GridSpec, VoxelGrid, dump_bvox, fuse
from .codec import (DiscreteArmAction, DiscreteBimanualAction, decode_arm,
                    encode_arm)
from .core import ARMS, ArmAction, ArmProprio, Demonstration, Pose, pose_delta
from .errors import ConfigurationError, ValidationError
from .keyframes import KeyframeParams, extract_keyframes
from .simworld import (TaskSpec, WorldState, expert_segments, workspace_grid,
                       wrist_extrinsics)


@dataclass(frozen=True)
class AgentInput:
    """What a policy part sees at one decision point."""

    grid: VoxelGrid
    proprio: Mapping[str, ArmProprio]
    goal: str
    leader_action: Optional[DiscreteArmAction] = None

    def __post_init__(self):
        object.__setattr__(self, "proprio", dict(self.proprio))

    def for_arm(self, arm: str) -> "AgentInput":
        """Restrict proprioception to a single arm (hides the other arm)."""
        if arm not in self.proprio:
            raise ValidationError(f"no proprioception for arm {arm!r}")
        return replace(self, proprio={arm: self.proprio[arm]})


@dataclass(frozen=True)
class Independent:
    pass


@dataclass(frozen=True)
class LeaderFollower:
    leader: str = "right"

    def __post_init__(self):
        if self.leader not in ARMS:
            raise ValidationError(f"leader must be one of {ARMS}")

    @property
    def follower(self) -> str:
        return "left" if self.leader == "right" else "right"


@dataclass(frozen=True)
class Joint:
    pass


Topology = Independent | LeaderFollower | Joint


class ComposedPolicy:
    """Bimanual policy produced by compose(); callable on AgentInput."""

    def __init__(self, fn: Callable[[AgentInput], DiscreteBimanualAction],
                 parts: Sequence):
        self._fn = fn
        self._parts = tuple(parts)

    def __call__(self, inp: AgentInput) -> DiscreteBimanualAction:
        return self._fn(inp)

    def on_episode_start(self, task: TaskSpec, w: WorldState, goal: str) -> None:
        for part in self._parts:
            hook = getattr(part, "on_episode_start", None)
            if hook is not None:
                hook(task, w, goal)


def compose(parts, topology: Topology) -> ComposedPolicy:
    """Wire policy parts into a bimanual policy under a topology.

    Independent and LeaderFollower take a {"right": part, "left": part}
    mapping of single-arm parts; Joint takes one bimanual part.
    """
    if isinstance(topology, Joint):
        if isinstance(parts, Mapping) or not callable(parts):
            raise ConfigurationError("Joint topology takes a single bimanual part")
        part = parts

        def run_joint(inp: AgentInput) -> DiscreteBimanualAction:
            out = part(inp)
            if not isinstance(out, DiscreteBimanualAction):
                raise ValidationError("joint part must return a DiscreteBimanualAction")
            return out

        return ComposedPolicy(run_joint, [part])

    if not isinstance(parts, Mapping) or set(parts) != set(ARMS):
        raise ConfigurationError(
            f"{type(topology).__name__} topology takes parts for {ARMS}")
    by_arm = dict(parts)

    def run_arm(arm: str, inp: AgentInput) -> DiscreteArmAction:
        out = by_arm[arm](inp)
        if not isinstance(out, DiscreteArmAction):
            raise ValidationError("single-arm part must return a DiscreteArmAction")
        return out

    if isinstance(topology, Independent):
        def run_indep(inp: AgentInput) -> DiscreteBimanualAction:
            outs = {arm: run_arm(arm, replace(inp.for_arm(arm), leader_action=None))
                    for arm in ARMS}
            return DiscreteBimanualAction(right=outs["right"], left=outs["left"])

        return ComposedPolicy(run_indep, [by_arm[a] for a in ARMS])

    if isinstance(topology, LeaderFollower):
        lead, follow = topology.leader, topology.follower

        def run_lf(inp: AgentInput) -> DiscreteBimanualAction:
            lead_out = run_arm(lead, replace(inp.for_arm(lead), leader_action=None))
            follow_out = run_arm(
                follow, replace(inp.for_arm(follow), leader_action=lead_out))
            outs = {lead: lead_out, follow: follow_out}
            return DiscreteBimanualAction(right=outs["right"], left=outs["left"])

        return ComposedPolicy(run_lf, [by_arm[a] for a in ARMS])

    raise ConfigurationError(f"unknown topology {topology!r}")


# ---------------------------------------------------------------------------
# privileged oracle
# ---------------------------------------------------------------------------

class _OracleCore:
    """Shared script state: the expert's segments as discrete actions."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.discrete: list[dict[str, DiscreteArmAction]] = []
        self.decoded: list[dict[str, Pose]] = []

    def on_episode_start(self, task: TaskSpec, w: WorldState, goal: str) -> None:
        segments = expert_segments(task, w)
        current = {arm: ArmAction(pose=w.grippers[arm].pose,
                                  open=w.grippers[arm].open) for arm in ARMS}
        self.discrete, self.decoded = [], []
        for seg in segments:
            targets = {}
            for arm, tgt in (("right", seg.right), ("left", seg.left)):
                if tgt is not None:
                    current = {**current, arm: ArmAction(
                        pose=tgt.pose, open=tgt.open, collide=tgt.collide)}
                targets[arm] = current[arm]
            d = {arm: encode_arm(targets[arm], self.spec, arm) for arm in ARMS}
            self.discrete.append(d)
            self.decoded.append({arm: decode_arm(d[arm], self.spec).pose
                                 for arm in ARMS})
            current = {arm: replace(targets[arm],
                                    pose=self.decoded[-1][arm]) for arm in ARMS}

    def _matches(self, idx: int, proprio: Mapping[str, ArmProprio]) -> bool:
        for arm, state in proprio.items():
            trans, rot = pose_delta(state.ee_pose, self.decoded[idx][arm])
            if trans > 1e-6 or rot > 1e-4:
                return False
            if state.gripper_open != self.discrete[idx][arm].open:
                return False
        return True

    def next_index(self, proprio: Mapping[str, ArmProprio]) -> int:
        if not self.discrete:
            raise ValidationError("oracle used before on_episode_start")
        done = -1
        for i in range(len(self.discrete)):
            if self._matches(i, proprio):
                done = i
        return min(done + 1, len(self.discrete) - 1)


class OraclePolicy:
    """Joint part that replays the scripted expert as discrete actions.

    Privileged: it reads the spawned WorldState at episode start to build
    the waypoint list, then advances by matching the arms' progress. It
    ignores grid content and leader actions entirely.
    """

    def __init__(self, spec: Optional[GridSpec] = None):
        self._core = _OracleCore(spec or workspace_grid())

    def on_episode_start(self, task: TaskSpec, w: WorldState, goal: str) -> None:
        self._core.on_episode_start(task, w, goal)

    def __call__(self, inp: AgentInput) -> DiscreteBimanualAction:
        idx = self._core.next_index(inp.proprio)
        d = self._core.discrete[idx]
        return DiscreteBimanualAction(right=d["right"], left=d["left"])


class OracleArm:
    """Single-arm view of the oracle for Independent / LeaderFollower runs.

    Progress is matched against this arm's targets only, so scripts where
    an arm holds still across several segments (e.g. the handover) are
    ambiguous: the arm skips its hold and moves early. Use the joint
    OraclePolicy for such tasks.
    """

    def __init__(self, core: _OracleCore, arm: str):
        if arm not in ARMS:
            raise ValidationError(f"unknown arm {arm!r}")
        self._core = core
        self._arm = arm

    def on_episode_start(self, task: TaskSpec, w: WorldState, goal: str) -> None:
        # both arm parts share one core; the first call builds the script
        self._core.on_episode_start(task, w, goal)

    def __call__(self, inp: AgentInput) -> DiscreteArmAction:
        idx = self._core.next_index({self._arm: inp.proprio[self._arm]})
        return self._core.discrete[idx][self._arm]


def oracle_policy(spec: Optional[GridSpec] = None) -> OraclePolicy:
    return OraclePolicy(spec)


def oracle_arm_parts(spec: Optional[GridSpec] = None) -> dict[str, OracleArm]:
    core = _OracleCore(spec or workspace_grid())
    return {arm: OracleArm(core, arm) for arm in ARMS}


# ---------------------------------------------------------------------------
# nearest-neighbor replay policy
# ---------------------------------------------------------------------------

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint32)


@dataclass(frozen=True)
class ReplaySample:
    packed_occupancy: np.ndarray     # packbits of the x-fastest occupancy
    goal: str
    action: DiscreteBimanualAction
    episode_index: int
    keyframe_index: int


def _pack_grid(grid: VoxelGrid) -> np.ndarray:
    flat = np.ascontiguousarray(grid.occupancy.transpose(2, 1, 0)).reshape(-1)
    return np.packbits(flat.astype(np.uint8))


@dataclass
class ReplayDataset:
    """Keyframe decision points harvested from demonstrations."""

    spec: GridSpec
    samples: list[ReplaySample] = field(default_factory=list)

    @classmethod
    def build(cls, episodes: Sequence[Demonstration], cams,
              spec: Optional[GridSpec] = None,
              params: KeyframeParams = KeyframeParams()) -> "ReplayDataset":
        """Fuse each episode's decision-point observations into samples.

        Decision points are step 0 and every keyframe but the last; each
        targets the action at the next keyframe.
        """
        spec = spec or workspace_grid()
        ds = cls(spec=spec)
        for ep_idx, demo in enumerate(episodes):
            ks = extract_keyframes(demo, params)
            obs_steps = [0] + [k for k in ks.indices[:-1]]
            for j, (obs_step, k) in enumerate(zip(obs_steps, ks.indices)):
                step = demo.steps[obs_step]
                resolved = wrist_extrinsics(
                    cams, {a: p.ee_pose for a, p in step.obs.proprio.items()})
                grid = fuse(step.obs, resolved, spec)
                action = demo.steps[k].action
                d = DiscreteBimanualAction(
                    right=encode_arm(action.right, spec, "right"),
                    left=encode_arm(action.left, spec, "left"))
                ds.samples.append(ReplaySample(
                    packed_occupancy=_pack_grid(grid), goal=demo.goal,
                    action=d, episode_index=ep_idx, keyframe_index=j))
        return ds


class NearestNeighborPolicy:
    """Joint part: emit the stored action of the nearest training keyframe.

    Distance is the Hamming distance between voxel occupancies, restricted
    to samples whose goal string matches the query exactly. Ties go to the
    lowest episode index, then the lowest keyframe index.
    """

    def __init__(self, dataset: ReplayDataset):
        if not dataset.samples:
            raise ConfigurationError("replay dataset is empty")
        self._dataset = dataset
        self._packed = np.stack([s.packed_occupancy for s in dataset.samples])

    def __call__(self, inp: AgentInput) -> DiscreteBimanualAction:
        goal_mask = np.array([s.goal == inp.goal for s in self._dataset.samples])
        if not goal_mask.any():
            raise ConfigurationError(f"no training sample for goal {inp.goal!r}")
        query = _pack_grid(inp.grid)
        dist = _POPCOUNT[np.bitwise_xor(self._packed, query)].sum(axis=1)
        best, best_key = None, None
        for i in np.nonzero(goal_mask)[0]:
            s = self._dataset.samples[i]
            key = (int(dist[i]), s.episode_index, s.keyframe_index)
            if best_key is None or key < best_key:
                best, best_key = s, key
        return best.action


def nn_policy(dataset: ReplayDataset) -> NearestNeighborPolicy:
    return NearestNeighborPolicy(dataset)


# ---------------------------------------------------------------------------
# external subprocess protocol
# ---------------------------------------------------------------------------

def discrete_arm_to_json(d: DiscreteArmAction) -> dict:
    return {"trans": list(d.trans), "rot": list(d.rot),
            "open": d.open, "collide": d.collide}


def discrete_arm_from_json(obj) -> DiscreteArmAction:
    try:
        return DiscreteArmAction(trans=tuple(obj["trans"]), rot=tuple(obj["rot"]),
                                 open=bool(obj["open"]), collide=bool(obj["collide"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed discrete action: {exc}") from exc


class SubprocessPolicy:
    """Joint part backed by an external process speaking line-delimited JSON.

    Per decision the harness writes one request line
        {"grid_ref": <path to a BVOX dump>, "proprio": {...},
         "goal": <str>, "leader_action": {...}?}
    and expects one response line
        {"right": {"trans": [i,j,k], "rot": [a,b,c],
                   "open": bool, "collide": bool}, "left": {...}}
    Malformed responses raise ValidationError, which the evaluation loop
    converts into an episode failure instead of a crash.
    """

    def __init__(self, cmd: Sequence[str], workdir=None):
        self._proc = subprocess.Popen(
            list(cmd), stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
        self._grid_path = Path(workdir or ".") / "query_grid.bvox"

    def __call__(self, inp: AgentInput) -> DiscreteBimanualAction:
        dump_bvox(inp.grid, self._grid_path)
        request = {
            "grid_ref": str(self._grid_path),
            "proprio": {
                arm: {"gripper_open": p.gripper_open,
                      "pose": [*p.ee_pose.position.tolist(),
                               *p.ee_pose.orientation.tolist()]}
                for arm, p in inp.proprio.items()
            },
            "goal": inp.goal,
        }
        if inp.leader_action is not None:
            request["leader_action"] = discrete_arm_to_json(inp.leader_action)
        try:
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ValidationError(f"policy process failed: {exc}") from exc
        if not line:
            raise ValidationError("policy process closed its output")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"policy sent invalid JSON: {exc}") from exc
        if not isinstance(obj, dict) or "right" not in obj or "left" not in obj:
            raise ValidationError("policy response must carry right and left actions")
        return DiscreteBimanualAction(right=discrete_arm_from_json(obj["right"]),
                                      left=discrete_arm_from_json(obj["left"]))

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
