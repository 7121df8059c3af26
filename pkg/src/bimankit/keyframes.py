"""Keyframe discovery over recorded demonstrations.

A step t is nominated when either
  R1: the gripper open flag of either arm differs between t-1 and t, or
  R2: for at least one arm the pose settles: every consecutive pose delta
      inside the trailing window of `window` poses ending at t is below
      (trans_eps, rot_eps), and that was not yet true at t-1 (rising edge).

Steps with too little history for the window are treated as "stationarity
undefined" and never produce an edge. Nominations closer together than
merge_gap collapse onto the later index, and the final step is always a
keyframe.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import ARMS, BimanualAction, Demonstration, pose_delta
from .errors import ValidationError


@dataclass(frozen=True)
class KeyframeParams:
    window: int = 4
    trans_eps: float = 1e-3   # meters
    rot_eps: float = 0.5      # degrees
    merge_gap: int = 2        # steps

    def __post_init__(self):
        if self.window < 2:
            raise ValidationError("window must span at least 2 poses")
        if self.trans_eps <= 0 or self.rot_eps <= 0:
            raise ValidationError("stationarity thresholds must be positive")
        if self.merge_gap < 1:
            raise ValidationError("merge_gap must be at least 1")


@dataclass(frozen=True)
class KeyframeSet:
    """Strictly increasing step indices; the terminal step is always present."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValidationError("keyframe set may not be empty")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValidationError("keyframe indices must be strictly increasing")
        if idx[0] < 0:
            raise ValidationError("keyframe indices must be non-negative")
        object.__setattr__(self, "indices", idx)

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)


def _arm_series(demo: Demonstration, arm: str):
    poses = [s.action.arm(arm).pose for s in demo.steps]
    opens = [s.action.arm(arm).open for s in demo.steps]
    return poses, opens


def extract_keyframes(demo: Demonstration,
                      params: KeyframeParams = KeyframeParams()) -> KeyframeSet:
    n = len(demo)
    small = {}  # (arm, t) -> consecutive delta below both thresholds
    opens = {}
    for arm in ARMS:
        poses, open_flags = _arm_series(demo, arm)
        opens[arm] = open_flags
        for t in range(1, n):
            trans, rot = pose_delta(poses[t - 1], poses[t])
            small[arm, t] = trans < params.trans_eps and rot < params.rot_eps

    w = params.window

    def stationary(arm: str, t: int):
        """True/False once the window fits, None while history is too short."""
        if t < w - 1:
            return None
        return all(small[arm, s] for s in range(t - w + 2, t + 1))

    candidates = []
    for t in range(1, n):
        r1 = any(opens[arm][t] != opens[arm][t - 1] for arm in ARMS)
        r2 = False
        for arm in ARMS:
            now, before = stationary(arm, t), stationary(arm, t - 1)
            if now is True and before is False:
                r2 = True
                break
        if r1 or r2:
            candidates.append(t)

    if not candidates or candidates[-1] != n - 1:
        candidates.append(n - 1)

    merged: list[int] = []
    for t in candidates:
        if merged and t - merged[-1] < params.merge_gap:
            merged[-1] = t  # keep the later index
        else:
            merged.append(t)
    return KeyframeSet(tuple(merged))


def keyframe_actions(demo: Demonstration, ks: KeyframeSet) -> list[BimanualAction]:
    """Per-step supervision targets: the action at the next keyframe k > t.

    The terminal step has no later keyframe and targets its own action.
    """
    n = len(demo)
    if any(i >= n for i in ks.indices):
        raise ValidationError("keyframe index beyond demonstration length")
    actions = demo.actions
    targets: list[BimanualAction] = [None] * n
    ks_sorted = list(ks.indices)
    ptr = 0
    for t in range(n):
        while ptr < len(ks_sorted) and ks_sorted[ptr] <= t:
            ptr += 1
        targets[t] = actions[ks_sorted[ptr]] if ptr < len(ks_sorted) else actions[n - 1]
    return targets
