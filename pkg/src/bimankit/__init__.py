"""bimankit: a deterministic bimanual-manipulation benchmark kit.

Pipeline modules:
  core      poses, actions, observations, demonstrations
  camvox    pinhole back-projection and the fused voxel workspace
  keyframes keyframe discovery and next-best-action supervision
  codec     action discretization, one-hot targets and the two-arm loss
  augment   seeded SE(3) perturbation of grids plus actions
  simworld  kinematic task suite, scripted experts, ray-cast rendering
  agents    policy topologies (independent / leader-follower / joint)
  harness   dataset generation, closed-loop evaluation, stats, CLI
"""

from . import agents, augment, camvox, codec, core, errors, harness, keyframes, simworld

__version__ = "0.1.0"

__all__ = ["agents", "augment", "camvox", "codec", "core", "errors",
           "harness", "keyframes", "simworld", "__version__"]
