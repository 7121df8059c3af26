"""Command-line interface.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..agents import (Independent, Joint, LeaderFollower, OraclePolicy,
                      ReplayDataset, compose, nn_policy, oracle_arm_parts)
from ..augment import PerturbSpec, perturb
from ..camvox import VoxelGrid, dump_bvox, fuse
from ..codec import DiscreteBimanualAction, encode_arm
from ..errors import EncodeError, ValidationError
from ..keyframes import KeyframeParams, extract_keyframes
from ..simworld import (DOCUMENTED_ONLY, TASK_ORDER, TASKS, default_rig,
                        get_task, workspace_grid, wrist_extrinsics)
from .dataset import generate_dataset, load_dataset
from .evaluate import evaluate
from .io import (camera_from_json, load_episode, read_dataset_manifest,
                 write_targets)
from .stats import dataset_stats, stats_to_json, write_csv


def _parse_cams(arg: str, size: int):
    rig = {c.name: c for c in default_rig(size, size)}
    if not arg:
        return []
    if arg == "all":
        return list(rig.values())
    cams = []
    for name in arg.split(","):
        name = name.strip()
        if name not in rig:
            raise ValidationError(
                f"unknown camera {name!r}; choose from {sorted(rig)} or 'all'")
        cams.append(rig[name])
    return cams


def _keyframe_params(args) -> KeyframeParams:
    return KeyframeParams(window=args.window, trans_eps=args.trans_eps,
                          rot_eps=args.rot_eps)


def _cmd_gen(args) -> int:
    cams = _parse_cams(args.cams, args.cam_size)
    manifest = generate_dataset(args.task, args.episodes, args.seed,
                                args.out, cams=cams)
    print(json.dumps({"task_id": manifest["task_id"],
                      "episodes": manifest["episode_count"],
                      "expert_failures": manifest["expert_failures"],
                      "out": str(Path(args.out) / manifest["task_id"])}))
    return 0


def _cmd_keyframes(args) -> int:
    manifest, demos = load_dataset(args.dataset)
    params = _keyframe_params(args)
    rows = []
    for entry, demo in zip(manifest["episodes"], demos):
        ks = extract_keyframes(demo, params)
        rows.append({"dir": entry["dir"], "indices": list(ks.indices)})
    print(json.dumps({"task_id": manifest["task_id"], "episodes": rows}))
    return 0


def _cmd_voxelize(args) -> int:
    manifest = read_dataset_manifest(args.dataset)
    if not manifest["cameras"]:
        raise ValidationError("dataset was generated without cameras; "
                              "nothing to voxelize")
    entries = manifest["episodes"]
    if not 0 <= args.episode < len(entries):
        raise ValidationError(f"episode index {args.episode} out of range "
                              f"(dataset has {len(entries)})")
    ep_dir = Path(args.dataset) / entries[args.episode]["dir"]
    demo = load_episode(ep_dir, with_images=True)
    if not 0 <= args.step < len(demo.steps):
        raise ValidationError(f"step {args.step} out of range "
                              f"(episode has {len(demo.steps)} steps)")
    step = demo.steps[args.step]
    cams = [camera_from_json(c) for c in manifest["cameras"]]
    resolved = wrist_extrinsics(
        cams, {a: p.ee_pose for a, p in step.obs.proprio.items()})
    spec = workspace_grid()
    grid = fuse(step.obs, resolved, spec)
    if args.dump:
        dump_bvox(grid, args.dump)
    print(json.dumps({"episode": args.episode, "step": args.step,
                      "occupied": int(grid.occupancy.sum()),
                      "cells": spec.n_cells(),
                      "dump": args.dump or None}))
    return 0


def _cmd_targets(args) -> int:
    manifest, demos = load_dataset(args.dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = workspace_grid()
    total, skipped = 0, 0
    for ep_idx, (entry, demo) in enumerate(zip(manifest["episodes"], demos)):
        ks = extract_keyframes(demo, KeyframeParams())
        obs_steps = [0] + list(ks.indices[:-1])
        actions = [demo.steps[k].action for k in ks.indices]
        if args.aug_trans > 0.0 or args.aug_rot > 0.0:
            pspec = PerturbSpec(max_trans=args.aug_trans, max_rot_z=args.aug_rot,
                                rng_seed=int(manifest["seed"]) + ep_idx)
            _, actions, _ = perturb(VoxelGrid.empty(spec), actions, pspec)
        records = []
        for obs_step, k, action in zip(obs_steps, ks.indices, actions):
            try:
                encoded = DiscreteBimanualAction(
                    right=encode_arm(action.right, spec, "right"),
                    left=encode_arm(action.left, spec, "left"))
            except EncodeError:
                skipped += 1   # perturbation pushed the arm out of the grid
                continue
            records.append((obs_step, k, encoded))
        write_targets(out_dir / f"{entry['dir']}.targets.bin", records)
        total += len(records)
    print(json.dumps({"task_id": manifest["task_id"],
                      "episodes": len(demos), "decisions": total,
                      "skipped_out_of_bounds": skipped,
                      "out": str(out_dir)}))
    return 0


_TOPOLOGIES = ("independent", "leader-right", "leader-left", "joint")


def _make_policy_factory(args, spec):
    """Returns (factory, eval cams). The factory is called once per episode."""
    cams = _parse_cams(args.cams, args.cam_size)
    if args.policy == "oracle":
        if args.topology == "joint":
            return (lambda: compose(OraclePolicy(spec), Joint())), cams
        if args.topology == "independent":
            topo = Independent()
        else:
            topo = LeaderFollower(args.topology.split("-", 1)[1])
        return (lambda: compose(oracle_arm_parts(spec), topo)), cams

    if args.policy == "nn":
        if args.topology != "joint":
            raise ValidationError("the nn policy predicts both arms at once; "
                                  "use --topology joint")
        if not args.train:
            raise ValidationError("--policy nn requires --train DIR")
        manifest, demos = load_dataset(args.train, with_images=True)
        train_cams = [camera_from_json(c) for c in manifest["cameras"]]
        if not train_cams:
            raise ValidationError("nn training dataset has no cameras")
        dataset = ReplayDataset.build(demos, train_cams, spec)
        policy = compose(nn_policy(dataset), Joint())
        # retrieval is read-only, one instance is safe across episodes
        return (lambda: policy), (cams or train_cams)

    raise ValidationError(f"unknown policy {args.policy!r}")


def _cmd_eval(args) -> int:
    if args.topology not in _TOPOLOGIES:
        raise ValidationError(f"topology must be one of {_TOPOLOGIES}")
    spec = workspace_grid()
    task = get_task(args.task)
    make_policy, cams = _make_policy_factory(args, spec)
    report = evaluate(task, make_policy, episodes=args.episodes,
                      seed=args.seed, policy_id=args.policy,
                      topology=args.topology, cams=cams, spec=spec,
                      workers=args.workers)
    if args.report:
        report.save(args.report)
    print(json.dumps({"task_id": report.task_id, "policy": report.policy_id,
                      "topology": report.topology, "episodes": report.episodes,
                      "successes": report.successes,
                      "success_rate": report.success_rate,
                      "failures": report.failures}))
    return 0


def _cmd_stats(args) -> int:
    rows = dataset_stats(args.dataset)
    if args.csv:
        write_csv(rows, args.csv)
    print(json.dumps(stats_to_json(rows)))
    return 0


def _cmd_list_tasks(args) -> int:
    implemented = []
    for t in TASK_ORDER:
        task = TASKS[t]
        tax = task.taxonomy
        implemented.append({
            "id": t, "language": task.language,
            "variations": task.n_variations(), "items": task.item_count,
            "taxonomy": {"temporal": tax.temporal, "spatial": tax.spatial,
                         "physical": tax.physical, "symmetric": tax.symmetric,
                         "synchronous": tax.synchronous}})
    documented = [{"id": d.id, "language": d.language, "status": "spec-only"}
                  for d in DOCUMENTED_ONLY]
    print(json.dumps({"implemented": implemented,
                      "documented_only": documented}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bimankit",
        description="Bimanual manipulation benchmark kit: dataset generation, "
                    "voxelization, training targets and closed-loop evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an expert demonstration dataset")
    p.add_argument("--task", required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cams", default="",
                   help="comma-separated camera names or 'all' (default: none)")
    p.add_argument("--cam-size", type=int, default=128,
                   help="square camera resolution (default 128)")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("keyframes", help="extract keyframe indices per episode")
    p.add_argument("--in", dest="dataset", required=True)
    p.add_argument("--window", type=int, default=KeyframeParams().window)
    p.add_argument("--trans-eps", type=float, default=KeyframeParams().trans_eps)
    p.add_argument("--rot-eps", type=float, default=KeyframeParams().rot_eps)
    p.set_defaults(fn=_cmd_keyframes)

    p = sub.add_parser("voxelize", help="fuse one recorded step into a voxel grid")
    p.add_argument("--in", dest="dataset", required=True)
    p.add_argument("--episode", type=int, required=True)
    p.add_argument("--step", type=int, required=True)
    p.add_argument("--dump", default="", help="write the grid to a BVOX file")
    p.set_defaults(fn=_cmd_voxelize)

    p = sub.add_parser("targets",
                       help="encode next-keyframe training targets per episode")
    p.add_argument("--in", dest="dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--aug-trans", type=float, default=0.0,
                   help="max per-axis translation jitter in meters")
    p.add_argument("--aug-rot", type=float, default=0.0,
                   help="max yaw jitter in degrees")
    p.set_defaults(fn=_cmd_targets)

    p = sub.add_parser("eval", help="closed-loop policy evaluation")
    p.add_argument("--task", required=True)
    p.add_argument("--policy", required=True, choices=("oracle", "nn"))
    p.add_argument("--topology", default="joint", choices=_TOPOLOGIES)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--report", default="", help="write the full report JSON here")
    p.add_argument("--train", default="",
                   help="training dataset dir (required for --policy nn)")
    p.add_argument("--cams", default="", help="evaluation camera rig")
    p.add_argument("--cam-size", type=int, default=128)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("stats", help="per-task dataset statistics")
    p.add_argument("--in", dest="dataset", required=True)
    p.add_argument("--csv", default="", help="also write a CSV table here")
    p.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("list-tasks", help="list implemented and documented tasks")
    p.set_defaults(fn=_cmd_list_tasks)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
