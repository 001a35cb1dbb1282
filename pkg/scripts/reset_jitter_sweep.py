"""Sweep the terminal-state reset jitter for the second cup subtask.

Trains open-door once, then trains pick-cup from its terminal buffer with
each jitter value and reports steps to convergence.

    python scripts/reset_jitter_sweep.py --jitter 0 0.01 0.02 0.05
"""
import argparse
import json
import logging

from skillforge.cli import data_path
from skillforge.llm import CUP_IN_MICROWAVE_ANSWER
from skillforge.ppo import PPOConfig, train_subtask
from skillforge.scene import load_scene_manifest
from skillforge.sim import SimConfig
from skillforge.tasks import parse_task_response


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--jitter", type=float, nargs="+", default=[0.0, 0.01, 0.02, 0.05])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    scene, _ = load_scene_manifest(data_path("scenes", "cup_microwave.json"))
    task = parse_task_response(CUP_IN_MICROWAVE_ANSWER)[0]
    first = train_subtask(scene, task.subtasks[0].reward, cfg=PPOConfig(seed=args.seed))
    if not first.converged:
        raise SystemExit("open-door did not converge; try another seed")
    for j in args.jitter:
        res = train_subtask(scene, task.subtasks[1].reward, first.terminal_buffer, PPOConfig(seed=args.seed + 101),
                            SimConfig(reset_jitter=j))
        print(json.dumps({"jitter": j, "env_steps": res.env_steps, "converged": res.converged,
                          "eval_success": res.eval_success}), flush=True)


if __name__ == "__main__":
    main()
