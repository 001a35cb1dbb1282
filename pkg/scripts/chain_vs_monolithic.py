"""Chained subtask policies versus one policy on the summed reward, same step budget.

    python scripts/chain_vs_monolithic.py --seeds 0 1 --budget 1000000
"""
import argparse
import json
import logging
import time

from skillforge.cli import data_path
from skillforge.curriculum import chain_eval, format_report, train_monolithic, train_sequence
from skillforge.errors import SequenceAborted
from skillforge.llm import CUP_IN_MICROWAVE_ANSWER
from skillforge.ppo import PPOConfig
from skillforge.scene import load_scene_manifest
from skillforge.tasks import parse_task_response, validate_task


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--budget", type=int, default=1_000_000)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--skip-monolithic", action="store_true")
    p.add_argument("--out")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    scene, _ = load_scene_manifest(data_path("scenes", "cup_microwave.json"))
    task = validate_task(parse_task_response(CUP_IN_MICROWAVE_ANSWER)[0], scene)
    modes = [("curriculum", train_sequence)] + ([] if args.skip_monolithic else [("monolithic", train_monolithic)])
    rows = []
    for seed in args.seeds:
        for mode, train in modes:
            t0 = time.perf_counter()
            try:
                run = train(task, scene, PPOConfig(seed=seed), total_budget=args.budget)
            except SequenceAborted as e:
                rows.append({"seed": seed, "mode": mode, "aborted": str(e)})
                print(json.dumps(rows[-1]), flush=True)
                continue
            report = chain_eval(run, scene, args.episodes, seed=1)
            print(format_report(report), flush=True)
            rows.append({"seed": seed, "mode": mode, "env_steps": run.env_steps,
                         "stage_steps": [s.env_steps for s in run.stages], "end_to_end": report["end_to_end"],
                         "seconds": round(time.perf_counter() - t0, 1)})
            print(json.dumps(rows[-1]), flush=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()
