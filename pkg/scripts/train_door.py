"""Train the open-door skill over several seeds and report steps to convergence.

    python scripts/train_door.py --seeds 0 1 2 --out results/door.json
"""
import argparse
import json
import logging
import time

from skillforge.cli import data_path
from skillforge.curriculum import chain_eval, train_sequence
from skillforge.llm import ProviderConfig, assemble_prompt, query, render_messages
from skillforge.ppo import PPOConfig
from skillforge.scene import load_scene_manifest
from skillforge.tasks import parse_task_response, validate_task


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--budget", type=int, default=300_000)
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--out")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    scene, _ = load_scene_manifest(data_path("scenes", "microwave.json"))
    request = render_messages(assemble_prompt(scene))
    text = query(request, ProviderConfig(mode="replay", cache_dir=data_path("fixtures")))
    task = validate_task(parse_task_response(text)[0], scene)

    rows = []
    for seed in args.seeds:
        t0 = time.perf_counter()
        cfg = PPOConfig(seed=seed, max_env_steps=args.budget)
        run = train_sequence(task, scene, cfg, total_budget=args.budget)
        report = chain_eval(run, scene, args.episodes, seed=10_000 + seed)
        st = run.stages[0]
        rows.append({"seed": seed, "env_steps": st.env_steps, "converged": st.converged,
                     "eval_success": report["end_to_end"], "seconds": round(time.perf_counter() - t0, 1)})
        print(json.dumps(rows[-1]), flush=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()
