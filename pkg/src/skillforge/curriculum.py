"""Sequential subtask training with terminal-state resets, policy chaining, and the monolithic baseline."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .errors import SequenceAborted, TrainingError
from .fileio import atomic_write_text
from .ppo import (PPOConfig, PolicyNet, SubtaskResult, load_checkpoint, run_episodes, save_checkpoint,
                  train_subtask)
from .reward import RewardProgram, check_success, combine_programs
from .scene import SceneSpec
from .sim import (ActionCommand, DefaultInit, SceneKinematics, SimConfig, Simulator, TerminalBuffer,
                  state_from_dict, state_to_dict)
from .tasks import SubtaskSpec, TaskSpec, load_tasks, persist_tasks

log = logging.getLogger(__name__)

RUN_SCHEMA = 1
ABORT_THRESHOLD = 0.5


@dataclass
class StageRecord:
    name: str
    program: RewardProgram
    policy: PolicyNet
    buffer: TerminalBuffer
    metrics: list
    env_steps: int
    eval_success: float
    converged: bool
    max_steps: int = 256


@dataclass
class CurriculumRun:
    task: TaskSpec
    stages: List[StageRecord]
    mode: str = "curriculum"  # or "monolithic"
    chain_report: Optional[dict] = None

    @property
    def env_steps(self):
        return sum(s.env_steps for s in self.stages)


def _record(name, program, res: SubtaskResult, max_steps):
    return StageRecord(name, program, res.policy, res.terminal_buffer, res.metrics, res.env_steps,
                       res.eval_success, res.converged, max_steps)


def train_sequence(task: TaskSpec, scene: SceneSpec, cfg: PPOConfig = None, sim_cfg: SimConfig = None,
                   total_budget: int = None, on_metrics=None) -> CurriculumRun:
    """Train subtasks in order; subtask i>0 resets from subtask i-1's terminal buffer.

    Each stage may use up to ``cfg.max_env_steps`` steps, further capped by
    what remains of ``total_budget``.
    """
    cfg = cfg or PPOConfig()
    stages = []
    init = DefaultInit()
    used = 0
    for i, sub in enumerate(task.subtasks):
        budget = cfg.max_env_steps if total_budget is None else min(cfg.max_env_steps, total_budget - used)
        if budget <= 0:
            raise SequenceAborted(i, "total step budget exhausted before this subtask")
        stage_cfg = PPOConfig(**{**asdict(cfg), "max_env_steps": budget, "seed": cfg.seed + 101 * i})
        log.info("subtask %d/%d %s (budget %d)", i + 1, len(task.subtasks), sub.name, budget)
        cb = None if on_metrics is None else (lambda r, i=i: on_metrics(i, r))
        res = train_subtask(scene, sub.reward, init, stage_cfg, sim_cfg, on_metrics=cb)
        used += res.env_steps
        stages.append(_record(sub.name, sub.reward, res, stage_cfg.max_episode_steps))
        if not res.converged and res.eval_success < ABORT_THRESHOLD:
            raise SequenceAborted(i, f"budget exhausted at eval success {res.eval_success:.2f}")
        if len(res.terminal_buffer) == 0:
            raise SequenceAborted(i, "no successful terminal states to seed the next subtask")
        init = res.terminal_buffer
    return CurriculumRun(task, stages, "curriculum")


def train_monolithic(task: TaskSpec, scene: SceneSpec, cfg: PPOConfig = None, sim_cfg: SimConfig = None,
                     total_budget: int = None, on_metrics=None) -> CurriculumRun:
    """One policy on the summed reward of all subtasks with the conjoined success test.

    The episode cap is the per-subtask cap times the number of subtasks, so
    the single policy gets as much time per episode as the whole chain.
    """
    cfg = cfg or PPOConfig()
    n = len(task.subtasks)
    combined = combine_programs(task.programs)
    budget = total_budget if total_budget is not None else cfg.max_env_steps * n
    max_steps = cfg.max_episode_steps * n
    mono_cfg = PPOConfig(**{**asdict(cfg), "max_env_steps": budget, "max_episode_steps": max_steps})
    cb = None if on_metrics is None else (lambda r: on_metrics(0, r))
    res = train_subtask(scene, combined, DefaultInit(), mono_cfg, sim_cfg, grasp_programs=task.programs,
                        on_metrics=cb)
    return CurriculumRun(task, [_record("monolithic", combined, res, max_steps)], "monolithic")


# ---------------------------------------------------------------- evaluation

def chain_eval(run: CurriculumRun, scene: SceneSpec, episodes: int = 100, seed: int = 0,
               sim_cfg: SimConfig = None, trace=None) -> dict:
    """Run the stage policies back to back from default resets with deterministic actions.

    When stage i succeeds, control passes to stage i+1 on the very same
    simulator state. ``trace``, if given, receives ``(episode, stage,
    state_before_handoff, state_after_handoff)`` at every handoff.
    """
    if run.mode == "monolithic":
        st = run.stages[0]
        succ, _ = run_episodes(st.policy, scene, st.program, sim_cfg, DefaultInit(), episodes, seed,
                               st.max_steps, grasp_programs=run.task.programs)
        rate = float(np.mean(succ)) if episodes else 0.0
        return {"mode": "monolithic", "episodes": episodes, "seed": seed, "stages": [
            {"name": "monolithic", "attempted": episodes, "succeeded": int(sum(succ)),
             "conditional_rate": rate, "rate": rate}], "end_to_end": rate}

    n_stage = len(run.stages)
    kin = SceneKinematics(scene)
    rng = np.random.default_rng(seed)
    sims = []
    for _ in range(episodes):
        sim = Simulator(scene, sim_cfg, kin=kin)
        sim.set_program(run.stages[0].program)
        sim.reset(rng, DefaultInit())
        sims.append(sim)
    stage = [0] * episodes
    t = [0] * episodes
    failed_at = [None] * episodes
    attempted = [0] * n_stage
    succeeded = [0] * n_stage
    attempted[0] = episodes
    live = set(range(episodes))
    while live:
        groups = [sorted(i for i in live if stage[i] == k) for k in range(n_stage)]
        for s_idx, group in enumerate(groups):
            if not group:
                continue
            rec = run.stages[s_idx]
            obs = np.stack([sims[i].observe() for i in group])
            actions = rec.policy.mean(obs)
            for i, a in zip(group, actions):
                sim = sims[i]
                st = sim.step(ActionCommand.from_normalized(a, sim.cfg))
                t[i] += 1
                if check_success(rec.program, st):
                    succeeded[s_idx] += 1
                    if s_idx + 1 == n_stage:
                        live.discard(i)
                        continue
                    nxt = run.stages[s_idx + 1]
                    sim.set_program(nxt.program)
                    if trace is not None:
                        trace(i, s_idx, st, sim.state)
                    stage[i] = s_idx + 1
                    t[i] = 0
                    attempted[s_idx + 1] += 1
                elif t[i] >= rec.max_steps:
                    failed_at[i] = s_idx
                    live.discard(i)
    stages = []
    for k, rec in enumerate(run.stages):
        stages.append({"name": rec.name, "attempted": attempted[k], "succeeded": succeeded[k],
                       "conditional_rate": succeeded[k] / attempted[k] if attempted[k] else 0.0,
                       "rate": succeeded[k] / episodes if episodes else 0.0})
    e2e = succeeded[-1] / episodes if episodes else 0.0
    return {"mode": "curriculum", "episodes": episodes, "seed": seed, "stages": stages, "end_to_end": e2e,
            "failed_at": [sum(1 for f in failed_at if f == k) for k in range(n_stage)]}


def format_report(report: dict) -> str:
    lines = [f"mode: {report['mode']}  episodes: {report['episodes']}  seed: {report['seed']}",
             f"{'stage':<20} {'attempted':>9} {'succeeded':>9} {'cond. rate':>10}"]
    for s in report["stages"]:
        lines.append(f"{s['name']:<20} {s['attempted']:>9} {s['succeeded']:>9} {s['conditional_rate']:>10.3f}")
    lines.append(f"end-to-end success: {report['end_to_end']:.3f}")
    return "\n".join(lines)


# ---------------------------------------------------------------- persistence

def _stage_dir(k, name):
    return f"stage-{k:02d}-{name}"


def save_run(run: CurriculumRun, out_dir, scene: SceneSpec = None, cfg: PPOConfig = None):
    """Write the run directory: task file, one folder per stage, and an index."""
    os.makedirs(out_dir, exist_ok=True)
    persist_tasks([run.task], os.path.join(out_dir, "task.json"), scene)
    stages = []
    for k, st in enumerate(run.stages):
        d = _stage_dir(k, st.name)
        full = os.path.join(out_dir, d)
        os.makedirs(full, exist_ok=True)
        save_checkpoint(os.path.join(full, "policy.json"), st.policy, cfg or PPOConfig(),
                        extra={"stage": st.name, "reward": st.program.to_source()})
        metrics = "".join(json.dumps(m, sort_keys=True) + "\n" for m in st.metrics)
        atomic_write_text(os.path.join(full, "metrics.jsonl"), metrics)
        buf = {"capacity": st.buffer.states.maxlen, "states": [state_to_dict(s) for s in st.buffer]}
        atomic_write_text(os.path.join(full, "buffer.json"), json.dumps(buf, sort_keys=True))
        stages.append({"name": st.name, "dir": d, "env_steps": st.env_steps, "eval_success": st.eval_success,
                       "converged": st.converged, "max_steps": st.max_steps, "reward": st.program.to_source()})
    index = {"schema_version": RUN_SCHEMA, "mode": run.mode, "task_name": run.task.task_name,
             "env_steps": run.env_steps, "stages": stages}
    atomic_write_text(os.path.join(out_dir, "run.json"), json.dumps(index, indent=2, sort_keys=True) + "\n")
    return out_dir


def load_run(out_dir, scene: SceneSpec) -> CurriculumRun:
    from .reward import parse_reward

    try:
        with open(os.path.join(out_dir, "run.json"), "r", encoding="utf-8") as f:
            index = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise TrainingError(f"cannot read run directory {out_dir}: {e}") from None
    if index.get("schema_version") != RUN_SCHEMA:
        raise TrainingError(f"run directory {out_dir} has schema_version {index.get('schema_version')!r}")
    task = load_tasks(os.path.join(out_dir, "task.json"))[0]
    kin = SceneKinematics(scene)
    stages = []
    for s in index["stages"]:
        full = os.path.join(out_dir, s["dir"])
        policy, _, _ = load_checkpoint(os.path.join(full, "policy.json"))
        with open(os.path.join(full, "metrics.jsonl"), "r", encoding="utf-8") as f:
            metrics = [json.loads(line) for line in f if line.strip()]
        with open(os.path.join(full, "buffer.json"), "r", encoding="utf-8") as f:
            buf_doc = json.load(f)
        buffer = TerminalBuffer(buf_doc["capacity"], [state_from_dict(d, kin) for d in buf_doc["states"]])
        stages.append(StageRecord(s["name"], parse_reward(s["reward"]), policy, buffer, metrics, s["env_steps"],
                                  s["eval_success"], s["converged"], s["max_steps"]))
    return CurriculumRun(task, stages, index["mode"])
