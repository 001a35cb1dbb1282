import numpy as np
import pytest

from helpers import IdlePolicy, ScriptedPolicy
from skillforge.curriculum import (CurriculumRun, StageRecord, chain_eval, format_report, load_run, save_run,
                                   train_monolithic, train_sequence)
from skillforge.errors import SequenceAborted
from skillforge.ppo import PPOConfig, train_subtask
from skillforge.reward import parse_reward
from skillforge.sim import Simulator, TerminalBuffer
from skillforge.tasks import SubtaskSpec, TaskSpec

ALWAYS = parse_reward("(reward (term 1.0 (dist-ee Microwave.handle))) (success (ee-near Microwave.body 10.0))")
ALWAYS_B = parse_reward("(reward (term 1.0 (dist-ee Microwave.door))) (success (ee-near Microwave.door 10.0))")
CONSTANT = parse_reward("(reward (term 0.0 (dist-ee Microwave.handle))) (success (joint-near Microwave.door-joint 1.0 0.05))")
GRASP = parse_reward("(reward (term 1.0 (dist-ee Microwave.handle))) (success (grasped Microwave.handle))")
DOOR = parse_reward("(reward (term 1.0 (dist-ee Microwave.handle)) (term 1.0 (joint-err Microwave.door-joint 1.0)))"
                    " (success (joint-near Microwave.door-joint 1.0 0.05))")

SMALL = dict(num_envs=4, horizon=64, max_env_steps=2048, eval_episodes=10, min_terminal_states=20)


def task_of(*programs):
    return TaskSpec("T", "", tuple(SubtaskSpec(f"s{i}", "", p) for i, p in enumerate(programs)))


def stage(name, program, policy, max_steps=256):
    return StageRecord(name, program, policy, TerminalBuffer(), [], 0, 1.0, True, max_steps)


def test_single_subtask_equals_train_subtask(microwave_scene):
    cfg = PPOConfig(seed=5, **SMALL)
    run = train_sequence(task_of(ALWAYS), microwave_scene, cfg)
    res = train_subtask(microwave_scene, ALWAYS, None, cfg)
    (st,) = run.stages
    assert st.metrics == res.metrics and st.env_steps == res.env_steps
    assert np.array_equal(st.policy.params, res.policy.params)
    assert [s.digest() for s in st.buffer] == [s.digest() for s in res.terminal_buffer]


def test_constant_reward_aborts_at_zero(microwave_scene):
    with pytest.raises(SequenceAborted) as e:
        train_sequence(task_of(CONSTANT, ALWAYS), microwave_scene, PPOConfig(**SMALL))
    assert e.value.index == 0


def test_total_budget_aborts_later_stage(microwave_scene):
    with pytest.raises(SequenceAborted) as e:
        train_sequence(task_of(ALWAYS, ALWAYS_B), microwave_scene, PPOConfig(**SMALL), total_budget=256)
    assert e.value.index == 1


def test_later_stages_reset_near_predecessor_terminals(microwave_scene, monkeypatch):
    resets = []
    original = Simulator.reset

    def spy(self, rng, init=None):
        s = original(self, rng, init)
        if isinstance(init, TerminalBuffer):
            resets.append((init, s))
        return s

    monkeypatch.setattr(Simulator, "reset", spy)
    run = train_sequence(task_of(ALWAYS, ALWAYS_B, ALWAYS), microwave_scene, PPOConfig(**SMALL))
    assert [s.name for s in run.stages] == ["s0", "s1", "s2"]
    assert {id(b) for b, _ in resets} == {id(run.stages[0].buffer), id(run.stages[1].buffer)}
    jitter = Simulator(microwave_scene).cfg.reset_jitter
    for buf, s in resets:
        d = min(np.linalg.norm(b.ee_pos - s.ee_pos) for b in buf)
        assert d <= jitter + 1e-12


def test_seed_offsets_per_stage(microwave_scene):
    from dataclasses import replace
    cfg = PPOConfig(seed=2, **SMALL)
    run = train_sequence(task_of(ALWAYS, ALWAYS_B), microwave_scene, cfg)
    second = train_subtask(microwave_scene, ALWAYS_B, run.stages[0].buffer, replace(cfg, seed=2 + 101))
    assert np.array_equal(run.stages[1].policy.params, second.policy.params)
    assert run.stages[1].metrics == second.metrics


def test_chain_all_succeed(microwave_scene):
    run = CurriculumRun(task_of(GRASP, ALWAYS), [stage("grasp", GRASP, ScriptedPolicy()),
                                                 stage("hold", ALWAYS, IdlePolicy())])
    rep = chain_eval(run, microwave_scene, episodes=12, seed=0)
    assert rep["end_to_end"] == 1.0
    assert [s["attempted"] for s in rep["stages"]] == [12, 12]
    assert rep["failed_at"] == [0, 0]


def test_chain_timeout_counted_at_stage_two(microwave_scene):
    run = CurriculumRun(task_of(GRASP, DOOR), [stage("grasp", GRASP, ScriptedPolicy()),
                                               stage("open", DOOR, IdlePolicy(), max_steps=20)])
    rep = chain_eval(run, microwave_scene, episodes=10, seed=0)
    assert rep["end_to_end"] == 0.0
    assert [(s["attempted"], s["succeeded"]) for s in rep["stages"]] == [(10, 10), (10, 0)]
    assert rep["failed_at"] == [0, 10]
    assert "end-to-end success: 0.000" in format_report(rep)


def test_chain_timeout_at_stage_one(microwave_scene):
    run = CurriculumRun(task_of(GRASP, ALWAYS), [stage("grasp", GRASP, IdlePolicy(), max_steps=15),
                                                 stage("hold", ALWAYS, IdlePolicy())])
    rep = chain_eval(run, microwave_scene, episodes=5, seed=0)
    assert rep["failed_at"] == [5, 0] and rep["stages"][1]["attempted"] == 0
    assert rep["stages"][1]["conditional_rate"] == 0.0


def test_handoff_preserves_state(microwave_scene):
    seen = []
    run = CurriculumRun(task_of(GRASP, ALWAYS), [stage("grasp", GRASP, ScriptedPolicy()),
                                                 stage("hold", ALWAYS, IdlePolicy())])
    chain_eval(run, microwave_scene, episodes=8, seed=3,
               trace=lambda ep, k, before, after: seen.append((ep, k, before.digest(), after.digest())))
    assert len(seen) == 8
    assert all(b == a for _, _, b, a in seen)


@pytest.mark.parametrize("close_within", [0.01, 0.03, 0.05, 0.08])
def test_conjunction_bound(microwave_scene, close_within):
    run = CurriculumRun(task_of(GRASP, ALWAYS), [
        stage("grasp", GRASP, ScriptedPolicy(close_within=close_within), max_steps=40),
        stage("hold", ALWAYS, IdlePolicy())])
    rep = chain_eval(run, microwave_scene, episodes=10, seed=1)
    conditional = [s["conditional_rate"] for s in rep["stages"] if s["attempted"]]
    assert rep["end_to_end"] <= min(conditional) + 1e-12


def test_chain_eval_deterministic(microwave_scene):
    run = CurriculumRun(task_of(GRASP, ALWAYS), [stage("grasp", GRASP, ScriptedPolicy(), max_steps=30),
                                                 stage("hold", ALWAYS, IdlePolicy())])
    assert chain_eval(run, microwave_scene, 10, 4) == chain_eval(run, microwave_scene, 10, 4)


def test_save_load_run(tmp_path, microwave_scene):
    cfg = PPOConfig(seed=1, **SMALL)
    run = train_sequence(task_of(ALWAYS, ALWAYS_B), microwave_scene, cfg)
    save_run(run, tmp_path / "run", microwave_scene, cfg)
    back = load_run(tmp_path / "run", microwave_scene)
    assert back.task == run.task and back.mode == "curriculum"
    for a, b in zip(run.stages, back.stages):
        assert a.name == b.name and a.program == b.program and a.metrics == b.metrics
        assert np.array_equal(a.policy.params, b.policy.params)
        assert [s.digest() for s in a.buffer] == [s.digest() for s in b.buffer]
        assert (a.env_steps, a.eval_success, a.converged, a.max_steps) == (b.env_steps, b.eval_success,
                                                                            b.converged, b.max_steps)
    assert chain_eval(run, microwave_scene, 6, 0) == chain_eval(back, microwave_scene, 6, 0)


def test_monolithic_setup(microwave_scene):
    cfg = PPOConfig(**SMALL)
    run = train_monolithic(task_of(GRASP, DOOR), microwave_scene, cfg, total_budget=1024)
    (st,) = run.stages
    assert run.mode == "monolithic" and st.name == "monolithic"
    assert st.max_steps == 512 and st.env_steps == 1024
    assert len(st.program.terms) == 3
    rep = chain_eval(run, microwave_scene, 5, 0)
    assert rep["mode"] == "monolithic" and rep["stages"][0]["attempted"] == 5
