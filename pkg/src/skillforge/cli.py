"""Command-line entry point: ``skillforge assets|tasks|train|eval``.

Exit codes: 0 success, 1 domain failure, 2 usage or configuration error.
Progress goes to stderr; stdout carries only pipeable output.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields
from importlib import resources

import numpy as np

from . import __version__
from .curriculum import chain_eval, format_report, load_run, save_run, train_monolithic, train_sequence
from .errors import ConfigError, MissingApiKey, SequenceAborted, SkillforgeError, ValidationError
from .fileio import atomic_write_text
from .llm import DEFAULT_QUERY, ProviderConfig, assemble_prompt, query, render_messages
from .physics import build_rigid_asset, read_obj, sample_physical_params, scale_mesh_to_size, write_obj
from .ppo import PPOConfig
from .scene import load_scene_manifest
from .sim import SimConfig
from .tasks import dedupe_tasks, load_tasks, parse_task_blocks, persist_tasks, validate_task
from .urdf import describe_asset, emit_urdf, load_urdf

log = logging.getLogger("skillforge")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
DEFAULT_HTTP_CACHE = ".skillforge-cache"


def data_path(*parts) -> str:
    """Path to a file shipped in the package's data directory."""
    return str(resources.files("skillforge").joinpath("data", *parts))


@dataclass
class PipelineConfig:
    scene: str = None
    tasks: str = None
    out_dir: str = None
    cache_dir: str = None
    model_id: str = "gpt-4"
    temperature: float = 0.0
    seed: int = 0
    total_budget: int = 1_000_000
    provider: ProviderConfig = field(default_factory=lambda: ProviderConfig(mode="replay",
                                                                            cache_dir=data_path("fixtures")))
    sim: SimConfig = field(default_factory=SimConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)

    def to_dict(self):
        return asdict(self)


_NESTED = {"provider": ProviderConfig, "sim": SimConfig, "ppo": PPOConfig}


def _build(cls, doc, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**doc)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def load_config(path=None) -> PipelineConfig:
    """Defaults overlaid with a JSON config file; unknown keys are rejected."""
    if path is None:
        return PipelineConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path}: expected an object")
    base = os.path.dirname(os.path.abspath(path))
    top = {}
    defaults = PipelineConfig()
    for key, value in doc.items():
        if key in _NESTED:
            merged = {**asdict(getattr(defaults, key)), **value} if isinstance(value, dict) else value
            top[key] = _build(_NESTED[key], merged, f"{path}: {key}")
        else:
            top[key] = value
    for key in ("scene", "tasks", "out_dir", "cache_dir"):
        if isinstance(top.get(key), str):
            top[key] = os.path.join(base, top[key])
    cfg = _build(PipelineConfig, top, str(path))
    for key in ("scene", "tasks"):
        p = getattr(cfg, key)
        if p is not None and not os.path.exists(p):
            raise ConfigError(f"{path}: {key} path does not exist: {p}")
    return cfg


def _replace(obj, **changes):
    return type(obj)(**{**asdict(obj), **changes})


def _resolve(args) -> PipelineConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "scene", None):
        cfg.scene = args.scene
    if getattr(args, "budget", None) is not None:
        cfg.total_budget = args.budget
    provider = getattr(args, "provider", None)
    cache = getattr(args, "cache_dir", None) or cfg.cache_dir
    changes = {}
    if provider:
        changes["mode"] = provider
    if cache:
        changes["cache_dir"] = cache
    elif provider == "http":
        changes["cache_dir"] = DEFAULT_HTTP_CACHE  # never write live responses into the package
    if changes:
        try:
            cfg.provider = _replace(cfg.provider, **changes)
        except ValueError as e:
            raise ConfigError(str(e)) from None
    cfg.ppo = _replace(cfg.ppo, seed=cfg.seed)
    cfg.sim = _replace(cfg.sim, seed=cfg.seed)
    return cfg


def _require_file(path, what):
    if not path:
        raise ConfigError(f"no {what} given")
    if not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------- commands

def cmd_assets(args) -> int:
    if args.action == "describe":
        asset = load_urdf(_require_file(args.urdf, "URDF file"))
        sys.stdout.write(describe_asset(asset) + "\n")
        return EXIT_OK
    mesh = read_obj(_require_file(args.mesh, "mesh file"))
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    params = sample_physical_params(args.category, rng=rng)
    name = args.name or args.category.capitalize()
    out = args.out or f"{name.lower()}.urdf"
    mesh_out = os.path.splitext(out)[0] + ".obj"
    mesh_rel = os.path.basename(mesh_out)
    scaled = scale_mesh_to_size(mesh, params.size)
    asset = build_rigid_asset(name, scaled, params, mesh_filename=mesh_rel)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    write_obj(scaled, mesh_out)
    atomic_write_text(out, emit_urdf(asset))
    log.info("wrote %s (mass %.4g kg, size %s m)", out, params.mass, " x ".join(f"{v:.4g}" for v in params.size))
    sys.stdout.write(out + "\n")
    return EXIT_OK


def cmd_tasks(args) -> int:
    cfg = _resolve(args)
    scene, _ = load_scene_manifest(_require_file(cfg.scene, "scene manifest"))
    bundle = assemble_prompt(scene, query=args.query or DEFAULT_QUERY)
    request = render_messages(bundle, cfg.model_id, cfg.temperature)
    text = query(request, cfg.provider)
    accepted = []
    for item in parse_task_blocks(text):
        if isinstance(item, Exception):
            log.warning("rejected task block: %s", item)
            continue
        try:
            accepted.append(validate_task(item, scene))
        except ValidationError as e:
            log.warning("rejected task %s: %s: %s", item.task_name, type(e).__name__, e)
    accepted = dedupe_tasks(accepted)
    if not accepted:
        log.error("no valid tasks in the response")
        return EXIT_DOMAIN
    out = args.out or "tasks.json"
    persist_tasks(accepted, out, scene)
    for t in accepted:
        sys.stdout.write(f"{t.task_name}\t{len(t.subtasks)} subtasks\n")
    log.info("wrote %d task(s) to %s", len(accepted), out)
    return EXIT_OK


def _atomic_dir(out_dir, fill):
    """Build a directory in a sibling temp dir, then swap it into place."""
    parent = os.path.dirname(os.path.abspath(out_dir))
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(dir=parent, prefix=".tmp-run-")
    try:
        fill(tmp)
        old = None
        if os.path.exists(out_dir):
            old = tmp + ".old"
            os.replace(out_dir, old)
        os.replace(tmp, out_dir)
        if old:
            shutil.rmtree(old, ignore_errors=True)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def _pick_task(tasks, name):
    if name is None:
        return tasks[0]
    for t in tasks:
        if t.task_name == name:
            return t
    raise ConfigError(f"task {name!r} not in tasks file (have {[t.task_name for t in tasks]})")


def cmd_train(args) -> int:
    cfg = _resolve(args)
    if args.tasks:
        cfg.tasks = args.tasks
    scene_path = _require_file(cfg.scene, "scene manifest")
    scene, _ = load_scene_manifest(scene_path)
    tasks = load_tasks(_require_file(cfg.tasks, "tasks file"), scene)
    task = _pick_task(tasks, args.task)
    out = args.out or cfg.out_dir or "run"

    def progress(stage, rec):
        log.info("[%s stage %d] steps %d success %.2f eval %s", task.task_name, stage, rec["env_steps"],
                 rec["success_rate"], rec.get("eval_success", "-"))

    if args.ablation == "monolithic":
        run = train_monolithic(task, scene, cfg.ppo, cfg.sim, cfg.total_budget, on_metrics=progress)
    else:
        run = train_sequence(task, scene, cfg.ppo, cfg.sim, cfg.total_budget, on_metrics=progress)
    resolved = cfg.to_dict()
    resolved["scene"] = os.path.abspath(scene_path)
    resolved["tasks"] = os.path.abspath(cfg.tasks)
    resolved["task_name"] = task.task_name
    resolved["mode"] = run.mode

    def fill(d):
        save_run(run, d, scene, cfg.ppo)
        atomic_write_text(os.path.join(d, "config.json"), json.dumps(resolved, indent=2, sort_keys=True) + "\n")

    _atomic_dir(out, fill)
    sys.stdout.write(out + "\n")
    for st in run.stages:
        log.info("stage %s: %d steps, eval success %.2f, converged %s", st.name, st.env_steps, st.eval_success,
                 st.converged)
    return EXIT_OK


def cmd_eval(args) -> int:
    run_dir = args.run
    cfg_path = os.path.join(run_dir, "config.json")
    try:
        with open(cfg_path, "r", encoding="utf-8") as f:
            run_cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read {cfg_path}: {e}") from None
    scene, _ = load_scene_manifest(_require_file(args.scene or run_cfg["scene"], "scene manifest"))
    sim_cfg = _build(SimConfig, run_cfg.get("sim", {}), "sim")
    run = load_run(run_dir, scene)
    seed = args.seed if args.seed is not None else 0
    report = chain_eval(run, scene, args.episodes, seed, sim_cfg)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    atomic_write_text(args.out or os.path.join(run_dir, "eval.json"), text)
    sys.stdout.write(format_report(report) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="skillforge", description="Asset, task and skill-training pipeline.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("assets", help="build or describe assets")
    a.add_argument("action", choices=["build", "describe"])
    a.add_argument("--mesh", help="OBJ mesh (build)")
    a.add_argument("--category", help="physical category, e.g. Avocado (build)")
    a.add_argument("--name", help="asset name (build; default: category)")
    a.add_argument("--urdf", help="URDF to describe")
    a.add_argument("--out", help="output URDF path (build)")
    a.add_argument("--seed", type=int)
    a.set_defaults(func=cmd_assets)

    t = sub.add_parser("tasks", help="generate tasks with the language model")
    t.add_argument("action", choices=["generate"])
    t.add_argument("--config")
    t.add_argument("--scene", help="scene manifest")
    t.add_argument("--provider", choices=["replay", "http"])
    t.add_argument("--cache-dir")
    t.add_argument("--query", help="override the task request sentence")
    t.add_argument("--out", help="tasks file (default tasks.json)")
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_tasks)

    r = sub.add_parser("train", help="train a task's subtask policies")
    r.add_argument("--config")
    r.add_argument("--scene")
    r.add_argument("--tasks", help="tasks file")
    r.add_argument("--task", help="task name (default: first)")
    r.add_argument("--out", help="run directory")
    r.add_argument("--budget", type=int, help="total environment steps")
    r.add_argument("--seed", type=int)
    r.add_argument("--ablation", choices=["monolithic"])
    r.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a trained run by chaining its policies")
    e.add_argument("--run", required=True, help="run directory")
    e.add_argument("--scene", help="override the scene manifest recorded in the run")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int)
    e.add_argument("--out", help="report path (default RUN/eval.json)")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "assets" and args.action == "build" and not args.category:
        parser.error("assets build needs --category")
    try:
        return args.func(args)
    except (ConfigError, MissingApiKey) as e:
        log.error("%s", e)
        return EXIT_USAGE
    except SequenceAborted as e:
        log.error("training aborted: %s", e)
        return EXIT_DOMAIN
    except SkillforgeError as e:
        log.error("%s: %s", type(e).__name__, e)
        return EXIT_DOMAIN
    except OSError as e:
        log.error("%s", e)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
