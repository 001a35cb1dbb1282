"""Task specs: parsing LLM responses, grounding them in a scene, and the task file.

A response holds one or more task blocks::

    Task: OpenMicrowaveDoor
    Description: Open the microwave door.
    Subtask 1: open-door
    Description: Grasp the handle and swing the door open.
    ```reward
    (reward (term 1.0 (dist-ee Microwave.handle)))
    (success (joint-near Microwave.door-joint 1.0 0.05))
    ```

Headers are matched case-insensitively and may carry markdown decoration
(``**Task:**``, ``### Subtask 2 -``); everything else is ignored.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import List, Tuple

from .errors import (NoTaskFound, RewardError, RewardParseError, RewardSyntaxError, SchemaVersionMismatch,
                     TargetOutOfRange, TaskError, TaskFileError, UnknownAsset, UnknownJoint, UnknownLink)
from .fileio import atomic_write_text
from .reward import RewardProgram, parse_reward
from .scene import SceneSpec, scene_hash

TASK_SCHEMA = 1

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*\Z")
_DECOR = r"[\s>*#_`-]*"
_TASK_RE = re.compile(rf"^{_DECOR}task\s*(?:name)?\s*[:\-]\s*(.*)$", re.IGNORECASE)
_SUBTASK_RE = re.compile(rf"^{_DECOR}sub-?task\s*(\d+)?\s*[:.)\-]\s*(.*)$", re.IGNORECASE)
_DESC_RE = re.compile(rf"^{_DECOR}description\s*[:\-]\s*(.*)$", re.IGNORECASE)
_FENCE_RE = re.compile(r"^\s*```")


@dataclass(frozen=True)
class SubtaskSpec:
    name: str
    description: str
    reward: RewardProgram


@dataclass(frozen=True)
class TaskSpec:
    task_name: str
    description: str
    subtasks: Tuple[SubtaskSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "subtasks", tuple(self.subtasks))
        if not self.subtasks:
            raise TaskError(f"task {self.task_name!r} has no subtasks")
        names = [s.name for s in self.subtasks]
        if len(set(names)) != len(names):
            raise TaskError(f"task {self.task_name!r} has duplicate subtask names {names}")

    @property
    def programs(self):
        return [s.reward for s in self.subtasks]


def _strip_decor(text):
    return text.strip().strip("*_`#").strip()


def to_identifier(text: str, camel=True) -> str:
    """Coerce a header value into an identifier (``Open the door`` -> ``OpenTheDoor``)."""
    text = _strip_decor(text)
    if _IDENT.match(text):
        return text
    words = re.findall(r"[A-Za-z0-9]+", text)
    if not words:
        return ""
    if camel:
        out = "".join(w[:1].upper() + w[1:] for w in words)
    else:
        out = "-".join(w.lower() for w in words)
    return out if _IDENT.match(out) else "_" + out


# ---------------------------------------------------------------- parsing

def _split_blocks(lines):
    """Group line indices into task blocks; fenced content never starts a block."""
    blocks, current, in_fence = [], None, False
    for i, line in enumerate(lines):
        if _FENCE_RE.match(line):
            in_fence = not in_fence
        elif not in_fence and _TASK_RE.match(line) and not _SUBTASK_RE.match(line):
            current = [i]
            blocks.append(current)
            continue
        if current is not None:
            current.append(i)
    return blocks


def _parse_block(lines, idx):
    header = _TASK_RE.match(lines[idx[0]])
    task_name = to_identifier(header.group(1))
    if not task_name:
        raise TaskError(f"line {idx[0] + 1}: task header without a name")
    task_desc, subtasks = "", []
    cur = None  # dict(name, desc, reward, line)
    k = 1
    while k < len(idx):
        i = idx[k]
        line = lines[i]
        if _FENCE_RE.match(line):
            start = i
            body = []
            k += 1
            closed = False
            while k < len(idx):
                j = idx[k]
                if _FENCE_RE.match(lines[j]):
                    closed = True
                    break
                body.append(lines[j])
                k += 1
            sub_name = cur["name"] if cur else task_name
            if not closed:
                raise RewardParseError(sub_name, start + 1, 1, "unclosed code fence")
            if cur is None:
                raise RewardParseError(task_name, start + 1, 1, "reward block outside any subtask")
            if cur["reward"] is not None:
                raise RewardParseError(sub_name, start + 1, 1, "second reward block in one subtask")
            cur["reward"] = _parse_fenced(sub_name, body, start + 1)
            k += 1
            continue
        m = _SUBTASK_RE.match(line)
        if m:
            name = to_identifier(m.group(2), camel=False)
            if not name:
                raise TaskError(f"line {i + 1}: subtask header without a name")
            cur = {"name": name, "desc": "", "reward": None, "line": i + 1}
            subtasks.append(cur)
        else:
            m = _DESC_RE.match(line)
            if m:
                text = _strip_decor(m.group(1))
                if cur is None:
                    task_desc = text
                else:
                    cur["desc"] = text
        k += 1
    if not subtasks:
        raise TaskError(f"task {task_name!r} has no subtasks")
    out = []
    for s in subtasks:
        if s["reward"] is None:
            raise RewardParseError(s["name"], s["line"], 1, "missing reward block")
        out.append(SubtaskSpec(s["name"], s["desc"], s["reward"]))
    return TaskSpec(task_name, task_desc, tuple(out))


def _parse_fenced(sub_name, body, fence_line):
    source = "\n".join(body)
    try:
        return parse_reward(source)
    except RewardSyntaxError as e:
        raise RewardParseError(sub_name, fence_line + e.line, e.col, f"expected {e.expected}") from None
    except (RewardError, ValueError) as e:
        raise RewardParseError(sub_name, fence_line + 1, 1, str(e)) from None


def parse_task_blocks(text: str):
    """Parse every task block independently.

    Returns a list with one entry per block: a TaskSpec, or the TaskError
    that block raised. Lets callers keep the good tasks from a mixed response.
    """
    if not isinstance(text, str):
        raise TypeError("response text must be a string")
    lines = text.splitlines()
    results = []
    for idx in _split_blocks(lines):
        try:
            results.append(_parse_block(lines, idx))
        except TaskError as e:
            results.append(e)
    return results


def parse_task_response(text: str) -> List[TaskSpec]:
    """Strict parse: all task blocks in document order; the first failing block raises."""
    results = parse_task_blocks(text)
    if not results:
        raise NoTaskFound("response contains no 'Task:' block")
    for r in results:
        if isinstance(r, Exception):
            raise r
    return results


def dedupe_tasks(tasks):
    """Keep the first task of each name."""
    seen, out = set(), []
    for t in tasks:
        if t.task_name not in seen:
            seen.add(t.task_name)
            out.append(t)
    return out


# ---------------------------------------------------------------- validation

def validate_program(program: RewardProgram, scene: SceneSpec):
    names = set(scene.asset_names)
    for node in [t for _, t in program.terms] + list(program.success):
        if node.asset not in names:
            raise UnknownAsset(node.asset)
        asset = scene.asset(node.asset)
        if hasattr(node, "link"):
            if not asset.has_link(node.link):
                raise UnknownLink(node.asset, node.link)
            continue
        if not asset.has_joint(node.joint):
            raise UnknownJoint(node.asset, node.joint)
        joint = asset.joint(node.joint)
        if not joint.movable:
            raise UnknownJoint(node.asset, node.joint, f"{joint.kind} joint has no position")
        lo, hi = joint.position_range()
        if not lo <= node.target <= hi:
            raise TargetOutOfRange(node.joint, node.target, (lo, hi))
    return program


def validate_task(task: TaskSpec, scene: SceneSpec) -> TaskSpec:
    """Check that every reward reference resolves in ``scene``; returns the task unchanged."""
    for sub in task.subtasks:
        validate_program(sub.reward, scene)
    return task


# ---------------------------------------------------------------- persistence

def tasks_to_doc(tasks, scene: SceneSpec = None):
    return {
        "schema_version": TASK_SCHEMA,
        "scene_hash": scene_hash(scene) if scene is not None else None,
        "tasks": [
            {
                "task_name": t.task_name,
                "description": t.description,
                "subtasks": [{"name": s.name, "description": s.description, "reward": s.reward.to_source()}
                             for s in t.subtasks],
            }
            for t in tasks
        ],
    }


def persist_tasks(tasks, path, scene: SceneSpec = None):
    text = json.dumps(tasks_to_doc(tasks, scene), indent=2, sort_keys=True) + "\n"
    return atomic_write_text(path, text)


def load_tasks(path, scene: SceneSpec = None) -> List[TaskSpec]:
    """Read a task file; when ``scene`` is given its hash must match the recorded one."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise TaskFileError(f"cannot read task file {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise TaskFileError(f"task file {path} is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != TASK_SCHEMA:
        version = doc.get("schema_version") if isinstance(doc, dict) else None
        raise SchemaVersionMismatch(f"task file {path}: schema_version {version!r}, expected {TASK_SCHEMA}")
    recorded = doc.get("scene_hash")
    if scene is not None and recorded is not None and recorded != scene_hash(scene):
        raise TaskFileError(f"task file {path} was generated for a different scene")
    try:
        tasks = []
        for t in doc["tasks"]:
            subs = tuple(SubtaskSpec(s["name"], s.get("description", ""), parse_reward(s["reward"]))
                         for s in t["subtasks"])
            tasks.append(TaskSpec(t["task_name"], t.get("description", ""), subs))
    except (KeyError, TypeError, RewardError) as e:
        raise TaskFileError(f"task file {path} is malformed: {e}") from None
    return tasks
