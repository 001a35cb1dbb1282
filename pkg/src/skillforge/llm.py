"""Prompt assembly and a small chat-completions client with an on-disk cache.

Two provider modes: ``http`` posts to a chat-completions endpoint, ``replay``
answers only from the cache directory (one JSON file per request hash) and
never touches the network.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import httpx

from .errors import (EmptyQuery, EmptyScene, HttpStatusError, LLMError, MissingApiKey, NetworkError,
                     ReplayMiss)
from .fileio import atomic_write_text
from .scene import SceneSpec
from .urdf import describe_asset

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")

API_INSTRUCTIONS = """\
You write manipulation tasks for a simulated robot with a parallel-jaw gripper.
The simulator exposes these read-only queries:
  get_ee_pose() -> end-effector pose (position in meters, orientation quaternion)
  get_asset_pose(asset) -> root pose of an asset
  get_joint_state(asset, joint) -> (position, velocity) of an asset joint

Rewards are written in a closed s-expression language, not in Python:
  program  := (reward WEIGHTED+) (success PRED+) [(bonus FLOAT)]
  WEIGHTED := (term FLOAT TERM)            ; weight >= 0
  TERM     := (dist-ee ASSET.LINK)         ; minus the distance from the gripper to the link
            | (joint-err ASSET.JOINT FLOAT) ; minus the joint error to a target, divided by the joint range
            | (grasped ASSET.LINK)         ; 1 while the gripper holds the link
  PRED     := (joint-near ASSET.JOINT TARGET TOL)
            | (ee-near ASSET.LINK TOL)
            | (grasped ASSET.LINK)
All success predicates must hold at once. Joint targets must lie inside the joint range.
Use only asset, link and joint names that appear in the asset descriptions.

Answer format, one block per task:
Task: CamelCaseName
Description: one sentence
Subtask 1: kebab-case-name
Description: one sentence
```reward
(reward ...)
(success ...)
```
Subtask 2: ...
Decompose long tasks into subtasks that each end in a state the next one starts from."""

DEFAULT_QUERY = "Propose manipulation tasks for these assets, each decomposed into subtasks with a reward program."

CUP_IN_MICROWAVE_QUESTION = """\
Scene assets: Microwave, Cup.
asset: Microwave
  parts: [body, door, handle]
  joints:
    - door-joint (revolute), range [0, 1]
    - handle-joint (fixed), connects door -> handle
asset: Cup
  parts: [body]
  joints: none
Propose a long-horizon task that puts the cup inside the microwave."""

CUP_IN_MICROWAVE_ANSWER = """\
Task: PutCupInMicrowave
Description: Open the microwave, pick up the cup and place it inside.
Subtask 1: open-door
Description: Grasp the microwave handle and swing the door fully open.
```reward
(reward (term 1.0 (dist-ee Microwave.handle)) (term 1.0 (joint-err Microwave.door-joint 1.0)) (term 1.0 (grasped Microwave.handle)))
(success (joint-near Microwave.door-joint 1.0 0.05))
```
Subtask 2: pick-cup
Description: Release the handle, reach the cup and grasp it.
```reward
(reward (term 1.0 (dist-ee Cup.body)) (term 1.0 (grasped Cup.body)))
(success (grasped Cup.body))
```
Subtask 3: place-cup
Description: Carry the cup into the microwave cavity.
```reward
(reward (term 1.0 (dist-ee Microwave.body)) (term 1.0 (dist-ee Cup.body)))
(success (grasped Cup.body) (ee-near Microwave.body 0.05))
```"""

DEFAULT_EXEMPLARS = ((CUP_IN_MICROWAVE_QUESTION, CUP_IN_MICROWAVE_ANSWER),)


@dataclass(frozen=True)
class PromptBundle:
    asset_descriptions: Tuple[str, ...]
    api_instructions: str
    exemplars: Tuple[Tuple[str, str], ...]
    query: str

    def __post_init__(self):
        object.__setattr__(self, "asset_descriptions", tuple(self.asset_descriptions))
        object.__setattr__(self, "exemplars", tuple((q, a) for q, a in self.exemplars))
        if not self.exemplars:
            raise ValueError("a prompt needs at least one exemplar")

    def render(self) -> str:
        """Flat text in the fixed order: descriptions, instructions, exemplars, query."""
        parts = list(self.asset_descriptions) + [self.api_instructions]
        for q, a in self.exemplars:
            parts += [q, a]
        parts.append(self.query)
        return "\n\n".join(parts)


@dataclass(frozen=True)
class LLMRequest:
    model_id: str
    messages: Tuple[Tuple[str, str], ...]
    temperature: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple((r, c) for r, c in self.messages))
        if not self.messages:
            raise ValueError("request needs at least one message")
        for role, _ in self.messages:
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")
        if not self.temperature >= 0:
            raise ValueError("temperature must be nonnegative")

    def body(self) -> dict:
        return {
            "model": self.model_id,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
        }


@dataclass(frozen=True)
class ProviderConfig:
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    api_key_env_var: str = "OPENAI_API_KEY"
    timeout_s: float = 60.0
    max_retries: int = 3
    cache_dir: Optional[str] = None
    mode: str = "http"
    backoff_s: float = 0.5
    backoff_max_s: float = 8.0

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be nonnegative")
        if self.mode not in ("http", "replay"):
            raise ValueError(f"unknown provider mode {self.mode!r}")
        if self.mode == "replay" and not self.cache_dir:
            raise ValueError("replay mode requires cache_dir")


# ---------------------------------------------------------------- prompts

def scene_query(scene: SceneSpec, query: str) -> str:
    return f"Scene assets: {', '.join(scene.asset_names)}.\n{query}"


def assemble_prompt(scene: SceneSpec, exemplars: Sequence[Tuple[str, str]] = DEFAULT_EXEMPLARS,
                    query: str = DEFAULT_QUERY) -> PromptBundle:
    if not scene.assets:
        raise EmptyScene("cannot prompt for a scene without assets")
    descriptions = tuple(describe_asset(a) for a, _ in scene.assets)
    q = scene_query(scene, query) if query and query.strip() else ""
    return PromptBundle(descriptions, API_INSTRUCTIONS, tuple(exemplars), q)


def render_messages(bundle: PromptBundle, model_id: str = "gpt-4", temperature: float = 0.0) -> LLMRequest:
    if not bundle.query.strip():
        raise EmptyQuery("prompt query is empty")
    system = "\n\n".join(list(bundle.asset_descriptions) + [bundle.api_instructions])
    messages = [("system", system)]
    for q, a in bundle.exemplars:
        messages += [("user", q), ("assistant", a)]
    messages.append(("user", bundle.query))
    return LLMRequest(model_id, tuple(messages), temperature)


# ---------------------------------------------------------------- transport + cache

def canonical_json(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_hash(request) -> str:
    body = request.body() if isinstance(request, LLMRequest) else request
    return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()


def cache_path(cache_dir, request) -> str:
    return os.path.join(cache_dir, request_hash(request) + ".json")


def read_cache(cache_dir, request) -> Optional[str]:
    path = cache_path(cache_dir, request)
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        return None
    except (OSError, json.JSONDecodeError) as e:
        log.warning("ignoring unreadable cache entry %s: %s", path, e)
        return None
    text = doc.get("response") if isinstance(doc, dict) else None
    return text if isinstance(text, str) else None


def write_cache(cache_dir, request, text: str) -> str:
    doc = {"request": request.body(), "response": text}
    return atomic_write_text(cache_path(cache_dir, request), json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _extract_content(payload) -> str:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise LLMError("response has no choices[0].message.content") from None
    if not isinstance(content, str):
        raise LLMError("response content is not text")
    return content


def _retryable(status):
    return status == 429 or status >= 500


def query(request: LLMRequest, cfg: ProviderConfig, transport: httpx.BaseTransport = None, sleep=time.sleep) -> str:
    """Return the response text for ``request``, consulting the cache first.

    ``transport`` is handed to httpx (tests use ``httpx.MockTransport``).
    Transient failures (connection errors, 429, 5xx) are retried with
    exponential backoff, at most ``max_retries`` times.
    """
    key = None
    if cfg.mode == "http":
        key = os.environ.get(cfg.api_key_env_var)
        if not key:
            raise MissingApiKey(f"environment variable {cfg.api_key_env_var} is not set")
    if cfg.cache_dir:
        hit = read_cache(cfg.cache_dir, request)
        if hit is not None:
            return hit
    if cfg.mode == "replay":
        raise ReplayMiss(f"no cached response for request {request_hash(request)[:16]} in {cfg.cache_dir}")
    headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
    payload = canonical_json(request.body()).encode("utf-8")
    last = None
    with httpx.Client(transport=transport, timeout=cfg.timeout_s) as client:
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                sleep(min(cfg.backoff_max_s, cfg.backoff_s * 2 ** (attempt - 1)))
            try:
                resp = client.post(cfg.endpoint_url, content=payload, headers=headers)
            except httpx.TransportError as e:
                last = f"{type(e).__name__}: {e}"
                log.warning("attempt %d failed: %s", attempt + 1, last)
                continue
            if _retryable(resp.status_code):
                last = f"HTTP {resp.status_code}"
                log.warning("attempt %d failed: %s", attempt + 1, last)
                continue
            if resp.status_code >= 400:
                raise HttpStatusError(resp.status_code, resp.text)
            try:
                text = _extract_content(resp.json())
            except json.JSONDecodeError:
                raise LLMError("response body is not JSON") from None
            if cfg.cache_dir:
                write_cache(cfg.cache_dir, request, text)
            return text
    raise NetworkError(f"gave up after {cfg.max_retries + 1} attempts; last error: {last}")
