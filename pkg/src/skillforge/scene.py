"""Scenes: assets placed in the world plus the robot base, and their manifest files."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .errors import ConfigError, SceneError
from .geometry import Pose
from .urdf import AssetModel, describe_asset, load_urdf


@dataclass(frozen=True)
class SceneSpec:
    assets: Tuple[Tuple[AssetModel, Pose], ...]
    robot_base_pose: Pose = field(default_factory=Pose)
    base_dir: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple((a, p) for a, p in self.assets))
        names = [a.name for a, _ in self.assets]
        if len(set(names)) != len(names):
            raise SceneError(f"asset names must be unique in a scene: {names}")

    @property
    def asset_names(self):
        return [a.name for a, _ in self.assets]

    def asset(self, name) -> AssetModel:
        for a, _ in self.assets:
            if a.name == name:
                return a
        raise KeyError(name)

    def pose(self, name) -> Pose:
        for a, p in self.assets:
            if a.name == name:
                return p
        raise KeyError(name)


def scene_hash(scene: SceneSpec) -> str:
    h = hashlib.sha256()
    for asset, pose in scene.assets:
        h.update(describe_asset(asset).encode())
        h.update(repr((pose.position, pose.quat)).encode())
    b = scene.robot_base_pose
    h.update(repr((b.position, b.quat)).encode())
    return h.hexdigest()


def _pose(entry):
    return Pose.from_xyz_rpy(entry.get("xyz", (0.0, 0.0, 0.0)), entry.get("rpy", (0.0, 0.0, 0.0)))


def load_scene_manifest(path):
    """Read a JSON scene manifest; returns ``(scene, seed)``.

    ``{"seed": 1, "robot_base": {"xyz": [...]}, "assets": [{"urdf": "x.urdf", "xyz": [...], "rpy": [...]}]}``
    with URDF paths relative to the manifest.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read scene manifest {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"scene manifest {path} is not valid JSON: {e}") from None
    base = os.path.dirname(os.path.abspath(path))
    assets = []
    for entry in data.get("assets", []):
        urdf_path = os.path.join(base, entry["urdf"])
        if not os.path.exists(urdf_path):
            raise ConfigError(f"scene asset URDF not found: {urdf_path}")
        assets.append((load_urdf(urdf_path), _pose(entry)))
    scene = SceneSpec(tuple(assets), _pose(data.get("robot_base", {})), base)
    return scene, int(data.get("seed", 0))
