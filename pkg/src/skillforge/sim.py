"""Deterministic kinematic simulator: a free-flying gripper and articulated assets.

The robot is a position-controlled gripper surrogate. Its 11-dim
configuration mirrors a mobile manipulator::

    [base_x, base_y, ee_x, ee_y, ee_z, rot_x, rot_y, rot_z, 0, jaw_left, jaw_right]

where the six arm coordinates are the end-effector pose relative to the base
(translation and rotation vector). There is no contact dynamics: closing the
gripper near a graspable link attaches it kinematically. While attached, the
end-effector drags the link's nearest movable joint (or, for assets without
movable joints, carries the whole asset).
"""
from __future__ import annotations

import hashlib
import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptyTerminalBuffer, NoTargetPart, OutOfWorkspace, SceneError, UnknownAsset, UnknownJoint
from .geometry import (Pose, axis_angle_matrix, matrix_to_quat, quat_conj, quat_from_rotvec, quat_mul,
                       quat_to_matrix, rotvec_from_quat)
from .scene import SceneSpec
from .urdf import AssetModel

MAX_ASSETS = 4
MAX_JOINTS = 4
ROBOT_DOF = 11
JAW_WIDTH = 0.04
MIN_MOMENT_ARM = 0.01
_CORE_DIM = 2 * ROBOT_DOF + 3 + 4 + 1 + 1
_SLOT_DIM = 7 + 2 * MAX_JOINTS
_BOX_DIM = 24
OBS_DIM = 151
_RESERVED_DIM = OBS_DIM - (_CORE_DIM + MAX_ASSETS * _SLOT_DIM + _BOX_DIM)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    max_ee_speed: float = 0.5
    max_ee_ang_speed: float = 1.5
    grasp_radius: float = 0.06
    close_threshold: float = 0.4
    gripper_speed: float = 4.0  # aperture units per second
    workspace_low: tuple = (-0.5, -0.8, 0.0)
    workspace_high: tuple = (1.2, 0.8, 1.2)
    ee_home: tuple = (0.3, 0.0, 0.3)  # in the robot base frame
    reset_jitter: float = 0.02
    seed: int = 0

    def __post_init__(self):
        for name in ("dt", "max_ee_speed", "max_ee_ang_speed", "grasp_radius", "close_threshold",
                     "gripper_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SimConfig.{name} must be positive")
        if self.reset_jitter < 0:
            raise ValueError("SimConfig.reset_jitter must be nonnegative")
        if not all(lo < hi for lo, hi in zip(self.workspace_low, self.workspace_high)):
            raise ValueError("workspace bounds are empty")


@dataclass(frozen=True)
class ActionCommand:
    delta_pos: tuple = (0.0, 0.0, 0.0)
    delta_rot: tuple = (0.0, 0.0, 0.0)
    gripper_cmd: float = 0.0

    @classmethod
    def from_normalized(cls, a, cfg: SimConfig):
        """Map a policy action in [-1, 1]^7 onto per-step displacement caps."""
        a = np.clip(np.asarray(a, dtype=float), -1.0, 1.0)
        return cls(tuple(a[:3] * cfg.max_ee_speed * cfg.dt), tuple(a[3:6] * cfg.max_ee_ang_speed * cfg.dt),
                   float(a[6]))


# ---------------------------------------------------------------- kinematics

def _origin_matrix(pose: Pose):
    return pose.matrix()


def _motion(kind, axis, q):
    m = np.eye(4)
    if kind in ("revolute", "continuous"):
        m[:3, :3] = axis_angle_matrix(axis, q)
    elif kind == "prismatic":
        m[:3, 3] = np.asarray(axis) * q
    return m


def _box_corners(half, origin_m):
    pts = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float) * half
    return pts @ origin_m[:3, :3].T + origin_m[:3, 3]


def _geometry_points(geometry, base_dir):
    if geometry is None:
        return np.zeros((1, 3))
    origin_m = geometry.origin.matrix()
    if geometry.kind == "box":
        return _box_corners(np.asarray(geometry.size) / 2, origin_m)
    if geometry.kind == "cylinder":
        r, length = geometry.size
        return _box_corners(np.array([r, r, length / 2]), origin_m)
    if geometry.kind == "sphere":
        return _box_corners(np.full(3, geometry.size[0]), origin_m)
    path = geometry.filename
    if base_dir is not None and not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    if not os.path.exists(path):
        return np.zeros((1, 3))
    from .physics import read_obj

    v = read_obj(path).vertices * np.asarray(geometry.size)
    return v @ origin_m[:3, :3].T + origin_m[:3, 3]


class AssetKinematics:
    """Precomputed tree traversal for one asset."""

    def __init__(self, asset: AssetModel, base_dir=None):
        self.asset = asset
        self.name = asset.name
        self.link_names = [link.name for link in asset.links]
        self.movable = [j.name for j in asset.joints if j.movable]
        if len(self.movable) > MAX_JOINTS:
            raise SceneError(f"asset {asset.name!r} has {len(self.movable)} movable joints (max {MAX_JOINTS})")
        self.qidx = {n: i for i, n in enumerate(self.movable)}
        self.ranges = [asset.joint(n).position_range() for n in self.movable]
        self.lower = np.array([r[0] for r in self.ranges])
        self.upper = np.array([r[1] for r in self.ranges])
        self.free = not self.movable
        children = {}
        for j in asset.joints:
            children.setdefault(j.parent, []).append(j)
        self.origins = {j.name: _origin_matrix(j.origin) for j in asset.joints}
        self.order = []
        stack = [asset.root_link]
        while stack:
            link = stack.pop()
            for j in reversed(children.get(link, [])):
                self.order.append((j, self.origins[j.name], self.qidx.get(j.name)))
                stack.append(j.child)
        self.grasp_joint = {}
        for link in self.link_names:
            jname, cur = None, link
            while True:
                pj = asset.parent_joint(cur)
                if pj is None:
                    break
                if pj.movable:
                    jname = pj.name
                    break
                cur = pj.parent
            self.grasp_joint[link] = jname
        self.local_points = {link.name: _geometry_points(link.geometry_ref, base_dir) for link in asset.links}

    def link_transforms(self, root_T, q):
        out = {self.asset.root_link: root_T}
        for j, origin, qi in self.order:
            t = out[j.parent] @ origin
            if qi is not None:
                t = t @ _motion(j.kind, j.axis, q[qi])
            out[j.child] = t
        return out

    def joint_frame(self, link_T, joint_name):
        """World transform of a joint frame before its own motion is applied."""
        j = self.asset.joint(joint_name)
        return link_T[(self.name, j.parent)] @ self.origins[joint_name], j


class SceneKinematics:
    def __init__(self, scene: SceneSpec):
        self.scene = scene
        self.assets = [AssetKinematics(a, scene.base_dir) for a, _ in scene.assets]
        if len(self.assets) > MAX_ASSETS:
            raise SceneError(f"scene has {len(self.assets)} assets (max {MAX_ASSETS})")
        self.index = {k.name: i for i, k in enumerate(self.assets)}

    def asset_index(self, name):
        try:
            return self.index[name]
        except KeyError:
            raise UnknownAsset(name) from None


# ---------------------------------------------------------------- state

@dataclass(frozen=True, eq=False)
class GraspInfo:
    asset: str
    link: str
    mode: str  # "joint" or "free"
    joint: Optional[str]
    offset: np.ndarray  # ee pose in the grasped link frame ("joint") or asset root in ee frame ("free")


@dataclass(frozen=True, eq=False)
class SimState:
    q: np.ndarray
    qdot: np.ndarray
    ee_pos: np.ndarray
    ee_quat: np.ndarray
    gripper_aperture: float
    grasp_info: Optional[GraspInfo]
    root_T: tuple
    root_quat: tuple
    joint_pos: tuple
    joint_vel: tuple
    time: float
    kin: SceneKinematics = field(repr=False)
    link_T: dict = field(repr=False)

    # reward-program state protocol
    @property
    def ee_position(self):
        return self.ee_pos

    @property
    def grasp(self):
        g = self.grasp_info
        return None if g is None else (g.asset, g.link)

    @property
    def ee_pose(self) -> Pose:
        return Pose(tuple(self.ee_pos), tuple(self.ee_quat))

    def link_position(self, asset, link):
        return self.link_T[(asset, link)][:3, 3]

    def link_transform(self, asset, link):
        return self.link_T[(asset, link)]

    def joint_position(self, asset, joint):
        i = self.kin.asset_index(asset)
        try:
            return float(self.joint_pos[i][self.kin.assets[i].qidx[joint]])
        except KeyError:
            raise UnknownJoint(asset, joint) from None

    def joint_velocity(self, asset, joint):
        i = self.kin.asset_index(asset)
        try:
            return float(self.joint_vel[i][self.kin.assets[i].qidx[joint]])
        except KeyError:
            raise UnknownJoint(asset, joint) from None

    def joint_range(self, asset, joint):
        k = self.kin.assets[self.kin.asset_index(asset)]
        try:
            return k.ranges[k.qidx[joint]]
        except KeyError:
            raise UnknownJoint(asset, joint) from None

    def asset_pose(self, asset) -> Pose:
        return Pose.from_matrix(self.root_T[self.kin.asset_index(asset)])

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.q, self.qdot, self.ee_pos, self.ee_quat, *self.root_T, *self.root_quat, *self.joint_pos,
                    *self.joint_vel):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        h.update(repr((self.gripper_aperture, self.time, self.grasp)).encode())
        if self.grasp_info is not None:
            h.update(self.grasp_info.offset.tobytes())
        return h.hexdigest()


def _floats(a):
    return [float(v) for v in np.ravel(a)]


def state_to_dict(state: SimState) -> dict:
    """JSON-ready snapshot; floats survive the round trip bit for bit."""
    g = state.grasp_info
    return {
        "q": _floats(state.q), "qdot": _floats(state.qdot),
        "ee_pos": _floats(state.ee_pos), "ee_quat": _floats(state.ee_quat),
        "aperture": float(state.gripper_aperture), "time": float(state.time),
        "grasp": None if g is None else {"asset": g.asset, "link": g.link, "mode": g.mode, "joint": g.joint,
                                         "offset": _floats(g.offset)},
        "root_T": [_floats(t) for t in state.root_T],
        "root_quat": [_floats(t) for t in state.root_quat],
        "joint_pos": [_floats(t) for t in state.joint_pos],
        "joint_vel": [_floats(t) for t in state.joint_vel],
    }


def state_from_dict(doc: dict, kin: SceneKinematics) -> SimState:
    arr = lambda v: np.array(v, dtype=float)  # noqa: E731
    g = doc["grasp"]
    grasp = None if g is None else GraspInfo(g["asset"], g["link"], g["mode"], g["joint"],
                                             arr(g["offset"]).reshape(4, 4))
    root_T = tuple(arr(t).reshape(4, 4) for t in doc["root_T"])
    jpos = tuple(arr(t) for t in doc["joint_pos"])
    if len(root_T) != len(kin.assets):
        raise SceneError("stored state has a different number of assets than the scene")
    link_T = {}
    for i, k in enumerate(kin.assets):
        for name, t in k.link_transforms(root_T[i], jpos[i]).items():
            link_T[(k.name, name)] = t
    return SimState(arr(doc["q"]), arr(doc["qdot"]), arr(doc["ee_pos"]), arr(doc["ee_quat"]),
                    float(doc["aperture"]), grasp, root_T, tuple(arr(t) for t in doc["root_quat"]), jpos,
                    tuple(arr(t) for t in doc["joint_vel"]), float(doc["time"]), kin, link_T)


class DefaultInit:
    """Canonical load state plus a small uniform end-effector jitter."""


class TerminalBuffer:
    """FIFO store of successful terminal states used to seed the next subtask."""

    def __init__(self, capacity=1000, states=()):
        self.states = deque(states, maxlen=capacity)

    def add(self, state: SimState):
        self.states.append(state)

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def sample(self, rng: np.random.Generator) -> SimState:
        if not self.states:
            raise EmptyTerminalBuffer("terminal buffer has no states to reset from")
        return self.states[int(rng.integers(len(self.states)))]


def _ball_sample(rng, radius):
    if radius <= 0:
        return np.zeros(3)
    while True:
        v = rng.uniform(-1.0, 1.0, size=3)
        if v @ v <= 1.0:
            return v * radius


# ---------------------------------------------------------------- simulator

class Simulator:
    """Single-threaded simulator instance; vectorize by creating several."""

    def __init__(self, scene: SceneSpec, cfg: SimConfig = None, kin: "SceneKinematics" = None):
        self.cfg = cfg or SimConfig()
        self.scene = scene
        self.kin = kin if kin is not None else SceneKinematics(scene)
        self._lo = np.array(self.cfg.workspace_low, dtype=float)
        self._hi = np.array(self.cfg.workspace_high, dtype=float)
        for asset, pose in scene.assets:
            p = np.array(pose.position)
            if np.any(p < self._lo) or np.any(p > self._hi):
                raise OutOfWorkspace(f"asset {asset.name!r} at {pose.position} is outside the workspace")
        base = scene.robot_base_pose
        self._base_pos = np.array(base.position)
        self._base_R = quat_to_matrix(base.quat)
        self._base_quat = np.array(base.quat)
        self._home_pos = self._base_pos + self._base_R @ np.array(self.cfg.ee_home, dtype=float)
        self._home_root = [pose.matrix() for _, pose in scene.assets]
        self.target = None
        self.graspable = set()
        self._set_graspable(())
        self._load_canonical()

    # -- task binding
    def set_program(self, program):
        """Bind a reward program: picks the observed target part and graspable links."""
        self.target = program.first_link() if program is not None else None
        self._set_graspable([program] if program is not None else [])

    def set_programs(self, programs, target_program=None):
        self.target = (target_program or programs[0]).first_link()
        self._set_graspable(programs)

    def _set_graspable(self, programs):
        names = set()
        for k in self.kin.assets:
            for link in k.link_names:
                if link == "handle":
                    names.add((k.name, link))
        for prog in programs:
            for kind, asset, name in prog.references():
                if kind in ("dist-ee", "grasped"):
                    names.add((asset, name))
        keep = set()
        for asset, link in names:
            if asset not in self.kin.index:
                continue
            k = self.kin.assets[self.kin.index[asset]]
            if link in k.link_names and (k.free or k.grasp_joint[link] is not None):
                keep.add((asset, link))
        self.graspable = keep

    # -- state plumbing
    def _load_canonical(self):
        self.ee_pos = self._home_pos.copy()
        self.ee_quat = self._base_quat.copy()
        self.aperture = 1.0
        self.grasp_info = None
        self.root_T = [m.copy() for m in self._home_root]
        self.root_quat = [np.array(pose.quat) for _, pose in self.scene.assets]
        self.jpos = [k.lower.copy() for k in self.kin.assets]
        self.jvel = [np.zeros(len(k.movable)) for k in self.kin.assets]
        self.time = 0.0
        self._refresh_links()
        self.q = self._robot_q()
        self.qdot = np.zeros(ROBOT_DOF)
        self._state = self._snapshot()

    def _refresh_links(self, only=None):
        if only is None:
            self.link_T = {}
            for i, k in enumerate(self.kin.assets):
                for name, t in k.link_transforms(self.root_T[i], self.jpos[i]).items():
                    self.link_T[(k.name, name)] = t
        else:
            k = self.kin.assets[only]
            self.link_T = dict(self.link_T)
            for name, t in k.link_transforms(self.root_T[only], self.jpos[only]).items():
                self.link_T[(k.name, name)] = t

    def _robot_q(self):
        rel = self._base_R.T @ (self.ee_pos - self._base_pos)
        rot = rotvec_from_quat(quat_mul(quat_conj(self._base_quat), self.ee_quat))
        jaw = self.aperture * JAW_WIDTH
        return np.array([self._base_pos[0], self._base_pos[1], rel[0], rel[1], rel[2],
                         rot[0], rot[1], rot[2], 0.0, jaw, jaw])

    def _snapshot(self) -> SimState:
        return SimState(self.q, self.qdot, self.ee_pos, self.ee_quat, self.aperture, self.grasp_info,
                        tuple(self.root_T), tuple(self.root_quat), tuple(self.jpos), tuple(self.jvel), self.time,
                        self.kin, self.link_T)

    def restore(self, state: SimState):
        """Load an exact snapshot (no jitter)."""
        if state.kin is not self.kin and list(state.kin.index) != list(self.kin.index):
            raise SceneError("state belongs to a different scene")
        self.ee_pos = state.ee_pos
        self.ee_quat = state.ee_quat
        self.aperture = state.gripper_aperture
        self.grasp_info = state.grasp_info
        self.root_T = list(state.root_T)
        self.root_quat = list(state.root_quat)
        self.jpos = list(state.joint_pos)
        self.jvel = list(state.joint_vel)
        self.time = state.time
        self.q = state.q
        self.qdot = state.qdot
        self.link_T = state.link_T
        self._state = state
        return state

    @property
    def state(self) -> SimState:
        return self._state

    # -- episode control
    def reset(self, rng: np.random.Generator, init=None) -> SimState:
        """Reset to the canonical state or to a sampled terminal state, then jitter the end-effector."""
        if init is None or isinstance(init, DefaultInit):
            self._load_canonical()
        elif isinstance(init, TerminalBuffer):
            self.restore(init.sample(rng))
        else:
            raise TypeError(f"unknown init distribution {init!r}")
        offset = _ball_sample(rng, self.cfg.reset_jitter)
        self.ee_pos = np.clip(self.ee_pos + offset, self._lo, self._hi)
        g = self.grasp_info
        if g is not None:
            self.grasp_info = self._attach_info(g.asset, g.link)
        self.time = 0.0
        self.q = self._robot_q()
        self.qdot = np.zeros(ROBOT_DOF)
        self.jvel = [np.zeros(len(k.movable)) for k in self.kin.assets]
        self._state = self._snapshot()
        return self._state

    def _ee_matrix(self):
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.ee_quat)
        m[:3, 3] = self.ee_pos
        return m

    def _attach_info(self, asset, link):
        i = self.kin.index[asset]
        k = self.kin.assets[i]
        if k.free:
            offset = np.linalg.solve(self._ee_matrix(), self.root_T[i])
            return GraspInfo(asset, link, "free", None, offset)
        offset = np.linalg.solve(self.link_T[(asset, link)], self._ee_matrix())
        return GraspInfo(asset, link, "joint", k.grasp_joint[link], offset)

    def _nearest_graspable(self):
        best, best_d = None, self.cfg.grasp_radius
        for key in sorted(self.graspable):
            p = self.link_T[key][:3, 3]
            d = math.sqrt(float((self.ee_pos[0] - p[0]) ** 2 + (self.ee_pos[1] - p[1]) ** 2
                                + (self.ee_pos[2] - p[2]) ** 2))
            if d <= best_d:
                best, best_d = key, d
        return best

    def step(self, action: ActionCommand) -> SimState:
        cfg = self.cfg
        dp = np.asarray(action.delta_pos, dtype=float)
        n = math.sqrt(float(dp @ dp))
        cap = cfg.max_ee_speed * cfg.dt
        if n > cap:
            dp = dp * (cap / n)
        dr = np.asarray(action.delta_rot, dtype=float)
        nr = math.sqrt(float(dr @ dr))
        cap_r = cfg.max_ee_ang_speed * cfg.dt
        if nr > cap_r:
            dr = dr * (cap_r / nr)
        g_cmd = min(1.0, max(-1.0, float(action.gripper_cmd)))

        old_q = self.q
        old_jpos = self.jpos
        g = self.grasp_info
        if g is not None and g.mode == "joint":
            self._drag_joint(g, dp)
        else:
            if n > 0:
                self.ee_pos = np.clip(self.ee_pos + dp, self._lo, self._hi)
            if nr > 0:
                q = quat_mul(quat_from_rotvec(dr), self.ee_quat)
                self.ee_quat = q / math.sqrt(float(q @ q))
            if g is not None and (n > 0 or nr > 0):
                i = self.kin.index[g.asset]
                self.root_T = list(self.root_T)
                self.root_T[i] = self._ee_matrix() @ g.offset
                self.root_quat = list(self.root_quat)
                self.root_quat[i] = matrix_to_quat(self.root_T[i][:3, :3])
                self._refresh_links(only=i)

        a0 = self.aperture
        a1 = min(1.0, max(0.0, a0 + g_cmd * cfg.gripper_speed * cfg.dt))
        self.aperture = a1
        thr = cfg.close_threshold
        if self.grasp_info is not None and a1 > thr:
            self.grasp_info = None
        elif self.grasp_info is None and a0 >= thr > a1:
            hit = self._nearest_graspable()
            if hit is not None:
                self.grasp_info = self._attach_info(*hit)

        self.time += cfg.dt
        self.q = self._robot_q()
        self.qdot = (self.q - old_q) / cfg.dt
        if self.jpos is not old_jpos:
            self.jvel = [(a - b) / cfg.dt for a, b in zip(self.jpos, old_jpos)]
        elif any(v.any() for v in self.jvel):
            self.jvel = [np.zeros_like(v) for v in self.jvel]
        self._state = self._snapshot()
        return self._state

    def _drag_joint(self, g: GraspInfo, dp):
        i = self.kin.index[g.asset]
        k = self.kin.assets[i]
        frame, joint = k.joint_frame(self.link_T, g.joint)
        axis = frame[:3, :3] @ np.asarray(joint.axis)
        if joint.kind == "prismatic":
            dq = float(dp @ axis)
        else:
            r = self.ee_pos - frame[:3, 3]
            r_perp = r - (r @ axis) * axis
            rn = math.sqrt(float(r_perp @ r_perp))
            if rn < 1e-12:
                dq = 0.0
            else:
                tangent = np.cross(axis, r_perp / rn)
                dq = float(dp @ tangent) / max(rn, MIN_MOMENT_ARM)
        if dq == 0.0:
            return
        qi = k.qidx[g.joint]
        new = self.jpos[i].copy()
        new[qi] = min(k.upper[qi], max(k.lower[qi], new[qi] + dq))
        if new[qi] == self.jpos[i][qi]:
            return
        self.jpos = list(self.jpos)
        self.jpos[i] = new
        self._refresh_links(only=i)
        ee = self.link_T[(g.asset, g.link)] @ g.offset
        self.ee_pos = ee[:3, 3].copy()
        self.ee_quat = matrix_to_quat(ee[:3, :3])

    # -- queries exposed to the LLM prompt
    def get_ee_pose(self) -> Pose:
        return self._state.ee_pose

    def get_asset_pose(self, asset) -> Pose:
        return self._state.asset_pose(asset)

    def get_joint_state(self, asset, joint):
        return self._state.joint_position(asset, joint), self._state.joint_velocity(asset, joint)

    # -- observation
    def target_box(self, state: SimState = None):
        """World AABB corners of the target link geometry, ordered (-x..+x, -y..+y, -z..+z)."""
        state = state or self._state
        if self.target is None:
            raise NoTargetPart("no target part bound; call set_program first")
        asset, link = self.target
        k = self.kin.assets[self.kin.asset_index(asset)]
        t = state.link_T[(asset, link)]
        pts = k.local_points[link] @ t[:3, :3].T + t[:3, 3]
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        return np.array([[(lo, hi)[sx][0], (lo, hi)[sy][1], (lo, hi)[sz][2]]
                         for sx in (0, 1) for sy in (0, 1) for sz in (0, 1)])

    def observe(self, state: SimState = None) -> np.ndarray:
        state = state or self._state
        obs = np.zeros(OBS_DIM)
        obs[0:11] = state.q
        obs[11:22] = state.qdot
        obs[22:25] = state.ee_pos
        obs[25:29] = state.ee_quat
        obs[29] = state.gripper_aperture
        obs[30] = 0.0 if state.grasp_info is None else 1.0
        base = _CORE_DIM
        for i, k in enumerate(self.kin.assets):
            s = base + i * _SLOT_DIM
            t = state.root_T[i]
            obs[s:s + 3] = t[:3, 3]
            obs[s + 3:s + 7] = state.root_quat[i]
            nj = len(k.movable)
            obs[s + 7:s + 7 + nj] = state.joint_pos[i]
            obs[s + 7 + MAX_JOINTS:s + 7 + MAX_JOINTS + nj] = state.joint_vel[i]
        s = base + MAX_ASSETS * _SLOT_DIM
        obs[s:s + _BOX_DIM] = self.target_box(state).ravel()
        return obs


def get_ee_pose(sim: Simulator) -> Pose:
    return sim.get_ee_pose()


def get_asset_pose(sim: Simulator, asset) -> Pose:
    return sim.get_asset_pose(asset)


def get_joint_state(sim: Simulator, asset, joint):
    return sim.get_joint_state(asset, joint)


def load_scene(scene: SceneSpec, cfg: SimConfig = None) -> Simulator:
    return Simulator(scene, cfg)
