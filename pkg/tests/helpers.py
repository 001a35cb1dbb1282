"""Shared builders and hypothesis strategies for the test suite."""
import math

import numpy as np
from hypothesis import strategies as st

from skillforge.geometry import Pose, quat_from_rpy
from skillforge.reward import check_success
from skillforge.sim import ActionCommand
from skillforge.urdf import AssetModel, Geometry, InertialProps, Joint, Link, PhysicalParams

finite = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False, allow_infinity=False)
positive = st.floats(min_value=1e-3, max_value=10.0, allow_nan=False, allow_infinity=False)
name_chars = st.sampled_from("abcdefghijklmnopqrstuvwxyz")


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def inertia_from(principal, rot):
    m = rot @ np.diag(principal) @ rot.T
    return tuple(map(tuple, 0.5 * (m + m.T)))


@st.composite
def poses(draw):
    xyz = draw(st.tuples(finite, finite, finite))
    # keep away from pitch = +-pi/2 where roll and yaw are not separable
    rpy = (draw(st.floats(-3.1, 3.1)), draw(st.floats(-1.5, 1.5)), draw(st.floats(-3.1, 3.1)))
    return Pose(xyz, tuple(quat_from_rpy(*rpy)))


@st.composite
def inertials(draw):
    a = draw(st.floats(0.01, 1.0))
    b = draw(st.floats(0.01, 1.0))
    c = draw(st.floats(abs(a - b) + 1e-3, a + b))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rot = random_rotation(np.random.default_rng(seed))
    return InertialProps(draw(positive), draw(st.tuples(finite, finite, finite)), inertia_from((a, b, c), rot))


@st.composite
def geometries(draw):
    kind = draw(st.sampled_from(["box", "cylinder", "sphere", "mesh"]))
    n = {"box": 3, "cylinder": 2, "sphere": 1, "mesh": 3}[kind]
    size = tuple(draw(positive) for _ in range(n))
    filename = "meshes/part.obj" if kind == "mesh" else None
    return Geometry(kind, size, filename, draw(poses()))


@st.composite
def joints_for(draw, name, parent, child):
    kind = draw(st.sampled_from(["revolute", "prismatic", "fixed", "continuous"]))
    axis = draw(st.tuples(finite, finite, finite).filter(lambda v: math.sqrt(sum(x * x for x in v)) > 0.1))
    limits = None
    if kind in ("revolute", "prismatic"):
        lo = draw(st.floats(-3.0, 1.0))
        limits = (lo, lo + draw(st.floats(0.0, 3.0)))
    return Joint(name, kind, parent, child, axis, draw(poses()), limits)


@st.composite
def asset_models(draw, max_links=6):
    n = draw(st.integers(1, max_links))
    names = [f"link{i}" for i in range(n)]
    links = tuple(Link(nm, draw(st.none() | inertials()), draw(st.none() | geometries())) for nm in names)
    joints = []
    for i in range(1, n):
        parent = names[draw(st.integers(0, i - 1))]
        joints.append(draw(joints_for(f"joint{i}", parent, names[i])))
    physical = None
    if draw(st.booleans()):
        physical = PhysicalParams(draw(positive), (draw(positive), draw(positive), draw(positive)), "Thing")
    name = "Asset" + "".join(draw(st.lists(name_chars, min_size=1, max_size=6)))
    return AssetModel(name, links, tuple(joints), None, physical)


def box_link(name, size, origin=Pose(), mass=1.0):
    return Link(name, InertialProps(mass, origin.position, ((0.1, 0, 0), (0, 0.1, 0), (0, 0, 0.1))),
                Geometry("box", size, None, origin))


def storage_furniture():
    """Cabinet with a drawer (prismatic) and a door (revolute)."""
    links = (box_link("body", (0.5, 0.4, 0.8)), box_link("drawer", (0.4, 0.35, 0.15)),
             box_link("door", (0.02, 0.4, 0.5)))
    joints = (Joint("drawer-joint", "prismatic", "body", "drawer", (1, 0, 0), Pose((0.05, 0, 0.3)), (0.0, 0.3)),
              Joint("door-joint", "revolute", "body", "door", (0, 0, 1), Pose((0.25, -0.2, -0.1)), (0.0, 1.57)))
    return AssetModel("StorageFurniture", links, joints)


def asset_corpus(n=20, seed=0):
    """Deterministic mixed corpus of valid assets (articulated, rigid, every joint kind)."""
    rng = np.random.default_rng(seed)
    out = [storage_furniture()]
    kinds = ("revolute", "prismatic", "fixed", "continuous")
    while len(out) < n:
        k = len(out)
        n_links = 1 + k % 5
        links = []
        for i in range(n_links):
            principal = np.sort(rng.uniform(0.01, 1.0, 2))
            principal = np.append(principal, rng.uniform(principal[1] - principal[0] + 1e-3, principal.sum()))
            inertial = InertialProps(float(rng.uniform(0.05, 20)), tuple(rng.uniform(-0.3, 0.3, 3)),
                                     inertia_from(principal, random_rotation(rng)))
            geom = Geometry(("box", "cylinder", "sphere", "mesh")[i % 4],
                            tuple(rng.uniform(0.01, 0.5, (3, 2, 1, 3)[i % 4])),
                            f"meshes/part{i}.obj" if i % 4 == 3 else None,
                            Pose.from_xyz_rpy(rng.uniform(-0.2, 0.2, 3), rng.uniform(-1.2, 1.2, 3)))
            links.append(Link(f"part{i}", inertial, geom))
        joints = []
        for i in range(1, n_links):
            kind = kinds[(k + i) % 4]
            lo = float(rng.uniform(-1.5, 0.0))
            limits = (lo, lo + float(rng.uniform(0.1, 2.0))) if kind in ("revolute", "prismatic") else None
            joints.append(Joint(f"joint{i}", kind, f"part{int(rng.integers(0, i))}", f"part{i}",
                                tuple(rng.standard_normal(3)),
                                Pose.from_xyz_rpy(rng.uniform(-0.5, 0.5, 3), rng.uniform(-1.2, 1.2, 3)), limits))
        physical = None
        if n_links == 1:
            physical = PhysicalParams(float(rng.uniform(0.1, 2)), tuple(rng.uniform(0.02, 0.4, 3)), "Thing")
        out.append(AssetModel(f"Asset{k:02d}", tuple(links), tuple(joints), None, physical))
    return out


class StubState:
    """Minimal object satisfying the reward-program state protocol."""

    def __init__(self, ee=(0.0, 0.0, 0.0), links=None, joints=None, ranges=None, grasp=None):
        self.ee_position = np.asarray(ee, dtype=float)
        self.links = {k: np.asarray(v, dtype=float) for k, v in (links or {}).items()}
        self.joints = dict(joints or {})
        self.ranges = dict(ranges or {})
        self.grasp = grasp

    def link_position(self, asset, link):
        return self.links[(asset, link)]

    def joint_position(self, asset, joint):
        return self.joints[(asset, joint)]

    def joint_range(self, asset, joint):
        return self.ranges.get((asset, joint), (0.0, 1.0))


class ScriptedPolicy:
    """Drives the end-effector to a fixed link and closes the gripper once there.

    Exposes ``mean(obs)`` like PolicyNet, reading ee position and target-box
    center straight from the observation.
    """

    obs_dim = 151
    act_dim = 7

    def __init__(self, close_within=0.03, gain=4.0):
        self.close_within = close_within
        self.gain = gain

    def mean(self, obs):
        obs = np.atleast_2d(obs)
        ee = obs[:, 22:25]
        center = obs[:, 91:115].reshape(-1, 8, 3).mean(axis=1)
        d = center - ee
        out = np.zeros((len(obs), 7))
        out[:, :3] = np.clip(self.gain * d, -1, 1)
        near = np.linalg.norm(d, axis=1) < self.close_within
        out[:, 6] = np.where(near, -1.0, 1.0)
        return out


class IdlePolicy:
    """Never moves; every episode times out."""

    obs_dim = 151
    act_dim = 7

    def mean(self, obs):
        return np.zeros((len(np.atleast_2d(obs)), 7))


def drive_to(sim, target, steps=200, close=False):
    """Move the ee of ``sim`` toward a world point; optionally close the gripper at the end."""
    state = sim.state
    for _ in range(steps):
        d = np.asarray(target, dtype=float) - state.ee_pos
        if np.linalg.norm(d) < 1e-9:
            break
        state = sim.step(ActionCommand(tuple(d), (0, 0, 0), 1.0))
    if close:
        for _ in range(5):
            state = sim.step(ActionCommand((0, 0, 0), (0, 0, 0), -1.0))
    return state


def run_until_success(sim, policy, program, max_steps=256):
    for t in range(max_steps):
        a = policy.mean(sim.observe())[0]
        st_ = sim.step(ActionCommand.from_normalized(a, sim.cfg))
        if check_success(program, st_):
            return t + 1
    return None


ACCEPTANCE_LINES = []


class criterion:
    """Context manager that records one PASS/FAIL line for an acceptance criterion.

    Measurements stored in the yielded dict are printed next to the verdict.
    """

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.details = {}

    def __enter__(self):
        return self.details

    def __exit__(self, exc_type, exc, tb):
        verdict = "PASS" if exc_type is None else "FAIL"
        detail = ", ".join(f"{k}={v}" for k, v in self.details.items())
        if exc_type is not None and not self.details:
            detail = f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        line = f"criterion {self.number} {verdict}  {self.title}  [{detail}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return False
