"""In-memory asset model with URDF parsing, emission and text descriptions.

Only the subset of URDF the pipeline consumes is understood: links with
inertial and visual/collision geometry, and joints with origins, axes and
limits. Everything else (transmissions, gazebo blocks, materials) is skipped.
"""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (DanglingLinkRef, DuplicateName, InvalidValue, KinematicCycle,
                     MalformedXml, MissingLimits, UrdfError)
from .geometry import Pose

JOINT_KINDS = ("revolute", "prismatic", "fixed", "continuous")
GEOMETRY_KINDS = ("mesh", "box", "cylinder", "sphere")


def _close(a, b, tol):
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), atol=tol, rtol=0)


@dataclass(frozen=True)
class InertialProps:
    mass: float
    center_of_mass: tuple = (0.0, 0.0, 0.0)
    inertia: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "center_of_mass", tuple(float(v) for v in self.center_of_mass))
        object.__setattr__(self, "inertia", tuple(tuple(float(v) for v in row) for row in self.inertia))
        if not (math.isfinite(self.mass) and self.mass > 0):
            raise InvalidValue(f"mass must be positive, got {self.mass}")
        m = np.array(self.inertia)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise InvalidValue("inertia must be a finite 3x3 tensor")
        scale = max(1e-300, float(np.abs(m).max()))
        if not np.allclose(m, m.T, atol=1e-12 * scale, rtol=0):
            raise InvalidValue("inertia tensor is not symmetric")
        eig = np.linalg.eigvalsh(m)
        tol = 1e-9 * scale
        if eig.min() < -tol:
            raise InvalidValue(f"inertia tensor not positive semi-definite: {eig}")
        a, b, c = eig
        if a + b < c - tol or a + c < b - tol or b + c < a - tol:
            raise InvalidValue(f"principal moments violate triangle inequality: {eig}")

    def matrix(self):
        return np.array(self.inertia)

    def isclose(self, other, tol=1e-9):
        return (abs(self.mass - other.mass) <= tol
                and _close(self.center_of_mass, other.center_of_mass, tol)
                and _close(self.inertia, other.inertia, tol))


@dataclass(frozen=True)
class Geometry:
    """Visual/collision shape of a link.

    ``size`` is (x, y, z) for boxes, (radius, length) for cylinders,
    (radius,) for spheres and the per-axis scale for meshes.
    """

    kind: str
    size: tuple = (1.0, 1.0, 1.0)
    filename: Optional[str] = None
    origin: Pose = field(default_factory=Pose)

    def __post_init__(self):
        if self.kind not in GEOMETRY_KINDS:
            raise InvalidValue(f"unsupported geometry {self.kind!r}")
        object.__setattr__(self, "size", tuple(float(v) for v in self.size))
        expected = {"mesh": 3, "box": 3, "cylinder": 2, "sphere": 1}[self.kind]
        if len(self.size) != expected or not all(math.isfinite(v) and v > 0 for v in self.size):
            raise InvalidValue(f"bad {self.kind} size {self.size}")
        if self.kind == "mesh" and not self.filename:
            raise InvalidValue("mesh geometry needs a filename")

    def isclose(self, other, tol=1e-9):
        return (self.kind == other.kind and self.filename == other.filename
                and _close(self.size, other.size, tol) and self.origin.isclose(other.origin, tol))


@dataclass(frozen=True)
class PhysicalParams:
    mass: float
    size: tuple
    category: str

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "size", tuple(float(v) for v in self.size))
        if len(self.size) != 3 or not all(math.isfinite(v) and v > 0 for v in self.size):
            raise InvalidValue(f"size must be three positive lengths, got {self.size}")
        if not (math.isfinite(self.mass) and self.mass > 0):
            raise InvalidValue(f"mass must be positive, got {self.mass}")
        if not self.category:
            raise InvalidValue("category must be non-empty")

    def isclose(self, other, tol=1e-9):
        return (self.category == other.category and abs(self.mass - other.mass) <= tol
                and _close(self.size, other.size, tol))


@dataclass(frozen=True)
class Link:
    name: str
    inertial: Optional[InertialProps] = None
    geometry_ref: Optional[Geometry] = None

    def isclose(self, other, tol=1e-9):
        if self.name != other.name:
            return False
        if (self.inertial is None) != (other.inertial is None):
            return False
        if (self.geometry_ref is None) != (other.geometry_ref is None):
            return False
        if self.inertial is not None and not self.inertial.isclose(other.inertial, tol):
            return False
        if self.geometry_ref is not None and not self.geometry_ref.isclose(other.geometry_ref, tol):
            return False
        return True


@dataclass(frozen=True)
class Joint:
    name: str
    kind: str
    parent: str
    child: str
    axis: tuple = (1.0, 0.0, 0.0)
    origin: Pose = field(default_factory=Pose)
    limits: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in JOINT_KINDS:
            raise InvalidValue(f"joint {self.name!r}: unsupported type {self.kind!r}")
        axis = np.asarray(self.axis, dtype=float)
        n = float(np.linalg.norm(axis)) if axis.shape == (3,) else float("nan")
        if not (math.isfinite(n) and n > 0):
            raise InvalidValue(f"joint {self.name!r}: invalid axis {self.axis}")
        object.__setattr__(self, "axis", tuple(float(v) for v in axis / n))
        if self.kind in ("revolute", "prismatic"):
            if self.limits is None:
                raise MissingLimits(f"joint {self.name!r} ({self.kind}) has no limits")
            lo, hi = (float(v) for v in self.limits)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise InvalidValue(f"joint {self.name!r}: bad limits [{lo}, {hi}]")
            object.__setattr__(self, "limits", (lo, hi))
        else:
            object.__setattr__(self, "limits", None)

    @property
    def movable(self):
        return self.kind != "fixed"

    def position_range(self):
        """Limits used by simulation; continuous joints are clamped to +-4 pi."""
        if self.kind == "continuous":
            return (-4 * math.pi, 4 * math.pi)
        if self.limits is None:
            return (0.0, 0.0)
        return self.limits

    def isclose(self, other, tol=1e-9):
        if (self.name, self.kind, self.parent, self.child) != (other.name, other.kind, other.parent, other.child):
            return False
        if (self.limits is None) != (other.limits is None):
            return False
        if self.limits is not None and not _close(self.limits, other.limits, tol):
            return False
        return _close(self.axis, other.axis, tol) and self.origin.isclose(other.origin, tol)


@dataclass(frozen=True)
class AssetModel:
    name: str
    links: tuple
    joints: tuple = ()
    root_link: Optional[str] = None
    physical: Optional[PhysicalParams] = None

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))
        if not self.name:
            raise InvalidValue("asset needs a name")
        root = _check_tree(self.links, self.joints)
        if self.root_link is None:
            object.__setattr__(self, "root_link", root)
        elif self.root_link != root:
            raise InvalidValue(f"root_link {self.root_link!r} is not the tree root {root!r}")

    def link(self, name) -> Link:
        for link in self.links:
            if link.name == name:
                return link
        raise KeyError(name)

    def joint(self, name) -> Joint:
        for joint in self.joints:
            if joint.name == name:
                return joint
        raise KeyError(name)

    def has_link(self, name):
        return any(link.name == name for link in self.links)

    def has_joint(self, name):
        return any(joint.name == name for joint in self.joints)

    def parent_joint(self, link_name) -> Optional[Joint]:
        for joint in self.joints:
            if joint.child == link_name:
                return joint
        return None

    @property
    def movable_joints(self):
        return tuple(j for j in self.joints if j.movable)

    def isclose(self, other, tol=1e-9):
        if (self.name, self.root_link) != (other.name, other.root_link):
            return False
        if len(self.links) != len(other.links) or len(self.joints) != len(other.joints):
            return False
        if (self.physical is None) != (other.physical is None):
            return False
        if self.physical is not None and not self.physical.isclose(other.physical, tol):
            return False
        return (all(a.isclose(b, tol) for a, b in zip(self.links, other.links))
                and all(a.isclose(b, tol) for a, b in zip(self.joints, other.joints)))


def _check_tree(links, joints):
    if not links:
        raise MalformedXml("asset has no links")
    names = [link.name for link in links]
    seen = set()
    for n in names:
        if n in seen:
            raise DuplicateName(f"duplicate link name {n!r}")
        seen.add(n)
    jseen = set()
    for j in joints:
        if j.name in jseen:
            raise DuplicateName(f"duplicate joint name {j.name!r}")
        jseen.add(j.name)
    parent_of = {}
    children = {n: [] for n in names}
    for j in joints:
        for ref in (j.parent, j.child):
            if ref not in seen:
                raise DanglingLinkRef(j.name, ref)
        if j.child in parent_of:
            raise KinematicCycle(f"link {j.child!r} has more than one parent joint")
        if j.parent == j.child:
            raise KinematicCycle(f"joint {j.name!r} connects link {j.child!r} to itself")
        parent_of[j.child] = j.parent
        children[j.parent].append(j.child)
    roots = [n for n in names if n not in parent_of]
    if not roots:
        raise KinematicCycle("no root link: the joint graph is cyclic")
    if len(roots) > 1:
        raise InvalidValue(f"asset is not a single tree; roots {roots}")
    reached = {roots[0]}
    stack = [roots[0]]
    while stack:
        for c in children[stack.pop()]:
            if c not in reached:
                reached.add(c)
                stack.append(c)
    if len(reached) != len(names):
        raise KinematicCycle(f"links {sorted(seen - reached)} form a kinematic cycle")
    return roots[0]


# ---------------------------------------------------------------- parsing

def _floats(text, n, what):
    parts = (text or "").split()
    if len(parts) != n:
        raise MalformedXml(f"{what}: expected {n} numbers, got {text!r}")
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise MalformedXml(f"{what}: non-numeric value in {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise MalformedXml(f"{what}: non-finite value in {text!r}")
    return vals


def _float_attr(el, name, what, default=None):
    raw = el.get(name)
    if raw is None:
        if default is None:
            raise MalformedXml(f"{what}: missing attribute {name!r}")
        return default
    return _floats(raw, 1, f"{what}.{name}")[0]


def _origin(el, what):
    o = el.find("origin") if el is not None else None
    if o is None:
        return Pose()
    xyz = _floats(o.get("xyz", "0 0 0"), 3, f"{what} origin xyz")
    rpy = _floats(o.get("rpy", "0 0 0"), 3, f"{what} origin rpy")
    return Pose.from_xyz_rpy(xyz, rpy)


def _parse_geometry(link_el, lname):
    holder = link_el.find("visual")
    if holder is None:
        holder = link_el.find("collision")
    if holder is None:
        return None
    g = holder.find("geometry")
    if g is None or len(g) == 0:
        return None
    shape = g[0]
    what = f"link {lname!r} geometry"
    origin = _origin(holder, what)
    if shape.tag == "mesh":
        fname = shape.get("filename")
        if not fname:
            raise MalformedXml(f"{what}: mesh without filename")
        scale = _floats(shape.get("scale", "1 1 1"), 3, f"{what} scale")
        return Geometry("mesh", scale, fname, origin)
    if shape.tag == "box":
        return Geometry("box", _floats(shape.get("size"), 3, f"{what} box size"), None, origin)
    if shape.tag == "cylinder":
        return Geometry("cylinder", (_float_attr(shape, "radius", what), _float_attr(shape, "length", what)),
                        None, origin)
    if shape.tag == "sphere":
        return Geometry("sphere", (_float_attr(shape, "radius", what),), None, origin)
    return None


def _parse_inertial(link_el, lname):
    el = link_el.find("inertial")
    if el is None:
        return None
    what = f"link {lname!r} inertial"
    origin = _origin(el, what)
    mass_el = el.find("mass")
    if mass_el is None:
        raise MalformedXml(f"{what}: missing <mass>")
    mass = _float_attr(mass_el, "value", what)
    inertia_el = el.find("inertia")
    if inertia_el is None:
        raise MalformedXml(f"{what}: missing <inertia>")
    i = {k: _float_attr(inertia_el, k, what, 0.0) for k in ("ixx", "ixy", "ixz", "iyy", "iyz", "izz")}
    tensor = np.array([[i["ixx"], i["ixy"], i["ixz"]],
                       [i["ixy"], i["iyy"], i["iyz"]],
                       [i["ixz"], i["iyz"], i["izz"]]])
    if not origin.isclose(Pose(origin.position), 1e-12):
        rot = Pose((0, 0, 0), origin.quat).matrix()[:3, :3]
        tensor = rot @ tensor @ rot.T
        tensor = 0.5 * (tensor + tensor.T)
    return InertialProps(mass, origin.position, tuple(map(tuple, tensor)))


def _parse_joint(el):
    name = el.get("name")
    kind = el.get("type")
    if not name or not kind:
        raise MalformedXml("joint needs name and type attributes")
    parent_el, child_el = el.find("parent"), el.find("child")
    if parent_el is None or child_el is None or not parent_el.get("link") or not child_el.get("link"):
        raise MalformedXml(f"joint {name!r}: missing parent/child link")
    axis_el = el.find("axis")
    axis = _floats(axis_el.get("xyz", "1 0 0"), 3, f"joint {name!r} axis") if axis_el is not None else (1.0, 0.0, 0.0)
    limits = None
    limit_el = el.find("limit")
    if kind in ("revolute", "prismatic"):
        if limit_el is None:
            raise MissingLimits(f"joint {name!r} ({kind}) has no <limit>")
        limits = (_float_attr(limit_el, "lower", f"joint {name!r} limit", 0.0),
                  _float_attr(limit_el, "upper", f"joint {name!r} limit", 0.0))
    return Joint(name, kind, parent_el.get("link"), child_el.get("link"), axis,
                 _origin(el, f"joint {name!r}"), limits)


def _parse_physical(robot):
    el = robot.find("physical_params")
    if el is None:
        return None
    what = "physical_params"
    size = tuple(_float_attr(el, k, what) for k in ("length", "width", "height"))
    return PhysicalParams(_float_attr(el, "mass", what), size, el.get("category", ""))


def parse_urdf(xml_text) -> AssetModel:
    """Parse URDF text (``str`` or ``bytes``) into an :class:`AssetModel`.

    Any failure surfaces as a :class:`~skillforge.errors.UrdfError` subclass.
    """
    try:
        root = ET.fromstring(xml_text)
    except (ET.ParseError, ValueError, TypeError) as e:
        raise MalformedXml(f"not well-formed XML: {e}") from None
    if root.tag != "robot":
        raise MalformedXml(f"root element is <{root.tag}>, expected <robot>")
    name = root.get("name")
    if not name:
        raise MalformedXml("<robot> has no name")
    try:
        links = []
        for el in root.findall("link"):
            lname = el.get("name")
            if not lname:
                raise MalformedXml("link without name")
            links.append(Link(lname, _parse_inertial(el, lname), _parse_geometry(el, lname)))
        joints = [_parse_joint(el) for el in root.findall("joint")]
        return AssetModel(name, tuple(links), tuple(joints), None, _parse_physical(root))
    except UrdfError:
        raise
    except (ValueError, TypeError, OverflowError) as e:
        raise MalformedXml(str(e)) from None


def load_urdf(path) -> AssetModel:
    with open(path, "rb") as f:
        return parse_urdf(f.read())


# ---------------------------------------------------------------- emission

def _num(v):
    return repr(float(v))


def _nums(vs):
    return " ".join(_num(v) for v in vs)


def _origin_el(parent, pose: Pose):
    ET.SubElement(parent, "origin", xyz=_nums(pose.position), rpy=_nums(pose.rpy))


def _geometry_el(parent, tag, g: Geometry):
    holder = ET.SubElement(parent, tag)
    _origin_el(holder, g.origin)
    geom = ET.SubElement(holder, "geometry")
    if g.kind == "mesh":
        ET.SubElement(geom, "mesh", filename=g.filename, scale=_nums(g.size))
    elif g.kind == "box":
        ET.SubElement(geom, "box", size=_nums(g.size))
    elif g.kind == "cylinder":
        ET.SubElement(geom, "cylinder", radius=_num(g.size[0]), length=_num(g.size[1]))
    else:
        ET.SubElement(geom, "sphere", radius=_num(g.size[0]))


def emit_urdf(asset: AssetModel) -> str:
    robot = ET.Element("robot", name=asset.name)
    if asset.physical is not None:
        p = asset.physical
        ET.SubElement(robot, "physical_params", category=p.category, mass=_num(p.mass),
                      length=_num(p.size[0]), width=_num(p.size[1]), height=_num(p.size[2]))
    for link in asset.links:
        el = ET.SubElement(robot, "link", name=link.name)
        if link.inertial is not None:
            ine = ET.SubElement(el, "inertial")
            ET.SubElement(ine, "origin", xyz=_nums(link.inertial.center_of_mass), rpy="0.0 0.0 0.0")
            ET.SubElement(ine, "mass", value=_num(link.inertial.mass))
            t = link.inertial.inertia
            ET.SubElement(ine, "inertia", ixx=_num(t[0][0]), ixy=_num(t[0][1]), ixz=_num(t[0][2]),
                          iyy=_num(t[1][1]), iyz=_num(t[1][2]), izz=_num(t[2][2]))
        if link.geometry_ref is not None:
            _geometry_el(el, "visual", link.geometry_ref)
            _geometry_el(el, "collision", link.geometry_ref)
    for j in asset.joints:
        el = ET.SubElement(robot, "joint", name=j.name, type=j.kind)
        _origin_el(el, j.origin)
        ET.SubElement(el, "parent", link=j.parent)
        ET.SubElement(el, "child", link=j.child)
        ET.SubElement(el, "axis", xyz=_nums(j.axis))
        if j.limits is not None:
            ET.SubElement(el, "limit", lower=_num(j.limits[0]), upper=_num(j.limits[1]),
                          effort="100.0", velocity="1.0")
    ET.indent(robot)
    return '<?xml version="1.0" encoding="utf-8"?>\n' + ET.tostring(robot, encoding="unicode") + "\n"


# ---------------------------------------------------------------- description

def _fmt(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".6g")


def describe_asset(asset: AssetModel) -> str:
    """Plain-text summary embedded verbatim in LLM prompts and cache keys."""
    lines = [f"asset: {asset.name}"]
    if asset.physical is not None:
        p = asset.physical
        lines.append(f"  category: {p.category}, mass {_fmt(p.mass)} kg, "
                     f"size {_fmt(p.size[0])} x {_fmt(p.size[1])} x {_fmt(p.size[2])} m")
    lines.append("  parts: [" + ", ".join(link.name for link in asset.links) + "]")
    if not asset.joints:
        lines.append("  joints: none")
    else:
        lines.append("  joints:")
        for j in asset.joints:
            if j.kind == "fixed":
                lines.append(f"    - {j.name} (fixed), connects {j.parent} -> {j.child}")
            elif j.kind == "continuous":
                lines.append(f"    - {j.name} (continuous), range [-inf, inf]")
            else:
                lines.append(f"    - {j.name} ({j.kind}), range [{_fmt(j.limits[0])}, {_fmt(j.limits[1])}]")
    return "\n".join(lines) + "\n"
