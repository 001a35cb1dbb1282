"""Rigid transforms and quaternion helpers.

Quaternions are stored scalar-first ``(w, x, y, z)`` and kept in the
``w >= 0`` hemisphere so equal rotations compare equal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def canonical_quat(q):
    w, x, y, z = (float(v) for v in q)
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if not math.isfinite(n) or n == 0.0:
        raise ValueError(f"invalid quaternion {q!r}")
    if w < 0.0:
        n = -n
    return np.array([w / n, x / n, y / n, z / n])


def quat_from_rpy(roll, pitch, yaw):
    """URDF convention: extrinsic X, then Y, then Z (R = Rz(yaw) Ry(pitch) Rx(roll))."""
    cr, sr = math.cos(roll / 2), math.sin(roll / 2)
    cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
    cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
    q = np.array([
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ])
    return canonical_quat(q)


def rpy_from_quat(q):
    m = quat_to_matrix(q)
    cp = math.hypot(m[0, 0], m[1, 0])
    pitch = math.atan2(-m[2, 0], cp)
    if cp > 1e-12:
        roll = math.atan2(m[2, 1], m[2, 2])
        yaw = math.atan2(m[1, 0], m[0, 0])
    else:
        # gimbal lock: only roll - yaw (or roll + yaw) is defined
        yaw = 0.0
        roll = math.atan2(-m[1, 2], m[1, 1])
    return roll, pitch, yaw


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(m):
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    return canonical_quat(q)


def quat_from_rotvec(v):
    v = np.asarray(v, dtype=float)
    angle = float(np.linalg.norm(v))
    if angle < 1e-12:
        return canonical_quat([1.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2]])
    axis = v / angle
    s = math.sin(angle / 2)
    return canonical_quat([math.cos(angle / 2), axis[0] * s, axis[1] * s, axis[2] * s])


def rotvec_from_quat(q):
    q = canonical_quat(q)
    s = math.sqrt(q[1] ** 2 + q[2] ** 2 + q[3] ** 2)
    if s < 1e-12:
        return 2.0 * np.array(q[1:])
    angle = 2.0 * math.atan2(s, q[0])
    return np.array(q[1:]) / s * angle


def axis_angle_matrix(axis, angle):
    """Rotation matrix about a unit axis (Rodrigues)."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    t = 1.0 - c
    return np.array([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])


@dataclass(frozen=True)
class Pose:
    """Rigid transform: translation in meters and a unit quaternion."""

    position: tuple = (0.0, 0.0, 0.0)
    quat: tuple = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "quat", tuple(float(v) for v in canonical_quat(self.quat)))

    @classmethod
    def from_xyz_rpy(cls, xyz=(0.0, 0.0, 0.0), rpy=(0.0, 0.0, 0.0)):
        return cls(tuple(xyz), tuple(quat_from_rpy(*rpy)))

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m)
        return cls(tuple(m[:3, 3]), tuple(matrix_to_quat(m[:3, :3])))

    @property
    def rpy(self):
        return rpy_from_quat(self.quat)

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.quat)
        m[:3, 3] = self.position
        return m

    def compose(self, other: "Pose") -> "Pose":
        return Pose.from_matrix(self.matrix() @ other.matrix())

    def inverse(self) -> "Pose":
        return Pose.from_matrix(np.linalg.inv(self.matrix()))

    def as_vector(self):
        return np.array(self.position + self.quat)

    def isclose(self, other: "Pose", tol=1e-9) -> bool:
        return (np.allclose(self.position, other.position, atol=tol, rtol=0)
                and np.allclose(self.quat, other.quat, atol=tol, rtol=0))
