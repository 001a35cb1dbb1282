"""Mass properties of closed triangle meshes and plausible-size sampling.

Volume, centroid and second moments come from exact signed-tetrahedron sums
(each face forms a tetrahedron with the origin), so results are deterministic
and match closed-form solids to rounding error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .errors import DegenerateMesh, InvalidValue, UnknownCategory
from .geometry import Pose
from .urdf import AssetModel, Geometry, InertialProps, Link, PhysicalParams

__all__ = [
    "TriMesh", "PhysicalParams", "CategoryRanges", "ParamRangeTable", "DEFAULT_RANGES",
    "mesh_volume_com", "mesh_inertia", "sample_physical_params", "scale_mesh_to_size",
    "build_rigid_asset", "box_mesh", "icosphere", "cylinder_mesh", "convex_hull_mesh", "read_obj", "write_obj",
    "is_closed",
]

# canonical tetrahedron covariance, see e.g. Blow & Binstock "How to find the inertia tensor"
_CANON = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 120.0


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise InvalidValue("face index out of range")
        if not np.all(np.isfinite(v)):
            raise InvalidValue("non-finite vertex")
        v.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def extents(self):
        lo, hi = self.bounds()
        return hi - lo

    def translated(self, offset):
        return TriMesh(self.vertices + np.asarray(offset, dtype=float), self.faces)

    def scaled(self, factor):
        return TriMesh(self.vertices * np.asarray(factor, dtype=float), self.faces)


def is_closed(mesh: TriMesh) -> bool:
    """Every directed edge must be matched by exactly one opposite edge."""
    if len(mesh.faces) < 4:
        return False
    f = mesh.faces
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    if np.any(edges[:, 0] == edges[:, 1]):
        return False
    fwd = {tuple(e) for e in edges.tolist()}
    if len(fwd) != len(edges):
        return False
    return all((b, a) in fwd for a, b in fwd)


def _tetra_terms(mesh: TriMesh):
    tri = mesh.vertices[mesh.faces]  # (F, 3 vertices, 3 coords)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    det = np.einsum("ij,ij->i", a, np.cross(b, c))
    return tri, det


def mesh_volume_com(mesh: TriMesh):
    """Signed volume and centroid of a closed mesh (volume > 0 for outward normals)."""
    if not is_closed(mesh):
        raise DegenerateMesh("mesh is not closed and consistently oriented")
    tri, det = _tetra_terms(mesh)
    volume = det.sum() / 6.0
    if abs(volume) < 1e-12:
        raise DegenerateMesh(f"mesh volume {volume:g} is too small")
    com = (det[:, None] * tri.sum(axis=1)).sum(axis=0) / (24.0 * volume)
    return float(volume), com


def mesh_inertia(mesh: TriMesh, mass: float) -> InertialProps:
    """Uniform-density inertia tensor about the center of mass."""
    if not (math.isfinite(mass) and mass > 0):
        raise InvalidValue(f"mass must be positive, got {mass}")
    volume, com = mesh_volume_com(mesh)
    tri, det = _tetra_terms(mesh)
    # integral of x x^T over the solid, about the origin
    second = np.einsum("f,fki,kl,flj->ij", det, tri, _CANON, tri)
    second -= volume * np.outer(com, com)
    density = mass / volume
    cov = density * second
    inertia = np.trace(cov) * np.eye(3) - cov
    inertia = 0.5 * (inertia + inertia.T)
    return InertialProps(mass, tuple(com), tuple(map(tuple, inertia)))


# ---------------------------------------------------------------- sampling

@dataclass(frozen=True)
class CategoryRanges:
    """Plausible ranges for one category: grams and centimeters, as an LLM reports them."""

    mass_range: Tuple[float, float]
    length_range: Tuple[float, float]
    width_range: Tuple[float, float]
    height_range: Tuple[float, float]

    def __post_init__(self):
        for name in ("mass_range", "length_range", "width_range", "height_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi and math.isfinite(hi)):
                raise InvalidValue(f"{name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")


ParamRangeTable = Dict[str, CategoryRanges]

DEFAULT_RANGES: ParamRangeTable = {
    "Papaya": CategoryRanges((500, 1000), (15, 20), (10, 15), (10, 15)),
    "Cucumber": CategoryRanges((200, 300), (15, 20), (5, 7), (5, 7)),
    "Watermelon": CategoryRanges((5000, 7000), (30, 40), (20, 30), (20, 30)),
    "Raspberry": CategoryRanges((3, 5), (2, 3), (2, 3), (2, 3)),
    "Coconut": CategoryRanges((600, 800), (10, 15), (8, 12), (8, 12)),
    "Corn": CategoryRanges((50, 100), (10, 15), (8, 12), (8, 12)),
    "Pumpkin": CategoryRanges((2000, 5000), (20, 40), (20, 40), (20, 40)),
    "Avocado": CategoryRanges((150, 250), (10, 12), (6, 8), (4, 5)),
}


def _lookup(category, table):
    if category in table:
        return table[category]
    folded = {k.lower(): v for k, v in table.items()}
    if category.lower() in folded:
        return folded[category.lower()]
    raise UnknownCategory(f"no size/mass ranges for category {category!r}")


def sample_physical_params(category: str, table: ParamRangeTable = None,
                           rng: np.random.Generator = None) -> PhysicalParams:
    """Draw mass and size uniformly from the category's ranges, in SI units."""
    table = DEFAULT_RANGES if table is None else table
    rng = np.random.default_rng() if rng is None else rng
    r = _lookup(category, table)
    mass_g = rng.uniform(*r.mass_range)
    size_cm = [rng.uniform(*rg) for rg in (r.length_range, r.width_range, r.height_range)]
    # clip guards the open upper end against rounding in the unit conversion
    mass = min(max(mass_g / 1000.0, r.mass_range[0] / 1000.0), r.mass_range[1] / 1000.0)
    size = tuple(min(max(s / 100.0, rg[0] / 100.0), rg[1] / 100.0)
                 for s, rg in zip(size_cm, (r.length_range, r.width_range, r.height_range)))
    return PhysicalParams(mass, size, category)


def scale_mesh_to_size(mesh: TriMesh, size) -> TriMesh:
    """Scale each axis so the bounding box equals ``size`` and center it at the origin."""
    lo, hi = mesh.bounds()
    ext = hi - lo
    if np.any(ext <= 0):
        raise DegenerateMesh(f"mesh has zero extent along an axis: {ext}")
    size = np.asarray(size, dtype=float)
    center = 0.5 * (lo + hi)
    v = (mesh.vertices - center) * (size / ext)
    # pin the extremes so the extents equal ``size`` without rounding drift
    v = np.where(mesh.vertices == lo, -0.5 * size, v)
    v = np.where(mesh.vertices == hi, 0.5 * size, v)
    return TriMesh(v, mesh.faces)


def build_rigid_asset(name: str, mesh: TriMesh, params: PhysicalParams,
                      mesh_filename: str = None) -> AssetModel:
    """Single-link asset whose mesh is scaled to the sampled size."""
    scaled = scale_mesh_to_size(mesh, params.size)
    inertial = mesh_inertia(scaled, params.mass)
    geometry = Geometry("mesh", (1.0, 1.0, 1.0), mesh_filename or f"{name}.obj", Pose())
    return AssetModel(name, (Link("body", inertial, geometry),), (), "body", params)


# ---------------------------------------------------------------- meshes

def box_mesh(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriMesh:
    sx, sy, sz = (0.5 * s for s in size)
    v = np.array([[x, y, z] for x in (-sx, sx) for y in (-sy, sy) for z in (-sz, sz)])
    # vertex index = 4*ix + 2*iy + iz
    faces = [
        (0, 1, 3), (0, 3, 2),  # -x
        (4, 6, 7), (4, 7, 5),  # +x
        (0, 4, 5), (0, 5, 1),  # -y
        (2, 3, 7), (2, 7, 6),  # +y
        (0, 2, 6), (0, 6, 4),  # -z
        (1, 5, 7), (1, 7, 3),  # +z
    ]
    return TriMesh(v + np.asarray(center, dtype=float), faces)


def icosphere(radius=1.0, subdivisions=3) -> TriMesh:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriMesh(np.array(verts) * radius, faces)


def cylinder_mesh(radius=0.5, height=1.0, segments=32) -> TriMesh:
    """Closed cylinder along z, centered at the origin."""
    ang = np.linspace(0.0, 2 * math.pi, segments, endpoint=False)
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    bottom = np.column_stack([ring, np.full(segments, -height / 2)])
    top = np.column_stack([ring, np.full(segments, height / 2)])
    verts = np.vstack([bottom, top, [[0, 0, -height / 2], [0, 0, height / 2]]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [(i, j, segments + j), (i, segments + j, segments + i), (cb, j, i), (ct, segments + i, segments + j)]
    return TriMesh(verts, faces)


def convex_hull_mesh(points) -> TriMesh:
    """Outward-oriented triangle mesh of the convex hull of ``points``."""
    from scipy.spatial import ConvexHull

    pts = np.asarray(points, dtype=float)
    hull = ConvexHull(pts)
    used = np.unique(hull.simplices)
    remap = {int(old): new for new, old in enumerate(used)}
    faces = []
    centroid = pts[used].mean(axis=0)
    for tri in hull.simplices:
        a, b, c = (pts[i] for i in tri)
        if np.dot(np.cross(b - a, c - a), a - centroid) < 0:
            tri = tri[[0, 2, 1]]
        faces.append([remap[int(i)] for i in tri])
    return TriMesh(pts[used], faces)


def read_obj(path) -> TriMesh:
    verts, faces = [], []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                try:
                    verts.append([float(x) for x in parts[1:4]])
                except ValueError:
                    raise InvalidValue(f"{path}:{lineno}: bad vertex") from None
            elif parts[0] == "f":
                try:
                    idx = [int(p.split("/")[0]) for p in parts[1:]]
                except ValueError:
                    raise InvalidValue(f"{path}:{lineno}: bad face") from None
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
    if not verts or not faces:
        raise DegenerateMesh(f"{path}: no geometry")
    return TriMesh(verts, faces)


def write_obj(mesh: TriMesh, path):
    with open(path, "w", encoding="utf-8") as f:
        for v in mesh.vertices:
            f.write("v {!r} {!r} {!r}\n".format(*(float(x) for x in v)))
        for a, b, c in mesh.faces:
            f.write(f"f {a + 1} {b + 1} {c + 1}\n")
