"""Viewpoint clusters for uninspected infrastructure voxels.

A viewpoint is the centre of a confirmed-free voxel that sees one exposed
face of an infrastructure voxel inside the viewing cone (anchored on the
face centre, opening along the outward normal), inside the distance band,
with a clear line of sight and a camera able to look that way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .grid import walk
from .mapping import OCCUPIED, VoxelState

_TOL = 1e-9

# (axis, sign) in a fixed enumeration order
NORMALS = ((0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1))


class Camera(Enum):
    FORWARD = "fwd"
    UP = "up"
    DOWN = "down"


class Granularity(Enum):
    PER_VOXEL = "per-voxel"
    PER_FACE = "per-face"


@dataclass(frozen=True)
class ViewConstraint:
    apex_angle: float = math.radians(20.0)
    min_dist: float = 2.0
    max_dist: float = 5.0
    cameras: frozenset = frozenset(Camera)
    granularity: Granularity = Granularity.PER_FACE

    def __post_init__(self):
        if not (0.0 <= self.apex_angle < math.pi):
            raise ValueError(f"apex_angle must be in [0, pi), got {self.apex_angle}")
        if not (0.0 < self.min_dist < self.max_dist):
            raise ValueError(f"need 0 < min_dist < max_dist, got {self.min_dist}, {self.max_dist}")
        cams = frozenset(Camera(c) for c in self.cameras)
        if not cams:
            raise ValueError("at least one camera is required")
        object.__setattr__(self, "cameras", cams)
        object.__setattr__(self, "granularity", Granularity(self.granularity))

    @classmethod
    def from_degrees(cls, apex_deg=20.0, min_dist=2.0, max_dist=5.0, **kw):
        return cls(math.radians(apex_deg), min_dist, max_dist, **kw)


def camera_for(normal):
    axis, sign = normal
    if axis != 2:
        return Camera.FORWARD
    # top face is looked at from above, bottom face from below
    return Camera.DOWN if sign > 0 else Camera.UP


@dataclass(frozen=True, order=True)
class Face:
    voxel: tuple
    normal: tuple
    center: tuple = field(compare=False)

    @classmethod
    def of(cls, frame, voxel, normal):
        axis, sign = normal
        c = frame.center(voxel)
        c[axis] += sign * frame.resolution / 2.0
        return cls(tuple(int(v) for v in voxel), (int(axis), int(sign)), tuple(float(v) for v in c))

    @property
    def normal_vector(self):
        n = np.zeros(3)
        n[self.normal[0]] = self.normal[1]
        return n

    @property
    def neighbor(self):
        axis, sign = self.normal
        n = list(self.voxel)
        n[axis] += sign
        return tuple(n)


@dataclass(frozen=True, order=True)
class ClusterKey:
    """Voxel key, optionally narrowed to one face (``normal``)."""

    voxel: tuple
    normal: tuple = None

    def __str__(self):
        s = "{}_{}_{}".format(*self.voxel)
        if self.normal is not None:
            s += "{}{}".format("+" if self.normal[1] > 0 else "-", "xyz"[self.normal[0]])
        return s


@dataclass(frozen=True)
class Viewpoint:
    position: tuple
    target: Face
    required_camera: Camera
    yaw: float

    @property
    def cell(self):
        return self.target.voxel


@dataclass
class ClusterSet:
    clusters: list
    uninspectable: list
    granularity: Granularity = Granularity.PER_VOXEL

    def keys(self):
        return [k for k, _ in self.clusters]

    def viewpoints(self):
        return [vp for _, members in self.clusters for vp in members]

    def pairs(self):
        """Set of (key, position, face) triples, for order-free comparison."""
        return {
            (k, vp.position, (vp.target.voxel, vp.target.normal))
            for k, members in self.clusters
            for vp in members
        }

    def to_text(self):
        rows = []
        for key, members in self.clusters:
            for vp in members:
                rows.append(
                    "{} {:.6g} {:.6g} {:.6g} {} {}".format(
                        key, *vp.position, ClusterKey(vp.target.voxel, vp.target.normal),
                        vp.required_camera.value,
                    )
                )
        for key in self.uninspectable:
            rows.append(f"{key} uninspectable")
        return "\n".join(rows) + ("\n" if rows else "")


def _blocks_view(state):
    return state in OCCUPIED


def exposed_faces(env, infra):
    """Faces of InfraUninspected voxels whose outward neighbour is Free or Unknown."""
    if not env.frame.congruent(infra.frame):
        raise ValueError("grids are not congruent")
    faces = []
    for idx in infra.cells_in(VoxelState.INFRA_UNINSPECTED):
        voxel = tuple(int(v) for v in idx)
        for normal in NORMALS:
            face = Face.of(env.frame, voxel, normal)
            nb = face.neighbor
            if not env.frame.in_bounds(nb):
                continue
            if _blocks_view(VoxelState(int(env.states[nb]))):
                continue
            faces.append(face)
    return faces


def _yaw_towards(p, voxel_center):
    dx, dy = voxel_center[0] - p[0], voxel_center[1] - p[1]
    if abs(dx) < _TOL and abs(dy) < _TOL:
        return 0.0
    yaw = math.atan2(dy, dx)
    return yaw - 2 * math.pi if yaw >= math.pi else yaw


def _geometry_ok(offset, normal_vec, c):
    """Distance band and cone test on a world-space offset (point - face centre)."""
    dist = float(np.linalg.norm(offset))
    if dist < c.min_dist - _TOL or dist > c.max_dist + _TOL:
        return False
    along = float(offset @ normal_vec)
    lateral = math.sqrt(max(dist * dist - along * along, 0.0))
    return math.atan2(lateral, along) <= c.apex_angle / 2.0 + _TOL


def line_of_sight(env, p, face):
    """True when the segment p -> face centre crosses no occupied voxel but the target."""
    frame = env.frame
    for cell in walk(frame.to_grid(p), frame.to_grid(face.center)):
        if cell == face.voxel:
            continue
        if not frame.in_bounds(cell):
            return False
        if _blocks_view(VoxelState(int(env.states[cell]))):
            return False
    return True


def view_test(p, face, c, env):
    """Return ``(ok, camera)`` for viewing ``face`` from world point ``p``."""
    p = np.asarray(p, dtype=float)
    cam = camera_for(face.normal)
    if not _geometry_ok(p - np.asarray(face.center), face.normal_vector, c):
        return False, cam
    if cam not in c.cameras:
        return False, cam
    if not line_of_sight(env, p, face):
        return False, cam
    return True, cam


def _candidate_cells(env, face, c, free_mask):
    """Free voxels inside the max-distance box around the face centre."""
    frame = env.frame
    g = frame.to_grid(face.center)
    r = c.max_dist / frame.resolution
    lo = np.maximum(np.floor(g - r).astype(int), 0)
    hi = np.minimum(np.ceil(g + r).astype(int) + 1, np.asarray(frame.extents))
    sub = free_mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    return np.argwhere(sub) + lo


def face_viewpoints(env, face, c, free_mask=None):
    """All viewpoints (in index order) that inspect ``face``."""
    if free_mask is None:
        free_mask = env.states == VoxelState.FREE
    cam = camera_for(face.normal)
    if cam not in c.cameras:
        return []
    cells = _candidate_cells(env, face, c, free_mask)
    if not len(cells):
        return []
    pts = env.frame.centers(cells)
    off = pts - np.asarray(face.center)
    dist = np.linalg.norm(off, axis=1)
    along = off @ face.normal_vector
    lateral = np.sqrt(np.maximum(dist**2 - along**2, 0.0))
    ok = (dist >= c.min_dist - _TOL) & (dist <= c.max_dist + _TOL)
    ok &= np.arctan2(lateral, along) <= c.apex_angle / 2.0 + _TOL
    vc = env.frame.center(face.voxel)
    out = []
    for p in pts[ok]:
        if line_of_sight(env, p, face):
            out.append(Viewpoint(tuple(float(v) for v in p), face, cam, _yaw_towards(p, vc)))
    return out


def generate_clusters(env, infra, c):
    """Build the viewpoint clusters for every uninspected infrastructure voxel."""
    faces = exposed_faces(env, infra)
    free_mask = env.states == VoxelState.FREE
    by_voxel = {tuple(int(v) for v in idx): [] for idx in infra.cells_in(VoxelState.INFRA_UNINSPECTED)}
    for face in faces:
        by_voxel[face.voxel].append(face)
    clusters, uninspectable = [], []
    for voxel in sorted(by_voxel):
        vfaces = by_voxel[voxel]
        if c.granularity is Granularity.PER_VOXEL:
            members = [vp for f in vfaces for vp in face_viewpoints(env, f, c, free_mask)]
            key = ClusterKey(voxel)
            if members:
                clusters.append((key, members))
            else:
                uninspectable.append(key)
        else:
            if not vfaces:
                uninspectable.append(ClusterKey(voxel))
            for f in vfaces:
                members = face_viewpoints(env, f, c, free_mask)
                key = ClusterKey(voxel, f.normal)
                if members:
                    clusters.append((key, members))
                else:
                    uninspectable.append(key)
    return ClusterSet(clusters, uninspectable, c.granularity)
