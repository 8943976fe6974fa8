"""Ground-truth scenes and a simulated labelled range sensor.

The sensor stands in for a depth camera with perfect segmentation and
perfect localisation: every ray returns the first occupied voxel it meets,
tagged with that voxel's true label, plus the empty voxels it crossed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._validation import (
    BoundsError,
    InvalidPoseError,
    check_count,
    check_point,
    check_positive,
    normalize_yaw,
)
from .grid import GridFrame, cast_rays


class SceneParseError(ValueError):
    """Malformed scene file; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DuplicateCellError(SceneParseError):
    pass


class GroundTruthLabel(Enum):
    INFRASTRUCTURE = "I"
    OBSTACLE = "O"

    @property
    def code(self):
        # lattice code used by the dense label array; 0 is free
        return 1 if self is GroundTruthLabel.INFRASTRUCTURE else 2


@dataclass(frozen=True)
class Pose:
    position: tuple
    yaw: float = 0.0

    def __post_init__(self):
        p = check_point(self.position, "position")
        if not math.isfinite(self.yaw):
            raise ValueError("yaw must be finite")
        object.__setattr__(self, "position", tuple(float(v) for v in p))
        object.__setattr__(self, "yaw", normalize_yaw(self.yaw))


@dataclass(frozen=True)
class SensorModel:
    horizontal_fov: float = math.radians(90.0)
    vertical_fov: float = math.radians(90.0)
    max_range: float = 20.0
    rays_h: int = 64
    rays_v: int = 64

    def __post_init__(self):
        for name in ("horizontal_fov", "vertical_fov"):
            v = check_positive(getattr(self, name), name)
            if v > 2 * math.pi + 1e-12:
                raise ValueError(f"{name} must be <= 2*pi")
        check_positive(self.max_range, "max_range")
        check_count(self.rays_h, "rays_h", 2)
        check_count(self.rays_v, "rays_v", 2)

    def directions(self, yaw):
        """Unit ray directions, row-major over (pitch, yaw offset)."""
        full = self.horizontal_fov >= 2 * math.pi - 1e-12
        yaws = np.linspace(
            -self.horizontal_fov / 2, self.horizontal_fov / 2, self.rays_h, endpoint=not full
        )
        pitches = np.linspace(-self.vertical_fov / 2, self.vertical_fov / 2, self.rays_v)
        pp, yy = np.meshgrid(pitches, yaw + yaws, indexing="ij")
        cp = np.cos(pp)
        return np.stack([cp * np.cos(yy), cp * np.sin(yy), np.sin(pp)], axis=-1).reshape(-1, 3)


@dataclass
class Scene:
    """Immutable ground truth: labelled occupied voxels, everything else free."""

    frame: GridFrame
    cells: dict = field(default_factory=dict)
    name: str = "scene"

    def __post_init__(self):
        labels = np.zeros(self.frame.extents, dtype=np.int8)
        for idx, label in self.cells.items():
            if not self.frame.in_bounds(idx):
                raise BoundsError(f"cell {idx} outside extents {self.frame.extents}")
            labels[idx] = GroundTruthLabel(label).code
        self.labels = labels
        self.labels.setflags(write=False)

    @property
    def resolution(self):
        return self.frame.resolution

    @property
    def origin(self):
        return self.frame.origin

    @property
    def extents(self):
        return self.frame.extents

    def label_at(self, idx):
        code = int(self.labels[tuple(idx)])
        if code == 0:
            return None
        return GroundTruthLabel.INFRASTRUCTURE if code == 1 else GroundTruthLabel.OBSTACLE

    def infrastructure_cells(self):
        return sorted(i for i, lab in self.cells.items() if lab is GroundTruthLabel.INFRASTRUCTURE)

    def to_text(self):
        lines = [f"# {self.name}", f"res {self.resolution!r}", "dims {} {} {}".format(*self.extents)]
        if any(self.origin):
            lines.append("origin {!r} {!r} {!r}".format(*self.origin))
        for idx in sorted(self.cells):
            lines.append("{} {} {} {}".format(*idx, self.cells[idx].value))
        return "\n".join(lines) + "\n"


def load_scene(source, name="scene"):
    """Parse scene-file text into a :class:`Scene`."""
    res = dims = None
    origin = (0.0, 0.0, 0.0)
    raw = []
    for lineno, line in enumerate(source.splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        # headers may be separated by ';' on one line
        for part in (p.strip() for p in text.split(";")):
            if not part:
                continue
            tok = part.split()
            try:
                if tok[0] == "res" and len(tok) == 2:
                    res = float(tok[1])
                elif tok[0] == "dims" and len(tok) == 4:
                    dims = tuple(int(v) for v in tok[1:])
                elif tok[0] == "origin" and len(tok) == 4:
                    origin = tuple(float(v) for v in tok[1:])
                elif len(tok) == 4 and tok[3] in ("I", "O"):
                    raw.append((lineno, tuple(int(v) for v in tok[:3]), GroundTruthLabel(tok[3])))
                else:
                    raise SceneParseError(f"unrecognised content {part!r}", lineno)
            except ValueError as exc:
                if isinstance(exc, SceneParseError):
                    raise
                raise SceneParseError(f"bad number in {part!r}", lineno) from exc
    if res is None or dims is None:
        raise SceneParseError("missing 'res' or 'dims' header")
    try:
        frame = GridFrame(res, origin, dims)
    except ValueError as exc:
        raise SceneParseError(str(exc)) from exc
    cells = {}
    for lineno, idx, label in raw:
        if not frame.in_bounds(idx):
            raise BoundsError(f"line {lineno}: cell {idx} outside dims {dims}")
        if idx in cells:
            raise DuplicateCellError(f"cell {idx} listed twice", lineno)
        cells[idx] = label
    return Scene(frame, cells, name)


@dataclass
class LabeledPointSet:
    """One sensor sweep: hit points with labels and the free voxels crossed.

    ``free_cells`` are ordered per ray (``free_ray`` gives the ray index), so
    each ray's crossed voxels read as a chain from the sensor outward.
    """

    frame: GridFrame
    hit_ray: np.ndarray
    hit_cells: np.ndarray
    hit_points: np.ndarray
    hit_labels: list
    free_ray: np.ndarray
    free_cells: np.ndarray

    @property
    def n_hits(self):
        return len(self.hit_labels)

    def infrastructure_only(self):
        keep = np.array([lab is GroundTruthLabel.INFRASTRUCTURE for lab in self.hit_labels], bool)
        return LabeledPointSet(
            self.frame,
            self.hit_ray[keep],
            self.hit_cells[keep],
            self.hit_points[keep],
            [lab for lab, k in zip(self.hit_labels, keep) if k],
            np.empty(0, int),
            np.empty((0, 3), int),
        )

    def ray_free_cells(self, ray):
        return self.free_cells[self.free_ray == ray]


def sense(scene, pose, model=None):
    """Ray-cast the scene from ``pose`` and return a labelled point set."""
    model = model or SensorModel()
    frame = scene.frame
    pos = np.asarray(pose.position, dtype=float)
    if not frame.contains_point(pos):
        raise InvalidPoseError(f"pose {pos} outside scene bounds")
    idx = frame.index_of(pos)
    if scene.labels[idx] != 0:
        raise InvalidPoseError(f"pose {pos} lies in occupied cell {idx}")
    dirs = model.directions(pose.yaw)
    g0 = frame.to_grid(pos)
    hit_ray, hit_cell, hit_t, free_ray, free_cell = cast_rays(
        scene.labels, g0, dirs, model.max_range / frame.resolution
    )
    points = frame.to_world(g0 + dirs[hit_ray] * hit_t[:, None])
    codes = scene.labels[hit_cell[:, 0], hit_cell[:, 1], hit_cell[:, 2]] if len(hit_cell) else []
    labels = [
        GroundTruthLabel.INFRASTRUCTURE if c == 1 else GroundTruthLabel.OBSTACLE for c in codes
    ]
    return LabeledPointSet(frame, hit_ray, hit_cell, points, labels, free_ray, free_cell)
