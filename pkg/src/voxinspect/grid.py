"""Voxel frames and exact grid traversal (Amanatides & Woo style)."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._validation import BoundsError, check_point, check_positive

# Parameter slack for "ends exactly on a cell boundary" and simultaneous crossings.
_END_EPS = 1e-9
_TIE_EPS = 1e-9


@dataclass(frozen=True)
class GridFrame:
    """Placement of a dense voxel lattice in world coordinates."""

    resolution: float
    origin: tuple
    extents: tuple

    def __post_init__(self):
        check_positive(self.resolution, "resolution")
        origin = tuple(float(v) for v in self.origin)
        extents = tuple(int(v) for v in self.extents)
        if len(origin) != 3 or len(extents) != 3:
            raise ValueError("origin and extents need three components")
        if min(extents) < 1:
            raise ValueError(f"extents must be >= 1 per axis, got {extents}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extents", extents)

    @property
    def shape(self):
        return self.extents

    @property
    def size(self):
        nx, ny, nz = self.extents
        return nx * ny * nz

    def congruent(self, other):
        return (
            self.resolution == other.resolution
            and self.origin == other.origin
            and self.extents == other.extents
        )

    def to_grid(self, point):
        """World point -> continuous grid coordinates (voxel edge = 1)."""
        return (np.asarray(point, dtype=float) - np.asarray(self.origin)) / self.resolution

    def to_world(self, gpoint):
        return np.asarray(gpoint, dtype=float) * self.resolution + np.asarray(self.origin)

    def center(self, idx):
        return self.to_world(np.asarray(idx, dtype=float) + 0.5)

    def centers(self, idx):
        """Vectorised ``center`` for an (n, 3) index array."""
        return self.to_world(np.asarray(idx, dtype=float) + 0.5)

    def in_bounds(self, idx):
        i, j, k = idx
        nx, ny, nz = self.extents
        return 0 <= i < nx and 0 <= j < ny and 0 <= k < nz

    def contains_point(self, point):
        g = self.to_grid(point)
        return bool(np.all(g >= 0) and np.all(g <= np.asarray(self.extents)))

    def index_of(self, point):
        """Voxel containing a world point; points on the far boundary clamp inward."""
        p = check_point(point)
        if not self.contains_point(p):
            raise BoundsError(f"point {p} outside grid")
        g = np.floor(self.to_grid(p)).astype(int)
        g = np.minimum(g, np.asarray(self.extents) - 1)
        return tuple(int(v) for v in g)


def walk(start, end, *, touching=False):
    """Yield the voxels crossed by the segment ``start -> end`` in order.

    Coordinates are in grid units. A voxel is yielded when the open segment
    passes through its interior; when the segment crosses an edge or corner
    exactly, all crossed axes advance together (a 26-connected step). With
    ``touching=True`` the voxels that only share that edge/corner with the
    segment are yielded as well, which is the conservative choice for
    collision checks.
    """
    s = np.asarray(start, dtype=float)
    d = np.asarray(end, dtype=float) - s
    cell = np.empty(3, dtype=int)
    step = np.zeros(3, dtype=int)
    t_max = np.full(3, np.inf)
    t_delta = np.full(3, np.inf)
    for a in range(3):
        if d[a] > 0:
            cell[a] = int(np.floor(s[a]))
            step[a] = 1
            t_max[a] = (cell[a] + 1 - s[a]) / d[a]
            t_delta[a] = 1.0 / d[a]
        elif d[a] < 0:
            cell[a] = int(np.ceil(s[a])) - 1
            step[a] = -1
            t_max[a] = (cell[a] - s[a]) / d[a]
            t_delta[a] = -1.0 / d[a]
        else:
            cell[a] = int(np.floor(s[a]))
    yield tuple(int(v) for v in cell)
    while True:
        t = t_max.min()
        if t >= 1.0 - _END_EPS:
            return
        axes = [a for a in range(3) if t_max[a] - t <= _TIE_EPS]
        if touching and len(axes) > 1:
            for r in range(1, len(axes)):
                for sub in combinations(axes, r):
                    side = cell.copy()
                    for a in sub:
                        side[a] += step[a]
                    yield tuple(int(v) for v in side)
        for a in axes:
            cell[a] += step[a]
            t_max[a] += t_delta[a]
        yield tuple(int(v) for v in cell)


def cast_rays(occupied, origin, directions, max_t):
    """Cast many rays from one grid-space origin through an occupancy lattice.

    ``occupied`` is an integer lattice where 0 means empty. Directions need not
    be unit length; ``max_t`` is the ray length in units of the direction.
    Returns ``(hit_ray, hit_cell, hit_t, free_ray, free_cell)``: the first
    non-empty voxel per ray with its entry parameter, and every empty voxel
    traversed before it, in ray order. Rays stop silently when leaving the
    lattice.
    """
    dirs = np.asarray(directions, dtype=float)
    n = len(dirs)
    o = np.asarray(origin, dtype=float)
    ext = np.asarray(occupied.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.sign(dirs).astype(int)
        cell = np.where(dirs < 0, np.ceil(o) - 1, np.floor(o)).astype(int)
        cell = np.broadcast_to(cell, (n, 3)).copy()
        nxt = cell + (step > 0)
        t_max = np.where(step != 0, (nxt - o) / dirs, np.inf)
        t_delta = np.where(step != 0, np.abs(1.0 / dirs), np.inf)
    t_entry = np.zeros(n)
    active = np.arange(n)
    hit_ray, hit_cell, hit_t = [], [], []
    free_ray, free_cell = [], []
    while active.size:
        c = cell[active]
        inside = np.all((c >= 0) & (c < ext), axis=1)
        active, c = active[inside], c[inside]
        if not active.size:
            break
        occ = occupied[c[:, 0], c[:, 1], c[:, 2]] != 0
        if occ.any():
            hit_ray.append(active[occ])
            hit_cell.append(c[occ])
            hit_t.append(t_entry[active[occ]])
        active, c = active[~occ], c[~occ]
        free_ray.append(active)
        free_cell.append(c)
        tm = t_max[active]
        axis = np.argmin(tm, axis=1)
        t = tm[np.arange(active.size), axis]
        go = t <= max_t
        active, axis, t = active[go], axis[go], t[go]
        cell[active, axis] += step[active, axis]
        t_max[active, axis] += t_delta[active, axis]
        t_entry[active] = t

    def cat(parts, shape, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.empty(shape, dtype)

    hr = cat(hit_ray, (0,), int)
    order = np.argsort(hr, kind="stable")
    fr = cat(free_ray, (0,), int)
    forder = np.argsort(fr, kind="stable")
    return (
        hr[order],
        cat(hit_cell, (0, 3), int)[order],
        cat(hit_t, (0,), float)[order],
        fr[forder],
        cat(free_cell, (0, 3), int)[forder],
    )
