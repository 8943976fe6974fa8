"""Online occupancy grids with the five-state voxel machine.

Allowed transitions::

    Unknown -> Free | Obstacle | InfraUninspected
    Free    -> Obstacle | InfraUninspected
    InfraUninspected -> InfraInspected

Obstacle and InfraInspected are absorbing.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ._validation import BoundsError, check_index
from .grid import GridFrame
from .world import GroundTruthLabel


class VoxelState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OBSTACLE = 2
    INFRA_UNINSPECTED = 3
    INFRA_INSPECTED = 4


STATE_CODES = {
    VoxelState.UNKNOWN: "U",
    VoxelState.FREE: "F",
    VoxelState.OBSTACLE: "O",
    VoxelState.INFRA_UNINSPECTED: "N",
    VoxelState.INFRA_INSPECTED: "I",
}
_CODE_STATES = {v: k for k, v in STATE_CODES.items()}

OCCUPIED = (VoxelState.OBSTACLE, VoxelState.INFRA_UNINSPECTED, VoxelState.INFRA_INSPECTED)


@dataclass(frozen=True)
class UpdateSummary:
    newly_free: int = 0
    newly_obstacle: int = 0
    newly_infra: int = 0

    @property
    def total(self):
        return self.newly_free + self.newly_obstacle + self.newly_infra


class VoxelGrid:
    """Dense voxel-state lattice with a running state census."""

    def __init__(self, frame):
        self.frame = frame
        self.states = np.zeros(frame.extents, dtype=np.uint8)
        self.counters = np.zeros(len(VoxelState), dtype=np.int64)
        self.counters[VoxelState.UNKNOWN] = frame.size

    @classmethod
    def like(cls, other):
        """Fresh all-Unknown grid over the same frame as ``other`` (scene or grid)."""
        return cls(other.frame)

    @property
    def resolution(self):
        return self.frame.resolution

    @property
    def origin(self):
        return self.frame.origin

    @property
    def extents(self):
        return self.frame.extents

    def state(self, idx):
        return VoxelState(int(self.states[tuple(idx)]))

    def copy(self):
        g = VoxelGrid(self.frame)
        g.states = self.states.copy()
        g.counters = self.counters.copy()
        return g

    def cells_in(self, *states):
        mask = np.isin(self.states, [int(s) for s in states])
        return np.argwhere(mask)

    def _apply(self, cells, target, sources):
        """Move the listed cells currently in ``sources`` to ``target``; return count."""
        if not len(cells):
            return 0
        cells = np.asarray(cells, dtype=int).reshape(-1, 3)
        flat = np.unique(np.ravel_multi_index(cells.T, self.states.shape))
        view = self.states.reshape(-1)
        cur = view[flat]
        move = np.isin(cur, [int(s) for s in sources])
        if not move.any():
            return 0
        self.counters -= np.bincount(cur[move], minlength=len(self.counters)).astype(np.int64)
        view[flat[move]] = int(target)
        self.counters[int(target)] += int(move.sum())
        return int(move.sum())

    def to_text(self):
        lines = [f"res {self.resolution!r}", "dims {} {} {}".format(*self.extents)]
        if any(self.origin):
            lines.append("origin {!r} {!r} {!r}".format(*self.origin))
        for idx in np.argwhere(self.states != VoxelState.UNKNOWN):
            lines.append("{} {} {} {}".format(*idx, STATE_CODES[VoxelState(self.states[tuple(idx)])]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        """Inverse of :meth:`to_text`; unlisted voxels are Unknown."""
        res = dims = None
        origin = (0.0, 0.0, 0.0)
        rows = []
        for line in text.splitlines():
            tok = line.split("#", 1)[0].split()
            if not tok:
                continue
            if tok[0] == "res":
                res = float(tok[1])
            elif tok[0] == "dims":
                dims = tuple(int(v) for v in tok[1:4])
            elif tok[0] == "origin":
                origin = tuple(float(v) for v in tok[1:4])
            else:
                rows.append((tuple(int(v) for v in tok[:3]), _CODE_STATES[tok[3]]))
        grid = cls(GridFrame(res, origin, dims))
        for idx, st in rows:
            check_index(idx, grid.extents)
            grid.states[idx] = int(st)
        grid.counters = census_array(grid.states)
        return grid


def census_array(states):
    return np.bincount(states.ravel(), minlength=len(VoxelState)).astype(np.int64)


def _check_cells(cells, extents):
    cells = np.asarray(cells, dtype=int).reshape(-1, 3)
    if len(cells) and (np.any(cells < 0) or np.any(cells >= np.asarray(extents))):
        raise BoundsError("observation references voxels outside the grid")
    return cells


def integrate(grid, observation):
    """Fold one labelled sweep into ``grid`` and report the new transitions."""
    if not grid.frame.congruent(observation.frame):
        raise ValueError("observation frame does not match grid")
    hits = _check_cells(observation.hit_cells, grid.extents)
    free = _check_cells(observation.free_cells, grid.extents)
    is_infra = np.array(
        [lab is GroundTruthLabel.INFRASTRUCTURE for lab in observation.hit_labels], dtype=bool
    )
    # occupied first so a voxel both hit and traversed stays occupied
    open_states = (VoxelState.UNKNOWN, VoxelState.FREE)
    n_obs = grid._apply(hits[~is_infra], VoxelState.OBSTACLE, open_states)
    n_inf = grid._apply(hits[is_infra], VoxelState.INFRA_UNINSPECTED, open_states)
    n_free = grid._apply(free, VoxelState.FREE, (VoxelState.UNKNOWN,))
    return UpdateSummary(n_free, n_obs, n_inf)


def mark_inspected(grid, voxel):
    idx = check_index(voxel, grid.extents)
    if grid.states[idx] == VoxelState.INFRA_UNINSPECTED:
        grid._apply([idx], VoxelState.INFRA_INSPECTED, (VoxelState.INFRA_UNINSPECTED,))
    return grid.state(idx)


def census(grid):
    c = grid.counters
    return {
        "unknown": int(c[VoxelState.UNKNOWN]),
        "free": int(c[VoxelState.FREE]),
        "obstacle": int(c[VoxelState.OBSTACLE]),
        "infra_uninspected": int(c[VoxelState.INFRA_UNINSPECTED]),
        "infra_inspected": int(c[VoxelState.INFRA_INSPECTED]),
    }


def reveal(scene):
    """Environment and infrastructure grids with the whole scene known."""
    env = VoxelGrid.like(scene)
    env.states[:] = VoxelState.FREE
    infra = VoxelGrid.like(scene)
    for idx, label in scene.cells.items():
        if label is GroundTruthLabel.INFRASTRUCTURE:
            env.states[idx] = VoxelState.INFRA_UNINSPECTED
            infra.states[idx] = VoxelState.INFRA_UNINSPECTED
        else:
            env.states[idx] = VoxelState.OBSTACLE
    env.counters = census_array(env.states)
    infra.counters = census_array(infra.states)
    return env, infra
