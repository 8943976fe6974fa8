"""Synthetic voxel scenes used by the examples, tests and the CLI.

Each builder returns ``(scene, start_pose)`` with the start pose facing part
of the infrastructure.
"""

from __future__ import annotations

import math

from .grid import GridFrame
from .world import GroundTruthLabel, Pose, Scene

I = GroundTruthLabel.INFRASTRUCTURE
O = GroundTruthLabel.OBSTACLE


def _box(cells, label, x, y, z):
    for i in range(*x):
        for j in range(*y):
            for k in range(*z):
                cells[(i, j, k)] = label


def _scene(name, dims, cells):
    return Scene(GridFrame(1.0, (0.0, 0.0, 0.0), dims), cells, name)


def box_bridge():
    """12x3x4 deck on four obstacle posts."""
    cells = {}
    _box(cells, I, (9, 21), (8, 11), (5, 9))
    for px in (9, 20):
        for py in (8, 10):
            _box(cells, O, (px, px + 1), (py, py + 1), (0, 5))
    return _scene("box_bridge", (30, 20, 12), cells), Pose((4.5, 9.5, 6.5), 0.0)


def arch():
    """Single-voxel-thick arch span, three voxels wide."""
    cells = {}
    for i in range(4, 26):
        top = int(round(1 + 7 * math.sin(math.pi * (i - 4) / 21)))
        for k in range(max(0, top - 1), top + 1):
            for j in range(8, 11):
                cells[(i, j, k)] = I
    return _scene("arch", (30, 20, 14), cells), Pose((15.5, 2.5, 5.5), math.pi / 2)


def wall_with_window():
    """Thin infrastructure wall with a window, plus a tree-like obstacle."""
    cells = {}
    _box(cells, I, (15, 16), (4, 16), (0, 8))
    for j in range(8, 12):
        for k in range(3, 6):
            del cells[(15, j, k)]
    _box(cells, O, (8, 9), (3, 4), (0, 6))
    return _scene("wall_window", (30, 20, 12), cells), Pose((9.5, 9.5, 4.5), 0.0)


def l_building():
    """L-shaped block building."""
    cells = {}
    _box(cells, I, (10, 20), (5, 8), (0, 5))
    _box(cells, I, (10, 13), (8, 15), (0, 5))
    return _scene("l_building", (30, 22, 10), cells), Pose((5.5, 6.5, 3.5), 0.0)


def tower():
    """3x3 tower with an obstacle pole beside it."""
    cells = {}
    _box(cells, I, (13, 16), (8, 11), (0, 9))
    _box(cells, O, (8, 9), (13, 14), (0, 8))
    return _scene("tower", (28, 20, 14), cells), Pose((8.5, 9.5, 4.5), 0.0)


def blocked_voxel():
    """A small deck plus one voxel set in a wall, hidden behind pillars.

    The embedded voxel is visible to the range sensor at an angle, but every
    on-axis viewpoint is occluded by a pillar one voxel in front of it, so it
    cannot be inspected with a narrow viewing cone.
    """
    cells = {}
    _box(cells, I, (15, 16), (4, 8), (3, 6))
    _box(cells, O, (15, 16), (11, 17), (0, 9))
    cells[(15, 13, 4)] = I
    cells[(13, 13, 4)] = O
    cells[(17, 13, 4)] = O
    return _scene("blocked_voxel", (30, 20, 12), cells), Pose((10.5, 6.5, 4.5), 0.0)


def single_voxel():
    """One infrastructure voxel floating in open space."""
    cells = {(10, 10, 5): I}
    return _scene("single_voxel", (20, 20, 12), cells), Pose((4.5, 9.5, 5.5), 0.0)


STANDARD = {
    "box_bridge": box_bridge,
    "arch": arch,
    "wall_window": wall_with_window,
    "l_building": l_building,
    "tower": tower,
}

ALL = {**STANDARD, "blocked_voxel": blocked_voxel, "single_voxel": single_voxel}
