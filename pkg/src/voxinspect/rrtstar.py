"""RRT* through confirmed-free voxels, with greedy shortcutting.

Flight is only allowed through Free voxels; Unknown and occupied voxels both
block. Segments are checked conservatively: a segment that grazes a voxel
edge or corner also needs the voxels it merely touches to be free.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from ._validation import (
    BoundsError,
    check_count,
    check_point,
    check_positive,
    check_probability,
)
from .grid import walk
from .mapping import VoxelState


class InvalidEndpointError(ValueError):
    pass


@dataclass(frozen=True)
class PlanRequest:
    start: tuple = (0.0, 0.0, 0.0)
    goal: tuple = (0.0, 0.0, 0.0)
    step: float = 1.0
    rewire_radius: float = 3.0
    max_iterations: int = 5000
    goal_bias: float = 0.1
    seed: int = 0
    # rounds kept refining after the first solution; None runs to max_iterations
    refine_iterations: int = 300

    def __post_init__(self):
        check_point(self.start, "start")
        check_point(self.goal, "goal")
        check_positive(self.step, "step")
        check_positive(self.rewire_radius, "rewire_radius")
        if self.rewire_radius < self.step:
            raise ValueError("rewire_radius must be >= step")
        check_count(self.max_iterations, "max_iterations", 1)
        check_probability(self.goal_bias, "goal_bias")
        if self.refine_iterations is not None:
            check_count(self.refine_iterations, "refine_iterations", 0)

    @classmethod
    def for_grid(cls, frame, **kw):
        """Defaults scaled to a grid: one-voxel step, three-voxel rewire radius."""
        kw.setdefault("step", frame.resolution)
        kw.setdefault("rewire_radius", 3 * frame.resolution)
        return cls(**kw)


@dataclass
class PlannedPath:
    waypoints: list
    length: float
    raw_length: float = None
    iterations: int = 0

    def segments(self):
        return list(zip(self.waypoints[:-1], self.waypoints[1:]))


def segment_free(env, a, b):
    """True when every voxel the segment ``a -> b`` crosses or touches is Free."""
    frame = env.frame
    a = check_point(a, "a")
    b = check_point(b, "b")
    for p in (a, b):
        if not frame.contains_point(p):
            raise BoundsError(f"segment endpoint {p} outside grid")
    states = env.states
    for cell in walk(frame.to_grid(a), frame.to_grid(b), touching=True):
        if not frame.in_bounds(cell) or states[cell] != VoxelState.FREE:
            return False
    return True


def _point_free(env, p):
    frame = env.frame
    if not frame.contains_point(p):
        return False
    return env.states[frame.index_of(p)] == VoxelState.FREE


def shortcut(env, waypoints):
    """Greedy shortcutting: from each kept waypoint jump to the farthest visible one."""
    pts = [np.asarray(w, dtype=float) for w in waypoints]
    if len(pts) <= 2:
        return pts
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not segment_free(env, pts[i], pts[j]):
            j -= 1
        out.append(pts[j])
        i = j
    return out


def _length(pts):
    return float(sum(np.linalg.norm(np.subtract(b, a)) for a, b in zip(pts[:-1], pts[1:])))


def plan(env, req):
    """Plan a collision-free path, or return ``None`` when none was found."""
    frame = env.frame
    start = check_point(req.start, "start")
    goal = check_point(req.goal, "goal")
    for name, p in (("start", start), ("goal", goal)):
        if not _point_free(env, p):
            raise InvalidEndpointError(f"{name} {p} is not in a Free voxel")
    if np.allclose(start, goal):
        return PlannedPath([start], 0.0, 0.0, 0)
    if segment_free(env, start, goal):
        d = float(np.linalg.norm(goal - start))
        return PlannedPath([start, goal], d, d, 0)

    rng = np.random.default_rng(req.seed)
    free = env.cells_in(VoxelState.FREE)
    lo = frame.to_world(free.min(axis=0))
    hi = frame.to_world(free.max(axis=0) + 1)

    cap = req.max_iterations + 1
    nodes = np.empty((cap, 3))
    cost = np.empty(cap)
    parent = np.full(cap, -1, dtype=int)
    children = [[] for _ in range(cap)]
    nodes[0], cost[0] = start, 0.0
    n = 1
    goal_links = []  # nodes that see the goal within one step
    best_goal = math.inf
    first_solution = None
    it = 0

    for it in range(1, req.max_iterations + 1):
        if first_solution is not None and req.refine_iterations is not None:
            if it - first_solution > req.refine_iterations:
                break
        sample = goal if rng.random() < req.goal_bias else lo + rng.random(3) * (hi - lo)
        d2 = ((nodes[:n] - sample) ** 2).sum(axis=1)
        near_i = int(np.argmin(d2))
        dist = math.sqrt(d2[near_i])
        if dist < 1e-12:
            continue
        new = nodes[near_i] + (sample - nodes[near_i]) * min(1.0, req.step / dist)
        if not _point_free(env, new) or not segment_free(env, nodes[near_i], new):
            continue
        dn = np.sqrt(((nodes[:n] - new) ** 2).sum(axis=1))
        near = np.flatnonzero(dn <= req.rewire_radius)
        # choose the cheapest collision-free parent among the near set
        best_p, best_c = near_i, cost[near_i] + dn[near_i]
        for j in near[np.argsort(cost[near] + dn[near], kind="stable")]:
            c = cost[j] + dn[j]
            if c >= best_c:
                break
            if segment_free(env, nodes[j], new):
                best_p, best_c = int(j), c
                break
        k = n
        nodes[k], cost[k], parent[k] = new, best_c, best_p
        children[best_p].append(k)
        n += 1
        # rewire neighbours through the new node
        for j in near:
            if j == best_p:
                continue
            c = best_c + dn[j]
            if c < cost[j] - 1e-12 and segment_free(env, new, nodes[j]):
                children[parent[j]].remove(j)
                parent[j] = k
                children[k].append(int(j))
                delta = c - cost[j]
                stack = [int(j)]
                while stack:
                    q = stack.pop()
                    cost[q] += delta
                    stack.extend(children[q])
        dg = float(np.linalg.norm(goal - new))
        if dg <= req.step and segment_free(env, new, goal):
            goal_links.append(k)
        if goal_links:
            best_goal = min(cost[g] + np.linalg.norm(goal - nodes[g]) for g in goal_links)
            if first_solution is None:
                first_solution = it

    if not goal_links:
        return None
    last = min(goal_links, key=lambda g: (cost[g] + np.linalg.norm(goal - nodes[g]), g))
    chain = []
    q = last
    while q != -1:
        chain.append(nodes[q].copy())
        q = parent[q]
    raw = chain[::-1] + [goal]
    pts = shortcut(env, raw)
    return PlannedPath(pts, _length(pts), float(best_goal), it)


def path_length(env, a, b, template=None):
    """Length of a planned path from ``a`` to ``b``, or ``None`` if unreachable."""
    template = template or PlanRequest.for_grid(env.frame)
    path = plan(env, replace(template, start=tuple(a), goal=tuple(b)))
    return None if path is None else path.length


def write_path_csv(fh, waypoints):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x", "y", "z"])
    for p in waypoints:
        w.writerow([repr(float(v)) for v in p])
