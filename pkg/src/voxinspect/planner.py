"""Receding-horizon inspection planner.

One iteration: cluster viewpoints over the current maps, solve a GTSP tour
anchored at the vehicle, lazily correct the first edge with RRT* until it is
within the discrepancy factor of its Euclidean length, then fly the tour,
sensing at every viewpoint and marking the targets inspected.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_count, check_positive
from .gtsp import LARGE_COST, build_instance, solve, update_cost
from .mapping import VoxelGrid, VoxelState, census, integrate, mark_inspected
from .metrics import RunReport, Sample
from .rrtstar import PlanRequest, plan, segment_free
from .viewgen import Camera, ClusterKey, ClusterSet, Granularity, ViewConstraint, generate_clusters, view_test
from .world import Pose, SensorModel, sense

log = logging.getLogger(__name__)


class NoInfrastructureVisibleError(RuntimeError):
    pass


class Outcome(Enum):
    CONTINUED = "continued"
    FINISHED = "finished"
    STUCK = "stuck"


@dataclass(frozen=True)
class RrtSettings:
    step: float = None  # None: one voxel edge
    rewire_radius: float = None  # None: three voxel edges
    max_iterations: int = 5000
    goal_bias: float = 0.1
    refine_iterations: int = 300

    def request(self, frame, start, goal, seed):
        return PlanRequest(
            tuple(start),
            tuple(goal),
            self.step or frame.resolution,
            self.rewire_radius or 3 * frame.resolution,
            self.max_iterations,
            self.goal_bias,
            seed,
            self.refine_iterations,
        )


@dataclass(frozen=True)
class WorkClock:
    """Deterministic planning-time model: seconds charged per unit of work."""

    per_ray: float = 2e-6
    per_candidate: float = 5e-6
    per_solver_round: float = 1e-3
    per_rrt_iteration: float = 2e-4


@dataclass(frozen=True)
class PlannerConfig:
    view: ViewConstraint = field(default_factory=ViewConstraint)
    dd_factor: float = 1.25
    rpt: int = None  # viewpoints per iteration; None flies the whole tour
    max_lazy_replans: int = 25
    solver_max_iter: int = 1000
    solver_stall: int = 60
    rrt: RrtSettings = field(default_factory=RrtSettings)
    sensor: SensorModel = field(default_factory=SensorModel)
    seed: int = 0
    cruise_mps: float = 1.0
    stall_limit: int = 3
    max_iterations: int = 500
    # extra sweeps while flying, every this many metres (None: viewpoints only)
    sense_spacing: float = 2.0
    wall_clock: bool = False
    work_clock: WorkClock = field(default_factory=WorkClock)

    def __post_init__(self):
        if not (self.dd_factor > 1):
            raise ValueError(f"dd_factor must be > 1, got {self.dd_factor}")
        check_count(self.max_lazy_replans, "max_lazy_replans", 1)
        if self.rpt is not None:
            check_count(self.rpt, "rpt", 1)
        check_positive(self.cruise_mps, "cruise_mps")
        check_count(self.stall_limit, "stall_limit", 1)
        if self.sense_spacing is not None:
            check_positive(self.sense_spacing, "sense_spacing")


@dataclass
class PlannerState:
    scene: object
    pose: Pose
    env: VoxelGrid
    infra: VoxelGrid
    odometer: float = 0.0
    planning_clock: float = 0.0
    iteration: int = 0
    deferred: set = field(default_factory=set)
    unreachable: dict = field(default_factory=dict)
    inspected_faces: set = field(default_factory=set)
    stall_count: int = 0
    last_deferred: int = None
    path: list = field(default_factory=list)
    flown: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    outcome: Outcome = Outcome.CONTINUED

    def inspected_count(self):
        return int(self.infra.counters[VoxelState.INFRA_INSPECTED])


def _map_signature(state):
    return tuple(int(v) for v in state.env.counters)


def _charge(state, config, seconds=0.0, **units):
    if config.wall_clock:
        state.planning_clock += seconds
        return
    wc = config.work_clock
    state.planning_clock += (
        units.get("rays", 0) * wc.per_ray
        + units.get("candidates", 0) * wc.per_candidate
        + units.get("solver_rounds", 0) * wc.per_solver_round
        + units.get("rrt_iterations", 0) * wc.per_rrt_iteration
    )


def _record_sample(state, config):
    state.samples.append(
        Sample(
            state.odometer,
            state.planning_clock,
            state.planning_clock + state.odometer / config.cruise_mps,
            state.inspected_count(),
        )
    )


def _sense_and_integrate(state, config, pose):
    t0 = time.perf_counter()
    obs = sense(state.scene, pose, config.sensor)
    integrate(state.env, obs)
    integrate(state.infra, obs.infrastructure_only())
    _charge(state, config, time.perf_counter() - t0, rays=config.sensor.rays_h * config.sensor.rays_v)
    return obs


def bootstrap(scene, start, config=None):
    """Initial sweep from ``start``; the infrastructure must be in view."""
    config = config or PlannerConfig()
    if not isinstance(start, Pose):
        start = Pose(*start) if len(start) == 2 else Pose(tuple(start))
    state = PlannerState(scene, start, VoxelGrid.like(scene), VoxelGrid.like(scene))
    obs = _sense_and_integrate(state, config, start)
    if not any(lab.value == "I" for lab in obs.hit_labels):
        raise NoInfrastructureVisibleError("no infrastructure visible from the start pose")
    state.path.append(tuple(start.position))
    _record_sample(state, config)
    return state


def _key_done(state, key):
    if state.infra.states[key.voxel] != VoxelState.INFRA_UNINSPECTED:
        return True
    return key.normal is not None and key in state.inspected_faces


def _still_valid(state, config, vp):
    frame = state.env.frame
    cell = frame.index_of(vp.position)
    if state.env.states[cell] != VoxelState.FREE:
        return False
    if state.infra.states[vp.target.voxel] != VoxelState.INFRA_UNINSPECTED:
        return False
    return view_test(vp.position, vp.target, config.view, state.env)[0]


def _oriented(inst, order):
    """Rotate to the depot (vertex 0) and fly the cheaper depot edge first."""
    i = order.index(0)
    order = order[i:] + order[:i]
    if len(order) > 2 and inst.costs[0, order[-1]] < inst.costs[0, order[1]]:
        order = [0] + order[1:][::-1]
    return order


def _fly(state, config, path):
    """Advance along ``path``, sensing every ``sense_spacing`` metres on the way."""
    pts = [np.asarray(p, dtype=float) for p in path.waypoints]
    spacing = config.sense_spacing
    yaw = state.pose.yaw
    for a, b in zip(pts[:-1], pts[1:]):
        if not segment_free(state.env, a, b):
            raise RuntimeError(f"refusing to fly blocked segment {a} -> {b}")
        d = b - a
        seg = float(np.linalg.norm(d))
        if math.hypot(d[0], d[1]) > 1e-9:
            yaw = math.atan2(d[1], d[0])
        if spacing:
            travelled = state.odometer
            for s in np.arange(spacing - travelled % spacing, seg, spacing):
                if s <= 1e-9:
                    continue
                p = a + d * (s / seg)
                if state.scene.labels[state.env.frame.index_of(p)] == 0:
                    _sense_and_integrate(state, config, Pose(tuple(p), yaw))
        state.flown.append((tuple(a), tuple(b)))
        state.odometer += seg
        state.path.append(tuple(b))


def _mark(state, clusters, key):
    if key.normal is None:
        mark_inspected(state.infra, key.voxel)
        mark_inspected(state.env, key.voxel)
        return
    state.inspected_faces.add(key)
    faces = [k for k in clusters if k.voxel == key.voxel]
    if all(k in state.inspected_faces for k in faces):
        mark_inspected(state.infra, key.voxel)
        mark_inspected(state.env, key.voxel)


def _settle_faces(state, clusters):
    """Mark voxels whose every face with viewpoints has been inspected."""
    pending = {k.voxel for k in clusters if k not in state.inspected_faces}
    for voxel in {k.voxel for k in state.inspected_faces} - pending:
        if state.infra.states[voxel] == VoxelState.INFRA_UNINSPECTED:
            mark_inspected(state.infra, voxel)
            mark_inspected(state.env, voxel)


def _rrt_seed(config, state, salt):
    return (config.seed * 1_000_003 + state.iteration * 10_007 + salt) % (2**32)


def iterate(state, config=None):
    """Run one planning iteration and return its :class:`Outcome`."""
    config = config or PlannerConfig()
    state.iteration += 1
    record = {"iteration": state.iteration}
    t0 = time.perf_counter()
    cs = generate_clusters(state.env, state.infra, config.view)
    _charge(state, config, time.perf_counter() - t0, candidates=sum(len(m) for _, m in cs.clusters))
    cluster_keys = {k for k, _ in cs.clusters}
    if config.view.granularity is Granularity.PER_FACE:
        _settle_faces(state, cluster_keys)

    sig = _map_signature(state)
    state.unreachable = {k: s for k, s in state.unreachable.items() if s == sig}
    active = [
        (k, m) for k, m in cs.clusters if not _key_done(state, k) and k not in state.unreachable
    ]
    deferred = set(cs.uninspectable) | {k for k, _ in cs.clusters if k in state.unreachable}
    if config.view.granularity is Granularity.PER_FACE:
        deferred = {k for k in deferred if state.infra.states[k.voxel] == VoxelState.INFRA_UNINSPECTED}
    state.deferred = deferred
    record.update(clusters=len(active), deferred=len(deferred))

    if not active:
        if not deferred:
            state.outcome = Outcome.FINISHED
        else:
            if state.last_deferred is not None and len(deferred) < state.last_deferred:
                state.stall_count = 0
            else:
                state.stall_count += 1
            if state.stall_count >= config.stall_limit:
                state.outcome = Outcome.STUCK
        state.last_deferred = len(deferred)
        record.update(outcome=state.outcome.value, visited=0)
        _finish_record(state, record)
        return state.outcome
    state.stall_count = 0
    state.last_deferred = len(deferred)

    active_keys = [k for k, _ in active]
    inst = build_instance(ClusterSet(active, [], cs.granularity), depot=state.pose.position)
    solver_seed = _rrt_seed(config, state, 0)

    def _solve():
        t = time.perf_counter()
        tour = solve(inst, config.solver_max_iter, config.solver_stall, solver_seed)
        _charge(state, config, time.perf_counter() - t, solver_rounds=tour.iterations + 1)
        return tour

    tour = _solve()
    record.update(vertices=inst.n_vertices, tour_cost=round(tour.cost, 6))

    # lazy evaluation of the first edge
    checked = {}
    replans = 0
    exhausted = False
    while True:
        order = _oriented(inst, tour.order)
        if len(order) < 2:
            break
        first = order[1]
        if first in checked:
            # same (already corrected) edge again: further re-solves are identical
            replans = config.max_lazy_replans
            exhausted = True
            break
        start, goal = inst.positions[0], inst.positions[first]
        t = time.perf_counter()
        path = plan(state.env, config.rrt.request(state.env.frame, start, goal, _rrt_seed(config, state, first + 1)))
        _charge(state, config, time.perf_counter() - t, rrt_iterations=0 if path is None else path.iterations)
        euclid = float(np.linalg.norm(goal - start))
        length = LARGE_COST if path is None else path.length
        checked[first] = (path, length, euclid)
        if length <= config.dd_factor * euclid + 1e-9:
            break
        update_cost(inst, 0, first, length)
        if replans >= config.max_lazy_replans:
            exhausted = True
            break
        replans += 1
        tour = _solve()
    first = order[1] if len(order) > 1 else None
    if first is not None and first in checked:
        _, flen, feu = checked[first]
        record.update(
            first_edge_euclid=round(feu, 6),
            first_edge_rrt=None if flen >= LARGE_COST else round(flen, 6),
            first_edge_within_dd=bool(flen <= config.dd_factor * feu + 1e-9),
        )
    record.update(lazy_replans=replans, lazy_exhausted=exhausted, final_tour_cost=round(inst.tour_cost(tour.order), 6))

    # execute the tour, closing edge dropped
    visited = skipped = 0
    failed = set()
    for n_step, v in enumerate(order[1:]):
        key = inst.keys[inst.cluster_of[v]]
        vp = inst.payload[v]
        if _key_done(state, key):
            continue
        if not _still_valid(state, config, vp):
            skipped += 1
            continue
        goal = np.asarray(vp.position)
        here = np.asarray(state.pose.position)
        if n_step == 0 and v in checked:
            path = checked[v][0]
        else:
            t = time.perf_counter()
            path = plan(state.env, config.rrt.request(state.env.frame, here, goal, _rrt_seed(config, state, v + 1)))
            _charge(state, config, time.perf_counter() - t, rrt_iterations=0 if path is None else path.iterations)
        if path is None:
            failed.add(key)
            continue
        _fly(state, config, path)
        state.pose = Pose(vp.position, vp.yaw)
        _sense_and_integrate(state, config, state.pose)
        if view_test(vp.position, vp.target, config.view, state.env)[0]:
            _mark(state, cluster_keys, key)
        visited += 1
        _record_sample(state, config)
        if config.rpt is not None and visited >= config.rpt:
            break
    if failed and not visited:
        sig = _map_signature(state)
        for key in failed:
            state.unreachable[key] = sig
    record.update(visited=visited, skipped=skipped, unreachable=len(failed), outcome=Outcome.CONTINUED.value)
    state.outcome = Outcome.CONTINUED
    _finish_record(state, record)
    return state.outcome


def _finish_record(state, record):
    record.update(
        odometer=round(state.odometer, 6),
        planning_s=round(state.planning_clock, 6),
        census=census(state.env),
        infra_inspected=state.inspected_count(),
    )
    state.trace.append(record)


def inspectability(scene, view):
    """Full-knowledge oracle: (inspectable keys, uninspectable keys) over the revealed scene."""
    from .mapping import reveal

    env, infra = reveal(scene)
    cs = generate_clusters(env, infra, view)
    if view.granularity is Granularity.PER_VOXEL:
        return [k for k, _ in cs.clusters], list(cs.uninspectable)
    good = sorted({k.voxel for k, _ in cs.clusters})
    bad = sorted({k.voxel for k in cs.uninspectable} - set(good))
    return [ClusterKey(v) for v in good], [ClusterKey(v) for v in bad]


def run(scene, start, config=None):
    """Bootstrap and iterate until finished or stuck; returns ``(report, state)``."""
    config = config or PlannerConfig()
    state = bootstrap(scene, start, config)
    while state.iteration < config.max_iterations:
        outcome = iterate(state, config)
        log.debug("iteration %d: %s", state.iteration, outcome.value)
        if outcome is not Outcome.CONTINUED:
            break
    else:
        state.outcome = Outcome.STUCK
    inspectable, _ = inspectability(scene, config.view)
    uninspectable = []
    if state.outcome is Outcome.STUCK:
        # reported per voxel; face keys of one voxel collapse
        uninspectable = sorted({ClusterKey(k.voxel) for k in state.deferred})
    report = RunReport(
        scene=scene.name,
        object_voxels=len(scene.infrastructure_cells()),
        inspectable_voxels=len(inspectable),
        inspected=state.inspected_count(),
        distance_m=state.odometer,
        planning_s=state.planning_clock,
        time_s=state.planning_clock + state.odometer / config.cruise_mps,
        samples=list(state.samples),
        uninspectable=[str(k) for k in uninspectable],
        status=state.outcome.value,
        iterations=state.iteration,
    )
    return report, state


class InspectionPlanner(BaseEstimator):
    """Estimator facade: ``fit(scene, start)`` runs the planner to completion.

    Fitted attributes: ``report_``, ``state_``, ``trace_``, ``outcome_``.
    """

    def __init__(
        self,
        apex_deg=20.0,
        min_dist=2.0,
        max_dist=5.0,
        cameras=("fwd", "up", "down"),
        granularity="per-face",
        dd_factor=1.25,
        rpt=None,
        max_lazy_replans=25,
        solver_max_iter=1000,
        solver_stall=60,
        rrt_max_iterations=5000,
        rrt_goal_bias=0.1,
        sensor=None,
        cruise_mps=1.0,
        sense_spacing=2.0,
        seed=0,
    ):
        self.apex_deg = apex_deg
        self.min_dist = min_dist
        self.max_dist = max_dist
        self.cameras = cameras
        self.granularity = granularity
        self.dd_factor = dd_factor
        self.rpt = rpt
        self.max_lazy_replans = max_lazy_replans
        self.solver_max_iter = solver_max_iter
        self.solver_stall = solver_stall
        self.rrt_max_iterations = rrt_max_iterations
        self.rrt_goal_bias = rrt_goal_bias
        self.sensor = sensor
        self.cruise_mps = cruise_mps
        self.sense_spacing = sense_spacing
        self.seed = seed

    def to_config(self):
        view = ViewConstraint(
            math.radians(self.apex_deg),
            self.min_dist,
            self.max_dist,
            frozenset(Camera(c) for c in self.cameras),
            Granularity(self.granularity),
        )
        return PlannerConfig(
            view=view,
            dd_factor=self.dd_factor,
            rpt=self.rpt,
            max_lazy_replans=self.max_lazy_replans,
            solver_max_iter=self.solver_max_iter,
            solver_stall=self.solver_stall,
            rrt=replace(RrtSettings(), max_iterations=self.rrt_max_iterations, goal_bias=self.rrt_goal_bias),
            sensor=self.sensor or SensorModel(),
            seed=self.seed,
            cruise_mps=self.cruise_mps,
            sense_spacing=self.sense_spacing,
        )

    def fit(self, scene, start):
        self.report_, self.state_ = run(scene, start, self.to_config())
        self.trace_ = self.state_.trace
        self.outcome_ = self.state_.outcome
        return self
