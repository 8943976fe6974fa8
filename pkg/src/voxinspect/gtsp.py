"""Generalized TSP: clustered instances, a large-neighbourhood solver, an exact oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import islice, permutations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_count, check_random_state

LARGE_COST = 1e6


class EmptyInstanceError(ValueError):
    pass


class MissingVertexError(KeyError):
    pass


class InstanceTooLargeError(ValueError):
    pass


class GtspParseError(ValueError):
    pass


@dataclass
class GtspInstance:
    """Vertices partitioned into clusters, with a symmetric cost matrix.

    Vertex ids are the row indices ``0..n-1``. ``keys`` names each cluster and
    ``payload`` optionally carries the object behind each vertex (e.g. the
    viewpoint it came from).
    """

    positions: np.ndarray
    cluster_of: np.ndarray
    keys: list
    costs: np.ndarray = None
    payload: list = field(default=None, repr=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.cluster_of = np.asarray(self.cluster_of, dtype=int)
        n = len(self.cluster_of)
        if len(self.positions) != n:
            raise ValueError("positions and cluster_of differ in length")
        if not self.keys:
            raise EmptyInstanceError("instance has no clusters")
        if n and (self.cluster_of.min() < 0 or self.cluster_of.max() >= len(self.keys)):
            raise ValueError("cluster_of refers to unknown clusters")
        counts = np.bincount(self.cluster_of, minlength=len(self.keys))
        if np.any(counts == 0):
            raise ValueError("every cluster needs at least one vertex")
        if self.costs is None:
            diff = self.positions[:, None, :] - self.positions[None, :, :]
            self.costs = np.sqrt((diff**2).sum(-1))
        else:
            self.costs = np.array(self.costs, dtype=float)
            if self.costs.shape != (n, n):
                raise ValueError("cost matrix shape mismatch")
            if not np.allclose(self.costs, self.costs.T) or np.any(self.costs < 0):
                raise ValueError("cost matrix must be symmetric and nonnegative")
            np.fill_diagonal(self.costs, 0.0)
        self.members = [np.flatnonzero(self.cluster_of == c) for c in range(len(self.keys))]

    @property
    def n_vertices(self):
        return len(self.cluster_of)

    @property
    def n_clusters(self):
        return len(self.keys)

    def cost(self, a, b):
        self._check_vertex(a)
        self._check_vertex(b)
        return float(self.costs[a, b])

    def _check_vertex(self, v):
        if not (0 <= int(v) < self.n_vertices):
            raise MissingVertexError(v)

    def tour_cost(self, order):
        order = np.asarray(order, dtype=int)
        if len(order) < 2:
            return 0.0
        return float(self.costs[order, _shift(order)].sum())

    def is_valid_tour(self, order):
        clusters = self.cluster_of[np.asarray(order, dtype=int)]
        return len(order) == self.n_clusters and len(set(clusters.tolist())) == self.n_clusters

    def relabel(self, perm):
        """Copy with vertex ``v`` renamed ``perm[v]``."""
        perm = np.asarray(perm, dtype=int)
        inv = np.argsort(perm)
        return GtspInstance(
            self.positions[inv], self.cluster_of[inv], list(self.keys), self.costs[np.ix_(inv, inv)]
        )

    def to_text(self, name="instance"):
        """GTSPLIB-style dump: full cost matrix and 1-based cluster membership lists."""
        lines = [
            f"NAME: {name}",
            "TYPE: GTSP",
            f"DIMENSION: {self.n_vertices}",
            f"GTSP_SETS: {self.n_clusters}",
            "EDGE_WEIGHT_TYPE: EXPLICIT",
            "EDGE_WEIGHT_FORMAT: FULL_MATRIX",
            "EDGE_WEIGHT_SECTION",
        ]
        for row in self.costs:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append("GTSP_SET_SECTION")
        for c, mem in enumerate(self.members):
            lines.append(" ".join(str(v) for v in [c + 1, *(mem + 1).tolist(), -1]))
        lines.append("EOF")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        header, weights, sets = {}, [], []
        section = None
        try:
            for raw in text.splitlines():
                line = raw.strip()
                if not line or line == "EOF":
                    continue
                if line in ("EDGE_WEIGHT_SECTION", "GTSP_SET_SECTION"):
                    section = line
                    continue
                if ":" in line and section is None:
                    k, v = line.split(":", 1)
                    header[k.strip()] = v.strip()
                elif section == "EDGE_WEIGHT_SECTION":
                    weights.extend(float(v) for v in line.split())
                elif section == "GTSP_SET_SECTION":
                    vals = [int(v) for v in line.split()]
                    if vals[-1] != -1:
                        raise GtspParseError(f"set line not terminated by -1: {line!r}")
                    sets.append(vals[1:-1])
                else:
                    raise GtspParseError(f"unexpected line {line!r}")
            n = int(header["DIMENSION"])
            m = int(header.get("GTSP_SETS", len(sets)))
        except (KeyError, ValueError, IndexError) as exc:
            if isinstance(exc, GtspParseError):
                raise
            raise GtspParseError(f"malformed instance: {exc}") from exc
        if len(weights) != n * n or len(sets) != m:
            raise GtspParseError("weight or set section has the wrong size")
        cluster_of = np.full(n, -1)
        for c, mem in enumerate(sets):
            for v in mem:
                if not (1 <= v <= n) or cluster_of[v - 1] != -1:
                    raise GtspParseError(f"bad membership for vertex {v}")
                cluster_of[v - 1] = c
        if np.any(cluster_of < 0):
            raise GtspParseError("some vertices belong to no cluster")
        try:
            return cls(np.zeros((n, 3)), cluster_of, list(range(m)), np.reshape(weights, (n, n)))
        except ValueError as exc:
            raise GtspParseError(str(exc)) from exc


@dataclass
class GtspTour:
    order: list
    cost: float
    construction_cost: float = None
    iterations: int = 0

    def rotated(self, start_vertex):
        i = self.order.index(start_vertex)
        return self.order[i:] + self.order[:i]


def build_instance(cluster_set, depot=None):
    """One vertex per viewpoint, Euclidean costs.

    With ``depot`` (a world point) an extra singleton cluster keyed ``"depot"``
    is prepended as vertex 0 so tours can be anchored at the vehicle.
    """
    if not cluster_set.clusters:
        raise EmptyInstanceError("no clusters to visit")
    positions, cluster_of, keys, payload = [], [], [], []
    if depot is not None:
        positions.append(tuple(depot))
        cluster_of.append(0)
        keys.append("depot")
        payload.append(None)
    for key, members in cluster_set.clusters:
        if not members:
            raise ValueError(f"cluster {key} is empty")
        c = len(keys)
        keys.append(key)
        for vp in members:
            positions.append(vp.position)
            cluster_of.append(c)
            payload.append(vp)
    return GtspInstance(np.array(positions), np.array(cluster_of), keys, payload=payload)


def update_cost(instance, a, b, cost):
    if a == b:
        raise ValueError("cannot set a self-loop cost")
    instance._check_vertex(a)
    instance._check_vertex(b)
    if not (cost >= 0) or not math.isfinite(cost):
        raise ValueError(f"cost must be a finite nonnegative number, got {cost}")
    instance.costs[a, b] = instance.costs[b, a] = float(cost)


# -- heuristic ---------------------------------------------------------------

_IMPROVE_EPS = 1e-12


def _shift(t):
    # successor of each tour position (cheaper than np.roll on short arrays)
    return np.concatenate((t[1:], t[:1]))


def _construct(inst, rng):
    C = inst.costs
    m = inst.n_clusters
    first = int(rng.integers(m))
    cand = inst.members[first]
    others = np.flatnonzero(inst.cluster_of != first)
    if others.size:
        start = int(cand[np.argmin(C[np.ix_(cand, others)].mean(axis=1))])
    else:
        start = int(cand[0])
    tour = [start]
    unvisited = np.ones(m, dtype=bool)
    unvisited[first] = False
    while unvisited.any():
        pool = np.flatnonzero(unvisited[inst.cluster_of])
        v = int(pool[np.argmin(C[tour[-1], pool])])
        tour.append(v)
        unvisited[inst.cluster_of[v]] = False
    return tour


def _cheapest_insert(C, tour, vertices, rng=None, noise=0.0):
    """Best (position, vertex) to insert any of ``vertices`` into the cyclic tour.

    With ``noise > 0`` each candidate's cost is scaled by a random factor in
    ``[1, 1 + noise]`` before taking the minimum (randomised insertion).
    """
    t = np.asarray(tour)
    if len(t) == 0:
        return 0, int(vertices[0]), 0.0
    nxt = _shift(t)
    delta = C[t][:, vertices] + C[vertices][:, nxt].T - C[t, nxt][:, None]
    if noise > 0:
        delta = delta * (1.0 + noise * rng.random(delta.shape))
    p, v = np.unravel_index(np.argmin(delta), delta.shape)
    return int(p) + 1, int(vertices[v]), float(delta[p, v])


def _remove_reinsert(inst, tour, rng, noise):
    m = len(tour)
    k = int(rng.integers(1, min(5, m - 1) + 1))
    s = int(rng.integers(m))
    idx = [(s + i) % m for i in range(k)]
    removed = [inst.cluster_of[tour[i]] for i in idx]
    gone = set(idx)
    keep = [v for i, v in enumerate(tour) if i not in gone]
    for c in rng.permutation(removed):
        pos, v, _ = _cheapest_insert(inst.costs, keep, inst.members[c], rng, noise)
        keep.insert(pos, v)
    return keep


def _reselect(inst, tour):
    """Swap each tour vertex for its cluster's best vertex given fixed neighbours."""
    C = inst.costs
    tour = list(tour)
    m = len(tour)
    changed = True
    while changed:
        changed = False
        for i in range(m):
            prev, nxt = tour[i - 1], tour[(i + 1) % m]
            mem = inst.members[inst.cluster_of[tour[i]]]
            if len(mem) == 1:
                continue
            cost = C[prev, mem] + C[mem, nxt]
            best = int(mem[np.argmin(cost)])
            if cost.min() < C[prev, tour[i]] + C[tour[i], nxt] - _IMPROVE_EPS:
                tour[i] = best
                changed = True
    return tour


def _two_opt(C, tour):
    t = np.asarray(tour)
    m = len(t)
    if m < 4:
        return list(tour)
    while True:
        a = t
        b = _shift(t)
        # reversing t[i+1..j] swaps edges (a_i,b_i),(a_j,b_j) for (a_i,a_j),(b_i,b_j)
        delta = C[a[:, None], a[None, :]] + C[b[:, None], b[None, :]] - C[a, b][:, None] - C[a, b][None, :]
        iu = np.triu_indices(m, 2)
        d = delta[iu]
        # skip the pair that shares the closing vertex
        valid = ~((iu[0] == 0) & (iu[1] == m - 1))
        d = np.where(valid, d, np.inf)
        best = int(np.argmin(d))
        if d[best] >= -_IMPROVE_EPS:
            return t.tolist()
        i, j = iu[0][best], iu[1][best]
        t = np.concatenate([t[: i + 1], t[i + 1 : j + 1][::-1], t[j + 1 :]])


def _local_search(inst, tour):
    tour = _reselect(inst, tour)
    tour = _two_opt(inst.costs, tour)
    return _reselect(inst, tour)


def solve(instance, max_iter=1000, stall=60, seed=0, noise=1.0, restarts=3):
    """Heuristic GTSP tour: greedy construction then accept-if-better LNS.

    Each improvement round removes up to five consecutive clusters, reinserts
    them by randomised cheapest insertion, then polishes with vertex
    reselection and 2-opt; a candidate replaces the current tour only if it
    is strictly cheaper. The search stops after ``max_iter`` rounds or after
    ``stall`` rounds without a new best tour. Within that window the current
    tour is rebuilt from a fresh construction every ``stall // restarts``
    rounds without progress.
    """
    if instance.n_clusters < 1:
        raise EmptyInstanceError("instance has no clusters")
    check_count(max_iter, "max_iter", 0)
    check_count(stall, "stall", 1)
    check_count(restarts, "restarts", 1)
    rng = check_random_state(seed)
    tour = _construct(instance, rng)
    construction = instance.tour_cost(tour)
    m = instance.n_clusters
    if m == 1:
        return GtspTour([tour[0]], 0.0, 0.0, 0)
    if m == 2:
        a, b = instance.members
        sub = instance.costs[np.ix_(a, b)]
        i, j = np.unravel_index(np.argmin(sub), sub.shape)
        best = [int(a[i]), int(b[j])]
        return GtspTour(best, instance.tour_cost(best), construction, 0)
    best = _local_search(instance, tour)
    best_cost = instance.tour_cost(best)
    cur, cur_cost = best, best_cost
    patience = max(1, stall // restarts)
    since_best = since_cur = 0
    it = 0
    for it in range(1, max_iter + 1):
        cand = _remove_reinsert(instance, cur, rng, noise)
        if cand == cur:
            cost = cur_cost
        else:
            cand = _local_search(instance, cand)
            cost = instance.tour_cost(cand)
        if cost < cur_cost - _IMPROVE_EPS:
            cur, cur_cost, since_cur = cand, cost, 0
        else:
            since_cur += 1
        if cur_cost < best_cost - _IMPROVE_EPS:
            best, best_cost, since_best = cur, cur_cost, 0
        else:
            since_best += 1
        if since_best >= stall:
            break
        if since_cur >= patience:
            cur = _local_search(instance, _construct(instance, rng))
            cur_cost = instance.tour_cost(cur)
            since_cur = 0
            if cur_cost < best_cost - _IMPROVE_EPS:
                best, best_cost, since_best = cur, cur_cost, 0
    return GtspTour([int(v) for v in best], instance.tour_cost(best), construction, it)


# -- exact oracle ------------------------------------------------------------

EXACT_GUARD = 10**7


def solve_exact(instance, guard=EXACT_GUARD, chunk=50_000):
    """Optimal tour by enumerating cluster orders (first cluster fixed) and vertex choices."""
    m = instance.n_clusters
    if m < 1:
        raise EmptyInstanceError("instance has no clusters")
    sizes = [len(mem) for mem in instance.members]
    work = math.prod(sizes) * math.factorial(m - 1)
    if work > guard:
        raise InstanceTooLargeError(f"enumeration size {work} exceeds guard {guard}")
    C = instance.costs
    if m == 1:
        return GtspTour([int(instance.members[0][0])], 0.0)
    width = max(sizes)
    # pad each cluster to equal width by repeating its first vertex; minima are unchanged
    table = np.array(
        [np.concatenate([mem, np.full(width - len(mem), mem[0])]) for mem in instance.members]
    )
    best_cost, best_tour = np.inf, None
    perms = permutations(range(1, m))
    while True:
        block = np.array(list(islice(perms, chunk)), dtype=int).reshape(-1, m - 1)
        if not len(block):
            break
        for s in instance.members[0]:
            # dist[p, w]: cheapest chain from s to vertex w of the current cluster
            verts = table[block[:, 0]]
            dist = C[s, verts]
            back = []
            for pos in range(1, m - 1):
                nv = table[block[:, pos]]
                tot = dist[:, :, None] + C[verts[:, :, None], nv[:, None, :]]
                arg = tot.argmin(axis=1)
                back.append(arg)
                dist = np.take_along_axis(tot, arg[:, None, :], axis=1)[:, 0, :]
                verts = nv
            closing = dist + C[verts, s]
            w = closing.argmin(axis=1)
            vals = closing[np.arange(len(block)), w]
            p = int(np.argmin(vals))
            if vals[p] < best_cost - _IMPROVE_EPS:
                best_cost = float(vals[p])
                # backtrack the vertex choice along permutation p
                choice = [int(w[p])]
                for arg in reversed(back):
                    choice.append(int(arg[p, choice[-1]]))
                choice.reverse()
                best_tour = [int(s)] + [int(table[c, j]) for c, j in zip(block[p], choice)]
    return GtspTour(best_tour, instance.tour_cost(best_tour))


class GtspSolver(BaseEstimator):
    """Estimator facade over :func:`solve`; ``fit(instance)`` sets ``tour_``."""

    def __init__(self, max_iter=1000, stall=60, seed=0, exact=False):
        self.max_iter = max_iter
        self.stall = stall
        self.seed = seed
        self.exact = exact

    def fit(self, instance, y=None):
        check_count(self.max_iter, "max_iter", 0)
        check_count(self.stall, "stall", 1)
        if self.exact:
            self.tour_ = solve_exact(instance)
        else:
            self.tour_ = solve(instance, self.max_iter, self.stall, self.seed)
        self.cost_ = self.tour_.cost
        return self

    def predict(self, instance):
        return self.fit(instance).tour_.order
