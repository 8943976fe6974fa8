import math
import sys

import numpy as np
import pytest

from voxinspect.grid import GridFrame
from voxinspect.mapping import VoxelGrid, VoxelState
from voxinspect.world import GroundTruthLabel, Scene


def make_scene(dims, cells=None, name="test", resolution=1.0, origin=(0.0, 0.0, 0.0)):
    labels = {}
    for idx, lab in (cells or {}).items():
        labels[tuple(idx)] = GroundTruthLabel(lab) if isinstance(lab, str) else lab
    return Scene(GridFrame(resolution, origin, dims), labels, name)


def grid_with(dims, free=(), states=None, resolution=1.0):
    """VoxelGrid with chosen cells set; the rest stay Unknown unless ``free='all'``."""
    g = VoxelGrid(GridFrame(resolution, (0.0, 0.0, 0.0), dims))
    if free == "all":
        g.states[...] = VoxelState.FREE
    else:
        for idx in free:
            g.states[tuple(idx)] = VoxelState.FREE
    for idx, st in (states or {}).items():
        g.states[tuple(idx)] = st
    g.counters = np.bincount(g.states.ravel(), minlength=5).astype(np.int64)
    return g


def segment_box_interval(p, d, lo, hi):
    """Open parameter interval where p + t d lies strictly inside the box, or None."""
    t0, t1 = -math.inf, math.inf
    for a in range(3):
        if d[a] == 0:
            if not (lo[a] < p[a] < hi[a]):
                return None
            continue
        ta, tb = (lo[a] - p[a]) / d[a], (hi[a] - p[a]) / d[a]
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
    if t0 >= t1:
        return None
    return t0, t1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(rng, m_range=(2, 8), size_range=(1, 3), scale=10.0):
    """Seeded random Euclidean GTSP instance (the acceptance-suite generator)."""
    from voxinspect.gtsp import GtspInstance

    m = int(rng.integers(m_range[0], m_range[1] + 1))
    sizes = rng.integers(size_range[0], size_range[1] + 1, size=m)
    cluster_of = np.repeat(np.arange(m), sizes)
    positions = rng.random((len(cluster_of), 3)) * scale
    return GtspInstance(positions, cluster_of, list(range(m)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        status, title, notes = mod.RESULTS[n]
        terminalreporter.write_line(f"[{status}] criterion {n}: {title}" + (f" ({notes})" if notes else ""))
