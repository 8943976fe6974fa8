"""Input validation helpers shared by the estimators and the functional API."""

from __future__ import annotations

import math
from numbers import Integral, Real

import numpy as np


class BoundsError(IndexError):
    """A voxel index or point lies outside the grid extents."""


class InvalidPoseError(ValueError):
    """A pose is outside the scene or inside an occupied cell."""


def check_point(p, name="point"):
    """Return ``p`` as a finite float array of shape (3,)."""
    arr = np.asarray(p, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


def check_index(idx, extents, name="voxel"):
    """Return ``idx`` as a tuple of three ints inside ``extents``."""
    try:
        i, j, k = (int(v) for v in idx)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be three integers, got {idx!r}") from exc
    if not (0 <= i < extents[0] and 0 <= j < extents[1] and 0 <= k < extents[2]):
        raise BoundsError(f"{name} {(i, j, k)} outside extents {tuple(extents)}")
    return (i, j, k)


def check_positive(value, name, *, strict=True):
    if not isinstance(value, Real) or not math.isfinite(value):
        raise ValueError(f"{name} must be a finite real, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return float(value)


def check_count(value, name, minimum=1):
    if not isinstance(value, Integral) or isinstance(value, bool) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_probability(value, name):
    value = check_positive(value, name, strict=False)
    if value > 1:
        raise ValueError(f"{name} must be in [0, 1], got {value}")
    return value


def check_random_state(seed):
    """Turn ``seed`` into a ``np.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, Integral):
        return np.random.default_rng(seed)
    raise ValueError(f"seed must be an int, None, or a Generator, got {seed!r}")


def normalize_yaw(yaw):
    """Wrap an angle into [-pi, pi)."""
    return float((yaw + math.pi) % (2.0 * math.pi) - math.pi)
