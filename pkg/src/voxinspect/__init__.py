"""Online voxel-map inspection planning with clustered (generalized) TSP tours."""

__version__ = "0.1.0"
