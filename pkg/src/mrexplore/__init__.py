"""Deterministic multi-robot exploration simulator.

Robots with range-limited sensors explore a shared occupancy-grid world,
exchange positions over an always-on low-speed link, merge maps whenever a
proximity-gated high-speed link exists, and pick goals by minimizing an
entropy field built from frontier clusters and peer positions.
"""

__version__ = "0.1.0"

from .grid_map import (
    CellState,
    FrontierCluster,
    FrontierClustering,
    OccupancyGrid,
    cluster_frontiers,
    coverage_fraction,
    detect_frontiers,
    load_map,
    merge,
)

__all__ = [
    "CellState",
    "FrontierCluster",
    "FrontierClustering",
    "OccupancyGrid",
    "cluster_frontiers",
    "coverage_fraction",
    "detect_frontiers",
    "load_map",
    "merge",
    "__version__",
]
