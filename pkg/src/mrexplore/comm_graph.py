"""Two-layer communication network between robots.

The low-speed layer (position sharing) is always available and carries no
state here; the high-speed layer is a dynamic graph whose edges exist
exactly while two robots are strictly closer than the cut-off range. Edges
gate inter-robot map merging.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Set, Tuple

import numpy as np

from .grid_map import OccupancyGrid, merge

Edge = Tuple[int, int]  # (i, j) with i < j, robot ids 1-based


@dataclass
class RobotPose:
    """A robot's current world position and heading."""

    robot_id: int  # 1..n_robots
    position: np.ndarray  # (x, y) meters
    heading: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)

    def distance_to(self, other: "RobotPose") -> float:
        return float(np.hypot(*(self.position - other.position)))


@dataclass(frozen=True)
class EdgeEvent:
    """An edge appearing ('up') or disappearing ('down') at one tick."""

    kind: str  # "up" | "down"
    i: int
    j: int


@dataclass
class CommGraph:
    """Dynamic high-speed link graph over robots 1..robot_count."""

    robot_count: int
    r_comm: float  # meters; inf allowed, 0 means never linked
    edges: Set[Edge] = field(default_factory=set)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def components(self) -> List[List[int]]:
        """Connected components as sorted id lists, sorted by first member."""
        parent = {i: i for i in range(1, self.robot_count + 1)}

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in self.edges:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
        groups: Dict[int, List[int]] = {}
        for i in range(1, self.robot_count + 1):
            groups.setdefault(find(i), []).append(i)
        return [sorted(g) for _, g in sorted(groups.items())]


def update_edges(g: CommGraph,
                 poses: Sequence[RobotPose]) -> Tuple[CommGraph, List[EdgeEvent]]:
    """Recompute edges from current positions; emit up/down events.

    An edge exists after the update iff the pair distance is strictly below
    r_comm; a distance exactly equal to r_comm drops the link. Pairs are
    visited in (i, j) order so the event sequence is deterministic.
    """
    by_id = {p.robot_id: p for p in poses}
    if sorted(by_id) != list(range(1, g.robot_count + 1)):
        raise ValueError(
            f"poses must cover robot ids 1..{g.robot_count} exactly once, "
            f"got {sorted(p.robot_id for p in poses)}"
        )
    edges = set(g.edges)
    events: List[EdgeEvent] = []
    for i in range(1, g.robot_count + 1):
        for j in range(i + 1, g.robot_count + 1):
            d = by_id[i].distance_to(by_id[j])
            linked = (i, j) in edges
            if d < g.r_comm and not linked:
                edges.add((i, j))
                events.append(EdgeEvent("up", i, j))
            elif d >= g.r_comm and linked:
                edges.discard((i, j))
                events.append(EdgeEvent("down", i, j))
    return replace(g, edges=edges), events


def on_edge_up_merge(i: int, j: int,
                     maps: Dict[int, OccupancyGrid]) -> Dict[int, OccupancyGrid]:
    """Merge both endpoint maps into their common join (both sides updated)."""
    joined = merge(maps[i], maps[j])
    out = dict(maps)
    out[i] = joined
    out[j] = joined.copy()
    return out


def merge_components(g: CommGraph,
                     maps: Dict[int, OccupancyGrid]) -> Dict[int, OccupancyGrid]:
    """Bring every connected component to map consensus.

    Equivalent to repeating pairwise merges along present edges until no
    map changes: the join is associative, commutative and idempotent, so
    the fixpoint of a component is the join of all its members' maps.
    """
    out = dict(maps)
    for comp in g.components():
        if len(comp) < 2:
            continue
        joined = out[comp[0]]
        for rid in comp[1:]:
            joined = merge(joined, out[rid])
        for rid in comp:
            out[rid] = joined.copy()
    return out
