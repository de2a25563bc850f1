"""Entropy field over a robot's local map.

Two ingredients are summed per cell: a frontier term that pulls toward
frontier-cluster centroids (scaled by cluster size and damped by the
obstacle-aware wavefront distance) and a robot term that forms a negative
ring just inside every known robot's sensor radius. Both terms are zero or
negative before noise, so goals are picked by minimizing the field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence

import numpy as np
from numba import njit

from .comm_graph import RobotPose
from .grid_map import FREE, OCCUPIED, FrontierCluster, FrontierClustering, GridCoord, OccupancyGrid

SQRT2 = math.sqrt(2.0)


@dataclass
class FieldParams:
    """Scales and clamps for the entropy field.

    k_f grows geometrically with team size (k_f_base ** (n_robots - 3));
    epsilon_d clamps the two singular denominators and defaults to one
    cell. frontier_aggregate picks how per-centroid terms combine at a
    cell: 'min' keeps the governing (most attractive) centroid, 'sum'
    accumulates all of them.
    """

    d_s: float
    epsilon_d: float
    k_f_base: float = 2.0
    k_r: float = 1.0
    sigma_r: float = 0.6
    alpha: float = 2.0
    sigma_d: float = 0.035
    frontier_aggregate: str = "min"

    def __post_init__(self):
        if self.d_s <= 0 or self.epsilon_d <= 0:
            raise ValueError("d_s and epsilon_d must be positive")
        if self.k_r <= 0 or self.sigma_r <= 0 or self.sigma_d < 0:
            raise ValueError("k_r, sigma_r must be positive; sigma_d nonnegative")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.frontier_aggregate not in ("min", "sum"):
            raise ValueError("frontier_aggregate must be 'min' or 'sum'")

    def k_f(self, n_robots: int) -> float:
        return self.k_f_base ** (n_robots - 3)


@dataclass
class WavefrontDistanceMap:
    """Shortest-path distances (meters) from one source cell.

    Distances are over the 8-connected grid with axial step = resolution
    and diagonal step = resolution * sqrt(2); unreachable cells are inf.
    """

    source: GridCoord
    dist: np.ndarray
    resolution: float

    def at(self, rc: GridCoord) -> float:
        return float(self.dist[rc[0], rc[1]])


@dataclass
class EntropyField:
    """Per-cell field values for one robot's planning cycle.

    Values live on Free cells only (zeros elsewhere); `influenced` marks
    Free cells actually touched by a reachable nonzero-entropy cluster or
    by a robot's sensor disk, which is the goal-selection domain.
    """

    owner: int
    resolution: float
    h_f: np.ndarray
    h_r: np.ndarray
    h_total: np.ndarray
    valid: np.ndarray  # Free cells
    influenced: np.ndarray
    noise_state: np.ndarray = field(default_factory=lambda: np.zeros(0))


@njit(cache=True)
def _dijkstra_grid(blocked, interesting, sr, sc, axial, diag):  # pragma: no cover
    rows, cols = blocked.shape
    dist = np.full(blocked.shape, np.inf)
    if sr < 0 or sr >= rows or sc < 0 or sc >= cols or blocked[sr, sc]:
        return dist
    # optional early stop: halt once every 'interesting' cell is finalized
    track = interesting.size == rows * cols
    remaining = 0
    if track:
        for rr in range(rows):
            for cc2 in range(cols):
                if interesting[rr, cc2] and not blocked[rr, cc2]:
                    remaining += 1
    cap = 8 * rows * cols + 8
    heap_d = np.empty(cap, np.float64)
    heap_i = np.empty(cap, np.int64)
    dist[sr, sc] = 0.0
    heap_d[0] = 0.0
    heap_i[0] = sr * cols + sc
    hn = 1
    while hn > 0:
        d0 = heap_d[0]
        idx = heap_i[0]
        hn -= 1
        heap_d[0] = heap_d[hn]
        heap_i[0] = heap_i[hn]
        i = 0
        while True:
            l = 2 * i + 1
            r = l + 1
            m = i
            if l < hn and heap_d[l] < heap_d[m]:
                m = l
            if r < hn and heap_d[r] < heap_d[m]:
                m = r
            if m == i:
                break
            heap_d[i], heap_d[m] = heap_d[m], heap_d[i]
            heap_i[i], heap_i[m] = heap_i[m], heap_i[i]
            i = m
        cr = idx // cols
        cc = idx % cols
        if d0 > dist[cr, cc]:
            continue
        if track and interesting[cr, cc]:
            remaining -= 1
            if remaining <= 0:
                break
        for dr in range(-1, 2):
            for dc in range(-1, 2):
                if dr == 0 and dc == 0:
                    continue
                nr = cr + dr
                nc = cc + dc
                if nr < 0 or nr >= rows or nc < 0 or nc >= cols:
                    continue
                if blocked[nr, nc]:
                    continue
                step = diag if (dr != 0 and dc != 0) else axial
                nd = d0 + step
                if nd < dist[nr, nc]:
                    dist[nr, nc] = nd
                    heap_d[hn] = nd
                    heap_i[hn] = nr * cols + nc
                    j = hn
                    hn += 1
                    while j > 0:
                        p = (j - 1) // 2
                        if heap_d[p] <= heap_d[j]:
                            break
                        heap_d[p], heap_d[j] = heap_d[j], heap_d[p]
                        heap_i[p], heap_i[j] = heap_i[j], heap_i[p]
                        j = p
    return dist


_NO_EARLY_STOP = np.zeros((0, 0), dtype=np.bool_)


def distance_field(traversable: np.ndarray, source: GridCoord,
                   resolution: float,
                   needed: Optional[np.ndarray] = None) -> np.ndarray:
    """8-connected shortest-path distances in meters over a traversable mask.

    When a `needed` mask is given the search may halt once every needed
    cell is finalized; distances outside the mask are then only valid up
    to the stopping radius (inf beyond).
    """
    blocked = np.ascontiguousarray(~traversable)
    mask = _NO_EARLY_STOP if needed is None else np.ascontiguousarray(needed)
    return _dijkstra_grid(blocked, mask, source[0], source[1],
                          resolution, resolution * SQRT2)


def wavefront_distance(m: OccupancyGrid, source: GridCoord) -> WavefrontDistanceMap:
    """Wavefront distances from a source cell over non-Occupied cells.

    Unknown cells are traversable so the attraction can reach through
    unexplored space; Occupied cells block and stay at inf.
    """
    if not m.in_bounds(source):
        raise ValueError(f"source {source} outside the grid")
    if m.cells[source[0], source[1]] == OCCUPIED:
        raise ValueError(f"source {source} is an Occupied cell")
    dist = distance_field(m.cells != OCCUPIED, source, m.resolution)
    return WavefrontDistanceMap(source=source, dist=dist,
                                resolution=m.resolution)


def frontier_entropy_value(c_q: float, n_c: float, d_star: float,
                           n_robots: int, params: FieldParams) -> float:
    """Scalar frontier term; 0 when the cell cannot reach the centroid.

    Accepts fractional cluster sizes so the vanishing-frontier limit can be
    evaluated directly.
    """
    if not math.isfinite(d_star):
        return 0.0
    denom = max(d_star, params.epsilon_d)
    return -(params.k_f(n_robots) * c_q / denom) * math.log(n_c * c_q)


def frontier_entropy(p: GridCoord, q: FrontierCluster,
                     clustering: FrontierClustering, n_robots: int,
                     d_star: WavefrontDistanceMap,
                     params: FieldParams) -> float:
    """Frontier entropy of centroid q evaluated at cell p."""
    return frontier_entropy_value(q.size, clustering.n_clusters,
                                  d_star.at(p), n_robots, params)


def robot_entropy(p_xy: Sequence[float], peer_poses: Sequence[RobotPose],
                  params: FieldParams, noise: np.ndarray) -> float:
    """Robot entropy at a world point: sum of ring terms of in-range robots.

    `noise` holds one scalar per robot in the team (its length is the team
    size); each in-range robot n contributes its deterministic ring term
    plus noise[n-1]. Robots beyond d_s contribute nothing.
    """
    n_robots = len(noise)
    if n_robots == 0:
        return 0.0
    log_n = math.log(n_robots)
    total = 0.0
    for pose in peer_poses:
        d = float(np.hypot(pose.position[0] - p_xy[0], pose.position[1] - p_xy[1]))
        if d < params.d_s:
            denom = min(d - params.d_s, -params.epsilon_d)
            total += (params.k_r * params.sigma_r * n_robots / denom) * log_n
            total += float(noise[pose.robot_id - 1])
    return total


@lru_cache(maxsize=4)
def _cell_centers(rows: int, cols: int, resolution: float):
    xs = (np.arange(cols) + 0.5) * resolution
    ys = (np.arange(rows) + 0.5) * resolution
    return np.meshgrid(xs, ys)


def cluster_ratios(m: OccupancyGrid, clustering: FrontierClustering,
                   n_robots: int, params: FieldParams):
    """Per-cell frontier attraction ratios (best, summed, influence mask).

    The ratio of cluster q at cell p is amp_q / max(d*(p,q), epsilon_d)
    with amp_q = k_f * C_q * ln(N_C * C_q); unreachable cells contribute
    zero. These depend only on the map and clustering, so callers may
    cache them across planning cycles while poses and noise move on.
    """
    rows, cols = m.rows, m.cols
    free = m.cells == FREE
    ratio_best = np.zeros((rows, cols))
    ratio_sum = np.zeros((rows, cols))
    for cluster in clustering.clusters:
        amp = params.k_f(n_robots) * cluster.size * math.log(
            clustering.n_clusters * cluster.size)
        if amp <= 0.0:
            continue  # a lone single-cell cluster carries zero entropy
        # field values live on Free cells only, so the search may stop
        # once all of them are settled
        d = distance_field(m.cells != OCCUPIED, cluster.centroid,
                           m.resolution, needed=free)
        ratio = np.where(np.isfinite(d), amp / np.maximum(d, params.epsilon_d), 0.0)
        np.maximum(ratio_best, ratio, out=ratio_best)
        ratio_sum += ratio
    return ratio_best, ratio_sum, ratio_best > 0.0


def total_field(robot_id: int, m: OccupancyGrid,
                clustering: FrontierClustering,
                peer_poses: Sequence[RobotPose], params: FieldParams,
                noise: np.ndarray,
                ratios=None) -> EntropyField:
    """Compute the full entropy field for one robot's map.

    h_f at a cell keeps the governing centroid (the minimum term, unless
    the 'sum' aggregate is configured); h_r sums ring terms of all known
    robots; h_total is their cell-wise sum. Values exist on Free cells
    only and influence tracking excludes zero-entropy clusters. `ratios`
    accepts a precomputed cluster_ratios result for the same map and
    clustering.
    """
    rows, cols = m.rows, m.cols
    n_robots = len(noise)
    free = m.cells == FREE

    if ratios is None:
        ratios = cluster_ratios(m, clustering, n_robots, params)
    ratio_best, ratio_sum, cluster_influence = ratios
    h_f = -(ratio_sum if params.frontier_aggregate == "sum" else ratio_best)
    influenced = cluster_influence.copy()

    h_r = np.zeros((rows, cols))
    if n_robots >= 1 and peer_poses:
        log_n = math.log(n_robots)
        gx, gy = _cell_centers(rows, cols, m.resolution)
        for pose in peer_poses:
            d = np.hypot(gx - pose.position[0], gy - pose.position[1])
            in_range = d < params.d_s
            denom = np.minimum(d - params.d_s, -params.epsilon_d)
            term = (params.k_r * params.sigma_r * n_robots / denom) * log_n
            h_r += np.where(in_range, term + noise[pose.robot_id - 1], 0.0)
            if log_n > 0.0:
                # a lone robot's ring term vanishes, so it attracts nothing
                influenced |= in_range

    h_f = np.where(free, h_f, 0.0)
    h_r = np.where(free, h_r, 0.0)
    return EntropyField(
        owner=robot_id,
        resolution=m.resolution,
        h_f=h_f,
        h_r=h_r,
        h_total=h_f + h_r,
        valid=free,
        influenced=influenced & free,
        noise_state=np.asarray(noise, dtype=float).copy(),
    )


def advance_noise(noise: np.ndarray, rng: np.random.Generator,
                  params: FieldParams) -> np.ndarray:
    """Advance per-robot noise scalars by one step.

    alpha == 0 redraws white noise; any other alpha integrates the draws
    into a random walk clamped to +-10 sigma_d so old excursions cannot
    dominate the field forever.
    """
    steps = rng.normal(0.0, params.sigma_d, size=len(noise))
    if params.alpha == 0.0:
        return steps
    lim = 10.0 * params.sigma_d
    return np.clip(np.asarray(noise, dtype=float) + steps, -lim, lim)
