"""Deterministic discrete-time exploration engine.

Each tick runs sense -> communicate/merge -> plan -> assign -> move for
every robot. Sensing casts supercover rays against the ground-truth map
from the robot's cell center; motion follows 8-connected shortest paths
over known-Free cells; goals come from the entropy field (or the greedy
baseline) under the duration-adaptive assignment rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, asdict
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from . import grid_map
from .comm_graph import CommGraph, RobotPose, merge_components, update_edges
from .entropy_field import (
    FieldParams,
    advance_noise,
    cluster_ratios,
    distance_field,
    total_field,
)
from .goal_assignment import GoalState, maybe_assign, select_new_goal, should_reassign
from .grid_map import (
    _STRUCT8,
    FREE,
    OCCUPIED,
    UNKNOWN,
    FrontierClustering,
    GridCoord,
    OccupancyGrid,
    cluster_frontiers,
    coverage_fraction,
    detect_frontiers,
    load_map,
    reachable_free,
)

NEIGH8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


class PolicyKind(str, Enum):
    """Goal-selection policy: the entropy field or the greedy baseline."""

    ENTROPY_FIELD = "entropy_field"
    GREEDY_FRONTIER = "greedy_frontier"


class ScenarioError(ValueError):
    """Raised when a scenario cannot produce a valid simulation."""


class SafetyViolation(RuntimeError):
    """A motion step crossed an Occupied ground-truth cell."""


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one simulation run.

    `sensor_rays = 0` picks enough rays for gap-free disk coverage at the
    map resolution; `epsilon_d`/`arrival_tolerance` default to one and two
    cells respectively once the map resolution is known.
    """

    world: str
    starts: List[Tuple[float, float]]
    n_robots: int
    r_comm: float
    d_s: float = 7.0
    v_max: float = 0.5
    dt: float = 0.1
    coverage_threshold: float = 0.99
    stuck_timeout: float = 120.0
    max_sim_time: float = 1800.0
    seed: int = 0
    share_positions: bool = True
    merged_coverage_eval: bool = False
    sensor_rays: int = 0
    arrival_tolerance: Optional[float] = None
    k_ref: float = 0.1
    k_f_base: float = 2.0
    k_r: float = 1.0
    sigma_r: float = 0.6
    alpha: float = 2.0
    sigma_d: float = 0.035
    epsilon_d: Optional[float] = None
    frontier_aggregate: str = "min"
    schema_version: int = 1

    def field_params(self, resolution: float) -> FieldParams:
        return FieldParams(
            d_s=self.d_s,
            epsilon_d=self.epsilon_d if self.epsilon_d is not None else resolution,
            k_f_base=self.k_f_base,
            k_r=self.k_r,
            sigma_r=self.sigma_r,
            alpha=self.alpha,
            sigma_d=self.sigma_d,
            frontier_aggregate=self.frontier_aggregate,
        )

    def resolved_dict(self, resolution: float) -> dict:
        """Config echo with every effective value filled in."""
        out = asdict(self)
        out["starts"] = [list(map(float, s)) for s in self.starts]
        out["epsilon_d"] = (
            self.epsilon_d if self.epsilon_d is not None else resolution
        )
        out["arrival_tolerance"] = (
            self.arrival_tolerance
            if self.arrival_tolerance is not None
            else 2.0 * resolution
        )
        out["sensor_rays"] = auto_ray_count(self.d_s, resolution, self.sensor_rays)
        out["resolution"] = resolution
        return out


@dataclass
class RunRecord:
    """Outcome and logs of one simulation run."""

    success: bool = False
    time: Optional[float] = None
    reason: str = "running"
    ticks: int = 0
    seed: int = 0
    policy: str = PolicyKind.ENTROPY_FIELD.value
    coverage_trace: List[float] = dc_field(default_factory=list)
    final_coverage: Dict[int, float] = dc_field(default_factory=dict)
    merged_coverage: float = 0.0
    edge_events: List[dict] = dc_field(default_factory=list)
    goal_events: List[dict] = dc_field(default_factory=list)
    rendezvous_events: List[dict] = dc_field(default_factory=list)
    trajectories: Dict[int, List[Tuple[float, float]]] = dc_field(default_factory=dict)
    config: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["final_coverage"] = {str(k): v for k, v in self.final_coverage.items()}
        out["trajectories"] = {
            str(k): [list(p) for p in v] for k, v in self.trajectories.items()
        }
        return out


# ---------------------------------------------------------------------------
# Sensing


def auto_ray_count(d_s: float, resolution: float, requested: int = 0) -> int:
    """Ray count for gap-free coverage of the sensor disk (unless overridden)."""
    if requested:
        return int(requested)
    return max(360, int(math.ceil(2.0 * math.pi * d_s / resolution)))


@lru_cache(maxsize=8)
def _scan_template(radius_cells: float, n_rays: int):
    """Precompute cell-stepping ray traversals from a cell center.

    Returns flat arrays (dr, dc, ray id, step order within ray, center
    distance in cells) covering every cell any ray enters within
    radius_cells + 1.5. Rays that cross a lattice corner step diagonally
    without touching the two side cells, matching the motion convention
    that point agents pass through exact corners.
    """
    limit = radius_cells + 1.5
    corner_tol = 1e-9
    drs: List[int] = []
    dcs: List[int] = []
    rays: List[int] = []
    orders: List[int] = []
    for k in range(n_rays):
        theta = 2.0 * math.pi * k / n_rays
        dx, dy = math.cos(theta), math.sin(theta)
        order = 0

        def visit(cx: int, cy: int):
            nonlocal order
            drs.append(cy)
            dcs.append(cx)
            rays.append(k)
            orders.append(order)
            order += 1

        x = y = 0
        sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
        sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
        tdx = math.inf if dx == 0 else 1.0 / abs(dx)
        tdy = math.inf if dy == 0 else 1.0 / abs(dy)
        tmx = 0.5 * tdx
        tmy = 0.5 * tdy
        visit(x, y)
        while True:
            if abs(tmx - tmy) < corner_tol:
                t = tmx
                if not math.isfinite(t) or t > limit:
                    break
                x += sx
                y += sy
                tmx += tdx
                tmy += tdy
                visit(x, y)
            elif tmx < tmy:
                t = tmx
                tmx += tdx
                x += sx
                if t > limit:
                    break
                visit(x, y)
            else:
                t = tmy
                tmy += tdy
                y += sy
                if t > limit:
                    break
                visit(x, y)
    dr = np.array(drs, dtype=np.int32)
    dc = np.array(dcs, dtype=np.int32)
    ray_id = np.array(rays, dtype=np.int32)
    order = np.array(orders, dtype=np.int32)
    cdist = np.hypot(dr.astype(float), dc.astype(float))
    keep = cdist <= radius_cells + 1.0
    return dr[keep], dc[keep], ray_id[keep], order[keep], cdist[keep]


def sense(robot: RobotPose, truth: OccupancyGrid, m: OccupancyGrid,
          d_s: float, n_rays: int = 0) -> OccupancyGrid:
    """Scan the world and join the result into the robot's map.

    Rays are cast from the center of the robot's current cell so repeated
    scans from the same cell are exact no-ops. Cells whose center is
    within d_s and not behind an Occupied cell on their ray become Free
    (or Occupied for the blocking cell itself); the join never un-knows a
    cell. The robot's own cell and its 8 contact neighbors are always
    sensed, so standing on a frontier cell resolves it even when rays
    cannot thread the exact corner geometry.
    """
    if not truth.same_shape(m):
        raise grid_map.GridMismatchError("sense requires truth and map to match")
    r0, c0 = truth.cell_of(robot.position)
    if truth.cells[r0, c0] != FREE:
        raise ValueError(f"robot {robot.robot_id} is not on a Free ground-truth cell")
    radius_cells = round(d_s / truth.resolution, 9)
    n = auto_ray_count(d_s, truth.resolution, n_rays)
    dr, dc, ray_id, order, cdist = _scan_template(radius_cells, n)

    rr = dr + r0
    cc = dc + c0
    inb = (rr >= 0) & (rr < truth.rows) & (cc >= 0) & (cc < truth.cols)
    vals = np.zeros(rr.shape, dtype=np.uint8)
    vals[inb] = truth.cells[rr[inb], cc[inb]]
    occ = inb & (vals == OCCUPIED)
    first_hit = np.full(n, np.iinfo(np.int32).max, dtype=np.int32)
    np.minimum.at(first_hit, ray_id[occ], order[occ])
    visible = inb & (order <= first_hit[ray_id]) & (cdist <= radius_cells)

    scan = np.zeros_like(truth.cells)
    free_marks = visible & (vals == FREE)
    occ_marks = visible & (vals == OCCUPIED)
    scan[rr[free_marks], cc[free_marks]] = FREE
    scan[rr[occ_marks], cc[occ_marks]] = OCCUPIED
    lo_r, hi_r = max(r0 - 1, 0), min(r0 + 2, truth.rows)
    lo_c, hi_c = max(c0 - 1, 0), min(c0 + 2, truth.cols)
    scan[lo_r:hi_r, lo_c:hi_c] = truth.cells[lo_r:hi_r, lo_c:hi_c]
    return OccupancyGrid(m.rows, m.cols, m.resolution, np.maximum(m.cells, scan))


# ---------------------------------------------------------------------------
# Motion


def _descend(dist: np.ndarray, start: GridCoord, goal: GridCoord) -> List[GridCoord]:
    """Walk from start to goal along strictly decreasing distances."""
    rows, cols = dist.shape
    cells = [start]
    cur = start
    guard = rows * cols + 1
    while cur != goal:
        guard -= 1
        if guard <= 0:
            raise RuntimeError("descent failed to reach the goal")
        best = None
        best_d = dist[cur[0], cur[1]]
        for drr, dcc in NEIGH8:
            nr, nc = cur[0] + drr, cur[1] + dcc
            if 0 <= nr < rows and 0 <= nc < cols and dist[nr, nc] < best_d:
                best = (nr, nc)
                best_d = dist[nr, nc]
        if best is None:
            raise RuntimeError("descent stuck; distance field inconsistent")
        cur = best
        cells.append(cur)
    return cells


def plan_path(m: OccupancyGrid, from_xy: Sequence[float],
              to_xy: Sequence[float]) -> Optional[List[np.ndarray]]:
    """Shortest 8-connected path over Free cells of m, or None.

    Unknown cells are not traversable for motion. The returned polyline
    starts at from_xy and ends at to_xy. The distance search is sourced at
    the goal and may stop once the start cell is finalized; every cell the
    descent visits is already settled by then.
    """
    from_xy = np.asarray(from_xy, dtype=float)
    to_xy = np.asarray(to_xy, dtype=float)
    start = m.cell_of(from_xy)
    if not m.in_bounds(start) or m.cells[start[0], start[1]] != FREE:
        raise ValueError(f"path start cell {start} is not Free in the map")
    goal = m.cell_of(to_xy)
    if not m.in_bounds(goal) or m.cells[goal[0], goal[1]] != FREE:
        return None
    if start == goal:
        if np.allclose(from_xy, to_xy):
            return [from_xy]
        return [from_xy, to_xy]
    needed = np.zeros(m.cells.shape, dtype=bool)
    needed[start[0], start[1]] = True
    dist = distance_field(m.cells == FREE, goal, m.resolution, needed=needed)
    if not math.isfinite(dist[start[0], start[1]]):
        return None
    cells = _descend(dist, start, goal)
    pts = [from_xy] + [m.cell_center(c) for c in cells[1:]]
    pts[-1] = to_xy
    return pts


def step_motion(robot: RobotPose, path: List[np.ndarray], v_max: float,
                dt: float) -> Tuple[RobotPose, List[np.ndarray]]:
    """Advance along the polyline by exactly v_max * dt (or to its end).

    Returns the new pose and the remaining path (starting at the new
    position). The heading follows the last traversed segment.
    """
    if not path or len(path) == 1:
        return robot, [robot.position.copy()]
    pos = np.asarray(robot.position, dtype=float).copy()
    heading = robot.heading
    budget = v_max * dt
    idx = 1
    while budget > 0.0 and idx < len(path):
        seg = np.asarray(path[idx], dtype=float) - pos
        seg_len = float(np.hypot(*seg))
        if seg_len <= 1e-12:
            idx += 1
            continue
        heading = math.atan2(seg[1], seg[0])
        if seg_len <= budget:
            pos = np.asarray(path[idx], dtype=float).copy()
            budget -= seg_len
            idx += 1
        else:
            pos = pos + seg * (budget / seg_len)
            budget = 0.0
    remaining = [pos.copy()] + [np.asarray(p, float) for p in path[idx:]]
    return RobotPose(robot.robot_id, pos, heading), remaining


def segment_cells(p: Sequence[float], q: Sequence[float],
                  resolution: float) -> List[GridCoord]:
    """Cells whose interior the segment p->q crosses.

    Exact corner crossings step diagonally without touching the two side
    cells (point agents may pass through a corner).
    """
    px, py = float(p[0]) / resolution, float(p[1]) / resolution
    qx, qy = float(q[0]) / resolution, float(q[1]) / resolution
    x, y = int(math.floor(px)), int(math.floor(py))
    cells = [(y, x)]
    dx, dy = qx - px, qy - py
    length = math.hypot(dx, dy)
    if length == 0.0:
        return cells
    dx /= length
    dy /= length
    sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
    sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
    tdx = math.inf if dx == 0 else 1.0 / abs(dx)
    tdy = math.inf if dy == 0 else 1.0 / abs(dy)
    tmx = ((x + (sx > 0)) - px) / dx if dx != 0 else math.inf
    tmy = ((y + (sy > 0)) - py) / dy if dy != 0 else math.inf
    while True:
        if abs(tmx - tmy) < 1e-9:
            t = tmx
            if t >= length - 1e-12:
                break
            x += sx
            y += sy
            tmx += tdx
            tmy += tdy
        elif tmx < tmy:
            t = tmx
            if t >= length - 1e-12:
                break
            x += sx
            tmx += tdx
        else:
            t = tmy
            if t >= length - 1e-12:
                break
            y += sy
            tmy += tdy
        cells.append((y, x))
    return cells


# ---------------------------------------------------------------------------
# Engine


def greedy_goal(m: OccupancyGrid, clustering: FrontierClustering,
                robot_cell: GridCoord,
                reachable: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
    """Nearest-centroid baseline: centroid with minimum wavefront distance.

    Ties keep the earlier cluster (row-major label order). Centroids the
    robot cannot actually travel to are skipped when a motion-reachability
    mask is supplied. None when no candidate remains.
    """
    if clustering.n_clusters == 0:
        return None
    needed = np.zeros(m.cells.shape, dtype=bool)
    for cluster in clustering.clusters:
        needed[cluster.centroid[0], cluster.centroid[1]] = True
    dist = distance_field(m.cells != OCCUPIED, robot_cell, m.resolution,
                          needed=needed)
    best = None
    best_d = math.inf
    for cluster in clustering.clusters:
        r, c = cluster.centroid
        if reachable is not None and not reachable[r, c]:
            continue
        d = dist[r, c]
        if d < best_d:
            best_d = d
            best = cluster.centroid
    if best is None:
        return None
    return m.cell_center(best)


class Simulation:
    """Single-owner tick loop over one scenario.

    Tests may drive `step()` directly (and even replace robot maps with
    truth-consistent ones) instead of calling `run()`, which adds the
    termination rules.
    """

    def __init__(self, scenario: ScenarioConfig,
                 policy: PolicyKind = PolicyKind.ENTROPY_FIELD,
                 truth: Optional[OccupancyGrid] = None):
        self.scenario = scenario
        self.policy = PolicyKind(policy)
        self.truth = truth if truth is not None else load_map(scenario.world)
        self._validate()
        res = self.truth.resolution
        self.params = scenario.field_params(res)
        self.arrival_tol = (
            scenario.arrival_tolerance
            if scenario.arrival_tolerance is not None
            else 2.0 * res
        )
        self.n_rays = auto_ray_count(scenario.d_s, res, scenario.sensor_rays)

        start_cells = [self.truth.cell_of(s) for s in scenario.starts]
        self.reachable_truth = reachable_free(self.truth, start_cells)
        self.poses = [
            RobotPose(i + 1, np.asarray(s, dtype=float))
            for i, s in enumerate(scenario.starts)
        ]
        self.maps: Dict[int, OccupancyGrid] = {
            i + 1: OccupancyGrid.unknown(self.truth.rows, self.truth.cols, res)
            for i in range(scenario.n_robots)
        }
        self.graph = CommGraph(scenario.n_robots, scenario.r_comm)
        self.noise = np.zeros(scenario.n_robots)
        self.goal_states = [
            GoalState(v_max=scenario.v_max, k_ref=scenario.k_ref)
            for _ in range(scenario.n_robots)
        ]
        self.paths: Dict[int, List[np.ndarray]] = {}
        self.rng = np.random.default_rng(scenario.seed)
        self.tick = 0
        self.done = False
        self._map_cache: Dict[bytes, tuple] = {}
        self._last_scan_cell: Dict[int, Optional[GridCoord]] = {
            i + 1: None for i in range(scenario.n_robots)
        }
        self._anchor = np.array([p.position for p in self.poses])
        self._anchor_time = 0.0
        self.record = RunRecord(
            seed=scenario.seed,
            policy=self.policy.value,
            config=scenario.resolved_dict(res),
            trajectories={i + 1: [tuple(map(float, s))]
                          for i, s in enumerate(scenario.starts)},
        )

    # -- setup ------------------------------------------------------------

    def _validate(self):
        sc = self.scenario
        if sc.n_robots < 1:
            raise ScenarioError("n_robots must be at least 1")
        if len(sc.starts) != sc.n_robots:
            raise ScenarioError(
                f"starts has {len(sc.starts)} entries for {sc.n_robots} robots"
            )
        if sc.dt <= 0:
            raise ScenarioError("dt must be positive")
        if not 0.0 < sc.coverage_threshold <= 1.0:
            raise ScenarioError("coverage_threshold must lie in (0, 1]")
        if sc.v_max <= 0:
            raise ScenarioError("v_max must be positive")
        if sc.r_comm < 0:
            raise ScenarioError("r_comm must be nonnegative")
        if sc.d_s <= 0:
            raise ScenarioError("d_s must be positive")
        if sc.stuck_timeout <= 0 or sc.max_sim_time <= 0:
            raise ScenarioError("stuck_timeout and max_sim_time must be positive")
        seen = set()
        for k, s in enumerate(sc.starts):
            cell = self.truth.cell_of(s)
            if not self.truth.in_bounds(cell):
                raise ScenarioError(f"start {k + 1} at {tuple(s)} is outside the map")
            if self.truth.cells[cell[0], cell[1]] != FREE:
                raise ScenarioError(
                    f"start {k + 1} at {tuple(s)} is not on a Free cell"
                )
            if cell in seen:
                raise ScenarioError(f"start {k + 1} shares cell {cell} with another")
            seen.add(cell)

    # -- helpers ----------------------------------------------------------

    @property
    def now(self) -> float:
        """Simulated time at the start of the current tick."""
        return self.tick * self.scenario.dt

    def coverage(self, robot_id: int) -> float:
        return coverage_fraction(self.maps[robot_id], self.truth,
                                 self.reachable_truth)

    def merged_map(self) -> OccupancyGrid:
        cells = self.maps[1].cells
        for rid in range(2, self.scenario.n_robots + 1):
            cells = np.maximum(cells, self.maps[rid].cells)
        return OccupancyGrid(self.truth.rows, self.truth.cols,
                             self.truth.resolution, cells.copy())

    def _coverages(self) -> List[float]:
        if self.scenario.merged_coverage_eval:
            merged = coverage_fraction(self.merged_map(), self.truth,
                                       self.reachable_truth)
            return [merged] * self.scenario.n_robots
        return [self.coverage(i + 1) for i in range(self.scenario.n_robots)]

    def _known_poses(self, robot_id: int) -> List[RobotPose]:
        if self.scenario.share_positions:
            return list(self.poses)
        return [self.poses[robot_id - 1]]

    def _map_entry(self, robot_id: int):
        """Clustering, free-space labels and frontier ratios for a map.

        Keyed by the raw map bytes: maps repeat across robots after merges
        and across ticks while a robot traverses known space, and all
        cached pieces are pose-independent.
        """
        m = self.maps[robot_id]
        key = m.cells.tobytes()
        entry = self._map_cache.get(key)
        if entry is None:
            clustering = cluster_frontiers(detect_frontiers(m),
                                           (m.rows, m.cols))
            labels, _ = ndimage.label(m.cells == FREE, structure=_STRUCT8)
            ratios = None
            if self.policy is PolicyKind.ENTROPY_FIELD:
                ratios = cluster_ratios(m, clustering, self.scenario.n_robots,
                                        self.params)
            entry = (clustering, labels, ratios)
            self._map_cache[key] = entry
            while len(self._map_cache) > 8:
                self._map_cache.pop(next(iter(self._map_cache)))
        return entry

    # -- the tick ---------------------------------------------------------

    def step(self):
        """Advance one tick. Sets `done`/record when a terminal state hits."""
        if self.done:
            return
        sc = self.scenario
        now = self.now

        # phase 0: noise advances once per tick for every robot
        self.noise = advance_noise(self.noise, self.rng, self.params)

        # phase 1: sensing (skipped while a robot stays in the same cell)
        for pose in self.poses:
            cell = self.truth.cell_of(pose.position)
            if self._last_scan_cell[pose.robot_id] != cell:
                self.maps[pose.robot_id] = sense(
                    pose, self.truth, self.maps[pose.robot_id], sc.d_s, self.n_rays
                )
                self._last_scan_cell[pose.robot_id] = cell

        # phase 2: communication graph update and map consensus
        self.graph, events = update_edges(self.graph, self.poses)
        for ev in events:
            self.record.edge_events.append(
                {"tick": self.tick, "t": now, "type": f"edge_{ev.kind}",
                 "i": ev.i, "j": ev.j}
            )
        if self.graph.edges:
            self.maps = merge_components(self.graph, self.maps)

        # coverage check precedes planning so success needs no extra motion
        covs = self._coverages()
        self.record.coverage_trace.append(max(covs))
        if max(covs) >= sc.coverage_threshold:
            self._finish(True, "coverage", (self.tick + 1) * sc.dt, self.tick + 1)
            return

        # phase 3: plan and (maybe) assign goals
        for pose in self.poses:
            rid = pose.robot_id
            gs = self.goal_states[rid - 1]
            trigger = should_reassign(gs, pose.position, now, self.arrival_tol)
            if trigger is None:
                continue
            m = self.maps[rid]
            robot_cell = m.cell_of(pose.position)
            clustering, labels, ratios = self._map_entry(rid)
            reach = labels == labels[robot_cell[0], robot_cell[1]]
            if self.policy is PolicyKind.ENTROPY_FIELD:
                f = total_field(rid, m, clustering, self._known_poses(rid),
                                self.params, self.noise, ratios=ratios)
                goal = select_new_goal(f, m, reachable=reach)
            else:
                goal = greedy_goal(m, clustering, robot_cell, reachable=reach)
            prev = {
                "goal": None if gs.g_cur is None else [float(v) for v in gs.g_cur],
                "pos_pre": None if gs.pos_pre is None
                else [float(v) for v in gs.pos_pre],
                "assigned_at": gs.assigned_at,
                "t_ref": gs.t_ref,
            }
            gs, fired = maybe_assign(gs, pose.position, now, goal, self.arrival_tol)
            self.goal_states[rid - 1] = gs
            event = {
                "tick": self.tick,
                "t": now,
                "robot": rid,
                "trigger": fired,
                "goal": None if goal is None else [float(v) for v in goal],
                "pos": [float(v) for v in pose.position],
                "t_ref": gs.t_ref,
                "elapsed": now - prev["assigned_at"],
                "prev": prev,
                "mode": "hold" if goal is None else (
                    "rendezvous" if clustering.n_clusters == 0 else "frontier"
                ),
            }
            self.record.goal_events.append(event)
            if goal is not None and clustering.n_clusters == 0:
                self.record.rendezvous_events.append(
                    {"tick": self.tick, "t": now, "type": "rendezvous",
                     "robot": rid, "goal": [float(v) for v in goal]}
                )
            if goal is None:
                self.paths.pop(rid, None)
            else:
                path = plan_path(m, pose.position, goal)
                if path is None:
                    self.paths.pop(rid, None)
                else:
                    self.paths[rid] = path

        # phase 4: motion with a per-step ground-truth crossing check
        for idx, pose in enumerate(self.poses):
            rid = pose.robot_id
            path = self.paths.get(rid)
            if path is None or len(path) < 2:
                self.record.trajectories[rid].append(
                    (float(pose.position[0]), float(pose.position[1]))
                )
                continue
            old = pose.position.copy()
            new_pose, remaining = step_motion(pose, path, sc.v_max, sc.dt)
            for cell in segment_cells(old, new_pose.position,
                                      self.truth.resolution):
                if self.truth.cells[cell[0], cell[1]] == OCCUPIED:
                    raise SafetyViolation(
                        f"robot {rid} crossed occupied cell {cell} at tick {self.tick}"
                    )
            self.poses[idx] = new_pose
            self.paths[rid] = remaining
            self.record.trajectories[rid].append(
                (float(new_pose.position[0]), float(new_pose.position[1]))
            )

        # stuck bookkeeping: global window resets when anyone moves a cell
        positions = np.array([p.position for p in self.poses])
        end_time = (self.tick + 1) * sc.dt
        moved = np.hypot(*(positions - self._anchor).T) >= self.truth.resolution
        if moved.any():
            self._anchor = positions.copy()
            self._anchor_time = end_time
        elif end_time - self._anchor_time >= sc.stuck_timeout:
            self._finish(False, "stuck", None, self.tick + 1)
            return

        self.tick += 1
        if self.now >= sc.max_sim_time:
            self._finish(False, "max_time", None, self.tick)

    def _finish(self, success: bool, reason: str, t: Optional[float], ticks: int):
        self.done = True
        rec = self.record
        rec.success = success
        rec.reason = reason
        rec.time = t
        rec.ticks = ticks
        rec.final_coverage = {
            i + 1: self.coverage(i + 1) for i in range(self.scenario.n_robots)
        }
        rec.merged_coverage = coverage_fraction(
            self.merged_map(), self.truth, self.reachable_truth
        )

    def run(self) -> RunRecord:
        while not self.done:
            self.step()
        return self.record


def run(scenario: ScenarioConfig,
        policy: PolicyKind = PolicyKind.ENTROPY_FIELD,
        truth: Optional[OccupancyGrid] = None) -> RunRecord:
    """Execute one full run and return its record."""
    return Simulation(scenario, policy=policy, truth=truth).run()
