"""Duration-adaptive goal assignment.

A robot keeps its current goal until it arrives (within tolerance) or
until a reference duration proportional to the straight-line travel time
has elapsed; only then is the freshly computed candidate adopted. This
throttles goal churn while still letting better goals take over once the
current one has been given a fair chance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .entropy_field import EntropyField
from .grid_map import OccupancyGrid


@dataclass
class GoalState:
    """Per-robot goal bookkeeping.

    t_ref = k_ref * d(pos_pre, g_cur) / v_max whenever a goal is set;
    k_ref < 1 keeps the reference duration a lower bound on any actual
    travel time to the goal.
    """

    v_max: float
    k_ref: float = 0.1
    g_cur: Optional[np.ndarray] = None
    g_new: Optional[np.ndarray] = None
    pos_pre: Optional[np.ndarray] = None
    assigned_at: float = 0.0
    t_ref: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.k_ref < 1.0:
            raise ValueError("k_ref must lie strictly between 0 and 1")
        if self.v_max <= 0.0:
            raise ValueError("v_max must be positive")


def compute_t_ref(pos_pre: np.ndarray, g_cur: np.ndarray,
                  k_ref: float, v_max: float) -> float:
    """Reference duration: scaled straight-line travel time to the goal."""
    d = float(np.hypot(*(np.asarray(g_cur, float) - np.asarray(pos_pre, float))))
    return k_ref * d / v_max


def select_new_goal(field: EntropyField, m: OccupancyGrid,
                    reachable: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
    """Center of the Free cell minimizing the total entropy.

    Only influenced cells participate, so a field with no reachable
    cluster pull and no robot in range yields None (exploration locally
    complete). Ties break to the first cell in row-major order. An
    optional reachability mask further restricts the candidates to cells a
    robot can actually travel to.
    """
    domain = field.influenced
    if reachable is not None:
        domain = domain & reachable
    if not domain.any():
        return None
    values = np.where(domain, field.h_total, np.inf)
    flat = int(np.argmin(values))  # first minimum in row-major order
    rc = (flat // m.cols, flat % m.cols)
    return m.cell_center(rc)


def should_reassign(gs: GoalState, pos_cur: np.ndarray, now: float,
                    arrival_tolerance: float) -> Optional[str]:
    """Which assignment condition currently holds, if any.

    Checked in order: bootstrap (no goal yet), arrival (within tolerance
    of the goal), timeout (reference duration elapsed).
    """
    if gs.g_cur is None:
        return "bootstrap"
    if float(np.hypot(*(pos_cur - gs.g_cur))) <= arrival_tolerance:
        return "arrival"
    if now - gs.assigned_at >= gs.t_ref:
        return "timeout"
    return None


def maybe_assign(gs: GoalState, pos_cur: np.ndarray, now: float,
                 g_new: Optional[np.ndarray],
                 arrival_tolerance: float) -> Tuple[GoalState, Optional[str]]:
    """Adopt g_new iff an assignment condition holds; otherwise no change.

    On assignment the previous position anchor, the assignment time and
    t_ref are all refreshed. A None candidate clears the current goal (the
    robot holds and keeps recomputing).
    """
    pos_cur = np.asarray(pos_cur, dtype=float)
    trigger = should_reassign(gs, pos_cur, now, arrival_tolerance)
    if trigger is None:
        return gs, None
    if g_new is None:
        new_t_ref = 0.0
        goal = None
    else:
        goal = np.asarray(g_new, dtype=float).copy()
        new_t_ref = compute_t_ref(pos_cur, goal, gs.k_ref, gs.v_max)
    updated = replace(
        gs,
        g_cur=goal,
        g_new=None if g_new is None else goal.copy(),
        pos_pre=pos_cur.copy(),
        assigned_at=now,
        t_ref=new_t_ref,
    )
    return updated, trigger
