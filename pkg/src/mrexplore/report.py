"""Figure rendering for run, batch and field artifacts.

Every CLI report path drops PNG figures next to the delimited output so a
run can be eyeballed without loading the JSON logs.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .entropy_field import EntropyField
from .grid_map import FREE, OCCUPIED, OccupancyGrid
from .sim_engine import RunRecord

_ROBOT_COLORS = ("tab:red", "tab:blue", "tab:green", "tab:orange",
                 "tab:purple", "tab:brown", "tab:pink", "tab:olive")


def _world_extent(grid: OccupancyGrid) -> Tuple[float, float, float, float]:
    return (0.0, grid.cols * grid.resolution, 0.0, grid.rows * grid.resolution)


def save_coverage_figure(record: RunRecord, out_path: Path) -> Path:
    dt = record.config.get("dt", 1.0)
    t = np.arange(1, len(record.coverage_trace) + 1) * dt
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(t, record.coverage_trace, lw=1.2)
    thresh = record.config.get("coverage_threshold")
    if thresh:
        ax.axhline(thresh, color="gray", ls="--", lw=0.8, label="threshold")
        ax.legend(loc="lower right")
    ax.set_xlabel("simulated time [s]")
    ax.set_ylabel("coverage")
    ax.set_ylim(0, 1.05)
    ax.set_title(f"coverage ({record.reason}, T={record.time})")
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_path


def save_map_figure(record: RunRecord, truth: OccupancyGrid,
                    out_path: Path) -> Path:
    img = np.full(truth.cells.shape, 0.85)
    img[truth.cells == OCCUPIED] = 0.1
    fig, ax = plt.subplots(figsize=(7, 7 * truth.rows / truth.cols))
    ax.imshow(img, cmap="gray", vmin=0, vmax=1, origin="lower",
              extent=_world_extent(truth))
    for rid, traj in sorted(record.trajectories.items()):
        arr = np.asarray(traj)
        color = _ROBOT_COLORS[(int(rid) - 1) % len(_ROBOT_COLORS)]
        ax.plot(arr[:, 0], arr[:, 1], color=color, lw=0.9,
                label=f"robot {rid}")
        ax.plot(arr[0, 0], arr[0, 1], "o", color=color, ms=5)
        ax.plot(arr[-1, 0], arr[-1, 1], "s", color=color, ms=5)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="upper right", fontsize=7)
    ax.set_title("trajectories over ground truth")
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_path


def save_run_figures(record: RunRecord, truth: OccupancyGrid,
                     out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    return [
        save_coverage_figure(record, out_dir / "coverage.png"),
        save_map_figure(record, truth, out_dir / "map.png"),
    ]


def _group_rows(rows: Sequence[dict]) -> Dict[Tuple[str, int, float], List[dict]]:
    groups: Dict[Tuple[str, int, float], List[dict]] = {}
    for row in rows:
        key = (row["policy"], row["n_robots"], row["r_comm"])
        groups.setdefault(key, []).append(row)
    return groups


def _rcomm_label(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:g}"


def save_batch_figures(rows: Sequence[dict], out_dir: Path) -> List[Path]:
    """Mean exploration time and success rate across the batch matrix."""
    out_dir = Path(out_dir)
    groups = _group_rows(rows)
    series: Dict[Tuple[str, int], List[Tuple[float, List[dict]]]] = {}
    for (policy, n_robots, r_comm), g in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1],
                                        math.inf if math.isinf(kv[0][2])
                                        else kv[0][2]),
    ):
        series.setdefault((policy, n_robots), []).append((r_comm, g))

    fig, (ax_t, ax_s) = plt.subplots(1, 2, figsize=(10, 4))
    for (policy, n_robots), pts in series.items():
        labels = [_rcomm_label(rc) for rc, _ in pts]
        tbars, errs, succ = [], [], []
        for _, g in pts:
            times = [r["T"] for r in g if r["success"]]
            tbars.append(np.mean(times) if times else np.nan)
            errs.append(np.std(times) if len(times) > 1 else 0.0)
            succ.append(100.0 * sum(r["success"] for r in g) / len(g))
        x = np.arange(len(labels))
        name = f"{policy}, {n_robots} robots"
        ax_t.errorbar(x, tbars, yerr=errs, marker="o", capsize=3, label=name)
        ax_s.plot(x, succ, marker="s", label=name)
        ax_t.set_xticks(x, labels)
        ax_s.set_xticks(x, labels)
    ax_t.set_xlabel("r_comm [m]")
    ax_t.set_ylabel("mean exploration time [s]")
    ax_t.set_title("exploration time")
    ax_s.set_xlabel("r_comm [m]")
    ax_s.set_ylabel("success rate [%]")
    ax_s.set_ylim(0, 105)
    ax_s.set_title("success rate")
    ax_t.legend(fontsize=7)
    fig.tight_layout()
    out = out_dir / "batch_summary.png"
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return [out]


def save_field_figure(field: EntropyField, out_path: Path,
                      robot_xy: Optional[np.ndarray] = None) -> Path:
    shown = np.where(field.valid, field.h_total, np.nan)
    fig, ax = plt.subplots(figsize=(7, 7 * shown.shape[0] / shown.shape[1]))
    rows, cols = shown.shape
    extent = (0.0, cols * field.resolution, 0.0, rows * field.resolution)
    im = ax.imshow(shown, cmap="viridis", origin="lower", extent=extent)
    fig.colorbar(im, ax=ax, label="total entropy")
    if robot_xy is not None:
        ax.plot(robot_xy[0], robot_xy[1], "r*", ms=10)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"entropy field (robot {field.owner})")
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_path
