"""Batch experiment runner and its summary statistics.

Rounds are independent seeded runs. Mean exploration time and its spread
are computed over successful rounds only; failed rounds enter the success
rate. The standard deviation uses the population convention (divide by
n), tagged in every stats emission.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .comm_graph import RobotPose
from .grid_map import OccupancyGrid, cluster_frontiers, detect_frontiers
from .sim_engine import (
    PolicyKind,
    RunRecord,
    ScenarioConfig,
    Simulation,
    greedy_goal,
)

SD_CONVENTION = "population"


@dataclass
class BatchStats:
    """Aggregates over one batch of rounds.

    t_bar/sd_t/rsd_t are None when too few rounds succeeded to define them
    (mean needs one success, spread needs two).
    """

    t_bar: Optional[float]
    sd_t: Optional[float]
    rsd_t: Optional[float]
    r_success: float
    n_success: int
    n_total: int

    def to_dict(self) -> dict:
        return {
            "t_bar": self.t_bar,
            "sd_t": self.sd_t,
            "rsd_t": self.rsd_t,
            "r_success": self.r_success,
            "n_success": self.n_success,
            "n_total": self.n_total,
            "sd_convention": SD_CONVENTION,
        }


def compute_stats(rows: Sequence[dict]) -> BatchStats:
    """Pure reduction of round rows into BatchStats (bit-reproducible)."""
    n_total = len(rows)
    times = [row["T"] for row in rows if row["success"]]
    n_success = len(times)
    r_success = 100.0 * n_success / n_total if n_total else 0.0
    if n_success == 0:
        return BatchStats(None, None, None, r_success, 0, n_total)
    t_bar = float(np.mean(times))
    if n_success < 2:
        return BatchStats(t_bar, None, None, r_success, n_success, n_total)
    sd_t = float(np.std(times))  # population convention
    rsd_t = 100.0 * sd_t / t_bar
    return BatchStats(t_bar, sd_t, rsd_t, r_success, n_success, n_total)


def round_row(record: RunRecord, scenario: ScenarioConfig,
              policy: PolicyKind) -> dict:
    return {
        "seed": record.seed,
        "policy": policy.value,
        "r_comm": scenario.r_comm,
        "n_robots": scenario.n_robots,
        "success": record.success,
        "T": record.time,
        "final_coverage": record.merged_coverage,
    }


def run_batch(scenario: ScenarioConfig, rounds: int, seeds: Sequence[int],
              policy: PolicyKind = PolicyKind.ENTROPY_FIELD,
              truth: Optional[OccupancyGrid] = None,
              ) -> Tuple[BatchStats, List[dict], List[RunRecord]]:
    """Run `rounds` independent seeded rounds of one scenario.

    Rounds execute sequentially so a batch is reproducible run-to-run;
    each round owns its full simulation state and RNG.
    """
    if len(seeds) != rounds:
        raise ValueError(f"need {rounds} seeds, got {len(seeds)}")
    rows: List[dict] = []
    records: List[RunRecord] = []
    for seed in seeds:
        rc = replace(scenario, seed=int(seed))
        record = Simulation(rc, policy=policy, truth=truth).run()
        rows.append(round_row(record, rc, policy))
        records.append(record)
    return compute_stats(rows), rows, records


def greedy_frontier_policy(m: OccupancyGrid,
                           pose: RobotPose) -> Optional[np.ndarray]:
    """Baseline goal: the frontier centroid nearest by wavefront distance.

    None when the map has no frontier clusters (the baseline idles; it has
    no rendezvous mechanism).
    """
    clustering = cluster_frontiers(detect_frontiers(m), (m.rows, m.cols))
    return greedy_goal(m, clustering, m.cell_of(pose.position))


BATCH_COLUMNS = ("seed", "policy", "r_comm", "n_robots", "success", "T",
                 "final_coverage")


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def format_batch_csv(rows: Sequence[dict]) -> str:
    """Render rows as CSV text with deterministic float formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BATCH_COLUMNS)
    for row in rows:
        writer.writerow([_csv_value(row[c]) for c in BATCH_COLUMNS])
    return buf.getvalue()


def write_batch_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(format_batch_csv(rows))


def stats_payload(stats_by_key: Dict[str, BatchStats], config_echo: dict) -> dict:
    return {
        "stats": {k: s.to_dict() for k, s in stats_by_key.items()},
        "config": config_echo,
        "sd_convention": SD_CONVENTION,
    }


def write_stats_json(stats_by_key: Dict[str, BatchStats], config_echo: dict,
                     path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(stats_payload(stats_by_key, config_echo), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
