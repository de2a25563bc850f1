"""Command-line front end.

Subcommands: run, batch, sweep, validate-map, dump-field. Positional
key=value tokens override scenario fields; `sweep` additionally accepts
comma lists for r_comm and n_robots plus rounds=N, expanding the full
batch matrix. Exit codes: 0 success, 1 scenario/map validation failure,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, report
from .entropy_field import total_field
from .grid_map import (
    MapFormatError,
    cluster_frontiers,
    detect_frontiers,
    load_map,
)
from .metrics import BatchStats, run_batch, stats_payload, write_batch_csv
from .scenario import apply_overrides, load_scenario, to_jsonable
from .sim_engine import (
    PolicyKind,
    RunRecord,
    ScenarioConfig,
    ScenarioError,
    Simulation,
)

OUT_DIR_ENV = "MREXPLORE_OUT"


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get(OUT_DIR_ENV) or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _rcomm_label(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:g}"


def _split_tokens(tokens: Sequence[str], special: Sequence[str]
                  ) -> Tuple[Dict[str, str], List[str]]:
    """Separate CLI-level special keys from scenario overrides."""
    extras: Dict[str, str] = {}
    overrides: List[str] = []
    for tok in tokens:
        if "=" not in tok:
            raise ScenarioError(f"argument {tok!r} is not of the form key=value")
        key = tok.partition("=")[0].strip()
        if key in special:
            extras[key] = tok.partition("=")[2].strip()
        else:
            overrides.append(tok)
    return extras, overrides


def _events_jsonl(record: RunRecord) -> str:
    merged = []
    for rank, events in enumerate(
        (record.edge_events, record.goal_events, record.rendezvous_events)
    ):
        for seq, ev in enumerate(events):
            merged.append((ev["tick"], rank, seq, ev))
    merged.sort(key=lambda item: item[:3])
    return "\n".join(json.dumps(to_jsonable(ev), sort_keys=True)
                     for _, _, _, ev in merged) + ("\n" if merged else "")


def _load_cfg(args) -> ScenarioConfig:
    cfg = load_scenario(args.scenario)
    extras, overrides = _split_tokens(args.overrides, args.special_keys)
    args.extras = extras
    return apply_overrides(cfg, overrides)


def _cmd_run(args) -> int:
    args.special_keys = ("policy",)
    cfg = _load_cfg(args)
    policy = PolicyKind(args.extras.get("policy", PolicyKind.ENTROPY_FIELD.value))
    out = _out_dir(args)
    sim = Simulation(cfg, policy=policy)
    record = sim.run()
    with open(out / "run.json", "w", encoding="ascii") as fh:
        json.dump(to_jsonable(record.to_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "events.jsonl", "w", encoding="ascii") as fh:
        fh.write(_events_jsonl(record))
    if not args.no_figures:
        report.save_run_figures(record, sim.truth, out)
    print(
        f"run: success={record.success} reason={record.reason} "
        f"T={record.time} ticks={record.ticks} "
        f"coverage={max(record.final_coverage.values()):.4f}"
    )
    print(f"outputs in {out}")
    return 0


def _seeds(base: int, rounds: int) -> List[int]:
    return [base + k for k in range(rounds)]


def _cmd_batch(args) -> int:
    args.special_keys = ("policy", "rounds")
    cfg = _load_cfg(args)
    rounds = int(args.extras.get("rounds", args.rounds))
    policy = PolicyKind(args.extras.get("policy", PolicyKind.ENTROPY_FIELD.value))
    out = _out_dir(args)
    truth = load_map(cfg.world)
    stats, rows, _ = run_batch(cfg, rounds, _seeds(cfg.seed, rounds),
                               policy=policy, truth=truth)
    write_batch_csv(rows, out / "batch.csv")
    key = (f"policy={policy.value},r_comm={_rcomm_label(cfg.r_comm)},"
           f"n_robots={cfg.n_robots}")
    payload = stats_payload({key: stats},
                            to_jsonable(cfg.resolved_dict(truth.resolution)))
    with open(out / "stats.json", "w", encoding="ascii") as fh:
        json.dump(to_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not args.no_figures:
        report.save_batch_figures(rows, out)
    print(f"batch: {key} n_success={stats.n_success}/{stats.n_total} "
          f"t_bar={stats.t_bar} rsd_t={stats.rsd_t}")
    print(f"outputs in {out}")
    return 0


def _parse_float_list(raw: str) -> List[float]:
    return [float(v) for v in raw.split(",") if v]


def _parse_int_list(raw: str) -> List[int]:
    return [int(v) for v in raw.split(",") if v]


def _cmd_sweep(args) -> int:
    args.special_keys = ("policy", "rounds", "r_comm", "n_robots")
    cfg = _load_cfg(args)
    extras = args.extras
    rounds = int(extras.get("rounds", args.rounds))
    policy = PolicyKind(extras.get("policy", PolicyKind.ENTROPY_FIELD.value))
    r_comms = _parse_float_list(extras["r_comm"]) if "r_comm" in extras \
        else [cfg.r_comm]
    robot_counts = _parse_int_list(extras["n_robots"]) if "n_robots" in extras \
        else [cfg.n_robots]
    out = _out_dir(args)
    truth = load_map(cfg.world)

    all_rows: List[dict] = []
    stats_by_key: Dict[str, BatchStats] = {}
    for n in robot_counts:
        if n > len(cfg.starts):
            raise ScenarioError(
                f"sweep needs {n} start positions but the scenario has "
                f"{len(cfg.starts)}"
            )
        for rc in r_comms:
            combo = replace(cfg, r_comm=rc, n_robots=n,
                            starts=list(cfg.starts[:n]))
            stats, rows, _ = run_batch(combo, rounds,
                                       _seeds(cfg.seed, rounds),
                                       policy=policy, truth=truth)
            key = (f"policy={policy.value},r_comm={_rcomm_label(rc)},"
                   f"n_robots={n}")
            stats_by_key[key] = stats
            all_rows.extend(rows)
            print(f"sweep: {key} n_success={stats.n_success}/{stats.n_total} "
                  f"t_bar={stats.t_bar}")
    write_batch_csv(all_rows, out / "batch.csv")
    payload = stats_payload(stats_by_key,
                            to_jsonable(cfg.resolved_dict(truth.resolution)))
    payload["sweep"] = {"r_comm": [_rcomm_label(v) for v in r_comms],
                        "n_robots": robot_counts, "rounds": rounds}
    with open(out / "stats.json", "w", encoding="ascii") as fh:
        json.dump(to_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not args.no_figures:
        report.save_batch_figures(all_rows, out)
    print(f"{len(all_rows)} rounds total; outputs in {out}")
    return 0


def _cmd_validate_map(args) -> int:
    grid = load_map(args.map)
    free = int(np.count_nonzero(grid.cells == 1))
    occ = int(np.count_nonzero(grid.cells == 2))
    print(f"OK: {grid.rows} rows x {grid.cols} cols @ {grid.resolution} m/cell, "
          f"{free} free, {occ} occupied")
    return 0


def _cmd_dump_field(args) -> int:
    args.special_keys = ("policy",)
    cfg = _load_cfg(args)
    out = _out_dir(args)
    sim = Simulation(cfg)
    for _ in range(max(1, args.ticks)):
        if sim.done:
            break
        sim.step()
    rid = args.robot
    if not 1 <= rid <= cfg.n_robots:
        raise ScenarioError(f"robot {rid} out of range 1..{cfg.n_robots}")
    m = sim.maps[rid]
    clustering = cluster_frontiers(detect_frontiers(m), (m.rows, m.cols))
    field = total_field(rid, m, clustering, sim._known_poses(rid), sim.params,
                        sim.noise)
    csv_path = out / f"field_robot{rid}.csv"
    np.savetxt(csv_path, field.h_total, delimiter=",", fmt="%.9g")
    if not args.no_figures:
        report.save_field_figure(field, out / f"field_robot{rid}.png",
                                 robot_xy=sim.poses[rid - 1].position)
    print(f"field dumped for robot {rid} after {sim.tick} ticks -> {csv_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrexplore",
        description="Multi-robot exploration simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("scenario", help="scenario file path")
        p.add_argument("overrides", nargs="*", metavar="key=value",
                       help="scenario field overrides")
        p.add_argument("--out-dir", default=None,
                       help=f"output directory (default ${OUT_DIR_ENV} or ./out)")
        p.add_argument("--no-figures", action="store_true",
                       help="skip PNG figure rendering")

    p_run = sub.add_parser("run", help="execute a single run")
    add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_batch = sub.add_parser("batch", help="run seeded rounds of one scenario")
    add_common(p_batch)
    p_batch.add_argument("--rounds", type=int, default=20)
    p_batch.set_defaults(func=_cmd_batch)

    p_sweep = sub.add_parser(
        "sweep", help="expand r_comm/n_robots lists into a batch matrix")
    add_common(p_sweep)
    p_sweep.add_argument("--rounds", type=int, default=20)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_map = sub.add_parser("validate-map", help="check a map file")
    p_map.add_argument("map", help="map file path")
    p_map.set_defaults(func=_cmd_validate_map)

    p_field = sub.add_parser("dump-field", help="dump one robot's entropy field")
    add_common(p_field)
    p_field.add_argument("--robot", type=int, default=1)
    p_field.add_argument("--ticks", type=int, default=1,
                         help="ticks to simulate before dumping")
    p_field.set_defaults(func=_cmd_dump_field)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, MapFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
