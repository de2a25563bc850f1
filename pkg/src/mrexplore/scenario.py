"""Flat text scenario files and key=value overrides.

The format is one `key = value` per line, `#` comments, blank lines
ignored, with a mandatory `schema_version = 1`. Values follow the field's
type: floats accept `inf`, `starts` is a JSON list of [x, y] pairs, and
optional fields accept `none` to request the resolution-derived default.
Unknown keys are rejected with the offending line number, never ignored.
"""

from __future__ import annotations

import json
import math
from dataclasses import fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .sim_engine import ScenarioConfig, ScenarioError

SCHEMA_VERSION = 1


def _parse_int(raw: str) -> int:
    return int(raw)


def _parse_float(raw: str) -> float:
    return float(raw)


def _parse_opt_float(raw: str) -> Optional[float]:
    if raw.lower() in ("none", ""):
        return None
    return float(raw)


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_str(raw: str) -> str:
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        return raw[1:-1]
    return raw


def _parse_starts(raw: str) -> List[List[float]]:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"starts must be a JSON list of [x, y] pairs: {exc}")
    if not isinstance(data, list) or not all(
        isinstance(p, list) and len(p) == 2
        and all(isinstance(v, (int, float)) for v in p)
        for p in data
    ):
        raise ValueError("starts must be a JSON list of [x, y] pairs")
    return [[float(x), float(y)] for x, y in data]


_COERCERS = {
    "world": _parse_str,
    "starts": _parse_starts,
    "n_robots": _parse_int,
    "r_comm": _parse_float,
    "d_s": _parse_float,
    "v_max": _parse_float,
    "dt": _parse_float,
    "coverage_threshold": _parse_float,
    "stuck_timeout": _parse_float,
    "max_sim_time": _parse_float,
    "seed": _parse_int,
    "share_positions": _parse_bool,
    "merged_coverage_eval": _parse_bool,
    "sensor_rays": _parse_int,
    "arrival_tolerance": _parse_opt_float,
    "k_ref": _parse_float,
    "k_f_base": _parse_float,
    "k_r": _parse_float,
    "sigma_r": _parse_float,
    "alpha": _parse_float,
    "sigma_d": _parse_float,
    "epsilon_d": _parse_opt_float,
    "frontier_aggregate": _parse_str,
    "schema_version": _parse_int,
}

_REQUIRED = ("world", "starts", "n_robots", "r_comm")

assert set(_COERCERS) == {f.name for f in fields(ScenarioConfig)}


def parse_scenario_text(text: str, source: str = "<scenario>",
                        base_dir: Optional[Path] = None) -> ScenarioConfig:
    """Parse scenario text; diagnostics carry the source name and line."""
    values: Dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ScenarioError(
                f"{source}:{lineno}: expected 'key = value', got {stripped!r}"
            )
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _COERCERS:
            raise ScenarioError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ScenarioError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _COERCERS[key](raw)
        except ValueError as exc:
            raise ScenarioError(f"{source}:{lineno}: bad value for {key}: {exc}")
    version = values.get("schema_version", None)
    if version is None:
        raise ScenarioError(f"{source}: missing schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"{source}: unsupported schema_version {version} (expected "
            f"{SCHEMA_VERSION})"
        )
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ScenarioError(f"{source}: missing required keys: {', '.join(missing)}")
    if base_dir is not None:
        world = Path(str(values["world"]))
        if not world.is_absolute():
            values["world"] = str((base_dir / world).resolve())
    values["starts"] = [tuple(p) for p in values["starts"]]
    return ScenarioConfig(**values)  # type: ignore[arg-type]


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario_text(fh.read(), source=str(path),
                                   base_dir=path.parent)


def apply_overrides(cfg: ScenarioConfig,
                    overrides: Sequence[str]) -> ScenarioConfig:
    """Apply `key=value` strings on top of a config; unknown keys fail."""
    values = {}
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _COERCERS:
            raise ScenarioError(f"override references unknown key {key!r}")
        try:
            values[key] = _COERCERS[key](raw)
        except ValueError as exc:
            raise ScenarioError(f"bad override value for {key}: {exc}")
    if "starts" in values:
        values["starts"] = [tuple(p) for p in values["starts"]]
    from dataclasses import replace

    return replace(cfg, **values)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Rebuild a config from an echoed dict (extra keys are dropped).

    Echoed dicts carry resolved values (e.g. arrival_tolerance filled in),
    so the rebuilt config is behaviorally equivalent to the original.
    """
    values = {}
    for key, coerce in _COERCERS.items():
        if key not in data:
            continue
        v = data[key]
        if isinstance(v, str):
            v = coerce(v)
        elif key == "starts":
            v = [tuple(p) for p in v]
        values[key] = v
    return ScenarioConfig(**values)  # type: ignore[arg-type]


def to_jsonable(obj):
    """Recursively make a value strict-JSON safe (inf becomes 'inf')."""
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj
