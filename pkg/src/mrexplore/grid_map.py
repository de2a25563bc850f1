"""Occupancy grids: map merging, frontier detection, clustering, coverage.

Cells take one of three states. The internal uint8 codes are ordered
Unknown < Free < Occupied so that merging two maps is a plain cell-wise
maximum, which makes the merge operator an idempotent, commutative and
associative lattice join.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

GridCoord = Tuple[int, int]  # (row, col)

# 8-connectivity structure shared by clustering and reachability.
_STRUCT8 = np.ones((3, 3), dtype=bool)


class CellState(IntEnum):
    """Cell states ordered by information content (the merge lattice)."""

    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2

    @property
    def occupancy(self) -> float:
        """Numeric occupancy view: Free 0, Occupied 1, Unknown 0.5."""
        return _OCCUPANCY[int(self)]


_OCCUPANCY = {0: 0.5, 1: 0.0, 2: 1.0}

UNKNOWN = int(CellState.UNKNOWN)
FREE = int(CellState.FREE)
OCCUPIED = int(CellState.OCCUPIED)


class MapFormatError(ValueError):
    """Raised when a map file does not follow the documented format."""


class GridMismatchError(ValueError):
    """Raised when two grids disagree in shape or resolution."""


@dataclass
class OccupancyGrid:
    """Dense row-major occupancy grid with a fixed metric resolution.

    World coordinates are meters: x grows with columns, y grows with rows,
    and the cell (r, c) spans [c*res, (c+1)*res) x [r*res, (r+1)*res).
    """

    rows: int
    cols: int
    resolution: float
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("grid dimensions must be positive")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if self.cells.shape != (self.rows, self.cols):
            raise ValueError(
                f"cells shape {self.cells.shape} != ({self.rows}, {self.cols})"
            )
        if self.cells.max(initial=0) > OCCUPIED:
            raise ValueError("cell values must be one of the three states")

    @classmethod
    def unknown(cls, rows: int, cols: int, resolution: float) -> "OccupancyGrid":
        return cls(rows, cols, resolution, np.zeros((rows, cols), dtype=np.uint8))

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.rows, self.cols, self.resolution, self.cells.copy())

    def same_shape(self, other: "OccupancyGrid") -> bool:
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.resolution == other.resolution
        )

    def cell_of(self, xy: Sequence[float]) -> GridCoord:
        """Grid cell containing the world point (x, y)."""
        return (int(np.floor(xy[1] / self.resolution)),
                int(np.floor(xy[0] / self.resolution)))

    def cell_center(self, rc: GridCoord) -> np.ndarray:
        r, c = rc
        return np.array([(c + 0.5) * self.resolution, (r + 0.5) * self.resolution])

    def in_bounds(self, rc: GridCoord) -> bool:
        return 0 <= rc[0] < self.rows and 0 <= rc[1] < self.cols

    def occupancy(self) -> np.ndarray:
        """Float view of the grid using 0 / 1 / 0.5 occupancy values."""
        out = np.full(self.cells.shape, 0.5)
        out[self.cells == FREE] = 0.0
        out[self.cells == OCCUPIED] = 1.0
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return self.same_shape(other) and np.array_equal(self.cells, other.cells)


@dataclass
class FrontierCluster:
    """One 8-connected component of frontier cells."""

    cells: List[GridCoord]
    centroid: GridCoord
    size: int


@dataclass
class FrontierClustering:
    """All frontier clusters of one map plus the total frontier count."""

    clusters: List[FrontierCluster]
    total_frontier_cells: int

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


def merge(a: OccupancyGrid, b: OccupancyGrid) -> OccupancyGrid:
    """Merge two maps by the cell-wise lattice join (Unknown < Free < Occupied).

    Occupied beats Free so conflicting evidence resolves pessimistically;
    with a noiseless sensor the conflict never arises in normal runs.
    """
    if not a.same_shape(b):
        raise GridMismatchError(
            f"cannot merge {a.rows}x{a.cols}@{a.resolution} "
            f"with {b.rows}x{b.cols}@{b.resolution}"
        )
    return OccupancyGrid(a.rows, a.cols, a.resolution, np.maximum(a.cells, b.cells))


def detect_frontiers(m: OccupancyGrid) -> List[GridCoord]:
    """Free cells with at least one Unknown 8-neighbor, in row-major order.

    Out-of-bounds neighbors count as non-Unknown, so map borders alone
    never produce frontiers.
    """
    unknown = m.cells == UNKNOWN
    # Pad with False so border cells see out-of-bounds as known.
    padded = np.pad(unknown, 1, mode="constant", constant_values=False)
    near_unknown = np.zeros_like(unknown)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            near_unknown |= padded[1 + dr : 1 + dr + m.rows, 1 + dc : 1 + dc + m.cols]
    mask = (m.cells == FREE) & near_unknown
    rs, cs = np.nonzero(mask)
    return list(zip(rs.tolist(), cs.tolist()))


def cluster_frontiers(frontiers: Sequence[GridCoord],
                      shape: Optional[Tuple[int, int]] = None) -> FrontierClustering:
    """Group frontier cells into 8-connected components.

    Each cluster's centroid is the member cell closest to the arithmetic
    mean of the cluster, ties broken by row-major order. The grid shape is
    inferred from the cells when not given.
    """
    frontiers = list(frontiers)
    if not frontiers:
        return FrontierClustering([], 0)
    if shape is None:
        shape = (max(r for r, _ in frontiers) + 1, max(c for _, c in frontiers) + 1)
    mask = np.zeros(shape, dtype=bool)
    rs = np.array([r for r, _ in frontiers])
    cs = np.array([c for _, c in frontiers])
    mask[rs, cs] = True
    labels, n = ndimage.label(mask, structure=_STRUCT8)
    clusters = []
    for k in range(1, n + 1):
        krs, kcs = np.nonzero(labels == k)
        cells = list(zip(krs.tolist(), kcs.tolist()))  # row-major from nonzero
        mean_r = krs.mean()
        mean_c = kcs.mean()
        d2 = (krs - mean_r) ** 2 + (kcs - mean_c) ** 2
        centroid = cells[int(np.argmin(d2))]  # argmin keeps first on ties
        clusters.append(FrontierCluster(cells=cells, centroid=centroid,
                                        size=len(cells)))
    return FrontierClustering(clusters, len(frontiers))


def reachable_free(truth: OccupancyGrid,
                   seeds: Sequence[GridCoord]) -> np.ndarray:
    """Boolean mask of truth's Free cells 8-connected to any seed cell."""
    free = truth.cells == FREE
    seed_mask = np.zeros_like(free)
    for r, c in seeds:
        if not truth.in_bounds((r, c)) or not free[r, c]:
            raise ValueError(f"seed cell {(r, c)} is not a Free cell of the map")
        seed_mask[r, c] = True
    labels, _ = ndimage.label(free, structure=_STRUCT8)
    keep = np.unique(labels[seed_mask])
    return free & np.isin(labels, keep[keep > 0])


def coverage_fraction(m: OccupancyGrid, truth: OccupancyGrid,
                      reachable: Optional[np.ndarray] = None) -> float:
    """Fraction of truth's reachable Free cells that are known in m.

    `reachable` is the mask from `reachable_free`, computed once per run
    from the robot start cells; when omitted every Free cell of truth
    counts. Sealed voids and wall interiors never enter the denominator.
    """
    if not m.same_shape(truth):
        raise GridMismatchError("coverage requires identically shaped grids")
    if reachable is None:
        reachable = truth.cells == FREE
    denom = int(np.count_nonzero(reachable))
    if denom == 0:
        return 1.0
    known = np.count_nonzero((m.cells != UNKNOWN) & reachable)
    return known / denom


def parse_map_text(text: str, source: str = "<map>") -> OccupancyGrid:
    """Parse the ASCII map format.

    Line 1 is `rows cols resolution_m`; the following `rows` lines hold
    exactly `cols` characters each, `#` Occupied and `.` Free. Ground-truth
    maps carry no Unknown cells. Ragged or malformed input raises
    MapFormatError naming the offending line.
    """
    lines = text.splitlines()
    if not lines:
        raise MapFormatError(f"{source}:1: empty map file")
    header = lines[0].split()
    if len(header) != 3:
        raise MapFormatError(
            f"{source}:1: header must be 'rows cols resolution_m', got {lines[0]!r}"
        )
    try:
        rows, cols = int(header[0]), int(header[1])
        resolution = float(header[2])
    except ValueError as exc:
        raise MapFormatError(f"{source}:1: bad header value: {exc}") from None
    if rows <= 0 or cols <= 0 or resolution <= 0:
        raise MapFormatError(f"{source}:1: dimensions and resolution must be positive")
    if len(lines) < rows + 1:
        raise MapFormatError(
            f"{source}:{len(lines)}: expected {rows} map rows, found {len(lines) - 1}"
        )
    extra = [ln for ln in lines[rows + 1 :] if ln.strip()]
    if extra:
        raise MapFormatError(f"{source}:{rows + 2}: trailing content after {rows} rows")
    cells = np.zeros((rows, cols), dtype=np.uint8)
    for r in range(rows):
        line = lines[r + 1]
        if len(line) != cols:
            raise MapFormatError(
                f"{source}:{r + 2}: row has {len(line)} characters, expected {cols}"
            )
        for c, ch in enumerate(line):
            if ch == "#":
                cells[r, c] = OCCUPIED
            elif ch == ".":
                cells[r, c] = FREE
            else:
                raise MapFormatError(
                    f"{source}:{r + 2}: invalid character {ch!r} at column {c + 1}"
                )
    return OccupancyGrid(rows, cols, resolution, cells)


def load_map(path) -> OccupancyGrid:
    with open(path, "r", encoding="ascii") as fh:
        return parse_map_text(fh.read(), source=str(path))


def format_map(grid: OccupancyGrid) -> str:
    """Inverse of parse_map_text; refuses grids containing Unknown cells."""
    if np.any(grid.cells == UNKNOWN):
        raise MapFormatError("map files cannot represent Unknown cells")
    out = [f"{grid.rows} {grid.cols} {grid.resolution:g}"]
    lookup = np.array([".", ".", "#"])
    for r in range(grid.rows):
        out.append("".join(lookup[grid.cells[r]]))
    return "\n".join(out) + "\n"
