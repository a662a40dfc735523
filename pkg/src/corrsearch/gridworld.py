"""2D occupancy-grid world: geometry, robot motion, field of view, shortest paths.

Cells are integer ``(col, row)`` pairs; ``col`` grows to the east (+x) and
``row`` grows to the north (+y).  Metric quantities (ranges, distances) are in
meters and convert through ``GridMap.cell_size``.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple

Cell = tuple[int, int]

# Eight headings at 45 degree increments.  0 points east and angles grow
# counterclockwise, so 90 points north (+row).
HEADINGS: tuple[int, ...] = (0, 45, 90, 135, 180, 225, 270, 315)

_HEADING_VECS: dict[int, Cell] = {
    0: (1, 0),
    45: (1, 1),
    90: (0, 1),
    135: (-1, 1),
    180: (-1, 0),
    225: (-1, -1),
    270: (0, -1),
    315: (1, -1),
}


class Action(enum.Enum):
    MOVE_AHEAD = "MoveAhead"
    ROTATE_LEFT = "RotateLeft"
    ROTATE_RIGHT = "RotateRight"
    DONE = "Done"

    def __repr__(self) -> str:  # keeps traces and test output compact
        return self.value


MOVE_ACTIONS: tuple[Action, ...] = (
    Action.MOVE_AHEAD,
    Action.ROTATE_LEFT,
    Action.ROTATE_RIGHT,
)
ALL_ACTIONS: tuple[Action, ...] = MOVE_ACTIONS + (Action.DONE,)


class Pose(NamedTuple):
    """Robot pose: occupied cell plus discrete heading in degrees."""

    cell: Cell
    heading: int


def heading_vector(heading: int) -> Cell:
    return _HEADING_VECS[heading]


@dataclass(frozen=True)
class GridMap:
    """Rectangular grid with a set of blocked (obstacle) cells.

    Free cells are traversable and are also the only cells objects may
    occupy.  The map is immutable; derived structures (free-cell ordering,
    visibility sets, BFS distance fields) are cached per instance.
    """

    width: int
    height: int
    obstacles: frozenset[Cell] = frozenset()
    cell_size: float = 0.25

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if not isinstance(self.obstacles, frozenset):
            object.__setattr__(self, "obstacles", frozenset(self.obstacles))
        for c in self.obstacles:
            if not self.in_bounds(c):
                raise ValueError(f"obstacle {c} out of bounds")
        if len(self.obstacles) >= self.width * self.height:
            raise ValueError("map has no free cells")

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.obstacles

    def all_cells(self) -> Iterator[Cell]:
        for row in range(self.height):
            for col in range(self.width):
                yield (col, row)

    @cached_property
    def free_cells(self) -> tuple[Cell, ...]:
        """All free cells in row-major order (row, then column)."""
        return tuple(c for c in self.all_cells() if c not in self.obstacles)

    @cached_property
    def free_index(self) -> dict[Cell, int]:
        return {c: i for i, c in enumerate(self.free_cells)}

    @cached_property
    def _vis_cache(self) -> dict[Pose, frozenset[Cell]]:
        return {}

    @cached_property
    def _bfs_cache(self) -> dict[Cell, dict[Cell, int]]:
        return {}


def euclidean_cells(a: Cell, b: Cell) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def heading_toward(a: Cell, b: Cell) -> int:
    """The discrete heading at ``a`` pointing most nearly at ``b``.
    Returns 0 (east) when the cells coincide."""
    if a == b:
        return 0
    angle = math.degrees(math.atan2(b[1] - a[1], b[0] - a[0]))
    return (int(math.floor(angle / 45.0 + 0.5)) % 8) * 45


def euclidean_m(grid: GridMap, a: Cell, b: Cell) -> float:
    return euclidean_cells(a, b) * grid.cell_size


def rotate_toward(heading: int, want: int) -> Action:
    """The single rotation that closes the gap to ``want`` fastest."""
    diff = (want - heading) % 360
    return Action.ROTATE_LEFT if diff <= 180 else Action.ROTATE_RIGHT


def apply_move(grid: GridMap, pose: Pose, action: Action) -> Pose:
    """Deterministic motion.  A MoveAhead into an obstacle or off the map is
    a no-op that leaves the pose unchanged."""
    if action is Action.MOVE_AHEAD:
        dx, dy = _HEADING_VECS[pose.heading]
        dest = (pose.cell[0] + dx, pose.cell[1] + dy)
        if grid.is_free(dest):
            return Pose(dest, pose.heading)
        return pose
    if action is Action.ROTATE_LEFT:
        return Pose(pose.cell, (pose.heading + 45) % 360)
    if action is Action.ROTATE_RIGHT:
        return Pose(pose.cell, (pose.heading - 45) % 360)
    raise ValueError(f"not a move action: {action}")


def transition_dist(grid: GridMap, pose: Pose, action: Action) -> tuple[tuple[Pose, float], ...]:
    """Motion as a distribution over next poses.  Currently a point mass;
    kept so noisy actuation can slot in without touching callers."""
    return ((apply_move(grid, pose, action), 1.0),)


def _cells_crossed(a: Cell, b: Cell) -> list[Cell]:
    """Cells whose interior the open segment between the centers of ``a`` and
    ``b`` passes through, excluding the endpoint cells themselves.

    The segment is cut at every cell-boundary crossing; midpoints of the
    resulting intervals identify the traversed cells.  A crossing exactly
    through a cell corner yields a single coincident cut, so the segment
    skips diagonally without touching the two side cells (grazing a corner
    does not block sight).
    """
    x0, y0 = a
    x1, y1 = b
    dx = x1 - x0
    dy = y1 - y0
    ts = {0.0, 1.0}
    if dx:
        lo, hi = (x0, x1) if x0 < x1 else (x1, x0)
        for m in range(lo, hi):
            ts.add((m + 0.5 - x0) / dx)
    if dy:
        lo, hi = (y0, y1) if y0 < y1 else (y1, y0)
        for m in range(lo, hi):
            ts.add((m + 0.5 - y0) / dy)
    cuts = sorted(ts)
    out = []
    for t0, t1 in zip(cuts, cuts[1:]):
        tm = (t0 + t1) / 2.0
        cell = (math.floor(x0 + tm * dx + 0.5), math.floor(y0 + tm * dy + 0.5))
        if cell != a and cell != b:
            out.append(cell)
    return out


def line_of_sight(grid: GridMap, a: Cell, b: Cell) -> bool:
    """True when no obstacle interior lies strictly between the two cell
    centers.  Endpoints do not block themselves."""
    return not any(c in grid.obstacles for c in _cells_crossed(a, b))


def visible_cells(grid: GridMap, pose: Pose) -> frozenset[Cell]:
    """Cells visible from ``pose``: within the 90 degree field of view
    centered on the heading (the 45 degree boundary rays inclusive) and with
    unobstructed line of sight.  The pose's own cell is excluded.  Obstacle
    cells can themselves be visible; they just block cells behind them.
    """
    cached = grid._vis_cache.get(pose)
    if cached is not None:
        return cached
    ux, uy = _HEADING_VECS[pose.heading]
    uu = ux * ux + uy * uy
    px, py = pose.cell
    out = set()
    for cell in grid.all_cells():
        vx = cell[0] - px
        vy = cell[1] - py
        if vx == 0 and vy == 0:
            continue
        dot = ux * vx + uy * vy
        if dot <= 0:
            continue
        # cos(angle) >= cos(45deg), checked exactly on integer vectors:
        # 2*dot^2 >= |u|^2 |v|^2  (valid since dot > 0)
        if 2 * dot * dot < uu * (vx * vx + vy * vy):
            continue
        if not line_of_sight(grid, pose.cell, cell):
            continue
        out.add(cell)
    result = frozenset(out)
    grid._vis_cache[pose] = result
    return result


_NEIGHBOR_STEPS: tuple[Cell, ...] = (
    (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1),
)


def bfs_steps(grid: GridMap, source: Cell) -> dict[Cell, int]:
    """Minimum number of 8-connected moves from ``source`` to every reachable
    free cell.  Diagonal steps only require the destination cell to be free,
    mirroring ``apply_move``."""
    cached = grid._bfs_cache.get(source)
    if cached is not None:
        return cached
    if not grid.is_free(source):
        raise ValueError(f"BFS source {source} is not a free cell")
    dist = {source: 0}
    queue = deque([source])
    while queue:
        cur = queue.popleft()
        d = dist[cur] + 1
        for sx, sy in _NEIGHBOR_STEPS:
            nxt = (cur[0] + sx, cur[1] + sy)
            if nxt not in dist and grid.is_free(nxt):
                dist[nxt] = d
                queue.append(nxt)
    grid._bfs_cache[source] = dist
    return dist


def shortest_path_length(
    grid: GridMap,
    start: Pose | Cell,
    target_cell: Cell,
    success_distance: float = 1.0,
) -> float:
    """Length in meters of the shortest traversable path from ``start`` to
    any free cell within ``success_distance`` (meters, Euclidean) of
    ``target_cell``.  Returns 0.0 when the start already qualifies and
    ``math.inf`` when no qualifying cell is reachable.

    Rotations are free: the length only counts cell-to-cell moves, each
    ``cell_size`` meters regardless of direction.
    """
    start_cell = start.cell if isinstance(start, Pose) else start
    goals = [
        c for c in grid.free_cells
        if euclidean_m(grid, c, target_cell) <= success_distance
    ]
    if start_cell in goals:
        return 0.0
    dist = bfs_steps(grid, start_cell)
    steps = min((dist[g] for g in goals if g in dist), default=None)
    if steps is None:
        return math.inf
    return steps * grid.cell_size


def success_check(
    grid: GridMap,
    pose: Pose,
    target_cell: Cell,
    success_distance: float = 1.0,
) -> bool:
    """Declaring Done succeeds when the target is within ``success_distance``
    meters of the robot and currently visible."""
    if euclidean_m(grid, pose.cell, target_cell) > success_distance:
        return False
    return target_cell in visible_cells(grid, pose)
