"""A fixed suite of ten indoor-style scenarios for agent comparison.

Every scenario pairs a hard-to-detect target (tp 0.35, fp 0.09, r 1.5 m)
with one reliably detectable landmark (tp 0.85, fp 0.03, r 2.5 m) that sits
Close (d = 1.0 m) to the target, on a small cluttered map.  Construction is
fully deterministic, so the suite is identical across machines and runs.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import numpy as np

from .gridworld import GridMap, Pose, euclidean_cells, heading_toward, visible_cells
from .scenario import CorrelatedObject, ScenarioError, ScenarioSpec
from .scenario_io import save_scenario
from .sensing import CorrelationSpec, DetectorParams, Relation

TREND_TARGET_DETECTOR = DetectorParams(tp=0.35, fp=0.09, r=1.5)
TREND_LANDMARK_DETECTOR = DetectorParams(tp=0.85, fp=0.03, r=2.5)
TREND_CORRELATION = CorrelationSpec(Relation.CLOSE, 1.0)

_SIZES = ((13, 13), (14, 12), (12, 14))
_SUITE_SALT = 20240811


def _wall_cells(
    rng: np.random.Generator, w: int, h: int, vertical: bool,
    avoid_lines: tuple[int, ...],
) -> set:
    """One straight interior wall with a two-cell doorway.  The wall splits
    the map into two rooms so that long sight lines are broken and a detector
    can only pick up objects from the same room."""
    span, depth = (h, w) if vertical else (w, h)
    lines = [
        x for x in range(depth // 2 - 1, depth // 2 + 2)
        if all(abs(x - a) >= 2 for a in avoid_lines)
    ]
    if not lines:
        raise ScenarioError("no wall line clears the placed objects")
    line = lines[int(rng.integers(len(lines)))]
    door = int(rng.integers(1, span - 2))
    cells = {
        (line, y) if vertical else (y, line)
        for y in range(span)
        if y not in (door, door + 1)
    }
    return cells


def _build(index: int, attempt: int) -> ScenarioSpec:
    rng = np.random.default_rng([_SUITE_SALT, index, attempt])
    w, h = _SIZES[index % len(_SIZES)]
    corners = ((1, 1), (w - 2, 1), (1, h - 2), (w - 2, h - 2))
    init_cell = corners[index % 4]
    far_cell = corners[3 - index % 4]
    target = (
        far_cell[0] + int(rng.integers(-1, 2)),
        far_cell[1] + int(rng.integers(-1, 2)),
    )
    # landmark two-ish cells from the target: near enough that a stop next
    # to the landmark still counts as finding the target
    ring = [
        (target[0] + dx, target[1] + dy)
        for dx in range(-2, 3)
        for dy in range(-2, 3)
        if 2.0 <= euclidean_cells((0, 0), (dx, dy)) <= 2.3
        and 0 <= target[0] + dx < w
        and 0 <= target[1] + dy < h
    ]
    landmark = ring[int(rng.integers(len(ring)))]

    vertical = index % 2 == 0
    pick = (lambda c: c[0]) if vertical else (lambda c: c[1])
    avoid = tuple(pick(c) for c in (init_cell, target, landmark))
    obstacles = frozenset(_wall_cells(rng, w, h, vertical, avoid))

    grid = GridMap(w, h, obstacles)
    init_pose = Pose(init_cell, heading_toward(init_cell, (w // 2, h // 2)))
    # the wall should hide the landmark from the start pose so that finding
    # it requires actually entering its room
    if landmark in visible_cells(grid, init_pose):
        raise ScenarioError("landmark already visible from the initial pose")

    spec = ScenarioSpec(
        grid=grid,
        target_name="target",
        target_cell=target,
        target_detector=TREND_TARGET_DETECTOR,
        correlated_objects=(
            CorrelatedObject(
                "landmark", landmark, TREND_LANDMARK_DETECTOR, TREND_CORRELATION
            ),
        ),
        init_pose=init_pose,
        name=f"trend-{index:02d}",
    )
    return spec.validate()


@lru_cache(maxsize=1)
def trend_suite() -> tuple[ScenarioSpec, ...]:
    out = []
    for index in range(10):
        for attempt in range(100):
            try:
                out.append(_build(index, attempt))
                break
            except ScenarioError:
                continue
        else:
            raise RuntimeError(f"could not build trend scenario {index}")
    return tuple(out)


def write_suite(out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for spec in trend_suite():
        path = out_dir / f"{spec.name}.json"
        save_scenario(spec, path)
        paths.append(path)
    return paths
