"""Problem instances: a map, a target, correlated landmark objects, detectors.

A scenario bundles everything an environment needs to simulate a search
trial: ground-truth object cells, per-class detector parameters, the
correlation predicates linking landmarks to the target, the robot's start
pose and the episode limits.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Mapping

from .gridworld import Cell, GridMap, HEADINGS, Pose, bfs_steps
from .sensing import CorrelationSpec, DetectorParams, correlation_model


class ScenarioError(ValueError):
    """Raised when a scenario description is internally inconsistent."""


@dataclass(frozen=True)
class CorrelatedObject:
    name: str
    cell: Cell
    detector: DetectorParams
    correlation: CorrelationSpec


@dataclass(frozen=True)
class ScenarioSpec:
    grid: GridMap
    target_name: str
    target_cell: Cell
    target_detector: DetectorParams
    correlated_objects: tuple[CorrelatedObject, ...]
    init_pose: Pose
    max_steps: int = 100
    success_distance: float = 1.0
    name: str = "scenario"
    # raw planner / hierarchy / baseline parameter blocks from the JSON
    # config; interpreted by the agent factories in bench
    config: Mapping[str, Any] = field(default_factory=dict)

    @property
    def object_names(self) -> tuple[str, ...]:
        """Detection order used everywhere: target first, then landmarks."""
        return (self.target_name,) + tuple(o.name for o in self.correlated_objects)

    def with_wrong_correlations(self) -> "ScenarioSpec":
        """Swap Close and Far on every landmark (the 'wrong' ablation)."""
        flipped = tuple(
            dataclasses.replace(o, correlation=o.correlation.flipped())
            for o in self.correlated_objects
        )
        return dataclasses.replace(self, correlated_objects=flipped)

    def without_correlated_objects(self) -> "ScenarioSpec":
        return dataclasses.replace(self, correlated_objects=())

    def validate(self) -> "ScenarioSpec":
        grid = self.grid
        if self.max_steps < 1:
            raise ScenarioError("max_steps must be at least 1")
        if self.success_distance <= 0:
            raise ScenarioError("success_distance must be positive")
        if self.init_pose.heading not in HEADINGS:
            raise ScenarioError(f"invalid heading {self.init_pose.heading}")
        if not grid.is_free(self.init_pose.cell):
            raise ScenarioError(f"init pose cell {self.init_pose.cell} is not free")
        if not grid.is_free(self.target_cell):
            raise ScenarioError(f"target cell {self.target_cell} is not free")
        names = [self.target_name] + [o.name for o in self.correlated_objects]
        if len(set(names)) != len(names):
            raise ScenarioError(f"object class names must be unique: {names}")
        for obj in self.correlated_objects:
            if not grid.is_free(obj.cell):
                raise ScenarioError(f"object {obj.name} cell {obj.cell} is not free")
            try:
                correlation_model(grid, obj.correlation)
            except ValueError as exc:
                raise ScenarioError(f"object {obj.name}: {exc}") from None
        reach = bfs_steps(grid, self.init_pose.cell)
        if len(reach) != len(grid.free_cells):
            raise ScenarioError(
                "free space is not fully connected from the initial pose"
            )
        return self
