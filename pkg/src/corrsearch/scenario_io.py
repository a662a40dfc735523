"""Scenario JSON schema (version 1) and round-trip serialization.

Layout:

.. code-block:: json

    {
      "schema_version": 1,
      "name": "kitchen-07",
      "map": {"width": 13, "height": 13, "cell_size": 0.25,
              "obstacles": [[3, 4], [3, 5]]},
      "init_pose": {"cell": [0, 0], "heading": 0},
      "max_steps": 100,
      "success_distance": 1.0,
      "target": {"name": "mug", "cell": [10, 11],
                 "detector": {"tp": 0.35, "fp": 0.09, "r": 1.5, "sigma": 0.5}},
      "objects": [
        {"name": "tv", "cell": [9, 10],
         "detector": {"tp": 0.85, "fp": 0.03, "r": 2.5, "sigma": 0.5},
         "correlation": {"relation": "close", "d": 1.0,
                         "ablation": "accurate"}}
      ],
      "config": {}
    }

``relation`` is ``close`` or ``far``; ``ablation: wrong`` flips it at load
time.  ``config`` is an opaque block of planner/agent parameter overrides
interpreted by the agent factories.  Loading validates the scenario fully.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from .gridworld import GridMap, Pose
from .scenario import CorrelatedObject, ScenarioError, ScenarioSpec
from .sensing import CorrelationSpec, DetectorParams, Relation

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version", "name", "map", "init_pose", "max_steps",
    "success_distance", "target", "objects", "config",
}


def _require(data: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in data:
        raise ScenarioError(f"missing key '{key}' in {where}")
    return data[key]


def _cell(value: Any, where: str) -> tuple[int, int]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) for v in value)
    ):
        raise ScenarioError(f"{where} must be a [col, row] integer pair")
    return (value[0], value[1])


def _detector(data: Mapping[str, Any], where: str) -> DetectorParams:
    try:
        return DetectorParams(
            tp=float(_require(data, "tp", where)),
            fp=float(_require(data, "fp", where)),
            r=float(_require(data, "r", where)),
            sigma=float(data.get("sigma", 0.5)),
        )
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _correlation(data: Mapping[str, Any], where: str) -> CorrelationSpec:
    rel_name = str(_require(data, "relation", where)).lower()
    try:
        rel = Relation(rel_name)
    except ValueError:
        raise ScenarioError(
            f"{where}: relation must be 'close' or 'far', got '{rel_name}'"
        ) from None
    ablation = str(data.get("ablation", "accurate")).lower()
    if ablation not in ("accurate", "wrong"):
        raise ScenarioError(f"{where}: ablation must be 'accurate' or 'wrong'")
    try:
        spec = CorrelationSpec(rel, float(_require(data, "d", where)))
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    return spec.flipped() if ablation == "wrong" else spec


def scenario_from_json(data: Mapping[str, Any], name: str = "") -> ScenarioSpec:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema_version {version!r}")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    map_data = _require(data, "map", "scenario")
    grid = GridMap(
        width=int(_require(map_data, "width", "map")),
        height=int(_require(map_data, "height", "map")),
        obstacles=frozenset(
            _cell(c, "map.obstacles entry") for c in map_data.get("obstacles", ())
        ),
        cell_size=float(map_data.get("cell_size", 0.25)),
    )
    pose_data = _require(data, "init_pose", "scenario")
    init_pose = Pose(
        _cell(_require(pose_data, "cell", "init_pose"), "init_pose.cell"),
        int(_require(pose_data, "heading", "init_pose")),
    )
    target = _require(data, "target", "scenario")
    objects = []
    for i, obj in enumerate(data.get("objects", ())):
        where = f"objects[{i}]"
        objects.append(
            CorrelatedObject(
                name=str(_require(obj, "name", where)),
                cell=_cell(_require(obj, "cell", where), f"{where}.cell"),
                detector=_detector(_require(obj, "detector", where), f"{where}.detector"),
                correlation=_correlation(
                    _require(obj, "correlation", where), f"{where}.correlation"
                ),
            )
        )
    spec = ScenarioSpec(
        grid=grid,
        target_name=str(_require(target, "name", "target")),
        target_cell=_cell(_require(target, "cell", "target"), "target.cell"),
        target_detector=_detector(
            _require(target, "detector", "target"), "target.detector"
        ),
        correlated_objects=tuple(objects),
        init_pose=init_pose,
        max_steps=int(data.get("max_steps", 100)),
        success_distance=float(data.get("success_distance", 1.0)),
        name=str(data.get("name", name or "scenario")),
        config=dict(data.get("config", {})),
    )
    return spec.validate()


def scenario_to_json(spec: ScenarioSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": spec.name,
        "map": {
            "width": spec.grid.width,
            "height": spec.grid.height,
            "cell_size": spec.grid.cell_size,
            "obstacles": sorted(list(c) for c in spec.grid.obstacles),
        },
        "init_pose": {
            "cell": list(spec.init_pose.cell),
            "heading": spec.init_pose.heading,
        },
        "max_steps": spec.max_steps,
        "success_distance": spec.success_distance,
        "target": {
            "name": spec.target_name,
            "cell": list(spec.target_cell),
            "detector": _detector_json(spec.target_detector),
        },
        "objects": [
            {
                "name": o.name,
                "cell": list(o.cell),
                "detector": _detector_json(o.detector),
                "correlation": {
                    "relation": o.correlation.relation.value,
                    "d": o.correlation.d,
                    "ablation": "accurate",
                },
            }
            for o in spec.correlated_objects
        ],
        "config": dict(spec.config),
    }


def _detector_json(d: DetectorParams) -> dict:
    return {"tp": d.tp, "fp": d.fp, "r": d.r, "sigma": d.sigma}


def load_scenario(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_json(data, name=path.stem)


def save_scenario(spec: ScenarioSpec, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_json(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
