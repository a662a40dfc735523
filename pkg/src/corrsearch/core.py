"""The object-search POMDP over (robot pose, target cell), its exact belief
filter, and a dense joint-state variant used as a validation oracle.

The planning state tracks only the target; correlated landmarks enter through
the observation model, where each landmark's detection likelihood is
marginalized over the locations its correlation predicate allows.  The dense
variant keeps every landmark location in the state and updates a joint
belief tensor with detection models alone; its target marginal must agree
with the reduced filter after one step from a matched prior.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .gridworld import (
    Action,
    Cell,
    GridMap,
    MOVE_ACTIONS,
    Pose,
    apply_move,
    euclidean_cells,
    success_check,
    visible_cells,
)
from .scenario import ScenarioSpec
from .sensing import (
    Detection,
    correlation_model,
    correlational_likelihood,
    correlational_likelihood_over_targets,
    detection_likelihood,
    detection_model,
)

logger = logging.getLogger(__name__)

DENSE_JOINT_CAP = 10**6


class CosState(NamedTuple):
    robot: Pose
    target: Cell


class JointObservation(NamedTuple):
    """One per-step observation: exact robot pose plus one detection per
    object class, target class first."""

    robot_pose: Pose
    detections: tuple[Detection, ...]


@dataclass(frozen=True, eq=False)
class CosBelief:
    """Known robot pose plus a categorical over target cells, aligned with
    ``grid.free_cells``."""

    robot: Pose
    grid: GridMap
    probs: np.ndarray

    def __post_init__(self) -> None:
        self.probs.setflags(write=False)

    def prob(self, cell: Cell) -> float:
        return float(self.probs[self.grid.free_index[cell]])

    def sample_target(self, rng: np.random.Generator) -> Cell:
        idx = int(np.searchsorted(np.cumsum(self.probs), rng.random(), side="right"))
        return self.grid.free_cells[min(idx, len(self.probs) - 1)]

    def modal_target(self) -> Cell:
        return self.grid.free_cells[int(np.argmax(self.probs))]

    def to_json(self) -> dict:
        return {
            "robot": {"cell": list(self.robot.cell), "heading": self.robot.heading},
            "target_dist": {
                f"{c[0]},{c[1]}": float(p)
                for c, p in zip(self.grid.free_cells, self.probs)
            },
        }


def uniform_belief(scenario: ScenarioSpec, robot: Optional[Pose] = None) -> CosBelief:
    n = len(scenario.grid.free_cells)
    return CosBelief(
        robot if robot is not None else scenario.init_pose,
        scenario.grid,
        np.full(n, 1.0 / n),
    )


def joint_observation_likelihood(
    z: JointObservation, s: CosState, scenario: ScenarioSpec
) -> float:
    """Probability of the full observation given (robot, target): the
    target's detection likelihood times one correlational factor per
    landmark class."""
    grid = scenario.grid
    p = detection_likelihood(
        z.detections[0], s.target, s.robot, scenario.target_detector, grid
    )
    for obj, det in zip(scenario.correlated_objects, z.detections[1:]):
        p *= correlational_likelihood(
            det, s.target, s.robot, obj.detector, obj.correlation, grid
        )
    return p


def joint_likelihood_over_targets(
    z: JointObservation, robot: Pose, scenario: ScenarioSpec
) -> np.ndarray:
    """Vectorized ``joint_observation_likelihood`` over every target cell."""
    grid = scenario.grid
    vec = detection_model(grid, scenario.target_detector).likelihood_over_x(
        z.detections[0].value, robot
    )
    for obj, det in zip(scenario.correlated_objects, z.detections[1:]):
        vec = vec * correlational_likelihood_over_targets(
            det, robot, obj.detector, obj.correlation, grid
        )
    return vec


def belief_update(
    b: CosBelief, a: Action, z: JointObservation, scenario: ScenarioSpec
) -> CosBelief:
    """Exact Bayes filter step.  The target is static and the pose reading
    is noiseless, so the posterior reweights target cells by the joint
    observation likelihood at the observed pose."""
    robot = z.robot_pose
    weights = b.probs * joint_likelihood_over_targets(z, robot, scenario)
    total = float(weights.sum())
    if total <= 0.0:
        logger.warning(
            "observation impossible under the model (action %s); belief reset "
            "to uniform",
            a,
        )
        n = len(weights)
        return CosBelief(robot, b.grid, np.full(n, 1.0 / n))
    return CosBelief(robot, b.grid, weights / total)


def reward(s: CosState, a: Action, scenario: ScenarioSpec) -> float:
    if a is Action.DONE:
        ok = success_check(
            scenario.grid, s.robot, s.target, scenario.success_distance
        )
        return 100.0 if ok else -100.0
    return -1.0


# ---------------------------------------------------------------------------
# Dense joint-state oracle


@dataclass(frozen=True, eq=False)
class FBelief:
    """Dense categorical over (target, landmark_1, ..., landmark_k) cell
    tuples; axis order matches ``scenario.object_names``."""

    grid: GridMap
    joint: np.ndarray

    def __post_init__(self) -> None:
        self.joint.setflags(write=False)


def fpomdp_init(
    scenario: ScenarioSpec, target_prior: Optional[np.ndarray] = None
) -> FBelief:
    """Joint prior: target prior (uniform unless given) times each
    landmark's correlation conditional given the target cell."""
    grid = scenario.grid
    n = len(grid.free_cells)
    k = len(scenario.correlated_objects)
    if n ** (k + 1) > DENSE_JOINT_CAP:
        raise ValueError(
            f"dense joint of {n}^{k + 1} entries exceeds cap {DENSE_JOINT_CAP}"
        )
    if target_prior is None:
        target_prior = np.full(n, 1.0 / n)
    joint = np.asarray(target_prior, dtype=float).copy()
    for j, obj in enumerate(scenario.correlated_objects):
        cond = correlation_model(grid, obj.correlation).cond
        joint = joint[..., None] * cond.reshape((n,) + (1,) * j + (n,))
    return FBelief(grid, joint)


def fpomdp_update(
    fb: FBelief, a: Action, z: JointObservation, scenario: ScenarioSpec
) -> FBelief:
    """Bayes step on the joint: every object (target included) contributes
    its own detection likelihood at its own cell; no correlational factor."""
    grid = scenario.grid
    n = len(grid.free_cells)
    robot = z.robot_pose
    k = len(scenario.correlated_objects)
    weights = fb.joint.copy()
    vec = detection_model(grid, scenario.target_detector).likelihood_over_x(
        z.detections[0].value, robot
    )
    weights *= vec.reshape((n,) + (1,) * k)
    for j, (obj, det) in enumerate(
        zip(scenario.correlated_objects, z.detections[1:])
    ):
        vec = detection_model(grid, obj.detector).likelihood_over_x(det.value, robot)
        weights *= vec.reshape((1,) * (j + 1) + (n,) + (1,) * (k - j - 1))
    total = float(weights.sum())
    if total <= 0.0:
        logger.warning("joint posterior vanished; reset to uniform")
        weights = np.full(weights.shape, 1.0 / weights.size)
        return FBelief(grid, weights)
    return FBelief(grid, weights / total)


def marginal_target(fb: FBelief) -> np.ndarray:
    if fb.joint.ndim == 1:
        return fb.joint.copy()
    return fb.joint.sum(axis=tuple(range(1, fb.joint.ndim)))


# ---------------------------------------------------------------------------
# Generative model used by the tree-search planner


def sample_observation(
    state: CosState, scenario: ScenarioSpec, rng: np.random.Generator
) -> JointObservation:
    """Draw an observation the way the agent's own model defines it: each
    landmark's cell is drawn from its correlation conditional given the
    target, then every detector fires from the robot's pose."""
    grid = scenario.grid
    dets = [
        Detection(
            scenario.target_name,
            detection_model(grid, scenario.target_detector).sample(
                state.target, state.robot, rng
            ),
        )
    ]
    for obj in scenario.correlated_objects:
        x_i = correlation_model(grid, obj.correlation).sample_given(state.target, rng)
        dets.append(
            Detection(
                obj.name,
                detection_model(grid, obj.detector).sample(x_i, state.robot, rng),
            )
        )
    return JointObservation(state.robot, tuple(dets))


class CosModel:
    """Black-box simulator over CosState for the tree-search planner."""

    def __init__(self, scenario: ScenarioSpec):
        self.scenario = scenario
        self.grid = scenario.grid

    def actions(self, state: CosState) -> tuple[Action, ...]:
        # Put Done first when the sampled state would succeed right now, so
        # the untried-first expansion rule surfaces the +100 terminal value on
        # a node's earliest visits instead of after every move arm.
        if success_check(self.grid, state.robot, state.target,
                         self.scenario.success_distance):
            return (Action.DONE,) + MOVE_ACTIONS
        return MOVE_ACTIONS + (Action.DONE,)

    def sample_state(self, belief: CosBelief, rng: np.random.Generator) -> CosState:
        return CosState(belief.robot, belief.sample_target(rng))

    def step(self, state: CosState, action: Action, rng: np.random.Generator):
        if action is Action.DONE:
            return state, None, reward(state, action, self.scenario), True
        nxt = CosState(apply_move(self.grid, state.robot, action), state.target)
        z = sample_observation(nxt, self.scenario, rng)
        return nxt, z, -1.0, False

    def rollout_actions(
        self, state: CosState, rng: np.random.Generator
    ) -> tuple[Action, ...]:
        """Move actions that strictly reduce the distance to the target cell,
        plus moves after which some object cell (target, or a landmark placed
        by the correlation conditional) is in view.  All moves if empty."""
        grid = self.grid
        cells = [state.target]
        for obj in self.scenario.correlated_objects:
            cells.append(
                correlation_model(grid, obj.correlation).sample_given(
                    state.target, rng
                )
            )
        base = euclidean_cells(state.robot.cell, state.target)
        out = []
        for act in MOVE_ACTIONS:
            nxt = apply_move(grid, state.robot, act)
            if (
                nxt.cell != state.robot.cell
                and euclidean_cells(nxt.cell, state.target) < base
            ):
                out.append(act)
                continue
            vis = visible_cells(grid, nxt)
            if any(c in vis for c in cells):
                out.append(act)
        return tuple(out) if out else MOVE_ACTIONS
