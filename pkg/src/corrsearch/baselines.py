"""Comparison agents: uniform-random, target-only hierarchical search, and a
greedy next-best-view planner over a joint particle belief."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import JointObservation
from .gridworld import (
    Action,
    ALL_ACTIONS,
    Cell,
    GridMap,
    Pose,
    bfs_steps,
    heading_toward,
    rotate_toward,
    success_check,
)
from .hierarchy import HierAgent, HierParams, SubgoalInfeasible, astar_action, sample_topo_graph
from .scenario import ScenarioSpec
from .sensing import correlation_model, detection_model

logger = logging.getLogger(__name__)


def random_step(rng: np.random.Generator) -> Action:
    """Uniform draw over the four actions (three moves plus Done)."""
    return ALL_ACTIONS[int(rng.integers(len(ALL_ACTIONS)))]


class RandomAgent:
    def __init__(self, scenario: ScenarioSpec, rng: np.random.Generator):
        self.rng = rng

    def step(self, z_prev: Optional[JointObservation]) -> Action:
        return random_step(self.rng)


class TargetPomdpAgent(HierAgent):
    """The hierarchical agent run blind to every landmark: it plans on the
    scenario with the correlated-object list emptied and strips landmark
    detections out of each observation before they reach the filter."""

    def __init__(
        self,
        scenario: ScenarioSpec,
        rng: np.random.Generator,
        params: Optional[HierParams] = None,
    ):
        super().__init__(scenario.without_correlated_objects(), rng, params)

    def observation_filter(self, z: JointObservation) -> JointObservation:
        return JointObservation(z.robot_pose, z.detections[:1])


def target_pomdp_agent(
    scenario: ScenarioSpec,
    rng: np.random.Generator,
    params: Optional[HierParams] = None,
) -> TargetPomdpAgent:
    return TargetPomdpAgent(scenario, rng, params)


# ---------------------------------------------------------------------------
# Greedy next-best-view


@dataclass(frozen=True)
class NbvParams:
    n_particles: int = 1000
    lam: float = 0.05          # travel penalty per meter of path
    reinvig_frac: float = 0.05
    ess_frac: float = 0.5
    views: HierParams = HierParams()  # candidate viewpoint sampling

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise ValueError("n_particles must be positive")
        if not 0.0 <= self.reinvig_frac <= 1.0:
            raise ValueError("reinvig_frac must be in [0, 1]")


@dataclass(eq=False)
class ParticleBelief:
    """Weighted particles over the joint (target, landmark_1..k) cell tuple,
    stored as index arrays into ``grid.free_cells``."""

    grid: GridMap
    target_idx: np.ndarray   # (N,)
    object_idx: np.ndarray   # (k, N)
    weights: np.ndarray      # (N,) normalized

    @property
    def count(self) -> int:
        return len(self.target_idx)

    def particles(self):
        """Iterate (target_cell, landmark cells tuple, weight)."""
        free = self.grid.free_cells
        for j in range(self.count):
            cells = tuple(free[i] for i in self.object_idx[:, j])
            yield free[self.target_idx[j]], cells, float(self.weights[j])

    def target_marginal(self) -> np.ndarray:
        n = len(self.grid.free_cells)
        return np.bincount(self.target_idx, weights=self.weights, minlength=n)

    def modal_target(self) -> Cell:
        return self.grid.free_cells[int(np.argmax(self.target_marginal()))]


def _sample_from_conditional(cum_rows: np.ndarray, given_idx: np.ndarray,
                             rng: np.random.Generator) -> np.ndarray:
    rows = cum_rows[given_idx]
    u = rng.random(len(given_idx))
    idx = (rows <= u[:, None]).sum(axis=1)
    return np.minimum(idx, cum_rows.shape[1] - 1)


def init_particle_belief(
    scenario: ScenarioSpec, n_particles: int, rng: np.random.Generator
) -> ParticleBelief:
    """Targets uniform over free cells; each landmark drawn from its
    correlation conditional given the particle's target."""
    grid = scenario.grid
    n = len(grid.free_cells)
    target_idx = rng.integers(n, size=n_particles)
    rows = []
    for obj in scenario.correlated_objects:
        cum = correlation_model(grid, obj.correlation)._cum
        rows.append(_sample_from_conditional(cum, target_idx, rng))
    object_idx = (
        np.stack(rows) if rows else np.zeros((0, n_particles), dtype=int)
    )
    weights = np.full(n_particles, 1.0 / n_particles)
    return ParticleBelief(grid, target_idx, object_idx, weights)


def update_particle_belief(
    pb: ParticleBelief,
    z: JointObservation,
    scenario: ScenarioSpec,
    params: NbvParams,
    rng: np.random.Generator,
) -> ParticleBelief:
    """Reweight by the product of per-class detection likelihoods, then
    systematically resample (plus a sliver of fresh uniform particles) when
    the effective sample size drops below ``ess_frac * N``."""
    grid = scenario.grid
    robot = z.robot_pose
    w = pb.weights.copy()
    vec = detection_model(grid, scenario.target_detector).likelihood_over_x(
        z.detections[0].value, robot
    )
    w *= vec[pb.target_idx]
    for j, (obj, det) in enumerate(zip(scenario.correlated_objects, z.detections[1:])):
        vec = detection_model(grid, obj.detector).likelihood_over_x(det.value, robot)
        w *= vec[pb.object_idx[j]]
    total = w.sum()
    if total <= 0.0:
        logger.warning("particle depletion: reinitializing belief uniformly")
        return init_particle_belief(scenario, pb.count, rng)
    w /= total
    ess = 1.0 / float((w * w).sum())
    n = pb.count
    if ess >= params.ess_frac * n:
        return ParticleBelief(grid, pb.target_idx, pb.object_idx, w)
    # systematic resampling
    positions = (np.arange(n) + rng.random()) / n
    idx = np.searchsorted(np.cumsum(w), positions, side="right")
    idx = np.minimum(idx, n - 1)
    target_idx = pb.target_idx[idx]
    object_idx = pb.object_idx[:, idx]
    n_fresh = int(round(params.reinvig_frac * n))
    if n_fresh > 0:
        fresh = init_particle_belief(scenario, n_fresh, rng)
        slots = rng.permutation(n)[:n_fresh]
        target_idx = target_idx.copy()
        object_idx = object_idx.copy()
        target_idx[slots] = fresh.target_idx
        if object_idx.shape[0]:
            object_idx[:, slots] = fresh.object_idx
    return ParticleBelief(grid, target_idx, object_idx, np.full(n, 1.0 / n))


def p_detect_any(pb: ParticleBelief, pose: Pose, scenario: ScenarioSpec) -> float:
    """Particle-averaged probability that at least one detector fires (any
    non-null detection) from ``pose``."""
    grid = scenario.grid
    nulls = detection_model(grid, scenario.target_detector).likelihood_over_x(
        None, pose
    )
    prod = nulls[pb.target_idx]
    for j, obj in enumerate(scenario.correlated_objects):
        nulls = detection_model(grid, obj.detector).likelihood_over_x(None, pose)
        prod = prod * nulls[pb.object_idx[j]]
    return float(1.0 - pb.weights @ prod)


def select_view(
    pb: ParticleBelief,
    pose: Pose,
    scenario: ScenarioSpec,
    params: NbvParams,
    rng: np.random.Generator,
    skip: Optional[Cell] = None,
) -> Optional[Pose]:
    """Best viewpoint under U(v) = P(detect anything from v) - lam * travel
    meters, over a fresh topo-graph node set.  Each candidate is oriented
    toward the modal target cell.  ``skip`` drops one cell from the
    candidates (the view just completed, so the agent moves on instead of
    re-picking it).  None when no candidate is reachable."""
    grid = scenario.grid
    modal = pb.modal_target()
    topo = sample_topo_graph(grid, pb.target_marginal(), params.views, rng)
    dists = bfs_steps(grid, pose.cell)
    best = None
    best_u = -np.inf
    for cell in topo.nodes:
        if cell == skip:
            continue
        steps = dists.get(cell)
        if steps is None:
            continue
        view_pose = Pose(cell, heading_toward(cell, modal))
        u = p_detect_any(pb, view_pose, scenario) - (
            params.lam * steps * grid.cell_size
        )
        if u > best_u:
            best_u = u
            best = view_pose
    return best


def greedy_nbv_step(
    pb: ParticleBelief,
    pose: Pose,
    z_prev: Optional[JointObservation],
    scenario: ScenarioSpec,
    params: NbvParams,
    rng: np.random.Generator,
):
    """One stateless decision: filter the belief with the latest observation,
    pick the best view, and emit the next primitive toward it.  Returns the
    (belief, action) pair."""
    if z_prev is not None:
        pose = z_prev.robot_pose
        pb = update_particle_belief(pb, z_prev, scenario, params, rng)
    if success_check(scenario.grid, pose, pb.modal_target(),
                     scenario.success_distance):
        return pb, Action.DONE
    view = select_view(pb, pose, scenario, params, rng)
    if view is None:
        return pb, Action.ROTATE_LEFT
    try:
        action = astar_action(view.cell, pose, scenario.grid)
    except SubgoalInfeasible:
        return pb, Action.ROTATE_LEFT
    if action is None:
        if pose.heading == view.heading:
            return pb, Action.ROTATE_LEFT  # completed view; scan in place
        return pb, rotate_toward(pose.heading, view.heading)
    return pb, action


class GreedyNbvAgent:
    """Myopic baseline: keep a joint particle belief, commit to the best
    viewpoint under detection-probability-minus-travel-cost, walk there with
    A*, turn to face the believed target, then pick the next view; declare
    Done whenever the modal target cell already satisfies the success
    condition from the current pose."""

    def __init__(
        self,
        scenario: ScenarioSpec,
        rng: np.random.Generator,
        params: Optional[NbvParams] = None,
    ):
        self.scenario = scenario
        self.params = params if params is not None else NbvParams()
        self.rng = rng
        self.pb = init_particle_belief(scenario, self.params.n_particles, rng)
        self.pose = scenario.init_pose
        self.view: Optional[Pose] = None
        self.done_cell: Optional[Cell] = None

    def step(self, z_prev: Optional[JointObservation]) -> Action:
        scenario = self.scenario
        grid = scenario.grid
        if z_prev is not None:
            self.pose = z_prev.robot_pose
            self.pb = update_particle_belief(
                self.pb, z_prev, scenario, self.params, self.rng
            )
        if success_check(grid, self.pose, self.pb.modal_target(),
                         scenario.success_distance):
            return Action.DONE
        if self.view is not None and self.view == self.pose:
            # Completed; remember the cell so the next pick moves elsewhere.
            self.done_cell = self.view.cell
            self.view = None
        if self.view is None:
            self.view = select_view(
                self.pb, self.pose, scenario, self.params, self.rng,
                skip=self.done_cell,
            )
            if self.view is None:
                return Action.ROTATE_LEFT
        try:
            action = astar_action(self.view.cell, self.pose, grid)
        except SubgoalInfeasible:
            self.view = None
            return Action.ROTATE_LEFT
        if action is None:
            if self.pose.heading == self.view.heading:
                self.done_cell = self.view.cell
                self.view = None
                return Action.ROTATE_LEFT
            return rotate_toward(self.pose.heading, self.view.heading)
        return action
