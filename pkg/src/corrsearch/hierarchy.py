"""Hierarchical online planning: belief-driven topological graphs, a
subgoal-level POMDP, A* navigation, and local tree search sharing one belief.

The agent alternates between two planning levels every step.  The high level
plans over a sparse graph of places sampled in proportion to the current
target belief; its actions are NavigateTo(place), SearchLocal and Done.  A
chosen NavigateTo subgoal is executed one primitive at a time by A*; a
SearchLocal subgoal hands control to a low-level tree search over primitive
moves.  Both levels read the same exact belief, which is refreshed from the
latest observation before anything is planned.
"""

from __future__ import annotations

import enum
import heapq
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import pouct
from .core import (
    CosBelief,
    CosModel,
    CosState,
    JointObservation,
    belief_update,
    reward,
    sample_observation,
    uniform_belief,
)
from .gridworld import (
    Action,
    Cell,
    GridMap,
    MOVE_ACTIONS,
    Pose,
    apply_move,
    bfs_steps,
    euclidean_m,
    heading_toward,
    rotate_toward,
    success_check,
)
from .pouct import PlannerParams
from .scenario import ScenarioSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HierParams:
    m: int = 10
    d_sep: float = 1.0
    deg_min: int = 3
    deg_max: int = 5
    resample_threshold: float = 0.5
    high_level_planner: PlannerParams = PlannerParams(num_sims=200, max_depth=6)
    low_level_planner: PlannerParams = PlannerParams(num_sims=150, max_depth=10)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not 0.0 < self.resample_threshold <= 1.0:
            raise ValueError("resample_threshold must be in (0, 1]")
        if self.deg_min > self.deg_max:
            raise ValueError("deg_min must not exceed deg_max")


@dataclass(frozen=True, eq=False)
class TopoGraph:
    """Sparse graph of places (free cells).  Edges carry shortest-path
    traversal costs in meters.  ``node_mass`` is the belief mass each node
    captured when the graph was sampled; ``degree_clamped`` records that the
    degree bounds could not be met (too few nodes, or the cap bound)."""

    nodes: tuple[Cell, ...]
    edges: frozenset[tuple[int, int]]
    edge_costs: Mapping[tuple[int, int], float]
    node_mass: tuple[float, ...]
    capture_radius: float
    degree_clamped: bool

    def degree(self, i: int) -> int:
        return sum(1 for e in self.edges if i in e)

    def neighbors(self, i: int) -> tuple[int, ...]:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return tuple(sorted(out))

    def is_connected(self) -> bool:
        if len(self.nodes) <= 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            for j in self.neighbors(stack.pop()):
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == len(self.nodes)


def node_masses(grid: GridMap, nodes: tuple[Cell, ...], probs: np.ndarray,
                radius: float) -> np.ndarray:
    """Belief mass captured per node: every free cell within ``radius``
    meters of some node contributes to its nearest node (lowest index on
    ties)."""
    free = np.asarray(grid.free_cells, dtype=float) * grid.cell_size
    pts = np.asarray(nodes, dtype=float) * grid.cell_size
    diff = free[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    nearest = dist.argmin(axis=1)
    within = dist[np.arange(len(free)), nearest] <= radius
    out = np.zeros(len(nodes))
    np.add.at(out, nearest[within], probs[within])
    return out


def captured_mass(grid: GridMap, topo: TopoGraph, probs: np.ndarray) -> float:
    """Fraction of the belief lying within the capture radius of any node."""
    return float(node_masses(grid, topo.nodes, probs, topo.capture_radius).sum())


def sample_topo_graph(
    grid: GridMap,
    b_target: np.ndarray,
    params: HierParams,
    rng: np.random.Generator,
) -> TopoGraph:
    """Sample up to ``m`` places in proportion to the target belief (each
    free cell votes for its nearest reachable cell, which on this grid is
    itself), rejecting candidates closer than ``d_sep`` to an accepted one;
    a farthest-point sweep tops up when rejection runs dry.  Places are
    connected by a cost-minimal spanning set and then augmented toward the
    degree window."""
    free = grid.free_cells
    n = len(free)
    p = np.asarray(b_target, dtype=float)
    total = p.sum()
    if total <= 0 or not np.isfinite(total):
        raise ValueError("belief must have positive finite mass")
    p = p / total
    cum = np.cumsum(p)
    xy = np.asarray(free, dtype=float) * grid.cell_size

    accepted: list[int] = []
    proposals = 0
    limit = 50 * params.m
    while len(accepted) < params.m and proposals < limit:
        proposals += 1
        i = min(int(np.searchsorted(cum, rng.random(), side="right")), n - 1)
        d = np.sqrt(((xy[accepted] - xy[i]) ** 2).sum(axis=1)) if accepted else None
        if d is None or (d >= params.d_sep).all():
            accepted.append(i)
    while len(accepted) < params.m:
        d = np.sqrt(((xy[:, None, :] - xy[accepted][None, :, :]) ** 2).sum(axis=-1))
        mind = d.min(axis=1)
        mind[accepted] = -1.0
        best = int(np.argmax(mind))
        if mind[best] < params.d_sep:
            break
        accepted.append(best)

    nodes = tuple(free[i] for i in accepted)
    k = len(nodes)

    # pairwise traversal costs (shortest-path steps, in meters)
    costs: dict[tuple[int, int], float] = {}
    for i in range(k):
        dist_i = bfs_steps(grid, nodes[i])
        for j in range(i + 1, k):
            steps = dist_i.get(nodes[j])
            if steps is None:
                raise ValueError("free space is disconnected; cannot link places")
            costs[(i, j)] = steps * grid.cell_size

    order = sorted(costs, key=lambda e: (costs[e], e))
    parent = list(range(k))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    deg = [0] * k
    edges: set[tuple[int, int]] = set()
    clamped = False
    for i, j in order:
        if find(i) != find(j) and deg[i] < params.deg_max and deg[j] < params.deg_max:
            parent[find(i)] = find(j)
            deg[i] += 1
            deg[j] += 1
            edges.add((i, j))
    for i, j in order:
        if find(i) != find(j):
            # spanning under the degree cap failed; connectivity wins
            parent[find(i)] = find(j)
            deg[i] += 1
            deg[j] += 1
            edges.add((i, j))
            clamped = True

    want = min(params.deg_min, k - 1)
    if k - 1 < params.deg_min:
        clamped = True
    for i in range(k):
        if deg[i] >= want:
            continue
        for a, b in order:
            if deg[i] >= want:
                break
            if i not in (a, b) or (a, b) in edges:
                continue
            other = b if a == i else a
            if deg[other] >= params.deg_max:
                continue
            edges.add((a, b))
            deg[a] += 1
            deg[b] += 1
        if deg[i] < want:
            clamped = True

    # Capture counts mass only within half the separation radius: once the
    # belief outgrows that shell around every node the graph is re-centered,
    # which is what lets navigation targets track a concentrating belief.
    radius = 0.5 * params.d_sep
    masses = node_masses(grid, nodes, p, radius)
    return TopoGraph(
        nodes=nodes,
        edges=frozenset(edges),
        edge_costs=costs,
        node_mass=tuple(float(x) for x in masses),
        capture_radius=radius,
        degree_clamped=clamped,
    )


# ---------------------------------------------------------------------------
# Subgoals and the high-level model


class SubgoalKind(enum.Enum):
    NAVIGATE = "navigate"
    SEARCH_LOCAL = "search_local"
    DONE = "done"


@dataclass(frozen=True)
class Subgoal:
    kind: SubgoalKind
    node: Optional[int] = None
    node_cell: Optional[Cell] = None

    @staticmethod
    def navigate(node: int, cell: Cell) -> "Subgoal":
        return Subgoal(SubgoalKind.NAVIGATE, node, cell)

    def label(self) -> str:
        if self.kind is SubgoalKind.NAVIGATE:
            return f"navigate:{self.node}:{self.node_cell[0]},{self.node_cell[1]}"
        return self.kind.value


SEARCH_LOCAL = Subgoal(SubgoalKind.SEARCH_LOCAL)
DONE_SUBGOAL = Subgoal(SubgoalKind.DONE)


class HighLevelModel:
    """Generative model over subgoals.  NavigateTo(v) teleports the robot to
    v oriented toward the (sampled) target, at a reward of minus the
    shortest-path step count, with one observation drawn at the destination;
    SearchLocal turns in place toward the sampled target and draws one
    observation at cost -1.  Done terminates with the usual +/-100.
    Traversal is bundled into one discounted macro step, so long moves are
    slightly cheap; the same approximation applies to every subgoal
    candidate."""

    def __init__(self, scenario: ScenarioSpec, topo: TopoGraph):
        self.scenario = scenario
        self.grid = scenario.grid
        self.topo = topo
        self._nav = tuple(
            Subgoal.navigate(i, c) for i, c in enumerate(topo.nodes)
        )
        # costs can reach -(free cell count); keep the planner's Q guard wide
        self.q_bounds = (-100.0 * len(self.grid.free_cells), 100.0)

    def actions(self, state: CosState) -> tuple[Subgoal, ...]:
        here = state.robot.cell
        nav = tuple(sg for sg in self._nav if sg.node_cell != here)
        # Done leads when the sampled state succeeds in place so that newly
        # expanded nodes report the terminal value on their first arm trial;
        # otherwise it trails the informative arms.
        if success_check(self.grid, state.robot, state.target,
                         self.scenario.success_distance):
            return (DONE_SUBGOAL, SEARCH_LOCAL) + nav
        return (SEARCH_LOCAL,) + nav + (DONE_SUBGOAL,)

    def sample_state(self, belief: CosBelief, rng: np.random.Generator) -> CosState:
        return CosState(belief.robot, belief.sample_target(rng))

    def step(self, state: CosState, sg: Subgoal, rng: np.random.Generator):
        if sg.kind is SubgoalKind.DONE:
            return state, None, reward(state, Action.DONE, self.scenario), True
        if sg.kind is SubgoalKind.NAVIGATE:
            steps = bfs_steps(self.grid, state.robot.cell).get(sg.node_cell)
            if steps is None:
                return state, None, -100.0, True
            pose = Pose(sg.node_cell, heading_toward(sg.node_cell, state.target))
            nxt = CosState(pose, state.target)
            z = sample_observation(nxt, self.scenario, rng)
            return nxt, z, -float(steps), False
        # SearchLocal keeps the place but spends its step looking where the
        # target plausibly is, so the drawn observation is an informed one
        pose = Pose(state.robot.cell,
                    heading_toward(state.robot.cell, state.target))
        nxt = CosState(pose, state.target)
        z = sample_observation(nxt, self.scenario, rng)
        return nxt, z, -1.0, False

    def rollout_actions(self, state: CosState, rng: np.random.Generator):
        # Head for the place nearest the sampled target and stop there.  This
        # prices continuation like the primitive-level rollout does (walk in,
        # then declare), so stopping early only wins once the mass around the
        # robot genuinely supports it.
        if success_check(self.grid, state.robot, state.target,
                         self.scenario.success_distance):
            return (DONE_SUBGOAL,)
        if not self._nav:
            return (SEARCH_LOCAL,)
        nearest = min(
            self._nav,
            key=lambda sg: euclidean_m(self.grid, sg.node_cell, state.target),
        )
        return (nearest,)


def high_level_plan(
    topo: TopoGraph,
    belief: CosBelief,
    scenario: ScenarioSpec,
    params: HierParams,
    rng: np.random.Generator,
) -> Subgoal:
    model = HighLevelModel(scenario, topo)
    return pouct.plan(belief, model, params.high_level_planner, rng)


# ---------------------------------------------------------------------------
# A* over (cell, heading) with unit action costs


class SubgoalInfeasible(Exception):
    """The navigation destination cannot be reached from the current pose."""


def _chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def astar_action(destination, pose: Pose, grid: GridMap) -> Optional[Action]:
    """First primitive of a minimal-cost action sequence (rotations cost one
    step, like moves) from ``pose`` to the destination cell.  Returns None
    when already there; raises SubgoalInfeasible when unreachable.  The
    Chebyshev cell distance is the heuristic: one move gains at most one
    Chebyshev step and rotations gain none, so it never overestimates."""
    dest = destination.node_cell if isinstance(destination, Subgoal) else destination
    if pose.cell == dest:
        return None
    counter = 0
    start = (pose.cell, pose.heading)
    frontier = [(_chebyshev(pose.cell, dest), 0, counter, start, None)]
    best = {start: 0}
    while frontier:
        _, g, _, cur, first = heapq.heappop(frontier)
        if g > best.get(cur, -1):
            continue
        cell, heading = cur
        if cell == dest:
            return first
        for act in MOVE_ACTIONS:
            npose = apply_move(grid, Pose(cell, heading), act)
            nxt = (npose.cell, npose.heading)
            if nxt == cur:
                continue
            ng = g + 1
            if ng < best.get(nxt, math.inf):
                best[nxt] = ng
                counter += 1
                heapq.heappush(
                    frontier,
                    (ng + _chebyshev(nxt[0], dest), ng, counter, nxt,
                     first if first is not None else act),
                )
    raise SubgoalInfeasible(f"no path from {pose.cell} to {dest}")


# ---------------------------------------------------------------------------
# The full hierarchical agent


class HierAgent:
    """Online agent: update belief, resample the place graph when it no
    longer covers the belief, plan a subgoal, then act on it."""

    def __init__(
        self,
        scenario: ScenarioSpec,
        rng: np.random.Generator,
        params: Optional[HierParams] = None,
    ):
        self.scenario = scenario
        self.params = params if params is not None else HierParams()
        self.rng = rng
        self.belief = uniform_belief(scenario)
        self.low_model = CosModel(scenario)
        self.topo = sample_topo_graph(
            scenario.grid, self.belief.probs, self.params, rng
        )
        self.subgoal: Optional[Subgoal] = None
        self.prev_action: Optional[Action] = None
        self.resamples = 0

    def observation_filter(self, z: JointObservation) -> JointObservation:
        """Hook for agents that consume a restricted view of the world."""
        return z

    def step(self, z_prev: Optional[JointObservation]) -> Action:
        if z_prev is not None:
            z_prev = self.observation_filter(z_prev)
            if self.prev_action is not None:
                self.belief = belief_update(
                    self.belief, self.prev_action, z_prev, self.scenario
                )
        grid = self.scenario.grid
        if captured_mass(grid, self.topo, self.belief.probs) < self.params.resample_threshold:
            self.topo = sample_topo_graph(
                grid, self.belief.probs, self.params, self.rng
            )
            self.resamples += 1
        sg = high_level_plan(
            self.topo, self.belief, self.scenario, self.params, self.rng
        )
        # the low-level search is rebuilt from scratch every step, so a
        # subgoal change needs no extra teardown; we still track it for traces
        self.subgoal = sg
        if sg.kind is SubgoalKind.DONE:
            action: Optional[Action] = Action.DONE
        elif sg.kind is SubgoalKind.NAVIGATE:
            try:
                action = astar_action(sg.node_cell, self.belief.robot, grid)
            except SubgoalInfeasible:
                logger.warning("subgoal %s unreachable; searching locally", sg)
                action = None
            if action is None:
                action = pouct.plan(
                    self.belief, self.low_model,
                    self.params.low_level_planner, self.rng,
                )
        else:
            # mirror the subgoal model: searching locally starts by facing
            # the most likely target cell, then the local tree search takes
            # over from that orientation
            robot = self.belief.robot
            face = heading_toward(robot.cell, self.belief.modal_target())
            if robot.heading != face:
                action = rotate_toward(robot.heading, face)
            else:
                action = pouct.plan(
                    self.belief, self.low_model,
                    self.params.low_level_planner, self.rng,
                )
        self.prev_action = action
        return action
