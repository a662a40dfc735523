"""Tests for place-graph sampling, subgoal planning, navigation and the
full two-level agent."""

import numpy as np
import networkx as nx
import pytest

import corrsearch.hierarchy as hierarchy
import corrsearch.pouct
from corrsearch.core import CosBelief, CosModel, JointObservation, belief_update
from corrsearch.gridworld import (
    Action,
    GridMap,
    HEADINGS,
    MOVE_ACTIONS,
    Pose,
    apply_move,
    bfs_steps,
    euclidean_m,
    shortest_path_length,
    success_check,
)
from corrsearch.hierarchy import (
    DONE_SUBGOAL,
    HierAgent,
    HierParams,
    HighLevelModel,
    SEARCH_LOCAL,
    Subgoal,
    SubgoalInfeasible,
    SubgoalKind,
    TopoGraph,
    astar_action,
    captured_mass,
    high_level_plan,
    node_masses,
    sample_topo_graph,
)
from corrsearch.pouct import PlannerParams
from corrsearch.scenario import ScenarioSpec
from corrsearch.sensing import Detection, DetectorParams, sample_detection

PERFECT = DetectorParams(1.0, 0.0, 2.0, sigma=1e-6)


def scen(grid, target, init, det=DetectorParams(0.7, 0.05, 1.5), sd=1.0):
    return ScenarioSpec(
        grid=grid,
        target_name="target",
        target_cell=target,
        target_detector=det,
        correlated_objects=(),
        init_pose=init,
        success_distance=sd,
    )


def point_mass(grid, cell):
    probs = np.zeros(len(grid.free_cells))
    probs[grid.free_cells.index(cell)] = 1.0
    return probs


def two_node_graph(grid, robot_cell, far_cell, probs):
    nodes = (robot_cell, far_cell)
    steps = bfs_steps(grid, robot_cell)[far_cell]
    return TopoGraph(
        nodes=nodes,
        edges=frozenset({(0, 1)}),
        edge_costs={(0, 1): steps * grid.cell_size},
        node_mass=tuple(node_masses(grid, nodes, probs, 0.5)),
        capture_radius=0.5,
        degree_clamped=True,
    )


# ---------------------------------------------------------------------------
# place graph sampling


def test_uniform_belief_fills_all_places_with_separation():
    grid = GridMap(16, 16)
    n = len(grid.free_cells)
    probs = np.full(n, 1.0 / n)
    params = HierParams()
    for seed in range(150):
        topo = sample_topo_graph(grid, probs, params, np.random.default_rng(seed))
        assert len(topo.nodes) == params.m
        assert topo.is_connected()
        assert not topo.degree_clamped
        for i in range(len(topo.nodes)):
            assert params.deg_min <= topo.degree(i) <= params.deg_max
            for j in range(i + 1, len(topo.nodes)):
                assert euclidean_m(grid, topo.nodes[i], topo.nodes[j]) >= params.d_sep - 1e-9
        assert all(m >= 0 for m in topo.node_mass)
        assert sum(topo.node_mass) <= 1.0 + 1e-9


def test_point_mass_cell_always_becomes_a_node():
    grid = GridMap(16, 16)
    probs = point_mass(grid, (13, 7))
    params = HierParams()
    for seed in range(100):
        topo = sample_topo_graph(grid, probs, params, np.random.default_rng(seed))
        assert (13, 7) in topo.nodes


def test_tiny_map_clamps_node_count():
    grid = GridMap(3, 1)
    probs = np.full(3, 1.0 / 3.0)
    topo = sample_topo_graph(grid, probs, HierParams(), np.random.default_rng(0))
    assert len(topo.nodes) <= 3
    assert topo.is_connected()
    # with the separation relaxed all three cells fit, but the degree window
    # cannot be met and must be flagged
    tight = sample_topo_graph(
        grid, probs, HierParams(d_sep=0.25), np.random.default_rng(0)
    )
    assert len(tight.nodes) == 3
    assert tight.is_connected()
    assert tight.degree_clamped


def test_zero_mass_belief_is_rejected():
    grid = GridMap(4, 4)
    with pytest.raises(ValueError):
        sample_topo_graph(grid, np.zeros(16), HierParams(), np.random.default_rng(0))


def test_captured_mass_counts_only_nearby_cells():
    grid = GridMap(12, 12)
    probs_on = point_mass(grid, (8, 8))
    topo = two_node_graph(grid, (2, 2), (8, 8), probs_on)
    assert captured_mass(grid, topo, probs_on) == pytest.approx(1.0)
    probs_off = point_mass(grid, (5, 8))  # 3 cells from the nearest node
    assert captured_mass(grid, topo, probs_off) == pytest.approx(0.0)


def test_hier_params_validation():
    with pytest.raises(ValueError):
        HierParams(m=0)
    with pytest.raises(ValueError):
        HierParams(resample_threshold=0.0)
    with pytest.raises(ValueError):
        HierParams(deg_min=4, deg_max=3)


# ---------------------------------------------------------------------------
# subgoal planning


def test_mass_at_current_place_prefers_searching_here():
    grid = GridMap(12, 12)
    sc = scen(grid, (2, 3), Pose((2, 2), 0))
    probs = point_mass(grid, (2, 3))
    params = HierParams()
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        topo = sample_topo_graph(grid, probs, params, rng)
        belief = CosBelief(Pose((2, 2), 0), grid, probs)
        sg = high_level_plan(topo, belief, sc, params, rng)
        hits += sg.kind in (SubgoalKind.SEARCH_LOCAL, SubgoalKind.DONE)
    assert hits >= 90


def test_mass_at_distant_node_prefers_navigating_there():
    grid = GridMap(13, 13)
    sc = scen(grid, (10, 10), Pose((2, 2), 0), sd=0.5)
    blob = [(9, 9), (11, 11), (9, 11), (11, 9)]
    probs = np.zeros(len(grid.free_cells))
    for c in blob:
        probs[grid.free_cells.index(c)] = 0.25
    topo = two_node_graph(grid, (2, 2), (10, 10), probs)
    belief = CosBelief(Pose((2, 2), 0), grid, probs)
    params = HierParams()
    hits = 0
    for seed in range(100):
        sg = high_level_plan(topo, belief, sc, params, np.random.default_rng(seed))
        if sg.kind is SubgoalKind.NAVIGATE and sg.node_cell == (10, 10):
            hits += 1
    assert hits >= 90


def test_single_node_graph_offers_only_local_choices():
    grid = GridMap(9, 9)
    sc = scen(grid, (5, 5), Pose((4, 4), 0))
    probs = np.full(len(grid.free_cells), 1.0 / len(grid.free_cells))
    nodes = ((4, 4),)
    topo = TopoGraph(
        nodes=nodes,
        edges=frozenset(),
        edge_costs={},
        node_mass=tuple(node_masses(grid, nodes, probs, 0.5)),
        capture_radius=0.5,
        degree_clamped=True,
    )
    model = HighLevelModel(sc, topo)
    belief = CosBelief(Pose((4, 4), 0), grid, probs)
    rng = np.random.default_rng(1)
    state = model.sample_state(belief, rng)
    assert set(model.actions(state)) == {SEARCH_LOCAL, DONE_SUBGOAL}
    for seed in range(20):
        sg = high_level_plan(topo, belief, sc, HierParams(), np.random.default_rng(seed))
        assert sg in (SEARCH_LOCAL, DONE_SUBGOAL)


def test_subgoal_labels():
    assert SEARCH_LOCAL.label() == "search_local"
    assert DONE_SUBGOAL.label() == "done"
    assert Subgoal.navigate(3, (7, 2)).label() == "navigate:3:7,2"


# ---------------------------------------------------------------------------
# A* navigation


def test_astar_signals_arrival_with_none():
    grid = GridMap(5, 5)
    assert astar_action((2, 2), Pose((2, 2), 90), grid) is None


def test_astar_one_cell_ahead_moves_forward():
    grid = GridMap(5, 5)
    assert astar_action((3, 2), Pose((2, 2), 0), grid) is Action.MOVE_AHEAD


def test_astar_turns_before_moving():
    grid = GridMap(5, 5)
    a = astar_action((2, 3), Pose((2, 2), 0), grid)
    assert a in (Action.ROTATE_LEFT, Action.ROTATE_RIGHT)


def test_astar_unreachable_destination_raises():
    walls = frozenset({(3, 3), (3, 4), (3, 5), (4, 3), (5, 3), (4, 5), (5, 5), (5, 4)})
    grid = GridMap(7, 7, obstacles=walls)
    with pytest.raises(SubgoalInfeasible):
        astar_action((4, 4), Pose((0, 0), 0), grid)


def pose_graph(grid):
    g = nx.DiGraph()
    for cell in grid.free_cells:
        for h in HEADINGS:
            pose = Pose(cell, h)
            for a in MOVE_ACTIONS:
                nxt = apply_move(grid, pose, a)
                if nxt != pose:
                    g.add_edge((cell, h), (nxt.cell, nxt.heading))
    return g


def test_executed_astar_paths_match_search_oracle():
    rng = np.random.default_rng(71)
    for _ in range(25):
        cells = [(x, y) for x in range(10) for y in range(10)]
        obstacles = frozenset(c for c in cells if rng.random() < 0.2)
        grid = GridMap(10, 10, obstacles=obstacles)
        free = grid.free_cells
        start = Pose(free[int(rng.integers(len(free)))], HEADINGS[int(rng.integers(8))])
        reachable = sorted(bfs_steps(grid, start.cell))
        dest = reachable[int(rng.integers(len(reachable)))]
        if dest == start.cell:
            continue
        oracle_graph = pose_graph(grid)
        lengths = nx.single_source_shortest_path_length(oracle_graph, (start.cell, start.heading))
        want = min(lengths[(dest, h)] for h in HEADINGS if (dest, h) in lengths)
        pose, taken = start, 0
        while taken <= want + 1:
            action = astar_action(dest, pose, grid)
            if action is None:
                break
            pose = apply_move(grid, pose, action)
            taken += 1
        assert pose.cell == dest
        assert taken == want


# ---------------------------------------------------------------------------
# the full agent


def run_episode(agent, sc, rng, max_steps=60):
    """Drive an agent against the true world; returns (actions, done_ok)."""
    grid = sc.grid
    pose, z = sc.init_pose, None
    actions = []
    for _ in range(max_steps):
        a = agent.step(z)
        actions.append(a)
        if a is Action.DONE:
            ok = success_check(grid, pose, sc.target_cell, sc.success_distance)
            return actions, ok
        pose = apply_move(grid, pose, a)
        z = JointObservation(
            pose,
            (sample_detection(sc.target_cell, pose, sc.target_detector, grid, rng,
                              object_id=sc.target_name),),
        )
    return actions, False


def test_first_step_is_legal_and_keeps_belief_normalized():
    grid = GridMap(8, 8)
    sc = scen(grid, (6, 6), Pose((1, 1), 0))
    agent = HierAgent(sc, np.random.default_rng(5))
    a = agent.step(None)
    assert a in (*MOVE_ACTIONS, Action.DONE)
    assert agent.belief.probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_perfect_detector_finishes_quickly():
    grid = GridMap(10, 10)
    sc = scen(grid, (6, 6), Pose((1, 1), 45), det=PERFECT)
    shortest = round(shortest_path_length(grid, sc.init_pose, (6, 6), 1.0) / grid.cell_size)
    budget = 2 * shortest + 8
    wins = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        agent = HierAgent(sc, rng)
        actions, ok = run_episode(agent, sc, rng, max_steps=40)
        if ok and len(actions) <= budget:
            wins += 1
    assert wins >= 95


def test_at_most_one_done_and_it_is_final():
    grid = GridMap(10, 10)
    sc = scen(grid, (6, 6), Pose((1, 1), 45), det=PERFECT)
    for seed in range(10):
        rng = np.random.default_rng(seed)
        agent = HierAgent(sc, rng)
        actions, _ = run_episode(agent, sc, rng, max_steps=40)
        dones = [i for i, a in enumerate(actions) if a is Action.DONE]
        assert len(dones) <= 1
        if dones:
            assert dones[0] == len(actions) - 1


def test_graph_resamples_exactly_when_capture_drops():
    grid = GridMap(10, 10)
    sc = scen(grid, (8, 8), Pose((1, 1), 0), det=DetectorParams(0.9, 0.05, 2.5))
    fired, held = 0, 0
    for seed in range(6):
        rng = np.random.default_rng(seed)
        agent = HierAgent(sc, rng)
        pose, z = sc.init_pose, None
        for _ in range(15):
            topo_before = agent.topo
            belief_before = agent.belief
            prev = agent.prev_action
            if z is not None and prev is not None:
                expected_belief = belief_update(belief_before, prev, z, sc)
            else:
                expected_belief = belief_before
            should_fire = (
                captured_mass(grid, topo_before, expected_belief.probs)
                < agent.params.resample_threshold
            )
            a = agent.step(z)
            if should_fire:
                fired += 1
                assert agent.topo is not topo_before
            else:
                held += 1
                assert agent.topo is topo_before
            if a is Action.DONE:
                break
            pose = apply_move(grid, pose, a)
            z = JointObservation(
                pose,
                (sample_detection(sc.target_cell, pose, sc.target_detector, grid, rng,
                                  object_id="target"),),
            )
    assert fired > 0 and held > 0


def test_resample_counter_tracks_graph_changes():
    grid = GridMap(10, 10)
    sc = scen(grid, (8, 8), Pose((1, 1), 0), det=DetectorParams(0.9, 0.05, 2.5))
    rng = np.random.default_rng(3)
    agent = HierAgent(sc, rng)
    pose, z = sc.init_pose, None
    changes = 0
    for _ in range(15):
        before = agent.topo
        a = agent.step(z)
        changes += agent.topo is not before
        if a is Action.DONE:
            break
        pose = apply_move(grid, pose, a)
        z = JointObservation(
            pose,
            (sample_detection(sc.target_cell, pose, sc.target_detector, grid, rng,
                              object_id="target"),),
        )
    assert agent.resamples == changes


def test_both_levels_plan_with_the_shared_belief(monkeypatch):
    grid = GridMap(8, 8)
    sc = scen(grid, (6, 6), Pose((1, 1), 0))
    seen_high = []
    real_high = hierarchy.high_level_plan

    def spy_high(topo, belief, scenario, params, rng):
        seen_high.append(belief)
        return real_high(topo, belief, scenario, params, rng)

    monkeypatch.setattr(hierarchy, "high_level_plan", spy_high)
    rng = np.random.default_rng(11)
    agent = HierAgent(sc, rng)
    pose, z = sc.init_pose, None
    for _ in range(6):
        seen_high.clear()
        a = agent.step(z)
        assert all(b is agent.belief for b in seen_high)
        if a is Action.DONE:
            break
        pose = apply_move(grid, pose, a)
        z = JointObservation(
            pose,
            (sample_detection(sc.target_cell, pose, sc.target_detector, grid, rng,
                              object_id="target"),),
        )


def test_local_search_uses_the_shared_belief_and_model(monkeypatch):
    grid = GridMap(8, 8)
    sc = scen(grid, (6, 6), Pose((1, 1), 0))
    monkeypatch.setattr(hierarchy, "high_level_plan", lambda *args: SEARCH_LOCAL)
    seen_low = []
    real_plan = corrsearch.pouct.plan

    def spy_plan(belief, model, params, rng):
        seen_low.append((belief, model))
        return real_plan(belief, model, params, rng)

    monkeypatch.setattr(corrsearch.pouct, "plan", spy_plan)
    rng = np.random.default_rng(13)
    agent = HierAgent(sc, rng)
    z = None
    pose = sc.init_pose
    for _ in range(6):
        a = agent.step(z)
        if a is Action.DONE:
            break
        pose = apply_move(grid, pose, a)
        z = JointObservation(
            pose,
            (sample_detection(sc.target_cell, pose, sc.target_detector, grid, rng,
                              object_id="target"),),
        )
    assert seen_low
    for belief, model in seen_low:
        assert model is agent.low_model
        assert isinstance(model, CosModel)
    assert seen_low[-1][0] is agent.belief
