"""Online Monte-Carlo tree search over a generative POMDP model (POUCT).

Each simulation samples a state from the root belief, descends the history
tree by UCB1, expands exactly one new node, and evaluates the remainder with
a domain rollout policy supplied by the model.  Planning is deterministic
given the belief, the parameters and the generator state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PlannerParams:
    num_sims: int = 500
    max_depth: int = 20
    exploration_const: float = 100.0 * math.sqrt(2.0)
    discount: float = 0.95

    def __post_init__(self) -> None:
        if self.num_sims < 1:
            raise ValueError("num_sims must be at least 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")


class _Arm:
    __slots__ = ("n", "q", "children")

    def __init__(self):
        self.n = 0
        self.q = 0.0
        self.children = {}  # observation -> _Node


class _Node:
    __slots__ = ("n", "arms", "actions")

    def __init__(self):
        self.n = 0
        self.arms = None
        self.actions = None

    def ensure_arms(self, actions):
        if self.arms is None:
            self.actions = tuple(actions)
            self.arms = [_Arm() for _ in self.actions]


def rollout(state, model, depth: int, discount: float, rng: np.random.Generator) -> float:
    """Discounted return of ``depth`` steps of the model's rollout policy."""
    ret = 0.0
    g = 1.0
    for _ in range(depth):
        acts = model.rollout_actions(state, rng)
        action = acts[int(rng.integers(len(acts)))]
        state, _, r, terminal = model.step(state, action, rng)
        ret += g * r
        g *= discount
        if terminal:
            break
    return ret


def _select_arm(node: _Node, c: float) -> int:
    for i, arm in enumerate(node.arms):
        if arm.n == 0:
            return i
    log_n = math.log(node.n)
    best_i = 0
    best_v = -math.inf
    for i, arm in enumerate(node.arms):
        v = arm.q + c * math.sqrt(log_n / arm.n)
        if v > best_v:
            best_v = v
            best_i = i
    return best_i


def _simulate(state, node: _Node, depth: int, model, params: PlannerParams,
              rng: np.random.Generator) -> float:
    if depth >= params.max_depth:
        return 0.0
    node.ensure_arms(model.actions(state))
    i = _select_arm(node, params.exploration_const)
    arm = node.arms[i]
    nxt, obs, r, terminal = model.step(state, node.actions[i], rng)
    if terminal:
        ret = r
    else:
        child = arm.children.get(obs)
        if child is None:
            arm.children[obs] = _Node()
            tail = rollout(nxt, model, params.max_depth - depth - 1,
                           params.discount, rng)
            ret = r + params.discount * tail
        else:
            ret = r + params.discount * _simulate(nxt, child, depth + 1,
                                                  model, params, rng)
    node.n += 1
    arm.n += 1
    arm.q += (ret - arm.q) / arm.n
    return ret


def plan_with_stats(belief, model, params: PlannerParams, rng: np.random.Generator):
    """Run the search and return (action, per-action (visits, Q) stats)."""
    root = _Node()
    for _ in range(params.num_sims):
        state = model.sample_state(belief, rng)
        _simulate(state, root, 0, model, params, rng)
    q_lo, q_hi = getattr(model, "q_bounds", (-120.0, 100.0))
    best_i = None
    best_q = -math.inf
    for i, arm in enumerate(root.arms):
        if arm.n == 0:
            continue
        assert q_lo <= arm.q <= q_hi, f"Q out of bounds: {arm.q}"
        if arm.q > best_q:
            best_q = arm.q
            best_i = i
    stats = {a: (arm.n, arm.q) for a, arm in zip(root.actions, root.arms)}
    return root.actions[best_i], stats


def plan(belief, model, params: PlannerParams, rng: np.random.Generator):
    """Best root action after ``num_sims`` simulations; ties resolve to the
    lowest action index."""
    action, _ = plan_with_stats(belief, model, params, rng)
    return action
