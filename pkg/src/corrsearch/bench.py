"""Trial execution, SPL/SR/DR metrics, batch running and persistence.

A trial couples one agent with one environment.  The environment owns the
ground truth: it applies moves, draws one detection per object class from
the true object cells, and reports the exact pose.  The agent sees only the
observations.  Every trial is driven by a single integer seed that splits
into independent environment and agent streams, so identical
(scenario, agent, seed) triples reproduce byte-identical logs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import GreedyNbvAgent, NbvParams, RandomAgent, TargetPomdpAgent
from .core import CosBelief, JointObservation
from .gridworld import Action, Pose, apply_move, shortest_path_length, success_check
from .hierarchy import HierAgent, HierParams
from .pouct import PlannerParams
from .scenario import ScenarioSpec
from .scenario_io import scenario_from_json, scenario_to_json
from .sensing import Detection, detection_model

logger = logging.getLogger(__name__)

DISCOUNT = 0.95
PARALLEL_ENV_VAR = "CORRSEARCH_PARALLEL"
RESULTS_SCHEMA_VERSION = 1

AGENT_NAMES = ("cospomdp", "target-pomdp", "greedy-nbv", "random")


@dataclass(frozen=True)
class TrialResult:
    scenario: str
    agent: str
    seed: int
    success: bool
    steps: int
    path_len: float
    shortest_len: float
    discounted_reward: float

    @property
    def spl(self) -> float:
        """Success weighted by inverse path length.  When both the optimal
        and actual paths are zero (started inside the goal region), the value
        is the bare success indicator."""
        if not self.success:
            return 0.0
        denom = max(self.path_len, self.shortest_len)
        if denom <= 0.0:
            return 1.0
        if not math.isfinite(self.shortest_len):
            return 0.0
        return self.shortest_len / denom

    def to_json(self) -> dict:
        return {
            "record": "trial",
            "schema_version": RESULTS_SCHEMA_VERSION,
            "scenario": self.scenario,
            "agent": self.agent,
            "seed": self.seed,
            "success": self.success,
            "steps": self.steps,
            "path_len": self.path_len,
            "shortest_len": self.shortest_len,
            "discounted_reward": self.discounted_reward,
            "spl": self.spl,
        }

    @staticmethod
    def from_json(data: dict) -> "TrialResult":
        return TrialResult(
            scenario=data["scenario"],
            agent=data["agent"],
            seed=data["seed"],
            success=data["success"],
            steps=data["steps"],
            path_len=data["path_len"],
            shortest_len=data["shortest_len"],
            discounted_reward=data["discounted_reward"],
        )


@dataclass(frozen=True)
class Metrics:
    spl_mean: float
    sr: float
    dr_mean: float
    spl_ci95: float
    sr_ci95: float
    dr_ci95: float
    n: int


def compute_metrics(results: Sequence[TrialResult]) -> Metrics:
    """Means with normal-approximation 95% confidence half-widths."""
    if not results:
        raise ValueError("cannot compute metrics from zero trials")
    spl = np.array([r.spl for r in results])
    sr = np.array([1.0 if r.success else 0.0 for r in results])
    dr = np.array([r.discounted_reward for r in results])

    def half_width(x: np.ndarray) -> float:
        if len(x) < 2:
            return 0.0
        return 1.96 * float(x.std(ddof=1)) / math.sqrt(len(x))

    return Metrics(
        spl_mean=float(spl.mean()),
        sr=float(sr.mean()),
        dr_mean=float(dr.mean()),
        spl_ci95=half_width(spl),
        sr_ci95=half_width(sr),
        dr_ci95=half_width(dr),
        n=len(results),
    )


# ---------------------------------------------------------------------------
# Agents and parameter plumbing


def planner_params_from_config(data: Optional[dict], base: PlannerParams) -> PlannerParams:
    if not data:
        return base
    return PlannerParams(
        num_sims=int(data.get("num_sims", base.num_sims)),
        max_depth=int(data.get("max_depth", base.max_depth)),
        exploration_const=float(
            data.get("exploration_const", base.exploration_const)
        ),
        discount=float(data.get("discount", base.discount)),
    )


def hier_params_from_config(config: Optional[dict]) -> HierParams:
    base = HierParams()
    data = (config or {}).get("hierarchy")
    if not data:
        return base
    return HierParams(
        m=int(data.get("m", base.m)),
        d_sep=float(data.get("d_sep", base.d_sep)),
        deg_min=int(data.get("deg_min", base.deg_min)),
        deg_max=int(data.get("deg_max", base.deg_max)),
        resample_threshold=float(
            data.get("resample_threshold", base.resample_threshold)
        ),
        high_level_planner=planner_params_from_config(
            data.get("high_level_planner"), base.high_level_planner
        ),
        low_level_planner=planner_params_from_config(
            data.get("low_level_planner"), base.low_level_planner
        ),
    )


def nbv_params_from_config(config: Optional[dict]) -> NbvParams:
    base = NbvParams()
    data = (config or {}).get("nbv")
    views = hier_params_from_config(config)
    if not data:
        return NbvParams(views=views)
    return NbvParams(
        n_particles=int(data.get("n_particles", base.n_particles)),
        lam=float(data.get("lam", base.lam)),
        reinvig_frac=float(data.get("reinvig_frac", base.reinvig_frac)),
        ess_frac=float(data.get("ess_frac", base.ess_frac)),
        views=views,
    )


def make_agent(name: str, scenario: ScenarioSpec, rng: np.random.Generator):
    if name == "cospomdp":
        return HierAgent(scenario, rng, hier_params_from_config(scenario.config))
    if name == "target-pomdp":
        return TargetPomdpAgent(scenario, rng, hier_params_from_config(scenario.config))
    if name == "greedy-nbv":
        return GreedyNbvAgent(scenario, rng, nbv_params_from_config(scenario.config))
    if name == "random":
        return RandomAgent(scenario, rng)
    raise ValueError(f"unknown agent '{name}'; choose from {AGENT_NAMES}")


def _agent_belief_json(agent) -> Optional[dict]:
    if isinstance(agent, HierAgent):
        belief: CosBelief = agent.belief
        return {
            f"{c[0]},{c[1]}": float(p)
            for c, p in zip(belief.grid.free_cells, belief.probs)
        }
    if isinstance(agent, GreedyNbvAgent):
        marg = agent.pb.target_marginal()
        return {
            f"{c[0]},{c[1]}": float(p)
            for c, p in zip(agent.scenario.grid.free_cells, marg)
        }
    return None


def _agent_belief_sha(agent) -> Optional[str]:
    if isinstance(agent, HierAgent):
        probs = np.round(agent.belief.probs, 12)
        pose = agent.belief.robot
    elif isinstance(agent, GreedyNbvAgent):
        probs = np.round(agent.pb.target_marginal(), 12)
        pose = agent.pose
    else:
        return None
    h = hashlib.sha256()
    h.update(repr(pose).encode())
    h.update(probs.tobytes())
    return h.hexdigest()[:16]


def _agent_subgoal(agent) -> Optional[str]:
    sg = getattr(agent, "subgoal", None)
    return sg.label() if sg is not None else None


# ---------------------------------------------------------------------------
# The environment loop


class Environment:
    """Ground-truth simulator: deterministic motion, noiseless pose reports,
    stochastic detections drawn from the true object cells."""

    def __init__(self, scenario: ScenarioSpec, rng: np.random.Generator):
        self.scenario = scenario
        self.rng = rng
        self.pose = scenario.init_pose

    def move(self, action: Action) -> None:
        self.pose = apply_move(self.scenario.grid, self.pose, action)

    def observe(self) -> JointObservation:
        sc = self.scenario
        grid = sc.grid
        dets = [
            Detection(
                sc.target_name,
                detection_model(grid, sc.target_detector).sample(
                    sc.target_cell, self.pose, self.rng
                ),
            )
        ]
        for obj in sc.correlated_objects:
            dets.append(
                Detection(
                    obj.name,
                    detection_model(grid, obj.detector).sample(
                        obj.cell, self.pose, self.rng
                    ),
                )
            )
        return JointObservation(self.pose, tuple(dets))


def run_trial(
    scenario: ScenarioSpec,
    agent_name: str,
    seed: int,
    trace_path: Optional[str | Path] = None,
) -> TrialResult:
    """Run one episode to Done or the step cap and score it."""
    env_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    env = Environment(scenario, np.random.default_rng(env_ss))
    agent = make_agent(agent_name, scenario, np.random.default_rng(agent_ss))
    grid = scenario.grid

    success = False
    path_len = 0.0
    discounted = 0.0
    steps = 0
    z: Optional[JointObservation] = None
    trace_steps = []
    want_trace = trace_path is not None

    for t in range(scenario.max_steps):
        action = agent.step(z)
        steps = t + 1
        if action is Action.DONE:
            success = success_check(
                grid, env.pose, scenario.target_cell, scenario.success_distance
            )
            r = 100.0 if success else -100.0
            discounted += (DISCOUNT ** t) * r
            if want_trace:
                trace_steps.append(_trace_step(t, action, env.pose, r, None, agent))
            break
        prev_cell = env.pose.cell
        env.move(action)
        if env.pose.cell != prev_cell:
            path_len += grid.cell_size
        discounted += (DISCOUNT ** t) * -1.0
        z = env.observe()
        if want_trace:
            trace_steps.append(_trace_step(t, action, env.pose, -1.0, z, agent))

    shortest = shortest_path_length(
        grid, scenario.init_pose, scenario.target_cell, scenario.success_distance
    )
    result = TrialResult(
        scenario=scenario.name,
        agent=agent_name,
        seed=int(seed),
        success=success,
        steps=steps,
        path_len=round(path_len, 9),
        shortest_len=shortest,
        discounted_reward=round(discounted, 9),
    )
    if want_trace:
        _write_trace(Path(trace_path), scenario, agent_name, seed, result, trace_steps)
    return result


def _trace_step(t, action, pose: Pose, reward: float, z, agent) -> dict:
    step = {
        "t": t + 1,
        "action": action.value,
        "pose": [pose.cell[0], pose.cell[1], pose.heading],
        "reward": reward,
        "subgoal": _agent_subgoal(agent),
        "belief_sha": _agent_belief_sha(agent),
    }
    if z is not None:
        step["detections"] = [
            [d.object_id, None if d.value is None else list(d.value)]
            for d in z.detections
        ]
    belief = _agent_belief_json(agent)
    if belief is not None:
        step["belief"] = belief
    return step


def _write_trace(path, scenario, agent_name, seed, result, steps) -> None:
    data = {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "scenario": scenario_to_json(scenario),
        "agent": agent_name,
        "seed": int(seed),
        "outcome": result.to_json(),
        "steps": steps,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


# ---------------------------------------------------------------------------
# Batches


def default_parallelism() -> int:
    value = os.environ.get(PARALLEL_ENV_VAR)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            logger.warning("ignoring invalid %s=%r", PARALLEL_ENV_VAR, value)
    return os.cpu_count() or 1


def trial_seed(batch_seed: int, index: int) -> int:
    """Stable per-trial integer seed; reusable with `run --seed` directly."""
    return int(np.random.SeedSequence([batch_seed, index]).generate_state(1, np.uint64)[0])


def _run_task(args) -> dict:
    data, agent, seed = args
    scenario = scenario_from_json(data, name=data.get("name", "scenario"))
    try:
        return {"ok": run_trial(scenario, agent, seed).to_json()}
    except Exception as exc:  # noqa: BLE001 - trial isolation barrier
        logger.exception("trial failed: %s/%s seed=%s", scenario.name, agent, seed)
        return {
            "error": {
                "record": "error",
                "scenario": scenario.name,
                "agent": agent,
                "seed": seed,
                "message": f"{type(exc).__name__}: {exc}",
            }
        }


def run_batch(
    scenarios: Sequence[ScenarioSpec],
    agents: Sequence[str],
    trials: int,
    batch_seed: int = 0,
    parallel: int = 1,
    out_dir: Optional[str | Path] = None,
    progress: bool = False,
) -> tuple[list[TrialResult], list[dict]]:
    """Run ``trials`` seeded trials for every (scenario, agent) pair.

    Returns (results, errors); errored trials are excluded from results.
    Output files (one JSON line per trial plus a CSV summary) are written
    when ``out_dir`` is given.
    """
    tasks = []
    index = 0
    for scenario in scenarios:
        data = scenario_to_json(scenario)
        for agent in agents:
            for _ in range(trials):
                tasks.append((data, agent, trial_seed(batch_seed, index)))
                index += 1

    outputs: list[dict] = []
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            for i, out in enumerate(pool.map(_run_task, tasks)):
                outputs.append(out)
                if progress:
                    _progress(i + 1, len(tasks), out)
    else:
        # in-process fast path: reuse loaded scenarios and their model caches
        by_name = {s.name: s for s in scenarios}
        for i, (data, agent, seed) in enumerate(tasks):
            scenario = by_name[data["name"]]
            try:
                out = {"ok": run_trial(scenario, agent, seed).to_json()}
            except Exception as exc:  # noqa: BLE001 - trial isolation barrier
                logger.exception(
                    "trial failed: %s/%s seed=%s", scenario.name, agent, seed
                )
                out = {
                    "error": {
                        "record": "error",
                        "scenario": scenario.name,
                        "agent": agent,
                        "seed": seed,
                        "message": f"{type(exc).__name__}: {exc}",
                    }
                }
            outputs.append(out)
            if progress:
                _progress(i + 1, len(tasks), out)

    results = [TrialResult.from_json(o["ok"]) for o in outputs if "ok" in o]
    errors = [o["error"] for o in outputs if "error" in o]
    if out_dir is not None:
        write_results(Path(out_dir), results, errors)
    return results, errors


def _progress(done: int, total: int, out: dict) -> None:
    tag = "ok" if "ok" in out else "ERR"
    rec = out.get("ok") or out.get("error")
    print(
        f"[{done}/{total}] {tag} {rec['scenario']} {rec['agent']} seed={rec['seed']}",
        flush=True,
    )


def write_results(
    out_dir: Path, results: Sequence[TrialResult], errors: Sequence[dict]
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.jsonl", "w") as fh:
        for r in results:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
        for e in errors:
            fh.write(json.dumps(e, sort_keys=True) + "\n")
    groups: dict[tuple[str, str], list[TrialResult]] = {}
    agents_seen: dict[str, list[TrialResult]] = {}
    for r in results:
        groups.setdefault((r.scenario, r.agent), []).append(r)
        agents_seen.setdefault(r.agent, []).append(r)
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scenario", "agent", "n", "spl_mean", "spl_ci95", "sr", "sr_ci95",
             "dr_mean", "dr_ci95"]
        )
        for (scenario, agent) in sorted(groups):
            m = compute_metrics(groups[(scenario, agent)])
            writer.writerow(
                [scenario, agent, m.n, f"{m.spl_mean:.6f}", f"{m.spl_ci95:.6f}",
                 f"{m.sr:.6f}", f"{m.sr_ci95:.6f}", f"{m.dr_mean:.6f}",
                 f"{m.dr_ci95:.6f}"]
            )
        for agent in sorted(agents_seen):
            m = compute_metrics(agents_seen[agent])
            writer.writerow(
                ["ALL", agent, m.n, f"{m.spl_mean:.6f}", f"{m.spl_ci95:.6f}",
                 f"{m.sr:.6f}", f"{m.sr_ci95:.6f}", f"{m.dr_mean:.6f}",
                 f"{m.dr_ci95:.6f}"]
            )
