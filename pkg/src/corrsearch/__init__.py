"""Correlational object-search planning in 2D grid worlds.

A robot searches a gridded room for a hard-to-detect target object.  Easy
to-detect landmark objects are spatially correlated with the target, and the
agent folds their detections into its target belief through a correlational
observation model, planning online with hierarchical Monte-Carlo tree
search.  The package ships the full stack: world geometry, detection and
correlation models, exact belief filtering, planners, baseline agents, and a
reproducible benchmark harness with a CLI.
"""

from .gridworld import Action, GridMap, Pose
from .scenario import CorrelatedObject, ScenarioError, ScenarioSpec
from .sensing import CorrelationSpec, Detection, DetectorParams, Relation
from .core import CosBelief, CosState, JointObservation
from .bench import Metrics, TrialResult, compute_metrics, run_trial

__version__ = "0.1.0"

__all__ = [
    "Action",
    "GridMap",
    "Pose",
    "ScenarioSpec",
    "ScenarioError",
    "CorrelatedObject",
    "CorrelationSpec",
    "DetectorParams",
    "Detection",
    "Relation",
    "CosBelief",
    "CosState",
    "JointObservation",
    "Metrics",
    "TrialResult",
    "compute_metrics",
    "run_trial",
    "__version__",
]
