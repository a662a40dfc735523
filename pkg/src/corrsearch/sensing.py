"""Noisy object detection and spatial-correlation observation models.

A detector is described by a true-positive rate ``tp``, a false-positive rate
``fp``, a mean detection range ``r`` (meters) and a localization noise
``sigma`` (meters).  Given an object at cell ``x`` and a robot pose, the
conditional over detections ``z`` (a free cell, or ``None`` for "nothing
seen") is assembled from five cases:

* ``x`` in FOV, ``z`` null:                    ``1 - tp``
* ``x`` in FOV, ``z`` within 3 sigma of ``x``: ``delta(z) * tp * g(z | x)``
* ``x`` in FOV, ``z`` farther than 3 sigma:    ``delta(z) * fp / |Ve|``
* ``x`` out of FOV, ``z`` null:                ``1 - fp``
* ``x`` out of FOV, ``z`` non-null:            ``delta(z) * fp / |Ve|``

where ``Ve`` is the set of free cells inside the FOV and within range ``r``,
``g`` is an isotropic Gaussian evaluated at cell centers and normalized over
the free cells of the 3-sigma disk around ``x``, and ``delta(z)`` equals 1
inside ``Ve`` and ``exp(-(dist(z, robot) - r)^2)`` (meters) elsewhere.  The
five cases do not sum to one on a discrete domain, so each conditional is
renormalized over ``{null} + free cells``; relative weights are preserved.

Correlations between object classes are binary Close/Far predicates with a
threshold distance ``d`` (strict inequalities; the boundary satisfies
neither).  The induced conditional ``C(x_i | x_target)`` is uniform over the
predicate's support.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from .gridworld import Cell, GridMap, Pose, euclidean_cells, visible_cells


class Relation(enum.Enum):
    CLOSE = "close"
    FAR = "far"


@dataclass(frozen=True)
class DetectorParams:
    tp: float
    fp: float
    r: float
    sigma: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.tp <= 1.0:
            raise ValueError("tp must be in [0, 1]")
        if not 0.0 <= self.fp <= 1.0:
            raise ValueError("fp must be in [0, 1]")
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class CorrelationSpec:
    relation: Relation
    d: float

    def __post_init__(self) -> None:
        if self.d <= 0:
            raise ValueError("d must be positive")

    def flipped(self) -> "CorrelationSpec":
        """The same spec with Close and Far swapped (the 'wrong' ablation)."""
        other = Relation.FAR if self.relation is Relation.CLOSE else Relation.CLOSE
        return CorrelationSpec(other, self.d)


class Detection(NamedTuple):
    """A single per-class detector reading: a free cell or None."""

    object_id: str
    value: Optional[Cell]


class _PoseGeometry(NamedTuple):
    vis: np.ndarray       # bool (n,) free cell in FOV
    in_range: np.ndarray  # bool (n,) free cell in FOV and within r
    n_ve: int
    delta: np.ndarray     # float (n,) range discount per candidate z
    fp_w: np.ndarray      # float (n,) false-positive weight per z
    fp_sum: float


class DetectionModel:
    """Vectorized detection conditional for one (map, detector) pair.

    Weight vectors are indexed by ``grid.free_cells`` order.  Geometry is
    cached per pose, so repeated queries during planning stay cheap.
    """

    def __init__(self, grid: GridMap, params: DetectorParams):
        self.grid = grid
        self.params = params
        free = grid.free_cells
        self.n = len(free)
        xy = np.asarray(free, dtype=float) * grid.cell_size
        self._xy = xy
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=-1))
        s3 = 3.0 * params.sigma
        g = np.exp(-(dist * dist) / (2.0 * params.sigma * params.sigma))
        g[dist > s3] = 0.0
        self._gauss = g                       # g[z_idx, x_idx]
        self._gauss_mask = (g > 0.0).astype(float)
        self._gauss_norm = g.sum(axis=0)      # per-x normalizer over the disk
        self._geom_cache: dict[Pose, _PoseGeometry] = {}
        self._totals_cache: dict[Pose, np.ndarray] = {}

    def _geometry(self, pose: Pose) -> _PoseGeometry:
        geom = self._geom_cache.get(pose)
        if geom is not None:
            return geom
        grid, params = self.grid, self.params
        vis_set = visible_cells(grid, pose)
        free = grid.free_cells
        vis = np.fromiter((c in vis_set for c in free), dtype=bool, count=self.n)
        pxy = np.asarray(pose.cell, dtype=float) * grid.cell_size
        d_pose = np.sqrt(((self._xy - pxy) ** 2).sum(axis=-1))
        in_range = vis & (d_pose <= params.r)
        n_ve = int(in_range.sum())
        delta = np.where(in_range, 1.0, np.exp(-((d_pose - params.r) ** 2)))
        if n_ve > 0:
            fp_w = delta * (params.fp / n_ve)
        else:
            fp_w = np.zeros(self.n)
        geom = _PoseGeometry(vis, in_range, n_ve, delta, fp_w, float(fp_w.sum()))
        self._geom_cache[pose] = geom
        return geom

    def case_weight(self, z_value: Optional[Cell], x_cell: Cell, pose: Pose) -> float:
        """Raw five-case weight before renormalization."""
        geom = self._geometry(pose)
        xi = self.grid.free_index[x_cell]
        tp, fp = self.params.tp, self.params.fp
        if z_value is None:
            return 1.0 - tp if geom.vis[xi] else 1.0 - fp
        zi = self.grid.free_index[z_value]
        if geom.vis[xi] and self._gauss[zi, xi] > 0.0:
            return float(geom.delta[zi] * tp * self._gauss[zi, xi] / self._gauss_norm[xi])
        return float(geom.fp_w[zi])

    def _weights_for(self, pose: Pose, x_cell: Cell) -> tuple[float, np.ndarray, float]:
        """(null weight, per-cell weights, total).  The weight array may be
        shared internal state; callers must not mutate it."""
        geom = self._geometry(pose)
        xi = self.grid.free_index[x_cell]
        tp, fp = self.params.tp, self.params.fp
        if geom.vis[xi]:
            w = geom.fp_w.copy()
            disk = self._gauss[:, xi] > 0.0
            w[disk] = geom.delta[disk] * tp * self._gauss[disk, xi] / self._gauss_norm[xi]
            w_null = 1.0 - tp
            total = w_null + float(w.sum())
        else:
            w = geom.fp_w
            w_null = 1.0 - fp
            total = w_null + geom.fp_sum
        return w_null, w, total

    def likelihood(self, z_value: Optional[Cell], x_cell: Cell, pose: Pose) -> float:
        w_null, w, total = self._weights_for(pose, x_cell)
        if total <= 0.0:
            # degenerate detector facing a wall; the null outcome absorbs all mass
            return 1.0 if z_value is None else 0.0
        if z_value is None:
            return w_null / total
        return float(w[self.grid.free_index[z_value]]) / total

    def _totals(self, pose: Pose) -> np.ndarray:
        totals = self._totals_cache.get(pose)
        if totals is not None:
            return totals
        geom = self._geometry(pose)
        tp, fp = self.params.tp, self.params.fp
        # sum of fp weights that the Gaussian disk of each x replaces
        fp_in_disk = geom.fp_w @ self._gauss_mask
        with np.errstate(invalid="ignore", divide="ignore"):
            tp_in_disk = tp * (geom.delta @ self._gauss) / self._gauss_norm
        totals = np.where(
            geom.vis,
            (1.0 - tp) + geom.fp_sum - fp_in_disk + tp_in_disk,
            (1.0 - fp) + geom.fp_sum,
        )
        self._totals_cache[pose] = totals
        return totals

    def likelihood_over_x(self, z_value: Optional[Cell], pose: Pose) -> np.ndarray:
        """Vector of ``P(z | x, pose)`` over all free cells ``x`` at once."""
        geom = self._geometry(pose)
        totals = self._totals(pose)
        tp, fp = self.params.tp, self.params.fp
        if z_value is None:
            num = np.where(geom.vis, 1.0 - tp, 1.0 - fp)
        else:
            zi = self.grid.free_index[z_value]
            num = np.full(self.n, geom.fp_w[zi])
            near = geom.vis & (self._gauss[zi] > 0.0)
            num[near] = geom.delta[zi] * tp * self._gauss[zi, near] / self._gauss_norm[near]
        out = np.zeros(self.n)
        ok = totals > 0.0
        out[ok] = num[ok] / totals[ok]
        if not ok.all() and z_value is None:
            out[~ok] = 1.0
        return out

    def sample(self, x_cell: Cell, pose: Pose, rng: np.random.Generator) -> Optional[Cell]:
        w_null, w, total = self._weights_for(pose, x_cell)
        if total <= 0.0:
            return None
        u = rng.random() * total
        if u < w_null:
            return None
        idx = int(np.searchsorted(np.cumsum(w), u - w_null, side="right"))
        idx = min(idx, self.n - 1)
        return self.grid.free_cells[idx]


class CorrelationModel:
    """Uniform conditional over the support of a Close/Far predicate,
    restricted to the free cells of one map."""

    def __init__(self, grid: GridMap, spec: CorrelationSpec):
        self.grid = grid
        self.spec = spec
        free = grid.free_cells
        n = len(free)
        xy = np.asarray(free, dtype=float) * grid.cell_size
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=-1))
        if spec.relation is Relation.CLOSE:
            support = dist < spec.d
        else:
            support = dist > spec.d
        counts = support.sum(axis=1)
        if (counts == 0).any():
            bad = free[int(np.argmin(counts))]
            raise ValueError(
                f"correlation {spec.relation.value} d={spec.d} has empty support "
                f"for target cell {bad}"
            )
        # rows indexed by target cell, columns by the correlated object's cell
        self.cond = support.astype(float) / counts[:, None]
        self._cum = np.cumsum(self.cond, axis=1)
        self.n = n

    def prob(self, x_i: Cell, x_target: Cell) -> float:
        fi = self.grid.free_index
        return float(self.cond[fi[x_target], fi[x_i]])

    def sample_given(self, x_target: Cell, rng: np.random.Generator) -> Cell:
        row = self._cum[self.grid.free_index[x_target]]
        idx = int(np.searchsorted(row, rng.random(), side="right"))
        return self.grid.free_cells[min(idx, self.n - 1)]


@lru_cache(maxsize=128)
def detection_model(grid: GridMap, params: DetectorParams) -> DetectionModel:
    return DetectionModel(grid, params)


@lru_cache(maxsize=128)
def correlation_model(grid: GridMap, spec: CorrelationSpec) -> CorrelationModel:
    return CorrelationModel(grid, spec)


def detection_likelihood(
    z: Detection,
    x_i: Cell,
    pose: Pose,
    params: DetectorParams,
    grid: GridMap,
) -> float:
    """Renormalized probability of detection ``z`` given the object at
    ``x_i`` and the robot at ``pose``."""
    return detection_model(grid, params).likelihood(z.value, x_i, pose)


def detection_case_weight(
    z: Detection,
    x_i: Cell,
    pose: Pose,
    params: DetectorParams,
    grid: GridMap,
) -> float:
    """The raw five-case weight for ``z`` before renormalization."""
    return detection_model(grid, params).case_weight(z.value, x_i, pose)


def sample_detection(
    x_i: Cell,
    pose: Pose,
    params: DetectorParams,
    grid: GridMap,
    rng: np.random.Generator,
    object_id: str = "",
) -> Detection:
    return Detection(object_id, detection_model(grid, params).sample(x_i, pose, rng))


def correlation_prob(
    x_i: Cell,
    x_target: Cell,
    spec: CorrelationSpec,
    cell_size: float,
) -> int:
    """Binary predicate: 1 iff the pair satisfies the relation strictly.
    At exactly distance ``d`` both Close and Far return 0."""
    dist = euclidean_cells(x_i, x_target) * cell_size
    if spec.relation is Relation.CLOSE:
        return 1 if dist < spec.d else 0
    return 1 if dist > spec.d else 0


def correlational_likelihood(
    z: Detection,
    x_target: Cell,
    pose: Pose,
    det: DetectorParams,
    corr: CorrelationSpec,
    grid: GridMap,
) -> float:
    """``P(z | x_target, pose)`` for a correlated object: its detection
    likelihood marginalized over where the predicate allows it to be."""
    det_vec = detection_model(grid, det).likelihood_over_x(z.value, pose)
    row = correlation_model(grid, corr).cond[grid.free_index[x_target]]
    return float(row @ det_vec)


def correlational_likelihood_over_targets(
    z: Detection,
    pose: Pose,
    det: DetectorParams,
    corr: CorrelationSpec,
    grid: GridMap,
) -> np.ndarray:
    """Vector of correlational likelihoods over every free target cell."""
    det_vec = detection_model(grid, det).likelihood_over_x(z.value, pose)
    return correlation_model(grid, corr).cond @ det_vec
