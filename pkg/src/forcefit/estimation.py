"""Brute-force coefficient estimation.

Every (C_l, C_d) pair on a grid is scored against a labelled dataset by
simulating each configuration and comparing outcomes. The pair is chosen by
3-point accuracy, then 2-point accuracy, then mean and median deviation over
the rows labelled (1,1).
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .datagen import Dataset, DatasetError, Provenance, lattice
from .physics import CoefficientPair
from .trajectory import PhysicsContext, score_deviations, simulate_outcomes

log = logging.getLogger(__name__)

SCORE_COLUMNS = ("cl", "cd", "acc3", "acc2", "mean_dev", "median_dev")

# Pairs per work unit; fixed so the split never depends on the worker count.
_PAIRS_PER_TASK = 64


@dataclass(frozen=True)
class GridSpec:
    """Inclusive lattice shared by the lift and drag axes."""

    min: float = 0.0
    max: float = 5.0
    step: float = 0.005

    def __post_init__(self):
        if not (self.min >= 0 and self.step > 0 and self.max > self.min):
            raise ValueError(f"invalid grid min={self.min} max={self.max} step={self.step}")

    def values(self, drop_min: bool = False) -> np.ndarray:
        values = lattice(self.min, self.max, self.step)
        return values[1:] if drop_min else values


@dataclass(frozen=True)
class PairScore:
    pair: CoefficientPair
    acc3: float
    acc2: float
    mean_dev: float
    median_dev: float

    def sort_key(self):
        return (-self.acc3, -self.acc2, self.mean_dev, self.median_dev, self.pair.lift, self.pair.drag)

    def as_row(self):
        return (self.pair.lift, self.pair.drag, self.acc3, self.acc2, self.mean_dev, self.median_dev)


def _score_pairs(lifts, drags, data: Dataset, ctx: PhysicsContext) -> list[PairScore]:
    n = len(data)
    X = data.X
    _, dev = simulate_outcomes(
        X[None, :, 0], X[None, :, 1], X[None, :, 2], lifts[:, None], drags[:, None], ctx
    )
    dev = dev.reshape(len(lifts), n)
    hit2, hit3 = score_deviations(dev, ctx.target)
    acc3 = (hit3 == data.Y[:, 1].astype(bool)).sum(axis=1) / n
    acc2 = (hit2 == data.Y[:, 0].astype(bool)).sum(axis=1) / n
    bullseye = data.classes == 2
    scores = []
    for i in range(len(lifts)):
        d = dev[i, bullseye]
        d = d[np.isfinite(d)]
        mean = float(np.mean(d)) if len(d) else math.inf
        median = float(np.median(d)) if len(d) else math.inf
        scores.append(
            PairScore(CoefficientPair(float(lifts[i]), float(drags[i])), float(acc3[i]), float(acc2[i]), mean, median)
        )
    return scores


def _check_data(data: Dataset):
    if len(data) == 0:
        raise DatasetError("cannot evaluate coefficients against an empty dataset")


def evaluate_pair(pair: CoefficientPair, data: Dataset, ctx: PhysicsContext) -> PairScore:
    """Outcome accuracies and (1,1)-row deviation statistics for one pair."""
    _check_data(data)
    return _score_pairs(np.array([pair.lift]), np.array([pair.drag]), data, ctx)[0]


def _score_task(args):
    return _score_pairs(*args)


def grid_search(
    data: Dataset,
    grid: GridSpec,
    ctx: PhysicsContext,
    workers: int = 1,
    drop_min: bool = False,
    drag_grid: GridSpec | None = None,
) -> list[PairScore]:
    """Score every pair of the grid, ordered by lift then drag.

    ``grid`` spans both axes unless ``drag_grid`` is given. ``drop_min``
    drops each axis' minimum, so the default grid has 1000 values per axis
    instead of 1001.
    """
    _check_data(data)
    lift_axis = grid.values(drop_min=drop_min)
    drag_axis = (drag_grid or grid).values(drop_min=drop_min)
    lifts, drags = (a.ravel() for a in np.meshgrid(lift_axis, drag_axis, indexing="ij"))
    log.info(
        "grid search: %d x %d = %d pairs over %d rows", len(lift_axis), len(drag_axis), len(lifts), len(data)
    )
    tasks = [
        (lifts[i : i + _PAIRS_PER_TASK], drags[i : i + _PAIRS_PER_TASK], data, ctx)
        for i in range(0, len(lifts), _PAIRS_PER_TASK)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_score_task, tasks))
    else:
        parts = [_score_task(task) for task in tasks]
    return [score for part in parts for score in part]


def rank(scores) -> list[PairScore]:
    """Scores in selection order, best first."""
    return sorted(scores, key=PairScore.sort_key)


def select_pair(scores) -> CoefficientPair:
    scores = list(scores)
    if not scores:
        raise ValueError("no candidate pairs to select from")
    return min(scores, key=PairScore.sort_key).pair


def write_scores(scores, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_COLUMNS)
        for score in scores:
            writer.writerow([repr(float(v)) for v in score.as_row()])


class CoefficientEstimator(BaseEstimator):
    """Grid-search fit of the lift/drag pair to labelled launches.

    ``X`` rows are (distance_m, motor_ratio, angle_deg); ``y`` rows are
    (hit2, hit3). After ``fit``, ``coef_`` holds the selected pair and
    ``scores_`` every evaluated pair in selection order. The drag axis
    reuses the ``grid_*`` bounds unless ``drag_*`` values are set.
    """

    def __init__(
        self,
        grid_min=0.0,
        grid_max=5.0,
        grid_step=0.005,
        drag_min=None,
        drag_max=None,
        drag_step=None,
        drop_min=False,
        context=None,
        n_jobs=1,
    ):
        self.grid_min = grid_min
        self.grid_max = grid_max
        self.grid_step = grid_step
        self.drag_min = drag_min
        self.drag_max = drag_max
        self.drag_step = drag_step
        self.drop_min = drop_min
        self.context = context
        self.n_jobs = n_jobs

    def _ctx(self):
        return self.context if self.context is not None else PhysicsContext()

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, dtype=float)
        data = Dataset(X, y, Provenance.EXPERIMENTAL)
        grid = GridSpec(self.grid_min, self.grid_max, self.grid_step)
        drag_grid = GridSpec(
            self.grid_min if self.drag_min is None else self.drag_min,
            self.grid_max if self.drag_max is None else self.drag_max,
            self.grid_step if self.drag_step is None else self.drag_step,
        )
        scores = grid_search(
            data, grid, self._ctx(), workers=self.n_jobs, drop_min=self.drop_min, drag_grid=drag_grid
        )
        self.scores_ = rank(scores)
        self.best_score_ = self.scores_[0]
        self.coef_ = self.best_score_.pair
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        ctx = self._ctx()
        _, dev = simulate_outcomes(X[:, 0], X[:, 1], X[:, 2], self.coef_.lift, self.coef_.drag, ctx)
        hit2, hit3 = score_deviations(dev, ctx.target)
        return np.column_stack([hit2, hit3]).astype(np.int8)

    def score(self, X, y):
        """Fraction of rows whose predicted (hit2, hit3) matches exactly."""
        y = np.asarray(y)
        return float((self.predict(X) == y).all(axis=1).mean())
