"""Datasets of launch configurations and outcomes.

Configurations are stored column-wise as an ``(n, 3)`` float array
(distance_m, motor_ratio, angle_deg) and outcomes as an ``(n, 2)`` int array
(hit2, hit3). The three valid outcomes map to class ids 0 = (0,0), 1 = (1,0)
and 2 = (1,1).
"""
from __future__ import annotations

import csv
import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .physics import CoefficientPair, LaunchConfig
from .trajectory import Outcome, PhysicsContext, score_deviations, simulate_outcomes

log = logging.getLogger(__name__)

HEADER = ("distance_m", "motor_ratio", "angle_deg", "hit2", "hit3")
CLASS_LABELS = ((0, 0), (1, 0), (1, 1))
PUBLISHED_GRID_TOTAL = 375_000


class DatasetError(ValueError):
    pass


class Provenance(str, enum.Enum):
    EXPERIMENTAL = "experimental"
    SIMULATED = "simulated"


def _check_rows(X, Y):
    """Vectorised range and containment checks; returns (row, message) of the first failure."""
    checks = (
        (~(np.isfinite(X[:, 0]) & (X[:, 0] > 0)), "distance_m must be > 0"),
        (~(np.isfinite(X[:, 1]) & (X[:, 1] >= 0) & (X[:, 1] <= 1)), "motor_ratio must be in [0, 1]"),
        (~(np.isfinite(X[:, 2]) & (X[:, 2] > 0) & (X[:, 2] < 90)), "angle_deg must be in (0, 90)"),
        (~np.isin(Y, (0, 1)).all(axis=1), "hit2/hit3 must be 0 or 1"),
        ((Y[:, 1] == 1) & (Y[:, 0] == 0), "hit3=1 with hit2=0 violates 3pt => 2pt containment"),
    )
    first = None
    for bad, message in checks:
        rows = np.flatnonzero(bad)
        if len(rows) and (first is None or rows[0] < first[0]):
            first = (int(rows[0]), message)
    return first


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    provenance: Provenance = Provenance.SIMULATED

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, 3)
        self.Y = np.asarray(self.Y, dtype=np.int8).reshape(-1, 2)
        self.provenance = Provenance(self.provenance)
        if len(self.X) != len(self.Y):
            raise DatasetError(f"{len(self.X)} configurations but {len(self.Y)} outcomes")
        bad = _check_rows(self.X, self.Y)
        if bad is not None:
            raise DatasetError(f"row {bad[0]}: {bad[1]}")

    @classmethod
    def from_rows(cls, rows, provenance=Provenance.SIMULATED) -> "Dataset":
        rows = list(rows)
        X = [(c.distance, c.motor_ratio, c.angle) for c, _ in rows]
        Y = [o.as_tuple() for _, o in rows]
        return cls(np.array(X, dtype=float).reshape(-1, 3), np.array(Y).reshape(-1, 2), provenance)

    @classmethod
    def empty(cls, provenance=Provenance.SIMULATED) -> "Dataset":
        return cls(np.empty((0, 3)), np.empty((0, 2)), provenance)

    def __len__(self):
        return len(self.X)

    def __iter__(self):
        for x, y in zip(self.X.tolist(), self.Y.tolist()):
            yield LaunchConfig(*x), Outcome(bool(y[0]), bool(y[1]))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.provenance == other.provenance
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.Y, other.Y)
        )

    @property
    def classes(self) -> np.ndarray:
        return self.Y.sum(axis=1).astype(np.int64)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.classes, minlength=3)

    def take(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.Y[idx], self.provenance)

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(np.vstack([self.X, other.X]), np.vstack([self.Y, other.Y]), self.provenance)


def write_dataset(data: Dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        for x, y in zip(data.X.tolist(), data.Y.tolist()):
            writer.writerow([repr(v) for v in x] + [str(v) for v in y])


def read_dataset(path, provenance=Provenance.EXPERIMENTAL) -> Dataset:
    """Read a dataset CSV, validating every row.

    Errors name the 1-based file line and the offending field.
    """
    X, Y = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise DatasetError(f"{path}:1: expected header {','.join(HEADER)}")
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(HEADER):
                raise DatasetError(f"{path}:{lineno}: expected {len(HEADER)} fields, got {len(row)}")
            values = []
            for name, text in zip(HEADER, row):
                try:
                    values.append(float(text) if name in HEADER[:3] else int(text))
                except ValueError:
                    raise DatasetError(f"{path}:{lineno}: {name}: cannot parse {text!r}") from None
            x, y = values[:3], values[3:]
            bad = _check_rows(np.array([x], dtype=float), np.array([y]))
            if bad is not None:
                raise DatasetError(f"{path}:{lineno}: {bad[1]} (got {dict(zip(HEADER, row))})")
            X.append(x)
            Y.append(y)
    return Dataset(np.array(X, dtype=float).reshape(-1, 3), np.array(Y).reshape(-1, 2), provenance)


# -- configuration grid -------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    min: float
    max: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be > 0, got {self.step}")
        if self.max < self.min:
            raise ValueError(f"max {self.max} < min {self.min}")

    def values(self) -> np.ndarray:
        return lattice(self.min, self.max, self.step)


def lattice(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive ``lo, lo + step, ..., hi`` snapped to the step lattice."""
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 10)


@dataclass(frozen=True)
class GenerationRanges:
    motor: Axis = field(default_factory=lambda: Axis(0.0, 1.0, 0.01))
    angle_deg: Axis = field(default_factory=lambda: Axis(15.0, 75.0, 1.0))
    distance_m: Axis = field(default_factory=lambda: Axis(1.0, 16.0, 0.2))

    def counts(self) -> tuple[int, int, int]:
        return len(self.distance_m.values()), len(self.angle_deg.values()), len(self.motor.values())


def generate_grid(ranges: GenerationRanges | None = None) -> np.ndarray:
    """Cartesian product of the ranges, ordered by distance, then angle, then motor.

    Returns an ``(n, 3)`` array in dataset column order.
    """
    ranges = ranges or GenerationRanges()
    d, a, m = np.meshgrid(
        ranges.distance_m.values(), ranges.angle_deg.values(), ranges.motor.values(), indexing="ij"
    )
    grid = np.column_stack([d.ravel(), m.ravel(), a.ravel()])
    if ranges == GenerationRanges() and len(grid) != PUBLISHED_GRID_TOTAL:
        log.warning(
            "configuration grid has %d points (%d distances x %d angles x %d motor ratios), "
            "not the published total of %d",
            len(grid), *ranges.counts(), PUBLISHED_GRID_TOTAL,
        )
    return grid


def _label_chunk(args):
    X, pair, ctx = args
    _, dev = simulate_outcomes(X[:, 0], X[:, 1], X[:, 2], pair.lift, pair.drag, ctx)
    hit2, hit3 = score_deviations(dev, ctx.target)
    return np.column_stack([hit2, hit3]).astype(np.int8)


def label_grid(configs, pair: CoefficientPair, ctx: PhysicsContext, workers: int = 1, chunk: int = 20000) -> Dataset:
    """Label every configuration by simulating it with ``pair``."""
    X = np.asarray(configs, dtype=float).reshape(-1, 3)
    if len(X) == 0:
        raise DatasetError("no configurations to label")
    bad = _check_rows(X, np.zeros((len(X), 2), dtype=np.int8))
    if bad is not None:
        raise DatasetError(f"configuration {bad[0]}: {bad[1]}")
    jobs = [(X[i : i + chunk], pair, ctx) for i in range(0, len(X), chunk)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_label_chunk, jobs))
    else:
        parts = [_label_chunk(job) for job in jobs]
    return Dataset(X, np.vstack(parts), Provenance.SIMULATED)


# -- sampling and splitting ---------------------------------------------------


def _quotas(n: int, rng: np.random.Generator) -> np.ndarray:
    quotas = np.full(3, n // 3)
    quotas[rng.permutation(3)[: n % 3]] += 1
    return quotas


def _row_keys(X: np.ndarray) -> set:
    return {tuple(row) for row in X.tolist()}


def balanced_sample(pool: Dataset, n: int, exclude: Dataset | None = None, seed: int = 0) -> Dataset:
    """Draw ``n`` rows without replacement with per-class counts within 1 of each other.

    Rows whose configuration appears in ``exclude`` are never drawn.
    """
    if n < 0:
        raise DatasetError(f"n must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    quotas = _quotas(n, rng)
    keep = np.ones(len(pool), dtype=bool)
    if exclude is not None and len(exclude):
        banned = _row_keys(exclude.X)
        keep = np.array([tuple(row) not in banned for row in pool.X.tolist()], dtype=bool)
    classes = pool.classes
    chosen = []
    for cls, quota in enumerate(quotas):
        candidates = np.flatnonzero(keep & (classes == cls))
        if len(candidates) < quota:
            raise DatasetError(
                f"class {CLASS_LABELS[cls]} has {len(candidates)} eligible rows, need {quota}"
            )
        chosen.append(rng.choice(candidates, size=quota, replace=False))
    idx = rng.permutation(np.concatenate(chosen).astype(np.int64))
    return Dataset(pool.X[idx], pool.Y[idx], Provenance.SIMULATED)


def split(data: Dataset, test_fraction: float = 0.2, seed: int = 0, stratify: bool = True):
    """Disjoint train/test partition with ``round(test_fraction * n)`` test rows.

    Stratified by class when every present class has at least
    ``1 / test_fraction`` rows.
    """
    if not 0 < test_fraction < 1:
        raise DatasetError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(data)
    n_test = int(math.floor(test_fraction * n + 0.5))
    rng = np.random.default_rng(seed)
    counts = data.class_counts()
    present = counts[counts > 0]
    if stratify and len(present) and present.min() >= 1 / test_fraction:
        # largest-remainder allocation of the test rows across classes
        exact = counts * n_test / n
        alloc = np.floor(exact).astype(int)
        order = np.argsort(-(exact - alloc), kind="stable")
        alloc[order[: n_test - alloc.sum()]] += 1
        test_idx = np.concatenate(
            [rng.choice(np.flatnonzero(data.classes == c), size=alloc[c], replace=False) for c in range(3)]
        )
    else:
        test_idx = rng.permutation(n)[:n_test]
    is_test = np.zeros(n, dtype=bool)
    is_test[test_idx.astype(np.int64)] = True
    return data.take(~is_test), data.take(is_test)


# -- stand-in for measured launches ---------------------------------------------


def make_pseudo_experimental(
    n: int,
    pair: CoefficientPair,
    ctx: PhysicsContext,
    noise: float = 0.0,
    seed: int = 0,
    ranges: GenerationRanges | None = None,
    deformation: float = 0.0,
) -> Dataset:
    """Class-balanced "measured" launches labelled by a hidden coefficient pair.

    Configurations are drawn uniformly from the continuous generation ranges,
    so they essentially never coincide with grid points. With probability
    ``noise`` a row's label is replaced by one of the other two classes.

    ``deformation`` makes the hidden ball depart from the constant-coefficient
    model: with ``s = deformation * (2 * motor_ratio - 1)`` each launch flies
    with lift ``cl * (1 - s)`` and drag ``cd * (1 + s)``, mimicking a ball that
    squashes harder at high flywheel speed. No single pair reproduces such data.
    """
    if n < 1:
        raise DatasetError(f"n must be >= 1, got {n}")
    if not 0 <= noise <= 1:
        raise DatasetError(f"noise must be in [0, 1], got {noise}")
    if not 0 <= deformation < 1:
        raise DatasetError(f"deformation must be in [0, 1), got {deformation}")
    ranges = ranges or GenerationRanges()
    rng = np.random.default_rng(seed)
    quotas = _quotas(n, rng)
    picked = [[] for _ in range(3)]
    for _ in range(200):
        if all(len(p) >= q for p, q in zip(picked, quotas)):
            break
        m = max(2000, 20 * n)
        X = np.column_stack(
            [
                rng.uniform(ranges.distance_m.min, ranges.distance_m.max, m),
                rng.uniform(ranges.motor.min, ranges.motor.max, m),
                rng.uniform(ranges.angle_deg.min, ranges.angle_deg.max, m),
            ]
        )
        s = deformation * (2 * X[:, 1] - 1)
        _, dev = simulate_outcomes(X[:, 0], X[:, 1], X[:, 2], pair.lift * (1 - s), pair.drag * (1 + s), ctx)
        hit2, hit3 = score_deviations(dev, ctx.target)
        classes = hit2.astype(int) + hit3.astype(int)
        for row, cls in zip(X, classes):
            if len(picked[cls]) < quotas[cls]:
                picked[cls].append(row)
    else:
        raise DatasetError(f"could not find enough launches of every class for {pair}")
    X = np.array([row for rows in picked for row in rows])
    classes = np.repeat(np.arange(3), quotas)
    order = rng.permutation(len(X))
    X, classes = X[order], classes[order]
    flip = rng.random(len(X)) < noise
    classes[flip] = (classes[flip] + rng.integers(1, 3, flip.sum())) % 3
    Y = np.array(CLASS_LABELS)[classes]
    return Dataset(X, Y, Provenance.EXPERIMENTAL)
