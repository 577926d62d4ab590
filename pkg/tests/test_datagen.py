import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forcefit.datagen import (
    Axis,
    Dataset,
    DatasetError,
    GenerationRanges,
    Provenance,
    balanced_sample,
    generate_grid,
    label_grid,
    make_pseudo_experimental,
    read_dataset,
    split,
    write_dataset,
)
from forcefit.physics import CoefficientPair
from forcefit.trajectory import PhysicsContext

CTX = PhysicsContext()
PAIR = CoefficientPair(0.06, 0.91)
CLASSES = np.array([[0, 0], [1, 0], [1, 1]])


def synthetic(counts, seed=0):
    """Dataset with ``counts[k]`` rows of class k at distinct grid-like configs."""
    rng = np.random.default_rng(seed)
    n = sum(counts)
    X = np.column_stack([1 + 0.2 * rng.permutation(n), rng.integers(0, 101, n) / 100, rng.integers(15, 76, n)])
    Y = np.repeat(CLASSES, counts, axis=0)
    return Dataset(X.astype(float), Y.astype(np.int8))


def test_default_grid_size():
    assert GenerationRanges().counts() == (76, 61, 101)
    assert len(generate_grid()) == 468_236


def test_collapsed_motor_axis():
    ranges = GenerationRanges(motor=Axis(0.5, 0.5, 0.01))
    grid = generate_grid(ranges)
    assert len(grid) == 61 * 76 == 4_636
    assert np.all(grid[:, 1] == 0.5)


def test_single_point_grid():
    ranges = GenerationRanges(Axis(0.5, 0.5, 0.01), Axis(45, 45, 1), Axis(5, 5, 0.2))
    assert generate_grid(ranges).tolist() == [[5.0, 0.5, 45.0]]


def test_grid_values_are_snapped():
    grid = generate_grid()
    assert 15.0 in grid[:, 0] and 0.07 in grid[:, 1] and 75.0 in grid[:, 2]
    assert len(np.unique(grid, axis=0)) == len(grid)


def test_label_zero_motor_and_low_vacuum_shot():
    X = np.array([[5.0, 0.0, 45.0], [16.0, 0.05, 15.0]])
    labelled = label_grid(X, CoefficientPair(0.0, 0.0), CTX)
    assert labelled.Y.tolist() == [[0, 0], [0, 0]]


def test_label_grid_parallel_matches_serial():
    X = generate_grid(GenerationRanges(motor=Axis(0.3, 0.9, 0.05), distance_m=Axis(2, 6, 1)))
    serial = label_grid(X, PAIR, CTX, chunk=100)
    parallel = label_grid(X, PAIR, CTX, workers=2, chunk=100)
    assert serial == parallel


def test_balanced_sample_900():
    pool = synthetic([400, 350, 320])
    sample = balanced_sample(pool, 900, seed=3)
    assert sample.class_counts().tolist() == [300, 300, 300]


def test_balanced_sample_remainder_by_seed():
    pool = synthetic([5, 5, 5])
    counts = balanced_sample(pool, 4, seed=0).class_counts()
    assert sorted(counts.tolist()) == [1, 1, 2]
    assert np.array_equal(balanced_sample(pool, 4, seed=0).X, balanced_sample(pool, 4, seed=0).X)


def test_balanced_sample_starved_class():
    pool = synthetic([10, 10, 10])
    three_pt = pool.take(np.flatnonzero(pool.classes == 2))
    with pytest.raises(DatasetError, match=r"\(1, 1\)|3-point|class"):
        balanced_sample(pool, 6, exclude=three_pt)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 60), st.integers(0, 10_000))
def test_balanced_sample_properties(n, seed):
    pool = synthetic([30, 25, 40], seed=1)
    exclude = pool.take(np.arange(0, len(pool), 7))
    sample = balanced_sample(pool, n, exclude=exclude, seed=seed)
    counts = sample.class_counts()
    assert len(sample) == n and counts.max() - counts.min() <= 1
    banned = {tuple(r) for r in exclude.X.tolist()}
    assert not any(tuple(r) in banned for r in sample.X.tolist())
    assert len({tuple(r) for r in sample.X.tolist()}) == n


@pytest.mark.parametrize("n, sizes", [(100, (80, 20)), (10, (8, 2))])
def test_split_sizes(n, sizes):
    data = synthetic([n - 2 * (n // 3), n // 3, n // 3])
    train, test = split(data, 0.2, seed=1)
    assert (len(train), len(test)) == sizes


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 80), st.floats(0.01, 0.99), st.integers(0, 100), st.booleans())
def test_split_is_partition(n, frac, seed, stratify):
    data = synthetic([n, n // 2, n // 3], seed=2)
    train, test = split(data, frac, seed=seed, stratify=stratify)
    rows = sorted(map(tuple, np.hstack([data.X, data.Y]).tolist()))
    parts = sorted(map(tuple, np.vstack([np.hstack([s.X, s.Y]) for s in (train, test)]).tolist()))
    assert rows == parts


def test_split_deterministic():
    data = synthetic([30, 30, 40])
    a, b = split(data, 0.2, seed=9), split(data, 0.2, seed=9)
    assert a[0] == b[0] and a[1] == b[1]


def test_csv_roundtrip(tmp_path):
    data = make_pseudo_experimental(30, PAIR, CTX, noise=0.1, seed=4)
    path = tmp_path / "d.csv"
    write_dataset(data, path)
    assert path.read_text().splitlines()[0] == "distance_m,motor_ratio,angle_deg,hit2,hit3"
    back = read_dataset(path, Provenance.EXPERIMENTAL)
    assert back == data
    assert np.array_equal(back.X, data.X)


def test_csv_rejects_bad_angle(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("distance_m,motor_ratio,angle_deg,hit2,hit3\n5,0.5,45,1,0\n5,0.5,95,0,0\n")
    with pytest.raises(DatasetError, match=r":3:.*angle"):
        read_dataset(path)


def test_csv_rejects_containment_violation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("distance_m,motor_ratio,angle_deg,hit2,hit3\n5,0.5,45,0,1\n")
    with pytest.raises(DatasetError, match=r":2:.*hit3"):
        read_dataset(path)


@pytest.mark.parametrize("row", ["5,0.5,45,1", "5,x,45,1,0", "5,0.5,45,2,0"])
def test_csv_rejects_malformed(tmp_path, row):
    path = tmp_path / "bad.csv"
    path.write_text(f"distance_m,motor_ratio,angle_deg,hit2,hit3\n{row}\n")
    with pytest.raises(DatasetError, match=":2:"):
        read_dataset(path)


def test_dataset_rejects_bad_rows():
    with pytest.raises(DatasetError):
        Dataset(np.array([[5.0, 0.5, 45.0]]), np.array([[0, 1]], dtype=np.int8))


def test_pseudo_experimental_balanced_and_labelled():
    data = make_pseudo_experimental(60, PAIR, CTX, noise=0.0, seed=1)
    assert data.class_counts().tolist() == [20, 20, 20]
    assert data.provenance == Provenance.EXPERIMENTAL
    assert label_grid(data.X, PAIR, CTX).Y.tolist() == data.Y.tolist()


def test_pseudo_experimental_noise_flips_labels():
    clean = make_pseudo_experimental(300, PAIR, CTX, noise=0.0, seed=1)
    noisy = make_pseudo_experimental(300, PAIR, CTX, noise=0.2, seed=1)
    relabelled = label_grid(noisy.X, PAIR, CTX).Y
    flipped = (relabelled != noisy.Y).any(axis=1).mean()
    assert 0.1 < flipped < 0.3
    assert np.array_equal(clean.X, noisy.X)


def test_pseudo_experimental_deformation_departs_from_pair():
    data = make_pseudo_experimental(300, PAIR, CTX, deformation=0.3, seed=2)
    agree = (label_grid(data.X, PAIR, CTX).Y == data.Y).all(axis=1).mean()
    assert agree < 1.0
    with pytest.raises(DatasetError):
        make_pseudo_experimental(10, PAIR, CTX, deformation=1.5)
