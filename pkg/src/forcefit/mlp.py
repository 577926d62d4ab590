"""3-8-2 sigmoid network trained on measured plus simulated launches.

The objective is ``CE(real) + lam * CE(sim)`` with element-wise binary
cross-entropy over the two outputs (P(hit2), P(hit3)). One epoch walks the
shuffled simulated set in batches; each step pairs the simulated batch with
the next batch of an endlessly reshuffled cycle over the real set.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.metrics import f1_score
from sklearn.utils.validation import check_array, check_is_fitted

from .datagen import Dataset, DatasetError, Provenance

LAYER_DIMS = (3, 8, 2)
# distance_m, motor_ratio, angle_deg -> roughly [0, 1]
FEATURE_SCALE = (16.0, 1.0, 90.0)
PROB_EPS = 1e-7
MODEL_FORMAT = "forcefit-mlp"
MODEL_VERSION = 1


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class MlpModel:
    W1: np.ndarray  # (8, 3)
    b1: np.ndarray  # (8,)
    W2: np.ndarray  # (2, 8)
    b2: np.ndarray  # (2,)
    scale: tuple = FEATURE_SCALE

    def __post_init__(self):
        shapes = {"W1": (8, 3), "b1": (8,), "W2": (2, 8), "b2": (2,)}
        for name, shape in shapes.items():
            value = np.array(getattr(self, name), dtype=float)
            if value.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {value.shape}")
            if not np.isfinite(value).all():
                raise ValueError(f"{name} has non-finite entries")
            setattr(self, name, value)
        self.scale = tuple(float(s) for s in self.scale)

    layer_dims = LAYER_DIMS

    @classmethod
    def initialize(cls, seed=0) -> "MlpModel":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
        rng = np.random.default_rng(seed)
        params = []
        for fan_in, fan_out in zip(LAYER_DIMS[:-1], LAYER_DIMS[1:]):
            bound = 1 / math.sqrt(fan_in)
            params.append(rng.uniform(-bound, bound, (fan_out, fan_in)))
            params.append(rng.uniform(-bound, bound, fan_out))
        return cls(*params)

    @classmethod
    def zeros(cls) -> "MlpModel":
        return cls(np.zeros((8, 3)), np.zeros(8), np.zeros((2, 8)), np.zeros(2))

    @property
    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "MlpModel":
        return MlpModel(*(p.copy() for p in self.params), scale=self.scale)

    def normalize(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) / np.array(self.scale)


def _forward(model: MlpModel, X):
    h = sigmoid(X @ model.W1.T + model.b1)
    return h, sigmoid(h @ model.W2.T + model.b2)


def forward(model: MlpModel, X) -> np.ndarray:
    """Probabilities (P(hit2), P(hit3)) for normalized inputs of shape (3,) or (n, 3)."""
    X = np.asarray(X, dtype=float)
    return _forward(model, X)[1]


def cross_entropy(p, Y) -> float:
    """Mean element-wise binary cross-entropy; 0 for an empty batch."""
    if len(Y) == 0:
        return 0.0
    p = np.clip(p, PROB_EPS, 1 - PROB_EPS)
    return float(np.mean(-(Y * np.log(p) + (1 - Y) * np.log(1 - p))))


def loss(model: MlpModel, real, sim, lam: float) -> float:
    """``CE(F(X_r), Y_r) + lam * CE(F(X_s), Y_s)`` on normalized batches ``(X, Y)``."""
    total = cross_entropy(forward(model, real[0]), real[1]) if len(real[1]) else 0.0
    if len(sim[1]):
        total += lam * cross_entropy(forward(model, sim[0]), sim[1])
    return total


def _ce_and_grads(model: MlpModel, X, Y):
    h, p = _forward(model, X)
    q = np.clip(p, PROB_EPS, 1 - PROB_EPS)
    ce = float(np.mean(-(Y * np.log(q) + (1 - Y) * np.log(1 - q))))
    # d(mean BCE)/dz2 collapses to (p - y) / size, except where the clip is active
    dz2 = np.where(q == p, p - Y, 0.0) / Y.size
    dh = dz2 @ model.W2
    dz1 = dh * h * (1 - h)
    return ce, [dz1.T @ X, dz1.sum(axis=0), dz2.T @ h, dz2.sum(axis=0)]


def _loss_and_grad(model: MlpModel, real, sim, lam: float):
    total = 0.0
    grads = [np.zeros_like(p) for p in model.params]
    if len(real[1]):
        total, grads = _ce_and_grads(model, real[0], real[1])
    if len(sim[1]):
        ce, sim_grads = _ce_and_grads(model, sim[0], sim[1])
        total += lam * ce
        grads = [g + lam * s for g, s in zip(grads, sim_grads)]
    return total, grads


def grad(model: MlpModel, real, sim, lam: float) -> list[np.ndarray]:
    """Analytic gradient of :func:`loss`, ordered like ``model.params``."""
    real = (np.asarray(real[0], float), np.asarray(real[1], float))
    sim = (np.asarray(sim[0], float), np.asarray(sim[1], float))
    return _loss_and_grad(model, real, sim, lam)[1]


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        """Update ``params`` in place."""
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 10
    lam: float = 0.01
    epochs: int = 200
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")


class _Cycle:
    """Endless batches over ``range(n)``, reshuffled at every wrap."""

    def __init__(self, n, batch_size, rng):
        self.n, self.batch_size, self.rng = n, batch_size, rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next(self) -> np.ndarray:
        out = []
        need = self.batch_size
        while need:
            if self.pos == self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
            take = self.order[self.pos : self.pos + need]
            self.pos += len(take)
            need -= len(take)
            out.append(take)
        return np.concatenate(out)


def train(model: MlpModel, real: Dataset, sim: Dataset, cfg: TrainConfig):
    """Train a copy of ``model``; returns ``(trained, per-epoch mean loss)``.

    With an empty ``sim`` an epoch is ``ceil(len(real) / batch_size)`` steps
    on the real data alone.
    """
    if len(real) == 0:
        raise DatasetError("training needs at least one real launch")
    model = model.copy()
    real_rng, sim_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    Xr, Yr = model.normalize(real.X), real.Y.astype(float)
    Xs, Ys = model.normalize(sim.X), sim.Y.astype(float)
    cycle = _Cycle(len(real), cfg.batch_size, real_rng)
    opt = Adam(model.params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    no_sim = (np.empty((0, 3)), np.empty((0, 2)))
    history = []
    for _ in range(cfg.epochs):
        if len(sim):
            order = sim_rng.permutation(len(sim))
            sim_batches = [order[i : i + cfg.batch_size] for i in range(0, len(sim), cfg.batch_size)]
        else:
            sim_batches = [None] * math.ceil(len(real) / cfg.batch_size)
        losses = []
        for sb in sim_batches:
            rb = cycle.next()
            r = (Xr[rb], Yr[rb])
            s = no_sim if sb is None else (Xs[sb], Ys[sb])
            value, grads = _loss_and_grad(model, r, s, cfg.lam)
            losses.append(value)
            opt.step(model.params, grads)
        history.append(float(np.mean(losses)))
    return model, history


@dataclass(frozen=True)
class Metrics:
    overall_acc: float
    f1_3pt: float
    f1_2pt: float

    def as_row(self):
        return (self.overall_acc, self.f1_3pt, self.f1_2pt)


def predict(model: MlpModel, X, threshold=0.5) -> np.ndarray:
    """Thresholded (hit2, hit3) for raw configurations; p == threshold counts as a miss.

    A predicted 3-pointer always implies a predicted 2-pointer.
    """
    p = forward(model, model.normalize(np.asarray(X, dtype=float).reshape(-1, 3)))
    pred = (p > threshold).astype(np.int8)
    pred[:, 0] |= pred[:, 1]
    return pred


def evaluate(model: MlpModel, test: Dataset, threshold=0.5) -> Metrics:
    if len(test) == 0:
        raise DatasetError("cannot evaluate on an empty dataset")
    pred = predict(model, test.X, threshold)
    return Metrics(
        overall_acc=float((pred == test.Y).all(axis=1).mean()),
        f1_3pt=float(f1_score(test.Y[:, 1], pred[:, 1], zero_division=1.0)),
        f1_2pt=float(f1_score(test.Y[:, 0], pred[:, 0], zero_division=1.0)),
    )


def lambda_sweep(real: Dataset, sim: Dataset, test: Dataset, lambdas, cfg: TrainConfig | None = None):
    """Train one model per lambda from the same seed; returns ``[(lam, Metrics)]``."""
    cfg = cfg or TrainConfig()
    rows = []
    for lam in lambdas:
        run = TrainConfig(**{**cfg.__dict__, "lam": float(lam)})
        model, _ = train(MlpModel.initialize(run.seed), real, sim, run)
        rows.append((float(lam), evaluate(model, test)))
    return rows


def save_model(model: MlpModel, path, extra: dict | None = None):
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_dims": list(LAYER_DIMS),
        "activation": "sigmoid",
        "feature_order": ["distance_m", "motor_ratio", "angle_deg"],
        "feature_scale": list(model.scale),
        "weights": [model.W1.tolist(), model.W2.tolist()],
        "biases": [model.b1.tolist(), model.b2.tolist()],
    }
    if extra:
        doc["meta"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> MlpModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')!r}")
    if tuple(doc["layer_dims"]) != LAYER_DIMS:
        raise ValueError(f"{path}: expected layer_dims {list(LAYER_DIMS)}, got {doc['layer_dims']}")
    (W1, W2), (b1, b2) = doc["weights"], doc["biases"]
    return MlpModel(W1, b1, W2, b2, scale=doc["feature_scale"])


class LaunchClassifier(ClassifierMixin, BaseEstimator):
    """Estimator wrapper around :func:`train` for (hit2, hit3) prediction.

    ``fit(X, y, X_sim=None, y_sim=None)`` takes raw configurations; the
    simulated pair is optional and weighted by ``lam``.
    """

    def __init__(self, learning_rate=1e-4, batch_size=10, lam=0.01, epochs=200, random_state=0):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.lam = lam
        self.epochs = epochs
        self.random_state = random_state

    def fit(self, X, y, X_sim=None, y_sim=None):
        real = Dataset(check_array(X, dtype=float), np.asarray(y), Provenance.EXPERIMENTAL)
        if X_sim is None:
            sim = Dataset.empty()
        else:
            sim = Dataset(check_array(X_sim, dtype=float), np.asarray(y_sim), Provenance.SIMULATED)
        cfg = TrainConfig(self.learning_rate, self.batch_size, self.lam, self.epochs, self.random_state)
        self.model_, self.loss_history_ = train(MlpModel.initialize(self.random_state), real, sim, cfg)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        return forward(self.model_, self.model_.normalize(X))

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict(self.model_, check_array(X, dtype=float))

    def score(self, X, y):
        """Fraction of rows where both outputs are right."""
        return float((self.predict(X) == np.asarray(y)).all(axis=1).mean())
