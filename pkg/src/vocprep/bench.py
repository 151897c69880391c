"""Feature extraction, one-vs-rest linear SVM and the convergence benchmark.

The classifier is a primal Pegasos-style trainer: at global step ``t`` the
learning rate is ``1 / (lambda * t)``, weights decay by ``1 - eta * lambda``
and a margin violation adds ``eta * y * x``. The bias is an unregularized
extra coordinate. All one-vs-rest binary problems see the same sample order,
so they are trained together as a weight matrix.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import imagecore, normalize
from .errors import DataError, DimensionMismatch, NonPositiveLambda, SingleClass, UnreadableImage
from .imagecore import ImageBuffer, resize_bilinear, rgb_to_gray
from .normalize import NormModel
from .pipeline import PipelineSpec, apply_pipeline
from .vocdata import DatasetIndex

VALIDATION_FRACTION = 0.2
# fields that depend on the host clock; everything else in a report is reproducible
WALL_CLOCK_FIELDS = frozenset({"cumulative_wall_ms", "wall_ms_to_threshold", "wall_ms", "total_wall_ms"})


@dataclass(frozen=True)
class FeatureSpec:
    resize_dim: int = 32
    to_gray: bool = True
    norm: str | None = None  # "mean" | "standardize" | "zca"
    epsilon: float = normalize.DEFAULT_EPSILON

    def __post_init__(self):
        if self.resize_dim < 4:
            raise DataError(f"resize_dim must be >= 4, got {self.resize_dim}")
        if self.norm is not None and self.norm not in normalize.KINDS:
            raise DataError(f"unknown normalization {self.norm!r}")

    def to_json(self) -> dict:
        return {"resize_dim": self.resize_dim, "to_gray": self.to_gray, "norm": self.norm, "epsilon": self.epsilon}

    @classmethod
    def from_json(cls, data: dict | None) -> FeatureSpec:
        data = dict(data or {})
        unknown = set(data) - {"resize_dim", "to_gray", "norm", "epsilon"}
        if unknown:
            raise DataError(f"unknown feature keys {sorted(unknown)}")
        return cls(**data)


def image_features(image: ImageBuffer, spec: PipelineSpec, feature: FeatureSpec, seed: int) -> np.ndarray:
    """One flattened, [0, 1]-scaled feature row for a single image."""
    image = apply_pipeline(spec, image, seed, auto_gray=feature.to_gray)
    if feature.to_gray and not image.is_gray:
        image = rgb_to_gray(image)
    image = resize_bilinear(image, feature.resize_dim, feature.resize_dim)
    return image.pixels.reshape(-1).astype(np.float64) / 255.0


def labels_of(index: DatasetIndex) -> list[str]:
    labels = []
    for rec in index.records:
        label = rec.annotation.dominant_class()
        if label is None:
            raise DataError(f"{rec.image_path}: annotation has no objects to derive a label from")
        labels.append(label)
    return labels


def raw_features(index: DatasetIndex, spec: PipelineSpec, feature: FeatureSpec, seed: int = 0) -> np.ndarray:
    rows = []
    for i, rec in enumerate(index.records):
        try:
            image = imagecore.load(rec.image_path)
        except (OSError, DataError) as exc:
            raise UnreadableImage(f"{rec.image_path}: {exc}") from exc
        try:
            rows.append(image_features(image, spec, feature, seed ^ i))
        except DataError as exc:
            raise type(exc)(f"{rec.image_path}: {exc}") from exc
    if not rows:
        raise DataError("no images to extract features from")
    if len({r.shape for r in rows}) > 1:
        raise DimensionMismatch("images produced feature rows of different lengths (mixed channel counts?)")
    return np.vstack(rows)


def normalize_features(x: np.ndarray, feature: FeatureSpec, fit_rows=None) -> tuple[np.ndarray, NormModel | None]:
    if feature.norm is None:
        return x, None
    basis = x if fit_rows is None else x[np.asarray(fit_rows)]
    model = normalize.fit(feature.norm, basis, feature.epsilon)
    return normalize.apply(model, x), model


def extract_features(
    index: DatasetIndex, spec: PipelineSpec, feature: FeatureSpec, seed: int = 0, fit_rows=None
) -> tuple[np.ndarray, list[str]]:
    """Feature matrix and dominant-class labels, in index order.

    Normalization statistics are fitted on ``fit_rows`` (all rows by default).
    """
    labels = labels_of(index)
    x, _ = normalize_features(raw_features(index, spec, feature, seed), feature, fit_rows)
    return x, labels


# -- SVM ----------------------------------------------------------------------

@dataclass
class SvmModel:
    classes: list[str]
    weights: np.ndarray  # (n_classes, d)
    bias: np.ndarray  # (n_classes,)
    lam: float
    epochs_trained: int
    seed: int

    def scores(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.weights.shape[1]:
            raise DimensionMismatch(f"model expects {self.weights.shape[1]} features, got shape {x.shape}")
        return x @ self.weights.T + self.bias

    def to_json(self) -> dict:
        return {
            "classes": self.classes,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "lambda": self.lam,
            "epochs_trained": self.epochs_trained,
            "seed": self.seed,
        }


@dataclass
class EpochRow:
    epoch: int
    train_hinge_loss: float
    val_accuracy: float
    cumulative_wall_ms: float

    def to_json(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_hinge_loss": self.train_hinge_loss,
            "val_accuracy": self.val_accuracy,
            "cumulative_wall_ms": self.cumulative_wall_ms,
        }


@dataclass
class TrainLog:
    rows: list[EpochRow] = field(default_factory=list)
    n_train: int = 0
    n_val: int = 0
    final_train_accuracy: float | None = None

    def to_json(self) -> list[dict]:
        return [r.to_json() for r in self.rows]

    def to_csv(self) -> str:
        lines = ["epoch,train_hinge_loss,val_accuracy,cumulative_wall_ms"]
        for r in self.rows:
            lines.append(f"{r.epoch},{r.train_hinge_loss!r},{r.val_accuracy!r},{r.cumulative_wall_ms!r}")
        return "\n".join(lines) + "\n"


def split_indices(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded train/validation split; validation is the last 20% of a shuffle."""
    order = np.random.default_rng([seed, 1]).permutation(n)
    n_val = int(imagecore.round_half_away(VALIDATION_FRACTION * n))
    n_val = min(n_val, n - 1)
    return np.sort(order[: n - n_val]), np.sort(order[n - n_val :])


def svm_predict(model: SvmModel, x) -> list[str]:
    # np.argmax picks the first maximum, and classes are sorted
    picks = np.argmax(model.scores(x), axis=1)
    return [model.classes[i] for i in picks]


def accuracy(model: SvmModel, x, labels) -> float:
    if len(labels) == 0:
        return math.nan
    pred = svm_predict(model, x)
    return sum(p == y for p, y in zip(pred, labels)) / len(labels)


def _sign_matrix(labels, classes) -> np.ndarray:
    pos = {c: i for i, c in enumerate(classes)}
    y = -np.ones((len(labels), len(classes)))
    for row, label in enumerate(labels):
        y[row, pos[label]] = 1.0
    return y


def mean_hinge(model: SvmModel, x, y_signs) -> float:
    margins = y_signs * model.scores(x)
    return float(np.maximum(0.0, 1.0 - margins).mean())


def hinge_objective(w, b, x, y, lam) -> float:
    """Per-example regularized objective ``lam/2 |w|^2 + max(0, 1 - y (w.x + b))``."""
    return 0.5 * lam * float(w @ w) + max(0.0, 1.0 - y * (float(w @ x) + b))


def hinge_subgradient(w, b, x, y, lam) -> tuple[np.ndarray, float]:
    """Subgradient of ``hinge_objective`` with respect to ``(w, b)``."""
    if y * (float(w @ x) + b) < 1:
        return lam * w - y * x, -y
    return lam * w, 0.0


def svm_train(
    x, labels, lam: float, epochs: int, seed: int, val=None, val_labels=None
) -> tuple[SvmModel, TrainLog]:
    """Train on ``(x, labels)``; per-epoch accuracy is measured on ``(val, val_labels)``.

    Without a validation set the training data is scored instead.
    """
    x = np.asarray(x, dtype=np.float64)
    if lam <= 0:
        raise NonPositiveLambda(f"lambda must be positive, got {lam}")
    if x.ndim != 2 or x.shape[0] != len(labels):
        raise DimensionMismatch("feature rows and labels disagree")
    if x.shape[0] < 2:
        raise DataError("need at least 2 training samples")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise SingleClass(f"training data has a single class {classes}")
    if val is None or len(val_labels) == 0:
        val, val_labels = x, list(labels)
    val = np.asarray(val, dtype=np.float64)

    n, d = x.shape
    y = _sign_matrix(labels, classes)
    model = SvmModel(classes, np.zeros((len(classes), d)), np.zeros(len(classes)), lam, 0, seed)
    w, b = model.weights, model.bias
    bound = float(np.linalg.norm(x, axis=1).max()) / lam
    rng = np.random.default_rng([seed, 2])
    log = TrainLog(n_train=n, n_val=len(val_labels))
    t = 0
    elapsed = 0.0
    for epoch in range(1, epochs + 1):
        start = time.perf_counter()
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            xi, yi = x[i], y[i]
            violated = yi * (w @ xi + b) < 1.0
            w *= 1.0 - eta * lam
            if violated.any():
                step = eta * yi * violated
                w += step[:, None] * xi
                b += step
        elapsed += time.perf_counter() - start
        model.epochs_trained = epoch
        norms = np.linalg.norm(w, axis=1)
        if not np.all(np.isfinite(w)) or norms.max() > bound * (1 + 1e-9) + 1e-12:
            raise FloatingPointError(f"epoch {epoch}: weight norm {norms.max()} exceeds Pegasos bound {bound}")
        log.rows.append(EpochRow(epoch, mean_hinge(model, x, y), accuracy(model, val, val_labels), elapsed * 1000.0))
    log.final_train_accuracy = accuracy(model, x, labels)
    return model, log


# -- benchmark harness --------------------------------------------------------

@dataclass
class PipelineResult:
    id: str
    pipeline: PipelineSpec
    log: TrainLog
    epochs_to_threshold: int | None
    wall_ms_to_threshold: float | None
    final_val_accuracy: float | None
    final_train_accuracy: float | None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "pipeline": self.pipeline.to_json(),
            "content_hash": self.pipeline.content_hash(),
            "log": self.log.to_json(),
            "epochs_to_threshold": self.epochs_to_threshold,
            "wall_ms_to_threshold": self.wall_ms_to_threshold,
            "final_val_accuracy": self.final_val_accuracy,
            "final_train_accuracy": self.final_train_accuracy,
        }


@dataclass
class BenchReport:
    results: list[PipelineResult]
    config: dict
    seed: int
    n_train: int
    n_val: int
    classes: list[str]

    @property
    def pipeline_ids(self) -> list[str]:
        return [r.id for r in self.results]

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "seeds": {"seed": self.seed, "split": [self.seed, 1], "shuffle": [self.seed, 2]},
            "split": {"n_train": self.n_train, "n_val": self.n_val},
            "classes": self.classes,
            "pipeline_ids": self.pipeline_ids,
            "results": [r.to_json() for r in self.results],
        }


def threshold_crossing(log: TrainLog, threshold: float) -> tuple[int | None, float | None]:
    for row in log.rows:
        if row.val_accuracy >= threshold:
            return row.epoch, row.cumulative_wall_ms
    return None, None


def evaluate_pipeline(
    index: DatasetIndex,
    spec: PipelineSpec,
    feature: FeatureSpec,
    lam: float,
    epochs: int,
    seed: int,
    raw: np.ndarray | None = None,
) -> tuple[SvmModel, TrainLog]:
    """Extract features (or reuse ``raw``), split, normalize on train rows, train."""
    labels = labels_of(index)
    if raw is None:
        raw = raw_features(index, spec, feature, seed)
    train, val = split_indices(len(labels), seed)
    x, _ = normalize_features(raw, feature, fit_rows=train)
    train_labels = [labels[i] for i in train]
    val_labels = [labels[i] for i in val]
    return svm_train(x[train], train_labels, lam, epochs, seed, x[val], val_labels)


def run_benchmark(
    index: DatasetIndex,
    pipelines,
    feature: FeatureSpec,
    lam: float,
    epochs: int,
    threshold: float,
    seed: int,
    config: dict | None = None,
) -> BenchReport:
    """Train the same SVM on every pipeline's features and compare convergence.

    ``pipelines`` is a list of ``PipelineSpec`` or ``(id, PipelineSpec)``.
    Seeds, split and hyperparameters are shared, so only preprocessing varies.
    """
    if not pipelines:
        raise DataError("a benchmark needs at least one pipeline")
    if not 0 <= threshold <= 1:
        raise DataError(f"threshold must lie in [0, 1], got {threshold}")
    named = [p if isinstance(p, tuple) else (f"p{i}", p) for i, p in enumerate(pipelines)]
    results = []
    for pid, spec in named:
        model, log = evaluate_pipeline(index, spec, feature, lam, epochs, seed)
        e, ms = threshold_crossing(log, threshold)
        final_val = log.rows[-1].val_accuracy if log.rows else None
        results.append(PipelineResult(pid, spec, log, e, ms, final_val, log.final_train_accuracy))
    train, val = split_indices(len(index), seed)
    echo = config if config is not None else {
        "pipelines": [{"id": pid, "steps": spec.to_json()} for pid, spec in named],
        "feature": feature.to_json(),
        "lambda": lam,
        "epochs": epochs,
        "threshold": threshold,
        "seed": seed,
    }
    return BenchReport(results, echo, seed, len(train), len(val), index.class_set)


def strip_wall_clock(obj):
    """Copy of a JSON-like report with host-clock fields removed."""
    if isinstance(obj, dict):
        return {k: strip_wall_clock(v) for k, v in obj.items() if k not in WALL_CLOCK_FIELDS}
    if isinstance(obj, list):
        return [strip_wall_clock(v) for v in obj]
    return obj
