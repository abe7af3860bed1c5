"""Kernel SVM: SMO training, one-vs-one multiclass, CV, and grid search."""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels as _k
from .errors import (
    ConvergenceError,
    DimensionMismatch,
    InsufficientClasses,
    NonFinite,
    SchemaError,
    SingleClass,
    TooFewSamplesPerClass,
)

KERNELS = ("linear", "poly", "rbf", "sigmoid")
SMO_TOL = 1e-3
SMO_MAX_UPDATES = 10 ** 6
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SvmParams:
    kernel: str = "rbf"
    c: float = 30.0
    g: float = 0.009
    r: float = 0.0
    d: int = 3

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.kernel == "rbf" and self.g <= 0:
            raise ValueError("rbf requires g > 0")
        if self.kernel == "poly" and self.d < 1:
            raise ValueError("poly requires d >= 1")


def kernel_matrix(params: SvmParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gram matrix K[i, j] = K(x_i, y_j)."""
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatch(f"{x.shape[1]} vs {y.shape[1]} features")
    if params.kernel == "linear":
        return x @ y.T
    if params.kernel == "poly":
        return (params.g * (x @ y.T) + params.r) ** params.d
    if params.kernel == "sigmoid":
        return np.tanh(params.g * (x @ y.T) + params.r)
    # rbf
    d2 = (
        (x * x).sum(axis=1)[:, None]
        + (y * y).sum(axis=1)[None, :]
        - 2.0 * (x @ y.T)
    )
    return np.exp(-params.g * np.maximum(d2, 0.0))


def kernel_eval(params: SvmParams, x: np.ndarray, y: np.ndarray) -> float:
    """Single kernel evaluation between two feature rows."""
    return float(kernel_matrix(params, np.atleast_2d(x), np.atleast_2d(y))[0, 0])


@dataclass
class FeatureScaler:
    """Per-dimension min-max scaling to [0, 1], fit on training data only."""
    mins: np.ndarray
    maxs: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "FeatureScaler":
        return cls(x.min(axis=0), x.max(axis=0))

    def transform(self, x: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        span = np.where(span > 0, span, 1.0)
        out = (x - self.mins) / span
        # constant dimensions map to 0
        return np.where(self.maxs > self.mins, out, 0.0)


@dataclass
class BinaryModel:
    support_vectors: np.ndarray  # scaled feature rows
    alpha_y: np.ndarray  # signed alpha_i * y_i
    bias: float
    params: SvmParams


def train_binary(x: np.ndarray, y: np.ndarray, params: SvmParams) -> BinaryModel:
    """Solve the soft-margin dual with SMO and keep the support vectors."""
    y = np.asarray(y, dtype=np.float64)
    if not np.isfinite(x).all() or not np.isfinite(y).all():
        raise NonFinite("training data contains NaN or infinity")
    if len(np.unique(y)) < 2:
        raise SingleClass("both classes must be present")
    K = np.ascontiguousarray(kernel_matrix(params, x, x), dtype=np.float64)
    alpha, bias, _, converged = _k.solve_smo(
        K, np.ascontiguousarray(y), float(params.c), SMO_TOL, SMO_MAX_UPDATES
    )
    if not converged:
        raise ConvergenceError(f"SMO exceeded {SMO_MAX_UPDATES} pair updates")
    sv = alpha > 1e-12
    return BinaryModel(x[sv].copy(), (alpha * y)[sv], float(bias), params)


def predict_binary(model: BinaryModel, x: np.ndarray) -> float:
    """Signed decision value sum_i alpha_i y_i K(sv_i, x) + b."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.support_vectors.shape[1]:
        raise DimensionMismatch(
            f"{x.shape[1]} vs {model.support_vectors.shape[1]} features")
    kv = kernel_matrix(model.params, x, model.support_vectors)
    return float((kv @ model.alpha_y)[0]) + model.bias


def dual_objective(model_or_alpha, K=None, y=None) -> float:
    """Dual objective sum(alpha) - 0.5 * a' Q a for oracle comparisons."""
    alpha = np.asarray(model_or_alpha, dtype=np.float64)
    q = (y[:, None] * y[None, :]) * K
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


@dataclass
class TrainedModel:
    class_labels: list  # sorted species ids
    binary_models: dict  # (i, j) label-index pair -> BinaryModel
    scaler: FeatureScaler
    feature_subset: list  # 1-based f-indices, sorted
    class_genus: dict = field(default_factory=dict)  # optional species -> genus

    def _project(self, x: np.ndarray) -> np.ndarray:
        idx = np.asarray(self.feature_subset, dtype=np.int64) - 1
        return self.scaler.transform(np.atleast_2d(x)[:, idx])


def train_ovo(
    rows: np.ndarray,
    labels,
    params: SvmParams,
    subset=None,
    class_genus: dict | None = None,
) -> TrainedModel:
    """One binary SVM per unordered class pair, on min-max scaled features."""
    rows = np.asarray(rows, dtype=np.float64)
    labels = list(labels)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise InsufficientClasses(f"need >= 2 classes, got {len(classes)}")
    if subset is None:
        subset = list(range(1, rows.shape[1] + 1))
    subset = sorted(int(i) for i in subset)
    if subset and (subset[0] < 1 or subset[-1] > rows.shape[1]):
        raise DimensionMismatch("feature subset outside the table range")
    idx = np.asarray(subset, dtype=np.int64) - 1
    sub = rows[:, idx]
    scaler = FeatureScaler.fit(sub)
    scaled = scaler.transform(sub)
    lab = np.asarray([classes.index(l) for l in labels])
    models = {}
    for i, j in itertools.combinations(range(len(classes)), 2):
        sel = (lab == i) | (lab == j)
        yij = np.where(lab[sel] == i, 1.0, -1.0)  # +1 votes the lower class
        models[(i, j)] = train_binary(scaled[sel], yij, params)
    return TrainedModel(classes, models, scaler, subset, dict(class_genus or {}))


def predict_ovo(model: TrainedModel, x: np.ndarray):
    """Majority vote over binary models.

    Ties break by the summed decision-value magnitude in the class's favor,
    then by the lower class index.  Returns (label, votes dict).
    """
    x = np.asarray(x, dtype=np.float64)
    xs = model._project(x)[0]
    nc = len(model.class_labels)
    votes = np.zeros(nc, dtype=np.int64)
    score = np.zeros(nc)
    for (i, j), bm in model.binary_models.items():
        dec = predict_binary(bm, xs)
        if dec >= 0:
            votes[i] += 1
            score[i] += dec
        else:
            votes[j] += 1
            score[j] -= dec
    best = np.lexsort((np.arange(nc), -score, -votes))[0]
    tally = {model.class_labels[k]: int(votes[k]) for k in range(nc)}
    return model.class_labels[int(best)], tally


@dataclass
class CvReport:
    fold_accuracies: list
    mean_accuracy: float
    confusion: np.ndarray  # rows true class, cols predicted
    class_labels: list
    seconds_per_image: float

    def to_dict(self) -> dict:
        return {
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "class_labels": self.class_labels,
            "confusion": self.confusion.tolist(),
            "seconds_per_image": self.seconds_per_image,
        }


def stratified_folds(labels, k: int, seed: int) -> list:
    """Deterministic stratified fold assignment; fold sizes per class differ
    by at most one."""
    labels = list(labels)
    classes = sorted(set(labels))
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for ci, cls in enumerate(classes):
        idx = [i for i, l in enumerate(labels) if l == cls]
        if len(idx) < k:
            raise TooFewSamplesPerClass(
                f"class {cls!r} has {len(idx)} samples, need >= {k}")
        idx = list(rng.permutation(idx))
        for pos, i in enumerate(idx):
            folds[(pos + ci) % k].append(int(i))
    return [sorted(f) for f in folds]


def kfold_cv(
    rows: np.ndarray,
    labels,
    params: SvmParams,
    subset=None,
    k: int = 5,
    seed: int = 0,
    class_genus: dict | None = None,
) -> CvReport:
    """Stratified k-fold cross-validation; the scaler refits per split."""
    rows = np.asarray(rows, dtype=np.float64)
    labels = list(labels)
    classes = sorted(set(labels))
    folds = stratified_folds(labels, k, seed)
    accs = []
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    n_pred = 0
    t_pred = 0.0
    for f in folds:
        val = np.asarray(f)
        train = np.asarray([i for i in range(len(labels)) if i not in set(f)])
        model = train_ovo(
            rows[train], [labels[i] for i in train], params, subset, class_genus
        )
        good = 0
        for i in val:
            t0 = time.perf_counter()
            pred, _ = predict_ovo(model, rows[i])
            t_pred += time.perf_counter() - t0
            n_pred += 1
            confusion[classes.index(labels[i]), classes.index(pred)] += 1
            if pred == labels[i]:
                good += 1
        accs.append(good / len(val))
    return CvReport(
        accs, float(np.mean(accs)), confusion, classes,
        t_pred / max(n_pred, 1),
    )


def default_grid() -> list:
    """The search grid; includes the reference operating point (rbf, c=30,
    g=0.009) exactly.  r and d only vary where the kernel uses them."""
    cs = [1.0, 10.0, 30.0, 100.0, 1000.0, 1e4, 1e5]
    gs = [0.001, 0.009, 0.03, 0.125, 0.5, 2.0, 8.0, 32.0]
    rs = [0.0, 1.0, 10.0]
    ds = [3, 4, 5]
    grid = []
    for c in cs:
        grid.append(SvmParams("linear", c))
    for c in cs:
        for g in gs:
            grid.append(SvmParams("rbf", c, g))
    for c in cs:
        for g in gs:
            for r in rs:
                grid.append(SvmParams("sigmoid", c, g, r))
                for d in ds:
                    grid.append(SvmParams("poly", c, g, r, d))
    return grid


def grid_search(
    rows: np.ndarray,
    labels,
    grid=None,
    subset=None,
    k: int = 5,
    seed: int = 0,
) -> list:
    """k-fold CV per grid point, ranked by mean accuracy (ties: smaller c,
    then smaller g).  Returns [(params, mean_accuracy), ...] best first."""
    if grid is None:
        grid = default_grid()
    if not grid:
        raise ValueError("grid is empty")
    results = []
    for params in grid:
        report = kfold_cv(rows, labels, params, subset, k, seed)
        results.append((params, report.mean_accuracy))
    results.sort(key=lambda t: (-t[1], t[0].c, t[0].g))
    return results


def evaluate_holdout(model: TrainedModel, rows: np.ndarray, labels) -> CvReport:
    """Accuracy and confusion on a holdout set (caller guarantees
    disjointness from training)."""
    rows = np.asarray(rows, dtype=np.float64)
    labels = list(labels)
    classes = model.class_labels
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    good = 0
    t_pred = 0.0
    for i, lab in enumerate(labels):
        t0 = time.perf_counter()
        pred, _ = predict_ovo(model, rows[i])
        t_pred += time.perf_counter() - t0
        if lab in classes and pred in classes:
            confusion[classes.index(lab), classes.index(pred)] += 1
        if pred == lab:
            good += 1
    acc = good / max(len(labels), 1)
    return CvReport([acc], acc, confusion, classes, t_pred / max(len(labels), 1))


# --- persistence ---

def save_model(model: TrainedModel, path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kernel": None,
        "c": None,
        "g": None,
        "r": None,
        "d": None,
        "class_labels": model.class_labels,
        "class_genus": model.class_genus,
        "feature_subset": model.feature_subset,
        "scaler": {
            "mins": model.scaler.mins.tolist(),
            "maxs": model.scaler.maxs.tolist(),
        },
        "binary_models": [],
    }
    for (i, j), bm in sorted(model.binary_models.items()):
        doc["kernel"] = bm.params.kernel
        doc["c"] = bm.params.c
        doc["g"] = bm.params.g
        doc["r"] = bm.params.r
        doc["d"] = bm.params.d
        doc["binary_models"].append({
            "class_pair": [model.class_labels[i], model.class_labels[j]],
            "bias": bm.bias,
            "svs": [
                {"alpha_y": float(ay), "features": row.tolist()}
                for ay, row in zip(bm.alpha_y, bm.support_vectors)
            ],
        })
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> TrainedModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot parse model file {path}: {exc}") from exc
    try:
        if doc["format_version"] != MODEL_FORMAT_VERSION:
            raise SchemaError(f"unsupported model format {doc['format_version']}")
        params = SvmParams(doc["kernel"], doc["c"], doc["g"], doc["r"], doc["d"])
        classes = doc["class_labels"]
        scaler = FeatureScaler(
            np.asarray(doc["scaler"]["mins"], dtype=np.float64),
            np.asarray(doc["scaler"]["maxs"], dtype=np.float64),
        )
        models = {}
        for bm in doc["binary_models"]:
            i = classes.index(bm["class_pair"][0])
            j = classes.index(bm["class_pair"][1])
            sv = np.asarray([s["features"] for s in bm["svs"]], dtype=np.float64)
            ay = np.asarray([s["alpha_y"] for s in bm["svs"]], dtype=np.float64)
            models[(i, j)] = BinaryModel(sv, ay, float(bm["bias"]), params)
        return TrainedModel(
            classes, models, scaler,
            [int(i) for i in doc["feature_subset"]],
            dict(doc.get("class_genus", {})),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise SchemaError(f"malformed model file {path}: {exc}") from exc
