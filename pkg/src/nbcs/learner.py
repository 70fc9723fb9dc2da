"""End-to-end classifiers on the nested embedding.

Two fitting strategies: uniform subdivision (split every occupied leaf at
its barycenter for q stages) and adaptive splitting (split leaves holding
enough misclassified points at the data point nearest their mean).  Both
train one-vs-rest linear SVMs on the embedded sample.  Also here: the
affine normalization into the root simplex, cross-validation, synthetic
polytope data, and the generalization-bound evaluators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import svm
from .errors import NumericalError
from .geometry import (
    barycentric_coords,
    regular_simplex_inradius,
)
from .system import NestedSystem, WeightVector, decision_values, lift_weights

DEFAULT_PADDING = 0.9


@dataclass
class LabeledDataset:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.points.ndim != 2 or len(self.points) != len(self.labels):
            raise ValueError("points must be (n, d) with one label per row")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("non-finite coordinates")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.points[idx], self.labels[idx])


@dataclass
class AffineMap:
    """x -> scale * x + offset; scale may be a scalar (shape-preserving) or
    per-feature (when standardization is folded in)."""

    scale: float | np.ndarray
    offset: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) * self.scale + self.offset


@dataclass
class Model:
    system: NestedSystem
    weights: list  # one WeightVector for binary, else one per class
    transform: AffineMap
    classes: np.ndarray
    q_used: int
    k_retained: int = 0
    C: float = 1.0
    strategy: str = "uniform"


@dataclass
class CvConfig:
    C_grid: tuple = tuple(2.0**p for p in range(-5, 16, 2))
    q_grid: tuple = (2, 3, 4, 5)
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.C_grid or not self.q_grid:
            raise ValueError("grids must be non-empty")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")


@dataclass
class CvResult:
    C: float
    q: int
    mean_accuracy: float
    fold_accuracies: np.ndarray
    table: list  # (C, q, mean accuracy) for the whole grid


def fit_transform_to_simplex(points: np.ndarray, padding: float = DEFAULT_PADDING) -> AffineMap:
    """Affine map placing the data's bounding ball inside the root simplex's
    inscribed ball shrunk by ``padding``; zero-variance data lands on the
    root barycenter."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = points.shape[1]
    lo, hi = points.min(axis=0), points.max(axis=0)
    center = (lo + hi) / 2.0
    radius = float(np.sqrt(((points - center) ** 2).sum(axis=1)).max())
    root = NestedSystem.regular(d).root
    bary = root.coords.mean(axis=0)
    target = padding * regular_simplex_inradius(d)
    scale = target / radius if radius > 0 else 1.0
    return AffineMap(scale, bary - scale * center)


# feature-scale spread (max std / min std) beyond which inputs are z-scored
STANDARDIZE_RATIO = 20.0


def fit_input_transform(
    points: np.ndarray,
    padding: float = DEFAULT_PADDING,
    standardize: bool | str = "auto",
) -> AffineMap:
    """Input normalization used by the fitting strategies.

    With ``standardize`` a per-feature z-score is composed with the
    bounding-ball map.  The default ``"auto"`` standardizes only when
    feature scales are incommensurate (spread beyond STANDARDIZE_RATIO):
    wildly mixed scales make the embedded margins unreachable for the
    trainer, while standardizing already-commensurate features only
    discards scale information the classifier could use.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    sd = points.std(axis=0)
    if standardize == "auto":
        pos = sd[sd > 0]
        standardize = len(pos) > 0 and float(pos.max() / pos.min()) > STANDARDIZE_RATIO
    if not standardize:
        return fit_transform_to_simplex(points, padding)
    mu = points.mean(axis=0)
    sd = sd.copy()
    sd[sd == 0] = 1.0
    base = fit_transform_to_simplex((points - mu) / sd, padding)
    return AffineMap(base.scale / sd, base.offset - base.scale * mu / sd)


def clamp_to_root(system: NestedSystem, X: np.ndarray) -> np.ndarray:
    """Pull out-of-root points along the segment to the root barycenter
    until they enter the root; interior points pass through unchanged."""
    X = np.atleast_2d(np.asarray(X, dtype=float)).copy()
    root = system.root
    d = system.dim
    aug = np.column_stack([X, np.ones(len(X))])
    alpha = aug @ np.asarray(root.inv_matrix).T
    amin = alpha.min(axis=1)
    out = amin < 0.0
    if out.any():
        u = 1.0 / (d + 1)
        bary = root.coords.mean(axis=0)
        bad = alpha[out]
        with np.errstate(divide="ignore", invalid="ignore"):
            s_all = np.where(bad < u, u / (u - bad), np.inf)
        s = np.clip(s_all.min(axis=1), 0.0, 1.0)
        X[out] = bary + s[:, None] * (X[out] - bary)
    return X


# ---------------------------------------------------------------------------
# fitting

def _embed(system: NestedSystem, Xt: np.ndarray):
    idx, val, leaf = system.embed_batch(Xt)
    return idx, val, leaf


def _binary_targets(labels: np.ndarray, classes: np.ndarray) -> list:
    """One +-1 target vector per classifier (a single one for 2 classes)."""
    if len(classes) == 2:
        return [np.where(labels == classes[1], 1.0, -1.0)]
    return [np.where(labels == c, 1.0, -1.0) for c in classes]


def _train_all(idx, val, targets, dim, C, epochs, seed, tolerance, warm=None):
    ws = []
    for j, y in enumerate(targets):
        ds = svm.SparseDataset(idx, val, y, dim)
        cfg = svm.SvmConfig(C=C, epochs=epochs, seed=seed, tolerance=tolerance)
        w0 = None if warm is None else warm[j]
        w = svm.train(ds, cfg, w0=w0)
        if w0 is not None and svm.hinge_objective(w0, ds, C) < svm.hinge_objective(w, ds, C):
            # SGD is not monotone; never end a stage worse than the lifted
            # classifier, which reproduces the previous stage exactly
            w = np.asarray(w0, dtype=float)
        ws.append(w)
    return ws


def _scores(idx, val, ws) -> np.ndarray:
    return np.stack(
        [decision_values(WeightVector(w), idx, val) for w in ws], axis=1
    )


def _predict_labels(scores: np.ndarray, classes: np.ndarray) -> np.ndarray:
    if len(classes) == 1:
        return np.full(len(scores), classes[0])
    if len(classes) == 2:
        return np.where(scores[:, 0] >= 0.0, classes[1], classes[0])
    return classes[np.argmax(scores, axis=1)]


def constant_model(data: LabeledDataset) -> Model:
    """Degenerate single-class model (predicts the lone label everywhere);
    what the SVM trainer's single-class error asks the caller to emit."""
    classes = data.classes()
    if len(classes) != 1:
        raise ValueError("constant_model requires single-class data")
    system = NestedSystem.regular(data.dim)
    return Model(
        system=system,
        weights=[WeightVector(np.zeros(system.n_vertices))],
        transform=fit_input_transform(data.points),
        classes=classes,
        q_used=0,
        strategy="constant",
    )


def fit_uniform(
    data: LabeledDataset,
    q: int,
    C: float,
    *,
    epochs: int = 50,
    seed: int = 0,
    tolerance: float = 1e-4,
    padding: float = DEFAULT_PADDING,
    standardize: bool | str = "auto",
) -> Model:
    """q-stage uniform subdivision: each stage splits every occupied leaf at
    its barycenter (empty leaves are skipped -- nothing to gain there), then
    one-vs-rest SVMs are trained on the final embedding."""
    if q < 0:
        raise ValueError("q must be >= 0")
    classes = data.classes()
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    transform = fit_input_transform(data.points, padding, standardize)
    Xt = transform.apply(data.points)
    system = NestedSystem.regular(data.dim)
    for _ in range(q):
        _, _, leaf = _embed(system, Xt)
        for node_id in np.unique(leaf):
            s = system.node_simplex(int(node_id))
            system.split(int(node_id), s.coords.mean(axis=0))
    idx, val, _ = _embed(system, Xt)
    targets = _binary_targets(data.labels, classes)
    ws = _train_all(idx, val, targets, system.n_vertices, C, epochs, seed, tolerance)
    return Model(
        system=system,
        weights=[WeightVector(w) for w in ws],
        transform=transform,
        classes=classes,
        q_used=q,
        C=C,
        strategy="uniform",
    )


def fit_adaptive(
    data: LabeledDataset,
    q_max: int,
    C: float,
    min_misclassified: int | None = None,
    *,
    epochs: int = 50,
    seed: int = 0,
    tolerance: float = 1e-4,
    padding: float = DEFAULT_PADDING,
    standardize: bool | str = "auto",
) -> Model:
    """Adaptive splitting: per stage, train, collect each leaf's
    misclassified points, and split leaves holding at least
    ``min_misclassified`` of them at the data point nearest the mean of the
    misclassified ones (nudged inward if it hugs the boundary; leaves with
    fewer than two distinct candidate points fall back to their barycenter).
    Stops early on zero training error or when no leaf qualifies.

    ``k_retained`` on the returned model counts only data-derived split
    points (barycenter fallbacks do not contribute), feeding the
    compression-style bound evaluators.
    """
    if q_max < 0 or q_max > 5:
        raise ValueError("q_max must be in 0..5")
    classes = data.classes()
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    if min_misclassified is None:
        min_misclassified = max(2, int(round(0.005 * data.n)))
    if min_misclassified < 1:
        raise ValueError("min_misclassified must be >= 1")
    transform = fit_input_transform(data.points, padding, standardize)
    Xt = transform.apply(data.points)
    system = NestedSystem.regular(data.dim)
    targets = _binary_targets(data.labels, classes)
    warm = None
    k_retained = 0
    stages_done = 0
    ws = None
    while True:
        idx, val, leaf = _embed(system, Xt)
        ws = _train_all(
            idx, val, targets, system.n_vertices, C, epochs, seed, tolerance, warm
        )
        pred = _predict_labels(_scores(idx, val, ws), classes)
        mis = pred != data.labels
        if stages_done >= q_max or not mis.any():
            break
        n_before = len(system.split_records)
        for node_id in np.unique(leaf[mis]):
            in_leaf = leaf == node_id
            if int((mis & in_leaf).sum()) < min_misclassified:
                continue
            node_id = int(node_id)
            candidates = np.unique(Xt[in_leaf], axis=0)
            if len(candidates) < 2:
                point = system.node_simplex(node_id).coords.mean(axis=0)
            else:
                target = Xt[mis & in_leaf].mean(axis=0)
                nearest = candidates[
                    np.argmin(((candidates - target) ** 2).sum(axis=1))
                ]
                point = system.nudge_to_interior(node_id, nearest)
                k_retained += 1
            system.split(node_id, point)
        new_records = system.split_records[n_before:]
        if not new_records:
            break
        stages_done += 1
        warm = []
        for w in ws:
            wv = WeightVector(w)
            for record in new_records:
                wv = lift_weights(wv, record)
            warm.append(wv.values)
    return Model(
        system=system,
        weights=[WeightVector(w) for w in ws],
        transform=transform,
        classes=classes,
        q_used=stages_done,
        k_retained=k_retained,
        C=C,
        strategy="adaptive",
    )


def predict(model: Model, X: np.ndarray) -> np.ndarray:
    """Class ids for query points; out-of-root points are clamped toward the
    root barycenter first, so this is total and deterministic.  Binary ties
    (decision value exactly 0) go to the positive class, multiclass argmax
    ties to the lowest class id."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        return np.empty(0, dtype=model.classes.dtype)
    Xt = clamp_to_root(model.system, model.transform.apply(X))
    idx, val, _ = model.system.embed_batch(Xt)
    scores = np.stack(
        [decision_values(w, idx, val) for w in model.weights], axis=1
    )
    return _predict_labels(scores, model.classes)


def accuracy(model: Model, data: LabeledDataset) -> float:
    return float((predict(model, data.points) == data.labels).mean())


def fit(data: LabeledDataset, strategy: str, q: int, C: float, **kw) -> Model:
    if strategy == "uniform":
        return fit_uniform(data, q, C, **kw)
    if strategy == "adaptive":
        return fit_adaptive(data, q, C, **kw)
    raise ValueError(f"unknown strategy {strategy!r}")


# ---------------------------------------------------------------------------
# cross-validation

def stratified_folds(labels: np.ndarray, folds: int, rng) -> list:
    """Round-robin per-class assignment; resamples (bounded) if some
    training union ends up single-class."""
    n = len(labels)
    need_two = len(np.unique(labels)) >= 2
    for _ in range(10):
        assign = np.empty(n, dtype=np.int64)
        for c in np.unique(labels):
            idx = np.nonzero(labels == c)[0]
            idx = idx[rng.permutation(len(idx))]
            assign[idx] = np.arange(len(idx)) % folds
        ok = not need_two or all(
            len(np.unique(labels[assign != f])) >= 2 for f in range(folds)
        )
        if ok:
            return [np.nonzero(assign == f)[0] for f in range(folds)]
    raise ValueError("could not build folds with at least 2 classes per split")


def cross_validate(
    data: LabeledDataset,
    cfg: CvConfig,
    strategy: str,
    **fit_kw,
) -> CvResult:
    """Grid search over (C, q) with stratified k-fold validation accuracy.

    Ties go to the smaller q, then the smaller C.  Deterministic given
    cfg.seed."""
    if cfg.folds > data.n:
        raise ValueError("more folds than samples")
    rng = np.random.default_rng(cfg.seed)
    fold_idx = stratified_folds(data.labels, cfg.folds, rng)
    best = None
    table = []
    for q in sorted(cfg.q_grid):
        for C in sorted(cfg.C_grid):
            accs = []
            for f, val_idx in enumerate(fold_idx):
                train_idx = np.concatenate(
                    [fold_idx[g] for g in range(cfg.folds) if g != f]
                )
                fold_train = data.subset(train_idx)
                if len(fold_train.classes()) < 2:
                    model = constant_model(fold_train)
                else:
                    model = fit(fold_train, strategy, q, C, **fit_kw)
                accs.append(accuracy(model, data.subset(val_idx)))
            mean = float(np.mean(accs))
            table.append((C, q, mean))
            if best is None or mean > best.mean_accuracy:
                best = CvResult(C, q, mean, np.asarray(accs), table)
    best.table = table
    return best


# ---------------------------------------------------------------------------
# synthetic polytope data

def label_by_halfspaces(points, normals, offsets, margin: float):
    """Labels from the slack min_j(b_j - w_j . x): +1 at slack >= margin,
    -1 at slack <= -margin, the band in between discarded.

    Returns (labels, keep mask).  With margin 0 nothing is discarded.
    """
    slack = (np.asarray(offsets)[None, :] - points @ np.asarray(normals).T).min(axis=1)
    labels = np.where(slack >= margin, 1, -1)
    keep = (slack >= margin) | (slack <= -margin)
    return labels, keep


def generate_polytope_dataset(
    n: int,
    d: int,
    n_halfspaces: int,
    margin: float,
    seed: int,
    max_retries: int = 50,
):
    """Points uniform in the unit ball (radial law u^(1/d)), labeled by the
    sign of their slack against a random halfspace-intersection polytope;
    points within ``margin`` of the boundary are discarded.

    Returns (dataset, (normals, offsets)).  Halfspaces are resampled (up to
    ``max_retries``) when either class comes out empty.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if margin < 0:
        raise ValueError("margin must be >= 0")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, n) ** (1.0 / d)
    points = dirs * radii[:, None]
    for _ in range(max_retries):
        normals = rng.standard_normal((n_halfspaces, d))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        offsets = rng.uniform(0.05, 0.95, n_halfspaces)
        labels, keep = label_by_halfspaces(points, normals, offsets, margin)
        if labels[keep].max(initial=-1) > 0 and labels[keep].min(initial=1) < 0:
            return (
                LabeledDataset(points[keep], labels[keep]),
                (normals, offsets),
            )
    raise NumericalError(
        f"no two-class sample after {max_retries} halfspace draws"
    )


# ---------------------------------------------------------------------------
# generalization-bound evaluators

def _log_choose(n: int, k: int) -> float:
    return (
        math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    )


def margin_bound(
    n: int, k: int, w_norm: float, hinge_sum: float, delta: float
) -> float:
    """Margin-based risk bound for a classifier built on k retained sample
    points: hinge_sum/n + 4/(||w|| sqrt(n-k)) + sqrt(log log2(2/||w||)/(n-k))
    + sqrt(log(2 C(n,k)/delta) / (2(n-k)))."""
    if not n > k >= 0:
        raise ValueError("sqrt(n-k) terms require n > k >= 0")
    if not 0 < delta < 1:
        raise ValueError("confidence term log(2 C(n,k)/delta) requires 0 < delta < 1")
    if not 0 < w_norm <= 1:
        raise ValueError("log-log term log2(2/||w||) requires 0 < ||w|| <= 1")
    if hinge_sum < 0:
        raise ValueError("hinge term requires hinge_sum >= 0")
    nk = n - k
    t1 = hinge_sum / n
    t2 = 4.0 / (w_norm * math.sqrt(nk))
    t3 = math.sqrt(math.log(math.log2(2.0 / w_norm)) / nk)
    t4 = math.sqrt(
        (math.log(2.0) + _log_choose(n, k) - math.log(delta)) / (2.0 * nk)
    )
    return t1 + t2 + t3 + t4


def vc_compression_bound(
    n: int, k: int, d: int, err_hat: float, delta: float, c: float = 144.0
) -> float:
    """Hybrid compression/VC risk bound:
    err_hat + c sqrt(d/(n-k)) + sqrt(log(C(n,k)/delta) / (2(n-k)))."""
    if not n > k >= 0:
        raise ValueError("sqrt(n-k) terms require n > k >= 0")
    if d < 0:
        raise ValueError("VC term sqrt(d/(n-k)) requires d >= 0")
    if not 0 <= err_hat <= 1:
        raise ValueError("empirical error must be in [0, 1]")
    if not 0 < delta < 1:
        raise ValueError("confidence term log(C(n,k)/delta) requires 0 < delta < 1")
    nk = n - k
    return (
        err_hat
        + c * math.sqrt(d / nk)
        + math.sqrt((_log_choose(n, k) - math.log(delta)) / (2.0 * nk))
    )


def model_bounds(model: Model, data: LabeledDataset, delta: float = 0.05):
    """Evaluate both bounds for a fitted model on its training sample.

    The margin bound applies to binary models only (it needs a single
    weight vector, normalized to unit length); returns (margin, vc), with
    None where not applicable.
    """
    n, k = data.n, model.k_retained
    pred = predict(model, data.points)
    err_hat = float((pred != data.labels).mean())
    vc = vc_compression_bound(n, k, model.system.n_vertices, err_hat, delta)
    marg = None
    if len(model.classes) == 2:
        w = model.weights[0].values
        norm = float(np.linalg.norm(w))
        if norm > 0:
            Xt = clamp_to_root(model.system, model.transform.apply(data.points))
            idx, val, _ = model.system.embed_batch(Xt)
            y = np.where(data.labels == model.classes[1], 1.0, -1.0)
            margins = y * (val * (w / norm)[idx]).sum(axis=1)
            hinge_sum = float(np.maximum(0.0, 1.0 - margins).sum())
            marg = margin_bound(n, k, 1.0, hinge_sum, delta)
    return marg, vc
