"""Two-class linear discriminant classification of sensor snapshots.

Data matrices are (sensors x snapshots); labels 0 = flapping only,
1 = flapping with rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .fields import GridField

LABEL_FLAP = 0
LABEL_ROTATION = 1

RIDGE_GAMMA = 1e-8


@dataclass
class LabeledDataMatrix:
    X: np.ndarray                        # (sensors, snapshots)
    labels: np.ndarray                   # (snapshots,)
    sensor_ids: np.ndarray               # (sensors,)

    def __post_init__(self):
        self.X = np.asarray(self.X)
        self.labels = np.asarray(self.labels)
        self.sensor_ids = np.asarray(self.sensor_ids)
        if self.X.shape != (self.sensor_ids.size, self.labels.size):
            raise ValueError("shape mismatch between X, labels, sensor_ids")
        if len(np.unique(self.labels)) < 2:
            raise ValueError("both classes must be present")

    def restrict(self, sensor_subset) -> "LabeledDataMatrix":
        """Rows restricted to the given positions of the current sensor set."""
        idx = np.asarray(sensor_subset)
        return LabeledDataMatrix(self.X[idx], self.labels, self.sensor_ids[idx])


@dataclass
class SplitData:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray


@dataclass
class LdaModel:
    w: np.ndarray                        # unit-norm discriminant direction
    threshold: float
    # class predicted when w^T x > threshold
    class_above: int


def assemble(encoded_flap: GridField, encoded_rot: GridField) -> LabeledDataMatrix:
    """Stack the two conditions column-wise: class 0 then class 1."""
    if encoded_flap.values.shape[0] != encoded_rot.values.shape[0]:
        raise ValueError("grid mismatch between conditions")
    n_f = encoded_flap.n_samples
    n_r = encoded_rot.n_samples
    X = np.hstack([encoded_flap.values, encoded_rot.values])
    labels = np.concatenate([np.full(n_f, LABEL_FLAP), np.full(n_r, LABEL_ROTATION)])
    return LabeledDataMatrix(X=X, labels=labels, sensor_ids=np.arange(X.shape[0]))


def split(data: LabeledDataMatrix, train_frac: float = 0.9) -> SplitData:
    """Per-class chronological split; the test epoch follows the train epoch."""
    train_cols, test_cols = [], []
    for lab in (LABEL_FLAP, LABEL_ROTATION):
        cols = np.flatnonzero(data.labels == lab)
        if cols.size < 10:
            raise ValueError(f"class {lab} has too few snapshots to split")
        n_train = int(np.floor(train_frac * cols.size))
        train_cols.append(cols[:n_train])
        test_cols.append(cols[n_train:])
    train_cols = np.concatenate(train_cols)
    test_cols = np.concatenate(test_cols)
    return SplitData(
        X_train=data.X[:, train_cols], y_train=data.labels[train_cols],
        X_test=data.X[:, test_cols], y_test=data.labels[test_cols],
    )


def scatter_matrices(X: np.ndarray, y: np.ndarray):
    """Within-class and between-class scatter of (features x samples) data."""
    mu = X.mean(axis=1)
    S_w = np.zeros((X.shape[0], X.shape[0]))
    S_b = np.zeros_like(S_w)
    for lab in np.unique(y):
        Xc = X[:, y == lab]
        mu_c = Xc.mean(axis=1)
        centered = Xc - mu_c[:, None]
        S_w += centered @ centered.T
        d = mu_c - mu
        S_b += Xc.shape[1] * np.outer(d, d)
    return S_w, S_b


def gaussian_threshold(eta: np.ndarray, y: np.ndarray) -> float:
    """Decision threshold from the intersection of per-class Gaussian pdfs.

    Solves for equal class-conditional densities between the two projected
    means; falls back to the midpoint when no intersection lies between
    them or a class has zero spread.
    """
    labs = np.unique(y)
    if labs.size != 2:
        raise ValueError("exactly two classes required")
    stats = []
    for lab in labs:
        vals = eta[y == lab]
        if vals.size < 2:
            raise ValueError("each class needs at least 2 samples")
        stats.append((vals.mean(), vals.std(ddof=0)))
    (m1, s1), (m2, s2) = stats
    lo, hi = min(m1, m2), max(m1, m2)
    mid = 0.5 * (m1 + m2)
    if s1 == 0.0 or s2 == 0.0:
        return mid
    if np.isclose(s1, s2):
        return mid
    # equal-density condition is a quadratic in x
    a = 1.0 / s2 ** 2 - 1.0 / s1 ** 2
    b = 2.0 * (m1 / s1 ** 2 - m2 / s2 ** 2)
    c = m2 ** 2 / s2 ** 2 - m1 ** 2 / s1 ** 2 + 2.0 * np.log(s2 / s1)
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return mid
    roots = np.array([(-b - np.sqrt(disc)) / (2 * a), (-b + np.sqrt(disc)) / (2 * a)])
    inside = roots[(roots > lo) & (roots < hi)]
    if inside.size == 0:
        return mid
    return float(inside[0])


def fit_lda(train: SplitData) -> LdaModel:
    """Fisher discriminant with ridge-regularized within-class scatter."""
    X, y = train.X_train, train.y_train
    n_feat = X.shape[0]
    if X.shape[1] < n_feat + 2:
        raise ValueError("need at least n_sensors + n_classes training examples")
    S_w, S_b = scatter_matrices(X, y)
    S_w_reg = S_w + (RIDGE_GAMMA * np.trace(S_w) / n_feat + 1e-300) * np.eye(n_feat)
    try:
        # symmetric-definite generalized eigenproblem; leading eigenvector
        _, vecs = eigh(S_b, S_w_reg, subset_by_index=[n_feat - 1, n_feat - 1])
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(S_w_reg)
        raise np.linalg.LinAlgError(
            f"within-class scatter solve failed (cond ~ {cond:.2e})") from exc
    w = vecs[:, 0]
    w = w / np.linalg.norm(w)
    eta = w @ X
    thr = gaussian_threshold(eta, y)
    mean_above = eta[y == LABEL_ROTATION].mean() > eta[y == LABEL_FLAP].mean()
    class_above = LABEL_ROTATION if mean_above else LABEL_FLAP
    return LdaModel(w=w, threshold=thr, class_above=class_above)


def evaluate(model: LdaModel, X_test: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of test snapshots assigned to their true class."""
    if X_test.shape[0] != model.w.size:
        raise ValueError("test matrix row count does not match discriminant")
    eta = model.w @ X_test
    other = LABEL_FLAP if model.class_above == LABEL_ROTATION else LABEL_ROTATION
    pred = np.where(eta > model.threshold, model.class_above, other)
    return float(np.mean(pred == labels))


def save_model(model: LdaModel, sensor_ids, path: str) -> None:
    """Plain-text persistence of a fitted discriminant."""
    with open(path, "w") as fh:
        fh.write(f"class_above: {model.class_above}\n")
        fh.write(f"threshold: {float(model.threshold)!r}\n")
        fh.write("sensor_id w\n")
        for sid, wi in zip(np.asarray(sensor_ids), model.w):
            fh.write(f"{sid} {float(wi)!r}\n")


def load_model(path: str):
    """Inverse of save_model; returns (model, sensor_ids)."""
    with open(path) as fh:
        class_above = int(fh.readline().split(":")[1])
        threshold = float(fh.readline().split(":")[1])
        fh.readline()
        ids, ws = [], []
        for line in fh:
            sid, wi = line.split()
            ids.append(int(sid))
            ws.append(float(wi))
    return LdaModel(w=np.array(ws), threshold=threshold, class_above=class_above), np.array(ids)
