"""Sparse sensor selection: SVD truncation, discriminant-weighted feature
selection, elastic-net sparse regression, and the random-placement baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh

from . import classify
from .classify import LabeledDataMatrix, SplitData
from .fields import N_SENSORS, grid_coordinates

ZERO_TOL = 1e-6
DEFAULT_ALPHA = 0.9
RESIDUAL_FRACTION = 0.05
LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
RANK_GRID = (30, 50, 70, 100, 150, 200, 300)
VALIDATION_FRACTION = 0.15


@dataclass
class TruncatedBasis:
    Psi_r: np.ndarray                    # (sensors, r), orthonormal columns
    Sigma_r: np.ndarray                  # (r,)
    mean: np.ndarray                     # training column mean used for centering

    @property
    def rank(self) -> int:
        return self.Sigma_r.size

    def project(self, X: np.ndarray) -> np.ndarray:
        """Coordinates a = Psi_r^T (X - mean)."""
        return self.Psi_r.T @ (X - self.mean[:, None])


@dataclass
class FeatureSelection:
    indices: np.ndarray                  # chosen columns of Psi_r
    Psi_rho: np.ndarray                  # (sensors, rho)
    w_rho: np.ndarray                    # (rho,)


@dataclass
class SparseSolution:
    s: np.ndarray
    alpha: float
    lam: float
    iterations: int
    residual: float
    objective_history: np.ndarray


@dataclass
class SensorSet:
    indices: np.ndarray                  # grid indices, distinct
    provenance: str                      # "sspoc" or "random"
    seed: Optional[int] = None
    truncated: bool = False              # fewer than requested survived

    def __post_init__(self):
        self.indices = np.asarray(self.indices)
        if len(np.unique(self.indices)) != self.indices.size:
            raise ValueError("sensor indices must be distinct")

    @property
    def q(self) -> int:
        return self.indices.size


def svd_truncate(X_train: np.ndarray, r: int) -> TruncatedBasis:
    """Thin SVD of the (globally mean-centered) training matrix, rank r."""
    if r > min(X_train.shape):
        raise ValueError(f"rank {r} exceeds matrix dimensions {X_train.shape}")
    mean = X_train.mean(axis=1)
    U, S, _ = np.linalg.svd(X_train - mean[:, None], full_matrices=False)
    return TruncatedBasis(Psi_r=U[:, :r], Sigma_r=S[:r], mean=mean)


def select_features(basis: TruncatedBasis, w: np.ndarray, rho: int) -> FeatureSelection:
    """Keep the rho columns with the largest Sigma_r * |w| weight."""
    w = np.asarray(w)
    if rho > basis.rank:
        raise ValueError("rho exceeds basis rank")
    score = basis.Sigma_r * np.abs(w)
    # stable tie-break by lower index
    order = np.lexsort((np.arange(score.size), -score))
    idx = np.sort(order[:rho])
    return FeatureSelection(indices=idx, Psi_rho=basis.Psi_r[:, idx], w_rho=w[idx])


def _enet_objective(A, w, s, lam, alpha):
    r = w - A.T @ s
    return 0.5 * r @ r + lam * (alpha * np.abs(s).sum() + (1 - alpha) * s @ s)


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _proximal_gradient(A, w, lam, alpha, max_iter=5000, tol=1e-12):
    """Proximal-gradient (ISTA) solve of
    0.5||w - A^T s||^2 + lam*(alpha*||s||_1 + (1-alpha)*||s||_2^2).

    Step size 1/L with L the Lipschitz constant of the smooth part, so the
    objective is nonincreasing.
    """
    s = np.zeros(A.shape[0])
    # smooth part: 0.5||w - A^T s||^2 + lam(1-alpha)||s||^2
    gram_norm = np.linalg.norm(A, 2) ** 2
    L = gram_norm + 2.0 * lam * (1.0 - alpha)
    step = 1.0 / L
    obj = _enet_objective(A, w, s, lam, alpha)
    history = [obj]
    for it in range(max_iter):
        grad = A @ (A.T @ s - w) + 2.0 * lam * (1.0 - alpha) * s
        s_new = _soft_threshold(s - step * grad, step * lam * alpha)
        new_obj = _enet_objective(A, w, s_new, lam, alpha)
        history.append(new_obj)
        if tol > 0.0:
            if obj - new_obj < tol * max(1.0, abs(obj)):
                s = s_new
                break
        elif np.max(np.abs(s_new - s)) <= np.finfo(float).eps * np.max(np.abs(s_new)):
            # tol <= 0: run to the floating-point fixed point
            s = s_new
            break
        s = s_new
        obj = new_obj
    return s, it + 1, np.array(history)


def solve_sparse(sel: FeatureSelection, alpha: float = DEFAULT_ALPHA,
                 lam: Optional[float] = None, max_iter: int = 5000,
                 tol: float = 1e-12) -> SparseSolution:
    """Sparse vector s with Psi_rho^T s ~ w_rho under an elastic-net penalty.

    When lam is not given, it is swept over a geometric grid scaled by
    ||Psi_rho w_rho||_inf and the largest value whose residual stays below
    5% of ||w_rho||_2 is kept.
    """
    A = sel.Psi_rho                      # (n, rho)
    w = sel.w_rho
    w_norm = np.linalg.norm(w)
    if w_norm == 0:
        raise ValueError("zero discriminant; nothing to solve")
    if lam is not None:
        lams = [lam]
    else:
        scale = np.max(np.abs(A @ w))
        lams = [g * scale for g in LAMBDA_GRID]
    best = None
    for lam_try in sorted(lams, reverse=True):
        s, iters, hist = _proximal_gradient(A, w, lam_try, alpha, max_iter=max_iter, tol=tol)
        residual = np.linalg.norm(w - A.T @ s)
        sol = SparseSolution(s=s, alpha=alpha, lam=lam_try, iterations=iters,
                             residual=residual, objective_history=hist)
        if residual <= RESIDUAL_FRACTION * w_norm:
            return sol
        if best is None or residual < best.residual:
            best = sol
    if best.iterations >= max_iter and best.residual > RESIDUAL_FRACTION * w_norm:
        raise RuntimeError(f"elastic net did not converge; residual {best.residual:.3e}")
    return best


def extract_sensors(sol: SparseSolution, q: int) -> SensorSet:
    """Indices of the q largest |s| entries; near-zero entries never selected."""
    if q < 1:
        raise ValueError("q must be at least 1")
    mags = np.abs(sol.s)
    m = mags.max()
    if m == 0.0:
        raise ValueError("all-zero sparse solution")
    alive = np.flatnonzero(mags > ZERO_TOL * m)
    order = np.lexsort((alive, -mags[alive]))
    chosen = alive[order[:q]]
    return SensorSet(indices=np.sort(chosen), provenance="sspoc",
                     truncated=chosen.size < q)


def random_sensors(q: int, seed: int, n_total: int = N_SENSORS) -> SensorSet:
    """Uniform sample of q grid locations without replacement."""
    if q > n_total:
        raise ValueError("q exceeds number of grid locations")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n_total, size=q, replace=False)
    return SensorSet(indices=np.sort(idx), provenance="random", seed=seed)


def lda_direction(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Unit-norm Fisher direction of (features x samples) data."""
    S_w, S_b = classify.scatter_matrices(X, y)
    n = X.shape[0]
    S_w_reg = S_w + (classify.RIDGE_GAMMA * np.trace(S_w) / n + 1e-300) * np.eye(n)
    _, vecs = eigh(S_b, S_w_reg, subset_by_index=[n - 1, n - 1])
    w = vecs[:, 0]
    return w / np.linalg.norm(w)


def _select_at_rank(basis: TruncatedBasis, X: np.ndarray, y: np.ndarray,
                    rho: int, alpha: float) -> SensorSet:
    a = basis.project(X)
    w = lda_direction(a, y)
    sel = select_features(basis, w, min(rho, basis.rank))
    sol = solve_sparse(sel, alpha=alpha)
    return extract_sensors(sol, rho)


def _truncate_basis(basis: TruncatedBasis, r: int) -> TruncatedBasis:
    return TruncatedBasis(Psi_r=basis.Psi_r[:, :r], Sigma_r=basis.Sigma_r[:r],
                          mean=basis.mean)


def sspoc_select(train: SplitData, rho: int, r: Optional[int] = None,
                 alpha: float = DEFAULT_ALPHA) -> SensorSet:
    """Full selection pipeline: SVD -> feature LDA -> feature selection ->
    elastic net -> sensor extraction (q = rho requested).

    When r is given, that truncation rank is used directly.  Otherwise the
    rank is chosen from RANK_GRID: the tail of each class's training block
    is held out, sensors are extracted at every candidate rank, and the
    rank whose sensors classify the held-out slice best wins.  The sweet
    spot moves with the realized disturbances, so a fixed rank leaves
    accuracy on the table at small q.
    """
    X, y = train.X_train, train.y_train
    if r is not None:
        r = max(min(r, min(X.shape)), rho)
        return _select_at_rank(svd_truncate(X, r), X, y, rho, alpha)

    tr_idx, va_idx = [], []
    for lab in np.unique(y):
        idx = np.flatnonzero(y == lab)
        n_va = max(1, int(round(VALIDATION_FRACTION * idx.size)))
        tr_idx.append(idx[:-n_va])
        va_idx.append(idx[-n_va:])
    tr = np.concatenate(tr_idx)
    va = np.concatenate(va_idx)
    X_tr, y_tr = X[:, tr], y[tr]
    X_va, y_va = X[:, va], y[va]

    ranks = sorted({max(min(g, min(X_tr.shape)), rho) for g in RANK_GRID})
    full_basis = svd_truncate(X_tr, ranks[-1])
    best_acc, best_set = -1.0, None
    for rank in ranks:
        cand = _select_at_rank(_truncate_basis(full_basis, rank), X_tr, y_tr,
                               rho, alpha)
        sub = SplitData(X_train=X_tr[cand.indices], y_train=y_tr,
                        X_test=X_va[cand.indices], y_test=y_va)
        model = classify.fit_lda(sub)
        acc = classify.evaluate(model, sub.X_test, sub.y_test)
        if acc > best_acc:
            best_acc, best_set = acc, cand
    return best_set


def classify_with_sensors(sensor_set: SensorSet, data: LabeledDataMatrix,
                          train_frac: float = 0.9) -> float:
    """Validated accuracy using only the given sensor rows."""
    positions = np.searchsorted(data.sensor_ids, sensor_set.indices)
    if (np.any(positions >= data.sensor_ids.size)
            or not np.array_equal(data.sensor_ids[np.minimum(
                positions, data.sensor_ids.size - 1)], sensor_set.indices)):
        raise ValueError("sensor set not contained in data matrix")
    restricted = data.restrict(positions)
    parts = classify.split(restricted, train_frac=train_frac)
    if parts.X_train.shape[1] < sensor_set.q + 2:
        raise ValueError("too few training snapshots for this sensor count")
    model = classify.fit_lda(parts)
    return classify.evaluate(model, parts.X_test, parts.y_test)


def save_sensor_set(sensor_set: SensorSet, path: str) -> None:
    """Plain-text persistence: provenance, seed, q, indices, coordinates."""
    x_mm, y_mm = grid_coordinates()
    with open(path, "w") as fh:
        fh.write(f"provenance: {sensor_set.provenance}\n")
        fh.write(f"seed: {sensor_set.seed}\n")
        fh.write(f"q: {sensor_set.q}\n")
        fh.write("index x_mm y_mm\n")
        for i in sensor_set.indices:
            fh.write(f"{i} {x_mm[i]} {y_mm[i]}\n")


def load_sensor_set(path: str) -> SensorSet:
    with open(path) as fh:
        provenance = fh.readline().split(":")[1].strip()
        seed_txt = fh.readline().split(":")[1].strip()
        fh.readline()  # q line (derived from indices)
        fh.readline()  # column header
        idx = [int(line.split()[0]) for line in fh if line.strip()]
    seed = None if seed_txt == "None" else int(seed_txt)
    return SensorSet(indices=np.array(idx), provenance=provenance, seed=seed)
