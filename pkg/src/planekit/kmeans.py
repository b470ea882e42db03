"""Modified k-means: D²-weighted seeding, Lloyd iteration, empty-cluster
re-seeding, plus a small exhaustive-partition oracle for verification.

Distance is squared Euclidean throughout; assignment ties break to the
lowest cluster id. All reductions over points go through
:func:`planekit._reduction.pairwise_sum`, so results are bit-identical for
any worker count. Seeding randomness is keyed to point ids (canonical id
order), not to row positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._reduction import pairwise_sum
from ._validation import as_feature_matrix, check_workers

__all__ = [
    "ClusterModel",
    "KMeans",
    "brute_force_partition",
    "cluster_summary",
    "kmeans",
    "kmeans_plusplus",
    "lloyd_step",
    "refine",
]

DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-6

BRUTE_FORCE_MAX_POINTS = 12
BRUTE_FORCE_MAX_CLUSTERS = 4


@dataclass(frozen=True)
class ClusterModel:
    """Converged flat clustering: centroids, assignment, and its cost.

    ``wcss`` is the sum of squared distances from each point to its
    assigned centroid; ``wcss_history`` records the cost after every Lloyd
    step that produced this model (non-increasing).
    """

    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    wcss: float
    iterations_run: int
    seed: int
    wcss_history: tuple[float, ...] = ()

    def __post_init__(self):
        centroids = np.asarray(self.centroids, dtype=np.float64).copy()
        assignment = np.asarray(self.assignment, dtype=np.int64).copy()
        centroids.flags.writeable = False
        assignment.flags.writeable = False
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "assignment", assignment)


def _point_ids(ds, n: int) -> tuple[str, ...]:
    ids = getattr(ds, "ids", None)
    if ids is None:
        return tuple(str(i) for i in range(n))
    return tuple(ids)


def _squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances, computed without matrix products
    so the result does not depend on BLAS threading."""
    out = np.empty((X.shape[0], centroids.shape[0]), dtype=np.float64)
    for j in range(centroids.shape[0]):
        diff = X - centroids[j]
        out[:, j] = np.einsum("nd,nd->n", diff, diff)
    return out


def _assign(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = _squared_distances(X, centroids)
    assignment = np.argmin(d2, axis=1)
    costs = d2[np.arange(X.shape[0]), assignment]
    return assignment, costs


def kmeans_plusplus(ds, k: int, seed: int = 0) -> np.ndarray:
    """Choose k distinct seed points by D² weighting, deterministic in seed.

    The first seed is uniform; each further seed is drawn with probability
    proportional to its squared distance to the nearest seed so far. When
    every remaining point coincides with a seed, the draw falls back to
    uniform over the unchosen points. Sampling order is keyed to point ids,
    so a row permutation of the input does not change the chosen vectors.
    """
    X = as_feature_matrix(ds)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    ids = _point_ids(ds, n)
    canonical = sorted(range(n), key=lambda i: ids[i])
    Xc = X[canonical]

    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    d2 = np.einsum("nd,nd->n", Xc - Xc[chosen[0]], Xc - Xc[chosen[0]])
    for _ in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        diff = Xc - Xc[idx]
        d2 = np.minimum(d2, np.einsum("nd,nd->n", diff, diff))
    return Xc[chosen].copy()


def lloyd_step(ds, centroids, workers: int = 1):
    """One Lloyd iteration.

    Returns ``(new_centroids, assignment, wcss)`` where the assignment maps
    each point to its nearest input centroid (ties to the lowest id), new
    centroids are member means (empty clusters keep their old centroid),
    and wcss is the cost of the returned assignment against the *input*
    centroids.
    """
    workers = check_workers(workers)
    X = as_feature_matrix(ds)
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim != 2 or centroids.shape[0] == 0:
        raise ValueError("centroids must be a non-empty (k, d) array")
    if centroids.shape[1] != X.shape[1]:
        raise ValueError(
            f"centroid dimension {centroids.shape[1]} != data dimension {X.shape[1]}"
        )

    assignment, costs = _assign(X, centroids)
    wcss = float(pairwise_sum(costs, workers=workers))
    new_centroids = centroids.copy()
    for j in range(centroids.shape[0]):
        members = np.flatnonzero(assignment == j)
        if members.size:
            new_centroids[j] = pairwise_sum(X[members], workers=workers) / members.size
    return new_centroids, assignment, wcss


def _lloyd_until_converged(X, centroids, max_iter, tol, workers):
    history: list[float] = []
    prev = math.inf
    assignment = None
    wcss = math.inf
    step = 0
    for step in range(1, max_iter + 1):
        new_centroids, assignment, wcss = lloyd_step(X, centroids, workers=workers)
        history.append(wcss)
        if prev - wcss < tol or step == max_iter:
            break
        prev = wcss
        centroids = new_centroids
    return centroids, assignment, wcss, step, history


def kmeans(
    ds,
    k: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
) -> ClusterModel:
    """Run D²-seeded Lloyd iteration until the wcss improvement drops
    below ``tol`` or ``max_iter`` steps have run."""
    X = as_feature_matrix(ds)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    seeds = kmeans_plusplus(ds, k, seed=seed)
    centroids, assignment, wcss, steps, history = _lloyd_until_converged(
        X, seeds, max_iter, tol, workers
    )
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignment=assignment,
        wcss=wcss,
        iterations_run=steps,
        seed=seed,
        wcss_history=tuple(history),
    )


def refine(
    model: ClusterModel,
    ds,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
) -> ClusterModel:
    """Eliminate empty clusters by re-seeding them to the points farthest
    from their assigned centroids, then resume Lloyd iteration.

    Never increases wcss. A model without empty clusters is returned
    unchanged. If the data has fewer distinct points than clusters, a
    residual empty cluster may be unavoidable; the loop stops once no
    re-seed can make progress.
    """
    X = as_feature_matrix(ds)
    if model.assignment.shape[0] != X.shape[0]:
        raise ValueError("model was not fit on this dataset")
    k = model.k
    if np.setdiff1d(np.arange(k), model.assignment).size == 0:
        return model

    centroids = model.centroids.copy()
    assignment = model.assignment.copy()
    wcss = model.wcss
    iterations = model.iterations_run
    history = list(model.wcss_history)
    prev_pass = math.inf
    while wcss < prev_pass:
        empty = np.setdiff1d(np.arange(k), assignment)
        if empty.size == 0:
            break
        diff = X - centroids[assignment]
        costs = np.einsum("nd,nd->n", diff, diff)
        if costs.max() <= 0.0:
            break
        farthest = np.argsort(-costs, kind="stable")
        for slot, j in enumerate(empty):
            centroids[j] = X[farthest[slot]]
        prev_pass = wcss
        centroids, assignment, wcss, steps, more = _lloyd_until_converged(
            X, centroids, max_iter, tol, workers
        )
        iterations += steps
        history.extend(more)

    return ClusterModel(
        k=k,
        centroids=centroids,
        assignment=assignment,
        wcss=wcss,
        iterations_run=iterations,
        seed=model.seed,
        wcss_history=tuple(history),
    )


def cluster_summary(ds, centroids, assignment, workers: int = 1):
    """Per-cluster (object_count, wcss, rmse) arrays for a flat model."""
    X = as_feature_matrix(ds)
    centroids = np.asarray(centroids, dtype=np.float64)
    assignment = np.asarray(assignment)
    k = centroids.shape[0]
    counts = np.bincount(assignment, minlength=k)
    wcss_per = np.zeros(k, dtype=np.float64)
    for j in range(k):
        members = np.flatnonzero(assignment == j)
        if members.size:
            diff = X[members] - centroids[j]
            sq = np.einsum("nd,nd->n", diff, diff)
            wcss_per[j] = float(pairwise_sum(sq, workers=workers))
    rmse = np.sqrt(wcss_per / np.maximum(counts, 1))
    return counts, wcss_per, rmse


def brute_force_partition(ds, k: int) -> tuple[float, np.ndarray]:
    """Exhaustively minimize wcss over all partitions into <= k non-empty
    parts, using member means as centroids. Only viable for tiny inputs;
    serves as the optimality oracle for the iterative solver."""
    X = as_feature_matrix(ds)
    n, d = X.shape
    if n > BRUTE_FORCE_MAX_POINTS:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_POINTS}, got {n}")
    if k > BRUTE_FORCE_MAX_CLUSTERS:
        raise ValueError(f"brute force limited to k <= {BRUTE_FORCE_MAX_CLUSTERS}, got {k}")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    total_sq = float(np.einsum("nd,nd->", X, X))
    labels = np.zeros(n, dtype=np.int64)
    sums = np.zeros((k, d), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    best_wcss = math.inf
    best_labels = labels.copy()

    def descend(i: int, used: int):
        nonlocal best_wcss, best_labels
        if i == n:
            centered = sum(
                float(sums[p] @ sums[p]) / counts[p] for p in range(used)
            )
            wcss = max(total_sq - centered, 0.0)
            if wcss < best_wcss:
                best_wcss = wcss
                best_labels = labels.copy()
            return
        # Canonical labelings only: part p may be opened once parts 0..p-1 are.
        for p in range(min(used + 1, k)):
            labels[i] = p
            sums[p] += X[i]
            counts[p] += 1
            descend(i + 1, max(used, p + 1))
            sums[p] -= X[i]
            counts[p] -= 1

    descend(0, 0)
    return best_wcss, best_labels


class KMeans(BaseEstimator, ClusterMixin):
    """Estimator wrapper: D²-weighted seeding, Lloyd iteration, and
    empty-cluster re-seeding in one fit.

    Attributes after fit: ``cluster_centers_``, ``labels_``, ``inertia_``,
    ``n_iter_``, and the underlying ``model_``.
    """

    def __init__(
        self,
        n_clusters: int = 8,
        random_state: int = 0,
        max_iter: int = DEFAULT_MAX_ITER,
        tol: float = DEFAULT_TOL,
        workers: int = 1,
    ):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol
        self.workers = workers

    def fit(self, X, y=None):
        model = kmeans(
            X,
            self.n_clusters,
            seed=self.random_state,
            max_iter=self.max_iter,
            tol=self.tol,
            workers=self.workers,
        )
        model = refine(
            model, X, max_iter=self.max_iter, tol=self.tol, workers=self.workers
        )
        self.model_ = model
        self.cluster_centers_ = model.centroids
        self.labels_ = model.assignment
        self.inertia_ = model.wcss
        self.n_iter_ = model.iterations_run
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = as_feature_matrix(X)
        if X.shape[1] != self.cluster_centers_.shape[1]:
            raise ValueError("dimension mismatch with fitted centroids")
        assignment, _ = _assign(X, self.cluster_centers_)
        return assignment
