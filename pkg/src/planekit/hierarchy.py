"""Hierarchical cluster tree of fixed order: recursive k-means over member
sets, with per-node statistics (object count, rmse, per-level wcss share).

Node ids are assigned breadth-first from 0 at the root. A node is split
while it sits above the requested depth, has at least ``order`` members,
and has positive rmse; each split runs the seeded k-means plus the
empty-cluster refine step on the node's members only.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._reduction import pairwise_sum
from ._validation import as_feature_matrix, check_workers
from .dataset import format_value
from .kmeans import DEFAULT_MAX_ITER, DEFAULT_TOL, kmeans, refine

__all__ = [
    "ClusterStats",
    "ClusterTree",
    "HierarchicalKMeans",
    "StatsRow",
    "TreeNode",
    "assignments_csv",
    "build_hierarchy",
    "cluster_stats",
    "stats_csv",
]

STATS_HEADER = "level,cluster_id,parent_id,object_count,rmse,coefficient"
ASSIGNMENTS_HEADER = "point_id,level,cluster_id"


@dataclass(frozen=True)
class TreeNode:
    node_id: int
    level: int
    parent_id: int | None
    centroid: np.ndarray
    members: np.ndarray
    object_count: int
    rmse: float
    coefficient: float

    def __post_init__(self):
        centroid = np.asarray(self.centroid, dtype=np.float64).copy()
        members = np.asarray(self.members, dtype=np.int64).copy()
        centroid.flags.writeable = False
        members.flags.writeable = False
        object.__setattr__(self, "centroid", centroid)
        object.__setattr__(self, "members", members)


@dataclass(frozen=True)
class ClusterTree:
    order: int
    depth: int
    nodes: tuple[TreeNode, ...]

    def level_nodes(self, level: int) -> tuple[TreeNode, ...]:
        return tuple(node for node in self.nodes if node.level == level)

    @property
    def levels(self) -> int:
        return max(node.level for node in self.nodes) + 1


@dataclass(frozen=True)
class StatsRow:
    level: int
    cluster_id: int
    parent_id: int | None
    object_count: int
    rmse: float
    coefficient: float


@dataclass(frozen=True)
class ClusterStats:
    rows: tuple[StatsRow, ...]


class _Subset:
    """Feature/id view of a node's members, fed back into kmeans."""

    def __init__(self, ids, features):
        self.ids = ids
        self.features = features


def _node_cost(X, members, centroid, workers):
    diff = X[members] - centroid
    sq = np.einsum("nd,nd->n", diff, diff)
    return float(pairwise_sum(sq, workers=workers))


def build_hierarchy(
    ds,
    m: int,
    depth: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
) -> ClusterTree:
    """Grow an order-m tree of the given depth over the dataset.

    Level 0 is the root holding every point; depth 1 reproduces the flat
    k-means result with k = m below it. Each split's seed is derived from
    the base seed and the node id, so the tree is deterministic.
    """
    workers = check_workers(workers)
    X = as_feature_matrix(ds)
    if m < 2:
        raise ValueError(f"order m must be >= 2, got {m}")
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    ids = getattr(ds, "ids", None) or tuple(str(i) for i in range(X.shape[0]))

    # records: (node_id, level, parent_id, centroid, members, wcss)
    records = []
    queue: deque[tuple[int, int | None, np.ndarray]] = deque(
        [(0, None, np.arange(X.shape[0]))]
    )
    while queue:
        level, parent_id, members = queue.popleft()
        node_id = len(records)
        centroid = pairwise_sum(X[members], workers=workers) / members.size
        wcss = _node_cost(X, members, centroid, workers)
        records.append((node_id, level, parent_id, centroid, members, wcss))

        rmse = np.sqrt(wcss / members.size)
        if level < depth and members.size >= m and rmse > 0.0:
            subset = _Subset(
                tuple(ids[i] for i in members), X[members]
            )
            model = kmeans(
                subset, m, seed=seed + node_id, max_iter=max_iter, tol=tol,
                workers=workers,
            )
            model = refine(model, subset, max_iter=max_iter, tol=tol, workers=workers)
            for j in range(m):
                child = members[np.flatnonzero(model.assignment == j)]
                if child.size:
                    queue.append((level + 1, node_id, child))

    level_totals: dict[int, float] = {}
    for _, level, _, _, _, wcss in records:
        level_totals[level] = level_totals.get(level, 0.0) + wcss

    nodes = []
    for node_id, level, parent_id, centroid, members, wcss in records:
        total = level_totals[level]
        nodes.append(
            TreeNode(
                node_id=node_id,
                level=level,
                parent_id=parent_id,
                centroid=centroid,
                members=members,
                object_count=int(members.size),
                rmse=float(np.sqrt(wcss / members.size)),
                coefficient=float(wcss / total) if total > 0.0 else 0.0,
            )
        )
    return ClusterTree(order=m, depth=depth, nodes=tuple(nodes))


def cluster_stats(tree: ClusterTree, ds, workers: int = 1) -> ClusterStats:
    """Per-node statistics recomputed from the data, ordered by
    (level, cluster id). The coefficient is the node's share of its
    level's total wcss (zero when the level's total is zero)."""
    X = as_feature_matrix(ds)
    costs = {
        node.node_id: _node_cost(X, node.members, node.centroid, workers)
        for node in tree.nodes
    }
    level_totals: dict[int, float] = {}
    for node in tree.nodes:
        level_totals[node.level] = level_totals.get(node.level, 0.0) + costs[node.node_id]

    rows = []
    for node in sorted(tree.nodes, key=lambda nd: (nd.level, nd.node_id)):
        total = level_totals[node.level]
        wcss = costs[node.node_id]
        rows.append(
            StatsRow(
                level=node.level,
                cluster_id=node.node_id,
                parent_id=node.parent_id,
                object_count=node.object_count,
                rmse=float(np.sqrt(wcss / node.object_count)),
                coefficient=float(wcss / total) if total > 0.0 else 0.0,
            )
        )
    return ClusterStats(rows=tuple(rows))


def stats_csv(stats: ClusterStats) -> str:
    lines = [STATS_HEADER]
    for r in stats.rows:
        parent = "" if r.parent_id is None else str(r.parent_id)
        lines.append(
            f"{r.level},{r.cluster_id},{parent},{r.object_count},"
            f"{format_value(r.rmse)},{format_value(r.coefficient)}"
        )
    return "\n".join(lines) + "\n"


def assignments_csv(tree: ClusterTree, ds) -> str:
    """One row per (point, containing node) pair, ordered by
    (level, cluster id, point index)."""
    ids = getattr(ds, "ids", None)
    if ids is None:
        n = max(int(node.members.max()) for node in tree.nodes) + 1
        ids = tuple(str(i) for i in range(n))
    lines = [ASSIGNMENTS_HEADER]
    for node in sorted(tree.nodes, key=lambda nd: (nd.level, nd.node_id)):
        for i in node.members:
            lines.append(f"{ids[i]},{node.level},{node.node_id}")
    return "\n".join(lines) + "\n"


class HierarchicalKMeans(BaseEstimator):
    """Estimator wrapper for the order-m cluster tree."""

    def __init__(
        self,
        order: int = 2,
        depth: int = 1,
        random_state: int = 0,
        max_iter: int = DEFAULT_MAX_ITER,
        tol: float = DEFAULT_TOL,
        workers: int = 1,
    ):
        self.order = order
        self.depth = depth
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol
        self.workers = workers

    def fit(self, X, y=None):
        tree = build_hierarchy(
            X,
            self.order,
            self.depth,
            seed=self.random_state,
            max_iter=self.max_iter,
            tol=self.tol,
            workers=self.workers,
        )
        self.tree_ = tree
        self.stats_ = cluster_stats(tree, X, workers=self.workers)
        return self

    def level_labels(self, level: int) -> np.ndarray:
        """Cluster-id label per point at one tree level; points whose
        branch stopped above the level carry -1."""
        check_is_fitted(self, "tree_")
        n = self.tree_.nodes[0].object_count
        labels = np.full(n, -1, dtype=np.int64)
        for node in self.tree_.level_nodes(level):
            labels[node.members] = node.node_id
        return labels
