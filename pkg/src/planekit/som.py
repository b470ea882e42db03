"""Self-organizing map on hexagonal or rectangular lattices.

Training follows the classic online rule: per iteration every point is
presented in a seed-shuffled order and all weights move toward it under a
Gaussian neighborhood of the best-matching unit. Radius and learning rate
sweep geometrically between their endpoints, hitting both exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._reduction import pairwise_sum
from ._validation import as_feature_matrix, as_feature_vector
from .dataset import format_value

__all__ = [
    "Lattice",
    "SelfOrganizingMap",
    "SomParams",
    "SomModel",
    "bmu",
    "bmu_indices",
    "build_lattice",
    "geometric_schedule",
    "model_csv",
    "quantization_error",
    "train_som",
    "u_matrix",
    "u_matrix_csv",
]

TOPOLOGIES = ("hexagonal", "grid")

_NEIGHBOR_CUTOFF = 1.0 + 1e-9
_ROW_SPACING = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class Lattice:
    """Node placement of a rows x cols map; node index = row * cols + col."""

    rows: int
    cols: int
    topology: str
    positions: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    def squared_distance_matrix(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.einsum("ijd,ijd->ij", diff, diff)

    def distance_matrix(self) -> np.ndarray:
        return np.sqrt(self.squared_distance_matrix())

    def neighbor_mask(self) -> np.ndarray:
        """Adjacency at lattice distance <= 1 (+ float slack), self excluded."""
        dist = self.distance_matrix()
        mask = dist <= _NEIGHBOR_CUTOFF
        np.fill_diagonal(mask, False)
        return mask


def build_lattice(rows: int, cols: int, topology: str = "hexagonal") -> Lattice:
    """Lay out node coordinates. Grid nodes sit on integer coordinates;
    hexagonal rows are sqrt(3)/2 apart with odd rows offset by 0.5."""
    if rows < 1 or cols < 1:
        raise ValueError(f"lattice dimensions must be >= 1, got {rows}x{cols}")
    if topology not in TOPOLOGIES:
        raise ValueError(
            f"unknown topology {topology!r}; choose one of {{{', '.join(TOPOLOGIES)}}}"
        )
    r = np.repeat(np.arange(rows), cols)
    c = np.tile(np.arange(cols), rows)
    if topology == "grid":
        x = c.astype(np.float64)
        y = r.astype(np.float64)
    else:
        x = c + 0.5 * (r % 2)
        y = r * _ROW_SPACING
    positions = np.column_stack([x, y])
    positions.flags.writeable = False
    return Lattice(rows=rows, cols=cols, topology=topology, positions=positions)


@dataclass(frozen=True)
class SomParams:
    """Training schedule. Defaults: 200 iterations, radius 8 -> 2,
    learning rate 0.5 -> 0.05, Gaussian neighborhood."""

    iterations: int = 200
    radius_start: float = 8.0
    radius_end: float = 2.0
    learning_rate_start: float = 0.5
    learning_rate_end: float = 0.05
    neighborhood: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not (self.radius_start >= self.radius_end > 0):
            raise ValueError(
                "radius schedule requires radius_start >= radius_end > 0, got "
                f"{self.radius_start} -> {self.radius_end}"
            )
        if not (0 < self.learning_rate_end <= self.learning_rate_start <= 1):
            raise ValueError(
                "learning rate schedule requires 0 < end <= start <= 1, got "
                f"{self.learning_rate_start} -> {self.learning_rate_end}"
            )
        if self.neighborhood != "gaussian":
            raise ValueError("only the gaussian neighborhood is supported")


@dataclass(frozen=True)
class SomModel:
    lattice: Lattice
    weights: np.ndarray
    params: SomParams
    final_qe: float
    initial_qe: float

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64).copy()
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)


def geometric_schedule(start: float, end: float, t: int, total: int) -> float:
    """Value at step t of the geometric sweep from start (t=0) to end
    (t=total-1); both endpoints are hit exactly."""
    if total < 1:
        raise ValueError("total must be >= 1")
    if not 0 <= t < total:
        raise ValueError(f"step {t} outside [0, {total})")
    if t == 0:
        return float(start)
    if t == total - 1:
        return float(end)
    return float(start * (end / start) ** (t / (total - 1)))


def _weights_of(model_or_weights) -> np.ndarray:
    if isinstance(model_or_weights, SomModel):
        return model_or_weights.weights
    return np.asarray(model_or_weights, dtype=np.float64)


def bmu(model_or_weights, x) -> int:
    """Index of the node whose weights are nearest x; ties to lowest index."""
    W = _weights_of(model_or_weights)
    x = as_feature_vector(x, dim=W.shape[1])
    diff = W - x
    return int(np.argmin(np.einsum("nd,nd->n", diff, diff)))


def bmu_indices(model_or_weights, ds) -> np.ndarray:
    W = _weights_of(model_or_weights)
    X = as_feature_matrix(ds)
    if X.shape[1] != W.shape[1]:
        raise ValueError(f"dimension mismatch: data {X.shape[1]}, weights {W.shape[1]}")
    out = np.empty(X.shape[0], dtype=np.int64)
    for lo in range(0, X.shape[0], 512):
        chunk = X[lo : lo + 512]
        diff = chunk[:, None, :] - W[None, :, :]
        d2 = np.einsum("pnd,pnd->pn", diff, diff)
        out[lo : lo + 512] = np.argmin(d2, axis=1)
    return out


def quantization_error(model_or_weights, ds) -> float:
    """Mean Euclidean distance from each point to its BMU's weights."""
    W = _weights_of(model_or_weights)
    X = as_feature_matrix(ds)
    if X.shape[1] != W.shape[1]:
        raise ValueError(f"dimension mismatch: data {X.shape[1]}, weights {W.shape[1]}")
    mins = np.empty(X.shape[0], dtype=np.float64)
    for lo in range(0, X.shape[0], 512):
        chunk = X[lo : lo + 512]
        diff = chunk[:, None, :] - W[None, :, :]
        d2 = np.einsum("pnd,pnd->pn", diff, diff)
        mins[lo : lo + 512] = np.sqrt(d2.min(axis=1))
    return float(pairwise_sum(mins) / X.shape[0])


def train_som(ds, lattice: Lattice, params: SomParams) -> SomModel:
    """Train the map. Requires feature values in [0, 1] (normalized data);
    weights start uniformly random in [0, 1]^d under the seed and every
    update is a convex pull toward a presented point, so trained weights
    stay inside the unit hull.

    Training presents points strictly sequentially; the only data-parallel
    stage is the BMU argmin over nodes, which is deterministic.
    """
    X = as_feature_matrix(ds)
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValueError("training data must be normalized to [0, 1]")

    rng = np.random.default_rng(params.seed)
    W = rng.random((lattice.n_nodes, X.shape[1]))
    initial_qe = quantization_error(W, X)

    lat_d2 = lattice.squared_distance_matrix()
    T = params.iterations
    for t in range(T):
        radius = geometric_schedule(params.radius_start, params.radius_end, t, T)
        alpha = geometric_schedule(
            params.learning_rate_start, params.learning_rate_end, t, T
        )
        pull = alpha * np.exp(-lat_d2 / (2.0 * radius * radius))
        for i in rng.permutation(X.shape[0]):
            diff = X[i] - W
            winner = int(np.argmin(np.einsum("nd,nd->n", diff, diff)))
            W += pull[winner][:, None] * diff

    return SomModel(
        lattice=lattice,
        weights=W,
        params=params,
        final_qe=quantization_error(W, X),
        initial_qe=initial_qe,
    )


def u_matrix(model: SomModel) -> np.ndarray:
    """Per-node mean weight distance to lattice neighbors, as a
    rows x cols grid (0.0 for a node with no neighbors)."""
    mask = model.lattice.neighbor_mask()
    W = model.weights
    out = np.zeros(model.lattice.n_nodes, dtype=np.float64)
    for i in range(out.size):
        nb = np.flatnonzero(mask[i])
        if nb.size:
            diff = W[nb] - W[i]
            out[i] = float(np.mean(np.sqrt(np.einsum("nd,nd->n", diff, diff))))
    return out.reshape(model.lattice.rows, model.lattice.cols)


def u_matrix_csv(model: SomModel) -> str:
    grid = u_matrix(model)
    return "\n".join(",".join(format_value(v) for v in row) for row in grid) + "\n"


def model_csv(model: SomModel) -> str:
    d = model.weights.shape[1]
    header = ",".join(["node_index", "row", "col", *(f"w_{j}" for j in range(d))])
    lines = [header]
    for idx in range(model.lattice.n_nodes):
        r, c = divmod(idx, model.lattice.cols)
        weights = ",".join(format_value(v) for v in model.weights[idx])
        lines.append(f"{idx},{r},{c},{weights}")
    return "\n".join(lines) + "\n"


class SelfOrganizingMap(BaseEstimator, TransformerMixin):
    """Estimator wrapper around :func:`train_som`.

    Attributes after fit: ``lattice_``, ``weights_``,
    ``quantization_error_``, ``initial_quantization_error_``, ``model_``.
    """

    def __init__(
        self,
        rows: int = 20,
        cols: int = 20,
        topology: str = "hexagonal",
        iterations: int = 200,
        radius_start: float = 8.0,
        radius_end: float = 2.0,
        learning_rate_start: float = 0.5,
        learning_rate_end: float = 0.05,
        random_state: int = 0,
    ):
        self.rows = rows
        self.cols = cols
        self.topology = topology
        self.iterations = iterations
        self.radius_start = radius_start
        self.radius_end = radius_end
        self.learning_rate_start = learning_rate_start
        self.learning_rate_end = learning_rate_end
        self.random_state = random_state

    def _params(self) -> SomParams:
        return SomParams(
            iterations=self.iterations,
            radius_start=self.radius_start,
            radius_end=self.radius_end,
            learning_rate_start=self.learning_rate_start,
            learning_rate_end=self.learning_rate_end,
            seed=self.random_state,
        )

    def fit(self, X, y=None):
        lattice = build_lattice(self.rows, self.cols, self.topology)
        model = train_som(X, lattice, self._params())
        self.model_ = model
        self.lattice_ = lattice
        self.weights_ = model.weights
        self.quantization_error_ = model.final_qe
        self.initial_quantization_error_ = model.initial_qe
        return self

    def predict(self, X):
        """BMU index per row of X."""
        check_is_fitted(self, "weights_")
        return bmu_indices(self.weights_, X)

    def transform(self, X):
        """Euclidean distance from each row of X to every node's weights."""
        check_is_fitted(self, "weights_")
        X = as_feature_matrix(X)
        diff = X[:, None, :] - self.weights_[None, :, :]
        return np.sqrt(np.einsum("pnd,pnd->pn", diff, diff))

    def u_matrix(self) -> np.ndarray:
        check_is_fitted(self, "model_")
        return u_matrix(self.model_)
