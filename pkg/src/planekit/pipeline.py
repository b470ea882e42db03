"""Two-phase orchestration over a shared data plane.

Phase 1 ingests and normalizes each data demand and commits it to the
plane in input order. Phase 2 serves each service request against the
pooled plane: cluster, rank clusters by quality under the service's
selection budget, optionally solve the service's server-allocation
problem, and feed the selected centroids back into the plane as a derived
dataset. A service that yields no usable selection, or whose allocation
problem is infeasible, is recorded with the ``InfeasibleSolution_Data``
marker and never disturbs the other services.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .dataset import ColumnSchema, Dataset, ingest_csv, normalize
from .kmeans import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    cluster_summary,
    kmeans,
    refine,
)
from .sla import (
    Allocation,
    AllocationProblem,
    InfeasibleAllocation,
    allocation_result_to_json,
    optimize_greedy,
    problem_from_json,
)

__all__ = [
    "ACCOMMODATED",
    "ClusterCandidate",
    "DataDemand",
    "INFEASIBLE",
    "PipelineConfig",
    "PipelineReport",
    "PlaneState",
    "ServiceOutcome",
    "ServiceRequest",
    "plan_from_json",
    "report_to_json",
    "run",
    "select_best_set",
    "update_plane",
]

ACCOMMODATED = "Accommodated"
INFEASIBLE = "InfeasibleSolution_Data"

DEFAULT_EPSILON = 1e-9


@dataclass(frozen=True)
class DataDemand:
    demand_id: str
    source: Union[str, os.PathLike, bytes]
    schema: ColumnSchema


@dataclass(frozen=True)
class ServiceRequest:
    service_id: str
    k: int
    selection_budget: int
    sla: AllocationProblem | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.selection_budget < 1:
            raise ValueError(
                f"selection budget must be >= 1, got {self.selection_budget}"
            )


@dataclass(frozen=True)
class PlaneState:
    """Pooled, deduplicated point store plus the datasets that built it.

    Immutable: every update produces a new state with version + 1.
    """

    epsilon: float = DEFAULT_EPSILON
    version: int = 0
    datasets: tuple[tuple[str, Dataset], ...] = ()
    point_ids: tuple[str, ...] = ()
    features: np.ndarray | None = None

    def __post_init__(self):
        if self.features is not None:
            features = np.asarray(self.features, dtype=np.float64)
            if features.flags.writeable:
                features = features.copy()
                features.flags.writeable = False
            object.__setattr__(self, "features", features)

    @property
    def n_points(self) -> int:
        return 0 if self.features is None else self.features.shape[0]

    @property
    def d(self) -> int | None:
        return None if self.features is None else self.features.shape[1]

    def pooled(self) -> Dataset:
        if self.features is None:
            raise ValueError("plane is empty")
        return Dataset(ids=self.point_ids, features=self.features)


def update_plane(
    state: PlaneState,
    ds: Dataset,
    epsilon: float | None = None,
    demand_id: str | None = None,
) -> PlaneState:
    """Commit a normalized dataset to the plane.

    A new point whose id matches an existing point within ``epsilon``
    (Euclidean) replaces that point in place; otherwise it is appended,
    so two far-apart readings under one id coexist.
    """
    if ds.normalization is None:
        raise ValueError("the plane accepts normalized datasets only")
    eps = state.epsilon if epsilon is None else float(epsilon)
    if state.features is not None and ds.d != state.features.shape[1]:
        raise ValueError(
            f"dimension mismatch: plane has d={state.features.shape[1]}, "
            f"dataset has d={ds.d}"
        )

    ids = list(state.point_ids)
    rows = [] if state.features is None else list(state.features)
    by_id: dict[str, list[int]] = {}
    for i, pid in enumerate(ids):
        by_id.setdefault(pid, []).append(i)

    for pid, vec in zip(ds.ids, ds.features):
        replaced = False
        for i in by_id.get(pid, ()):
            delta = rows[i] - vec
            if float(np.sqrt(np.dot(delta, delta))) <= eps:
                rows[i] = vec
                replaced = True
                break
        if not replaced:
            by_id.setdefault(pid, []).append(len(rows))
            ids.append(pid)
            rows.append(vec)

    label = demand_id if demand_id is not None else f"update-{state.version + 1}"
    return PlaneState(
        epsilon=state.epsilon,
        version=state.version + 1,
        datasets=state.datasets + ((label, ds),),
        point_ids=tuple(ids),
        features=np.array(rows, dtype=np.float64),
    )


@dataclass(frozen=True)
class ClusterCandidate:
    cluster_id: int
    object_count: int
    rmse: float
    coefficient: float


def select_best_set(candidates: Sequence, budget: int):
    """Top ``budget`` non-empty clusters by ascending rmse; ties prefer the
    larger cluster, then the lower cluster id. Empty when no candidate
    holds any points."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    usable = [c for c in candidates if c.object_count > 0]
    usable.sort(key=lambda c: (c.rmse, -c.object_count, c.cluster_id))
    return tuple(usable[:budget])


@dataclass(frozen=True)
class ServiceOutcome:
    service_id: str
    status: str
    reason: str | None
    clusters: tuple[ClusterCandidate, ...]
    selected: tuple[int, ...]
    allocation: Allocation | InfeasibleAllocation | None


@dataclass(frozen=True)
class PipelineConfig:
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    workers: int = 1
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL


@dataclass(frozen=True)
class PipelineReport:
    outcomes: tuple[ServiceOutcome, ...]
    demand_errors: tuple[tuple[str, str], ...]
    totals: dict
    plane: PlaneState


def _serve(state: PlaneState, svc: ServiceRequest, config: PipelineConfig):
    """One service against the current plane. Returns (outcome, derived
    dataset to feed back or None)."""
    try:
        pooled = state.pooled()
        model = kmeans(
            pooled,
            svc.k,
            seed=config.seed,
            max_iter=config.max_iter,
            tol=config.tol,
            workers=config.workers,
        )
        model = refine(
            model, pooled, max_iter=config.max_iter, tol=config.tol,
            workers=config.workers,
        )
    except ValueError as exc:
        outcome = ServiceOutcome(
            service_id=svc.service_id,
            status=INFEASIBLE,
            reason=f"insufficient data: {exc}",
            clusters=(),
            selected=(),
            allocation=None,
        )
        return outcome, None

    counts, wcss_per, rmse = cluster_summary(
        pooled, model.centroids, model.assignment, workers=config.workers
    )
    total_wcss = float(wcss_per.sum())
    clusters = tuple(
        ClusterCandidate(
            cluster_id=j,
            object_count=int(counts[j]),
            rmse=float(rmse[j]),
            coefficient=float(wcss_per[j] / total_wcss) if total_wcss > 0.0 else 0.0,
        )
        for j in range(model.k)
    )
    selected = select_best_set(clusters, svc.selection_budget)
    if not selected:
        outcome = ServiceOutcome(
            service_id=svc.service_id,
            status=INFEASIBLE,
            reason="empty selection",
            clusters=clusters,
            selected=(),
            allocation=None,
        )
        return outcome, None

    allocation = None
    if svc.sla is not None:
        allocation = optimize_greedy(svc.sla)
        if isinstance(allocation, InfeasibleAllocation):
            outcome = ServiceOutcome(
                service_id=svc.service_id,
                status=INFEASIBLE,
                reason="sla infeasible",
                clusters=clusters,
                selected=tuple(c.cluster_id for c in selected),
                allocation=allocation,
            )
            return outcome, None

    chosen = [c.cluster_id for c in selected]
    derived = Dataset(
        ids=tuple(f"{svc.service_id}:centroid:{j}" for j in chosen),
        features=np.clip(model.centroids[chosen], 0.0, 1.0),
        normalization=tuple((0.0, 1.0) for _ in range(model.centroids.shape[1])),
    )
    outcome = ServiceOutcome(
        service_id=svc.service_id,
        status=ACCOMMODATED,
        reason=None,
        clusters=clusters,
        selected=tuple(chosen),
        allocation=allocation,
    )
    return outcome, derived


def run(
    demands: Sequence[DataDemand],
    services: Sequence[ServiceRequest],
    config: PipelineConfig = PipelineConfig(),
) -> PipelineReport:
    """Execute both phases and report one outcome per service.

    Ingestion failures abort only the offending demand and are listed in
    the report; service failures (no data, empty selection, infeasible
    allocation) mark that service infeasible without touching the rest.
    """
    demands = list(demands)
    services = list(services)
    state = PlaneState(epsilon=config.epsilon)
    demand_errors: list[tuple[str, str]] = []
    for dm in demands:
        try:
            ds = normalize(ingest_csv(dm.source, dm.schema))
            state = update_plane(state, ds, demand_id=dm.demand_id)
        except (ValueError, OSError) as exc:
            demand_errors.append((dm.demand_id, str(exc)))

    outcomes: list[ServiceOutcome] = []
    objective_total = 0.0
    for svc in services:
        outcome, derived = _serve(state, svc, config)
        outcomes.append(outcome)
        if derived is not None:
            state = update_plane(state, derived, demand_id=f"service:{svc.service_id}")
        if isinstance(outcome.allocation, Allocation):
            objective_total += outcome.allocation.objective_value

    totals = {
        "demands": len(demands),
        "demands_ingested": len(demands) - len(demand_errors),
        "demands_failed": len(demand_errors),
        "plane_points": state.n_points,
        "plane_version": state.version,
        "services": len(outcomes),
        "services_accommodated": sum(
            1 for o in outcomes if o.status == ACCOMMODATED
        ),
        "services_infeasible": sum(1 for o in outcomes if o.status == INFEASIBLE),
        "objective_total": objective_total,
    }
    return PipelineReport(
        outcomes=tuple(outcomes),
        demand_errors=tuple(demand_errors),
        totals=totals,
        plane=state,
    )


def plan_from_json(doc: dict, base_dir: Union[str, os.PathLike, None] = None):
    """Parse the pipeline configuration document.

    Layout: {"demands": [{"id", "source", "schema": {"id_column",
    "features"}}], "services": [{"id", "k", "selection_budget", "sla"}],
    "epsilon": float, "seed": int}. Demand sources resolve relative to
    ``base_dir`` when given.
    """
    demands = []
    for rec in doc.get("demands", []):
        source = rec["source"]
        if base_dir is not None and not os.path.isabs(source):
            source = os.path.join(os.fspath(base_dir), source)
        demands.append(
            DataDemand(
                demand_id=str(rec["id"]),
                source=source,
                schema=ColumnSchema(
                    id_column=rec["schema"]["id_column"],
                    feature_columns=tuple(rec["schema"]["features"]),
                ),
            )
        )
    services = []
    for rec in doc.get("services", []):
        sla = rec.get("sla")
        services.append(
            ServiceRequest(
                service_id=str(rec["id"]),
                k=int(rec["k"]),
                selection_budget=int(rec["selection_budget"]),
                sla=problem_from_json(sla) if sla else None,
            )
        )
    config = PipelineConfig(
        epsilon=float(doc.get("epsilon", DEFAULT_EPSILON)),
        seed=int(doc.get("seed", 0)),
    )
    return demands, services, config


def report_to_json(report: PipelineReport) -> dict:
    outcomes = []
    for o in report.outcomes:
        outcomes.append(
            {
                "service_id": o.service_id,
                "status": o.status,
                "reason": o.reason,
                "clusters": [
                    {
                        "cluster_id": c.cluster_id,
                        "object_count": c.object_count,
                        "rmse": c.rmse,
                        "coefficient": c.coefficient,
                    }
                    for c in o.clusters
                ],
                "selected": list(o.selected),
                "allocation": (
                    None
                    if o.allocation is None
                    else allocation_result_to_json(o.allocation)
                ),
            }
        )
    return {
        "totals": report.totals,
        "demand_errors": [
            {"demand_id": d, "error": msg} for d, msg in report.demand_errors
        ],
        "outcomes": outcomes,
    }
