"""planekit: clustering, self-organizing maps, and SLA-driven server
allocation over a shared, incrementally updated data plane."""

__version__ = "0.1.0"

from .dataset import (
    ColumnSchema,
    DataPoint,
    Dataset,
    MinMaxNormalizer,
    denormalize,
    emit_csv,
    ingest_csv,
    normalize,
)
from .hierarchy import (
    ClusterStats,
    ClusterTree,
    HierarchicalKMeans,
    TreeNode,
    assignments_csv,
    build_hierarchy,
    cluster_stats,
    stats_csv,
)
from .kmeans import (
    ClusterModel,
    KMeans,
    brute_force_partition,
    cluster_summary,
    kmeans,
    kmeans_plusplus,
    lloyd_step,
    refine,
)
from .pipeline import (
    DataDemand,
    PipelineConfig,
    PipelineReport,
    PlaneState,
    ServiceOutcome,
    ServiceRequest,
    report_to_json,
    run,
    select_best_set,
    update_plane,
)
from .sla import (
    Allocation,
    AllocationProblem,
    AvailabilityModel,
    InfeasibleAllocation,
    ServiceClass,
    availability,
    deadline_meet_prob,
    min_feasible,
    objective,
    optimize_bruteforce,
    optimize_greedy,
)
from .som import (
    Lattice,
    SelfOrganizingMap,
    SomModel,
    SomParams,
    bmu,
    build_lattice,
    geometric_schedule,
    quantization_error,
    train_som,
    u_matrix,
)

__all__ = [
    "Allocation",
    "AllocationProblem",
    "AvailabilityModel",
    "ClusterModel",
    "ClusterStats",
    "ClusterTree",
    "ColumnSchema",
    "DataDemand",
    "DataPoint",
    "Dataset",
    "HierarchicalKMeans",
    "InfeasibleAllocation",
    "KMeans",
    "Lattice",
    "MinMaxNormalizer",
    "PipelineConfig",
    "PipelineReport",
    "PlaneState",
    "SelfOrganizingMap",
    "ServiceClass",
    "ServiceOutcome",
    "ServiceRequest",
    "SomModel",
    "SomParams",
    "TreeNode",
    "assignments_csv",
    "availability",
    "bmu",
    "brute_force_partition",
    "build_hierarchy",
    "build_lattice",
    "cluster_stats",
    "cluster_summary",
    "deadline_meet_prob",
    "denormalize",
    "emit_csv",
    "geometric_schedule",
    "ingest_csv",
    "kmeans",
    "kmeans_plusplus",
    "lloyd_step",
    "min_feasible",
    "normalize",
    "objective",
    "optimize_bruteforce",
    "optimize_greedy",
    "quantization_error",
    "refine",
    "report_to_json",
    "run",
    "select_best_set",
    "stats_csv",
    "train_som",
    "u_matrix",
    "update_plane",
]
