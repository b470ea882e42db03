"""Acceptance gate: one test per shipping criterion, each printing a
PASS/FAIL line (run with -s to see them interleaved)."""

import json
import math
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from planekit.cli import main
from planekit.dataset import ColumnSchema
from planekit.hierarchy import build_hierarchy, cluster_stats
from planekit.kmeans import brute_force_partition, kmeans, refine
from planekit.pipeline import (
    DataDemand,
    PipelineConfig,
    ServiceRequest,
    run,
)
from planekit.sla import (
    Allocation,
    AllocationProblem,
    AvailabilityModel,
    ServiceClass,
    availability,
    min_feasible,
    optimize_bruteforce,
    optimize_greedy,
)
from planekit.som import (
    SomModel,
    SomParams,
    build_lattice,
    geometric_schedule,
    train_som,
    u_matrix,
)

from conftest import make_blobs, make_unit_blobs, write_points_csv
from test_sla import random_feasible_problem


@contextmanager
def criterion(number, description):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number:2d} FAIL  {description}")
        raise
    elapsed = time.perf_counter() - start
    print(f"ACCEPTANCE {number:2d} PASS  {description}  ({elapsed:.2f}s)")


def test_01_som_configuration_fidelity(tmp_path):
    with criterion(1, "SOM defaults: 20x20 hexagonal, 200 iters, radius 8->2"):
        rng = np.random.default_rng(0)
        X = rng.random((1000, 8))
        src = write_points_csv(tmp_path / "som_input.csv", X)
        out = tmp_path / "out"

        start = time.perf_counter()
        rc = main(["--seed", "0", "--out", str(out),
                   "som", "--input", str(src)])
        elapsed = time.perf_counter() - start
        assert rc == 0
        assert elapsed < 30.0

        params = json.loads((out / "som_params.json").read_text())
        assert params["rows"] == 20 and params["cols"] == 20
        assert params["topology"] == "hexagonal"
        assert params["iterations"] == 200
        assert params["radius_start"] == 8.0 and params["radius_end"] == 2.0
        assert params["neighborhood"] == "gaussian"
        assert params["radius_first_iteration"] == 8.0
        assert params["radius_last_iteration"] == 2.0
        assert geometric_schedule(8.0, 2.0, 0, 200) == 8.0
        assert geometric_schedule(8.0, 2.0, 199, 200) == 2.0


def test_02_greedy_equals_bruteforce_on_200_instances():
    with criterion(2, "greedy allocator matches exhaustive oracle, 200 instances"):
        rng = np.random.default_rng(202)
        start = time.perf_counter()
        for _ in range(200):
            problem = random_feasible_problem(rng, max_m=4, max_n=20)
            g = optimize_greedy(problem)
            b = optimize_bruteforce(problem)
            assert isinstance(g, Allocation) and isinstance(b, Allocation)
            assert abs(g.objective_value - b.objective_value) <= 1e-9
        assert time.perf_counter() - start < 10.0


def test_03_lloyd_monotonicity_and_oracle_bound():
    with criterion(3, "wcss non-increasing; best-of-32 within 1.05x of optimum"):
        rng = np.random.default_rng(303)
        start = time.perf_counter()
        for _ in range(20):
            n = int(rng.integers(5, 11))
            k = int(rng.integers(2, 4))
            X = rng.random((n, 2))
            optimum, _ = brute_force_partition(X, k)
            best = math.inf
            for seed in range(32):
                model = refine(kmeans(X, k, seed=seed), X)
                history = np.array(model.wcss_history)
                assert np.all(np.diff(history) <= 1e-9)
                best = min(best, model.wcss)
            assert best <= 1.05 * optimum + 1e-12
        assert time.perf_counter() - start < 5.0


def test_04_blob_recovery_ari():
    with criterion(4, "3-Gaussian blobs recovered with ARI >= 0.95"):
        start = time.perf_counter()
        X, labels = make_blobs(n=300, spread=0.05, seed=404)
        best = None
        for seed in range(10):
            model = refine(kmeans(X, 3, seed=seed), X)
            if best is None or model.wcss < best.wcss:
                best = model
        assert adjusted_rand_score(labels, best.assignment) >= 0.95
        assert time.perf_counter() - start < 2.0


def test_05_som_quality_property():
    with criterion(5, "training never worsens quantization error; flat map "
                      "has an all-zero U-matrix"):
        lattice = build_lattice(8, 8, "hexagonal")
        for seed in range(20):
            X, _ = make_unit_blobs(n=120, seed=seed)
            params = SomParams(iterations=40, radius_start=3.0,
                               radius_end=1.0, seed=seed)
            model = train_som(X, lattice, params)
            assert model.final_qe <= model.initial_qe

        flat = SomModel(
            lattice=build_lattice(5, 5, "grid"),
            weights=np.full((25, 3), 0.5),
            params=SomParams(iterations=1),
            final_qe=0.0,
            initial_qe=0.0,
        )
        assert np.all(u_matrix(flat) == 0.0)


def test_06_availability_evaluation():
    with criterion(6, "scenario-weighted availability of (0.6,0.99),(0.4,0.9)"):
        value = availability([(0.6, 0.99), (0.4, 0.9)])
        assert abs(value - 0.954) <= 1e-12
        with pytest.raises(ValueError):
            AvailabilityModel(((0.6, 0.99), (0.3, 0.9)))


def test_07_stability_strictness_and_budget_exactness():
    with criterion(7, "integral utilization still rounds up; budgets spent "
                      "exactly"):
        p = AllocationProblem(
            (ServiceClass(arrival_rate=3.0, service_rate=1.0, revenue=1.0,
                          deadline=1.0),),
            budget=10,
        )
        assert min_feasible(p).tolist() == [4]

        rng = np.random.default_rng(707)
        for _ in range(50):
            problem = random_feasible_problem(rng)
            for solver in (optimize_greedy, optimize_bruteforce):
                result = solver(problem)
                assert isinstance(result, Allocation)
                assert sum(result.n) == problem.budget
                minima = min_feasible(problem)
                assert all(n >= m for n, m in zip(result.n, minima))


def test_08_pipeline_mixed_feasibility_semantics():
    with criterion(8, "one infeasible and one feasible service both reported"):
        demand = DataDemand(
            "d1", b"id,x\na,0\nb,5\nc,10\n", ColumnSchema("id", ("x",))
        )
        services = [
            ServiceRequest(
                "overloaded", k=2, selection_budget=2,
                sla=AllocationProblem(
                    (ServiceClass(10.0, 1.0, 1.0, 1.0),), budget=4
                ),
            ),
            ServiceRequest(
                "served", k=2, selection_budget=2,
                sla=AllocationProblem(
                    (ServiceClass(1.0, 1.0, 1.0, 1.0),), budget=4
                ),
            ),
        ]
        report = run([demand], services, PipelineConfig(seed=8))
        assert len(report.outcomes) == len(services)
        statuses = {o.service_id: o.status for o in report.outcomes}
        assert statuses["overloaded"] == "InfeasibleSolution_Data"
        assert statuses["served"] == "Accommodated"


def test_09_cli_determinism_across_thread_counts(tmp_path):
    with criterion(9, "cluster, som, pipeline artifacts byte-identical at "
                      "--threads 1 and 8"):
        X, _ = make_blobs(n=60, spread=0.05, seed=909)
        src = write_points_csv(tmp_path / "points.csv", X, columns=["x", "y"])

        config = {
            "demands": [{"id": "d1", "source": "points.csv",
                         "schema": {"id_column": "id", "features": ["x", "y"]}}],
            "services": [
                {"id": "s1", "k": 3, "selection_budget": 2,
                 "sla": {"N": 6,
                         "classes": [{"lambda": 1, "mu": 1, "b": 2, "R": 1}]}},
            ],
            "epsilon": 1e-9,
            "seed": 21,
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config), encoding="utf-8")

        commands = {
            "cluster": ["cluster", "--input", str(src), "--k", "4",
                        "--depth", "2"],
            "som": ["som", "--input", str(src), "--rows", "5", "--cols", "5",
                    "--iterations", "8", "--radius-start", "3",
                    "--radius-end", "1"],
            "pipeline": ["pipeline", str(config_path)],
        }
        for name, argv in commands.items():
            dirs = []
            for threads in ("1", "8"):
                out = tmp_path / f"{name}-t{threads}"
                rc = main(["--seed", "17", "--threads", threads,
                           "--out", str(out), *argv])
                assert rc == 0
                dirs.append(out)
            files = sorted(os.listdir(dirs[0]))
            assert files == sorted(os.listdir(dirs[1]))
            for fname in files:
                a = (dirs[0] / fname).read_bytes()
                b = (dirs[1] / fname).read_bytes()
                assert a == b, f"{name}/{fname} differs between thread counts"


def test_10_hierarchy_stats_integrity():
    with criterion(10, "coefficients sum to 1 per level; leaves partition "
                       "the data (50 random trees)"):
        rng = np.random.default_rng(1010)
        for trial in range(50):
            n = int(rng.integers(12, 48))
            X = rng.random((n, 2))
            m = int(rng.choice([2, 3]))
            depth = int(rng.integers(1, 4))
            tree = build_hierarchy(X, m, depth, seed=trial)
            stats = cluster_stats(tree, X)

            by_level: dict[int, float] = {}
            for row in stats.rows:
                by_level[row.level] = by_level.get(row.level, 0.0) + row.coefficient
            for total in by_level.values():
                assert abs(total - 1.0) <= 1e-9 or total == 0.0

            children = {}
            for node in tree.nodes:
                children.setdefault(node.parent_id, []).append(node)
            leaves = [node for node in tree.nodes
                      if node.node_id not in children]
            assert sum(node.object_count for node in leaves) == n
