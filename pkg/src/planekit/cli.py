"""Command-line interface.

Subcommands: ingest, cluster, som, allocate, availability, pipeline.
Global flags: --seed, --threads, --out. Artifacts are plain CSV/JSON plot
data, committed atomically (rendered fully, written to temp files, then
renamed), so a failed run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from dataclasses import replace

from . import __version__
from .dataset import ColumnSchema, emit_csv, format_value, ingest_csv, normalize
from .hierarchy import assignments_csv, build_hierarchy, cluster_stats, stats_csv
from .pipeline import plan_from_json, report_to_json, run
from .sla import (
    allocation_result_to_json,
    availability,
    availability_model_from_json,
    optimize_bruteforce,
    optimize_greedy,
    problem_from_json,
)
from .som import (
    TOPOLOGIES,
    SomParams,
    build_lattice,
    geometric_schedule,
    model_csv,
    train_som,
    u_matrix_csv,
)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write_artifacts(out_dir: str, artifacts: dict[str, str]) -> None:
    """Commit rendered artifacts atomically: all temps first, then renames."""
    os.makedirs(out_dir, exist_ok=True)
    staged: list[tuple[str, str]] = []
    try:
        for name, payload in artifacts.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(payload)
            staged.append((tmp, os.path.join(out_dir, name)))
        for tmp, final in staged:
            os.replace(tmp, final)
        staged.clear()
    finally:
        for tmp, _ in staged:
            try:
                os.unlink(tmp)
            except OSError:
                pass


def _load_schema(args) -> ColumnSchema:
    if args.features:
        features = tuple(c.strip() for c in args.features.split(",") if c.strip())
    else:
        # Default: every header column except the id column.
        with open(args.input, "r", encoding="utf-8", newline="") as fh:
            header = next(csv.reader(fh), [])
        features = tuple(c for c in header if c and c != args.id_column)
    return ColumnSchema(id_column=args.id_column, feature_columns=features)


def _cmd_ingest(args) -> int:
    schema = _load_schema(args)
    ds = ingest_csv(args.input, schema)
    artifacts = {}
    if args.normalize:
        ds = normalize(ds)
        artifacts["normalization.json"] = _dump_json(
            {"columns": list(schema.feature_columns),
             "min_max": [list(pair) for pair in ds.normalization]}
        )
    artifacts["dataset.csv"] = emit_csv(ds, schema)
    _write_artifacts(args.out or ".", artifacts)
    print(f"ingested {ds.n} points, d={ds.d}")
    return 0


def _cmd_cluster(args) -> int:
    schema = _load_schema(args)
    ds = normalize(ingest_csv(args.input, schema))
    order = args.m if args.m is not None else args.k
    if order > ds.n:
        raise ValueError(f"k = {order} exceeds the {ds.n} ingested points")
    tree = build_hierarchy(
        ds, order, args.depth, seed=args.seed, workers=args.threads
    )
    stats = cluster_stats(tree, ds, workers=args.threads)

    artifacts = {
        "assignments.csv": assignments_csv(tree, ds),
        "stats.csv": stats_csv(stats),
    }
    levels = sorted({row.level for row in stats.rows})
    for level in levels:
        rows = [r for r in stats.rows if r.level == level]
        coeff = ["cluster_id,coefficient"]
        size = ["cluster_id,object_count,rmse"]
        for r in rows:
            coeff.append(f"{r.cluster_id},{format_value(r.coefficient)}")
            size.append(f"{r.cluster_id},{r.object_count},{format_value(r.rmse)}")
        artifacts[f"plot_coefficient_level{level}.csv"] = "\n".join(coeff) + "\n"
        artifacts[f"plot_objects_rmse_level{level}.csv"] = "\n".join(size) + "\n"
    _write_artifacts(args.out or ".", artifacts)
    print(f"clustered {ds.n} points: order={order} depth={args.depth} "
          f"nodes={len(tree.nodes)}")
    return 0


def _cmd_som(args) -> int:
    schema = _load_schema(args)
    ds = normalize(ingest_csv(args.input, schema))
    lattice = build_lattice(args.rows, args.cols, args.topology)
    params = SomParams(
        iterations=args.iterations,
        radius_start=args.radius_start,
        radius_end=args.radius_end,
        learning_rate_start=args.learning_rate_start,
        learning_rate_end=args.learning_rate_end,
        seed=args.seed,
    )
    model = train_som(ds, lattice, params)
    sidecar = {
        "rows": lattice.rows,
        "cols": lattice.cols,
        "topology": lattice.topology,
        "iterations": params.iterations,
        "radius_start": params.radius_start,
        "radius_end": params.radius_end,
        "radius_first_iteration": geometric_schedule(
            params.radius_start, params.radius_end, 0, params.iterations
        ),
        "radius_last_iteration": geometric_schedule(
            params.radius_start, params.radius_end,
            params.iterations - 1, params.iterations,
        ),
        "learning_rate_start": params.learning_rate_start,
        "learning_rate_end": params.learning_rate_end,
        "neighborhood": params.neighborhood,
        "seed": params.seed,
        "initial_quantization_error": model.initial_qe,
        "final_quantization_error": model.final_qe,
    }
    _write_artifacts(
        args.out or ".",
        {
            "som_model.csv": model_csv(model),
            "umatrix.csv": u_matrix_csv(model),
            "som_params.json": _dump_json(sidecar),
        },
    )
    print(
        f"trained {lattice.rows}x{lattice.cols} {lattice.topology} map: "
        f"qe {model.initial_qe:.6g} -> {model.final_qe:.6g}"
    )
    return 0


def _cmd_allocate(args) -> int:
    with open(args.problem, "r", encoding="utf-8") as fh:
        problem = problem_from_json(json.load(fh))
    result = optimize_greedy(problem)
    doc = allocation_result_to_json(result)
    output = _dump_json(doc)
    sys.stdout.write(output)
    if args.oracle:
        oracle = allocation_result_to_json(optimize_bruteforce(problem))
        if "objective" in doc and "objective" in oracle:
            agree = abs(doc["objective"] - oracle["objective"]) <= 1e-9
        else:
            agree = doc == oracle
        print(f"agreement: {'true' if agree else 'false'}")
        if not agree:
            return 1
    if args.out:
        _write_artifacts(args.out, {"allocation.json": output})
    return 0


def _cmd_availability(args) -> int:
    with open(args.model, "r", encoding="utf-8") as fh:
        model = availability_model_from_json(json.load(fh))
    output = _dump_json({"availability": availability(model)})
    sys.stdout.write(output)
    if args.out:
        _write_artifacts(args.out, {"availability.json": output})
    return 0


def _cmd_pipeline(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    demands, services, config = plan_from_json(
        doc, base_dir=os.path.dirname(os.path.abspath(args.config))
    )
    overrides = {"workers": args.threads}
    if args.seed_given:
        overrides["seed"] = args.seed
    config = replace(config, **overrides)
    report = run(demands, services, config)
    doc = report_to_json(report)
    output = _dump_json(doc)
    sys.stdout.write(output)
    if args.out:
        artifacts = {"report.json": output}
        for outcome in report.outcomes:
            lines = ["level,cluster_id,parent_id,object_count,rmse,coefficient"]
            for c in outcome.clusters:
                lines.append(
                    f"1,{c.cluster_id},,{c.object_count},"
                    f"{format_value(c.rmse)},{format_value(c.coefficient)}"
                )
            artifacts[f"service_{outcome.service_id}_stats.csv"] = (
                "\n".join(lines) + "\n"
            )
        _write_artifacts(args.out, artifacts)
    return 0


def _add_schema_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="input CSV path")
    p.add_argument("--id-column", default="id", help="id column name (default: id)")
    p.add_argument(
        "--features",
        default=None,
        help="comma-separated feature column names (default: all non-id columns)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planekit",
        description="Clustering, SOM, and SLA server-allocation analytics "
        "with plot-ready CSV/JSON artifacts.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    parser.add_argument(
        "--threads", type=int, default=1,
        help="worker cap for data-parallel stages; never changes results",
    )
    parser.add_argument("--out", default=None, help="artifact output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a CSV and emit it canonically")
    _add_schema_options(p)
    p.add_argument("--normalize", action="store_true", help="min-max scale to [0,1]")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("cluster", help="hierarchical k-means with per-level stats")
    _add_schema_options(p)
    p.add_argument("--k", type=int, default=8, help="clusters per split (default: 8)")
    p.add_argument(
        "--m", type=int, default=None,
        help="tree order; defaults to --k",
    )
    p.add_argument("--depth", type=int, default=1, help="levels below root")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("som", help="train a self-organizing map")
    _add_schema_options(p)
    p.add_argument("--rows", type=int, default=20)
    p.add_argument("--cols", type=int, default=20)
    p.add_argument("--topology", choices=list(TOPOLOGIES), default="hexagonal")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--radius-start", type=float, default=8.0)
    p.add_argument("--radius-end", type=float, default=2.0)
    p.add_argument("--learning-rate-start", type=float, default=0.5)
    p.add_argument("--learning-rate-end", type=float, default=0.05)
    p.set_defaults(func=_cmd_som)

    p = sub.add_parser("allocate", help="solve a server-allocation problem")
    p.add_argument("problem", help="problem JSON path")
    p.add_argument(
        "--oracle", action="store_true",
        help="also run the exhaustive solver and check agreement",
    )
    p.set_defaults(func=_cmd_allocate)

    p = sub.add_parser("availability", help="scenario-weighted availability")
    p.add_argument("model", help="availability JSON path")
    p.set_defaults(func=_cmd_availability)

    p = sub.add_parser("pipeline", help="run the full demand/service pipeline")
    p.add_argument("config", help="pipeline configuration JSON path")
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    try:
        if args.threads < 1:
            raise ValueError(f"--threads must be >= 1, got {args.threads}")
        return args.func(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
