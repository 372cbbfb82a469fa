"""Command-line entry point.

Commands: train, advise, encode, scan, oracle, bench, calibrate.
Machine-readable results go to stdout as JSON; diagnostics go to stderr.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict

from . import benchtable, colstore
from .advisor import (
    Granularity,
    Objective,
    advise,
    brute_force_plan,
    load_plan,
    measure_plan,
    measured_cost_table,
    optimality_gap,
    plan_to_doc,
    save_plan,
)
from .errors import LeaError
from .features import FeatureVariant
from .harness import (
    SliceBudget,
    add_timing_labels,
    calibrate_device,
    collect_corpus,
    example_from_doc,
    example_to_doc,
    fit_size_models,
    load_bundle,
    save_bundle,
    train_bundle,
    _kind_models_to_doc,
)
from .models import ForestHyper
from .scan import DEFAULT_DEVICE, DeviceProfile, StorageMode
from .slices import Dtype

SIZE_ARTIFACT_VERSION = 1

_DTYPE_CHOICES = {
    "int": [Dtype.INT64],
    "string": [Dtype.STRING],
    "both": [Dtype.INT64, Dtype.STRING],
}
_VARIANTS = {
    "full": FeatureVariant.FULL,
    "sample-only": FeatureVariant.SAMPLE_ONLY,
    "stats-only": FeatureVariant.STATISTICS_ONLY,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _scratch_dir(args) -> str:
    path = getattr(args, "scratch", None) or os.environ.get("LEA_SCRATCH")
    if path:
        os.makedirs(path, exist_ok=True)
        return path
    return tempfile.gettempdir()


def _emit(doc: dict) -> None:
    print(json.dumps(doc, sort_keys=True))


def _load_device(path: str) -> DeviceProfile:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return DeviceProfile(
        latency_ns=doc["latency_ns"],
        throughput_bps=doc["throughput_bps"],
        residual_tolerance=doc.get("residual_tolerance", 0.05),
    )


def _device_from_args(args) -> DeviceProfile:
    if getattr(args, "device", None):
        return _load_device(args.device)
    if getattr(args, "model", None):
        return load_bundle(args.model).device
    return DEFAULT_DEVICE


# ---------------------------------------------------------------------------
# train


def _budget_from_args(args) -> SliceBudget:
    return SliceBudget(
        rows_per_slice=args.rows,
        n_size=args.slices,
        n_mem=min(args.mem_slices, args.slices),
        n_storage=min(args.storage_slices, args.slices),
    )


def cmd_train(args) -> int:
    variant = _VARIANTS[args.variant]
    hyper = ForestHyper(n_trees=args.trees, rng_seed=args.seed)
    device = _load_device(args.device) if args.device else DEFAULT_DEVICE
    scratch = _scratch_dir(args)

    if args.phase == "speed":
        if not args.size_artifact:
            raise LeaError("--phase speed requires --size-artifact")
        with open(args.size_artifact, encoding="utf-8") as fh:
            artifact = json.load(fh)
        if artifact.get("size_artifact_version") != SIZE_ARTIFACT_VERSION:
            raise LeaError("unsupported size artifact version")
        examples = [example_from_doc(d) for d in artifact["examples"]]
        budget = SliceBudget(**artifact["budget"])
        variant = FeatureVariant(artifact["variant"])
        hyper = ForestHyper(**artifact["hyper"])
        add_timing_labels(
            examples, budget, device=device, scratch_dir=scratch, storage_mode=args.storage
        )
        bundle = train_bundle(
            examples,
            device,
            hyper,
            variant,
            meta={"master_seed": artifact["master_seed"], "budget": artifact["budget"]},
        )
        save_bundle(args.out, bundle)
        _emit({"command": "train", "phase": "speed", "out": args.out})
        return 0

    budget = _budget_from_args(args)
    dtypes = _DTYPE_CHOICES[args.dtype]
    examples = []
    for dtype in dtypes:
        examples.extend(
            collect_corpus(
                budget,
                dtype,
                args.seed,
                with_timing=args.phase == "all",
                device=device,
                scratch_dir=scratch,
                storage_mode=args.storage,
            )
        )
    if args.phase == "size":
        size_models = fit_size_models(examples, hyper, variant)
        artifact = {
            "size_artifact_version": SIZE_ARTIFACT_VERSION,
            "budget": asdict(budget),
            "dtype": args.dtype,
            "master_seed": args.seed,
            "variant": variant.value,
            "hyper": asdict(hyper),
            "examples": [example_to_doc(ex) for ex in examples],
            "size_models": {
                f"{dtype.value}/{kind.value}": _kind_models_to_doc(entry)
                for (dtype, kind), entry in sorted(
                    size_models.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
                )
            },
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(artifact, fh, sort_keys=True)
            fh.write("\n")
        _emit({"command": "train", "phase": "size", "out": args.out, "examples": len(examples)})
        return 0

    bundle = train_bundle(
        examples,
        device,
        hyper,
        variant,
        meta={"master_seed": args.seed, "budget": asdict(budget)},
    )
    save_bundle(args.out, bundle)
    _emit(
        {
            "command": "train",
            "phase": "all",
            "out": args.out,
            "examples": len(examples),
            "entries": len(bundle.entries),
        }
    )
    return 0


# ---------------------------------------------------------------------------
# advise / encode / scan / oracle / bench / calibrate


def cmd_advise(args) -> int:
    bundle = load_bundle(args.model)
    table = colstore.load_table_data(colstore.TableFile(args.table))
    plan = advise(
        table,
        bundle,
        Objective.parse(args.objective),
        Granularity(args.granularity),
        sample_seed=args.seed,
    )
    save_plan(args.out, plan)
    _emit({"command": "advise", "out": args.out, "predicted_cost": plan.predicted_cost})
    return 0


def cmd_encode(args) -> int:
    if args.csv:
        if not args.schema:
            raise LeaError("--csv requires --schema")
        schema = colstore.parse_schema(args.schema)
        table = colstore.ingest_csv(args.csv, schema, args.rows_per_slice, args.out)
        _emit(
            {
                "command": "encode",
                "out": args.out,
                "rows": table.total_rows,
                "columns": table.n_columns,
            }
        )
        return 0
    if not args.table or not args.plan:
        raise LeaError("encode needs either --csv or both --table and --plan")
    table = colstore.TableFile(args.table)
    plan = load_plan(args.plan)
    out = colstore.apply_plan(table, plan, args.out)
    _emit(
        {
            "command": "encode",
            "out": args.out,
            "bytes": os.path.getsize(args.out),
            "slices": out.n_slices * out.n_columns,
        }
    )
    return 0


def cmd_scan(args) -> int:
    table = colstore.TableFile(args.table)
    device = _device_from_args(args)
    mode = colstore.ColumnScanMode(args.mode)
    columns = [args.column] if args.column else [name for name, _ in table.schema]
    results = {}
    for col in columns:
        m = colstore.scan_column(table, col, mode, device=device)
        results[col] = {
            "aggregate": m.aggregate,
            "elapsed_ns": m.elapsed_ns,
            "bytes_read": m.bytes_read,
            "mem_ns": m.mem_ns,
            "io_ns": m.io_ns,
        }
    _emit({"command": "scan", "mode": mode.value, "columns": results})
    return 0


def cmd_oracle(args) -> int:
    table = colstore.load_table_data(colstore.TableFile(args.table))
    objective = Objective.parse(args.objective)
    device = _device_from_args(args)
    latency_mode = (
        StorageMode.MEASURED if args.measured_storage else StorageMode.MODELED
    )
    cost_table = measured_cost_table(
        table,
        need_latency=objective.kind.value != "size",
        device=device,
        latency_mode=latency_mode,
        scratch_dir=_scratch_dir(args),
    )
    optimal = brute_force_plan(
        table, objective, Granularity.PER_SLICE, cost_table=cost_table
    )
    single = brute_force_plan(
        table, objective, Granularity.PER_COLUMN, cost_table=cost_table
    )
    report = {
        "command": "oracle",
        "objective": objective.spell(),
        "optimal_cost": optimal.measured_cost,
        "single_optimal_cost": single.measured_cost,
        "single_optimal_gap": optimality_gap(single, optimal),
    }
    if args.compare:
        plan = load_plan(args.compare)
        measure_plan(table, plan, cost_table=cost_table, device=device)
        report["plan_cost"] = plan.measured_cost
        report["plan_gap"] = optimality_gap(plan, optimal)
    _emit(report)
    return 0


def cmd_bench(args) -> int:
    scratch = _scratch_dir(args)
    if args.gen_rows:
        data = benchtable.generate_benchmark_table(
            args.gen_rows, args.rows_per_slice, seed=args.seed
        )
        table_path = args.table or os.path.join(scratch, "bench.col")
        colstore.write_table_data(table_path, data, args.rows_per_slice)
    else:
        if not args.table:
            raise LeaError("bench needs --table or --gen-rows")
        table_path = args.table
    table_file = colstore.TableFile(table_path)
    data = colstore.load_table_data(table_file)
    bundle = load_bundle(args.model)
    device = bundle.device
    report = {"command": "bench", "table": table_path, "plans": {}}
    baseline_bytes = os.path.getsize(table_path)
    baseline_ns = _total_modeled_scan(table_file, device)
    report["plans"]["plain"] = {"file_bytes": baseline_bytes, "modeled_scan_ns": baseline_ns}
    for objective_text in args.objectives.split(","):
        objective = Objective.parse(objective_text)
        plan = advise(
            data, bundle, objective, Granularity(args.granularity), sample_seed=args.seed
        )
        out_path = os.path.join(scratch, f"bench_{objective_text.replace(':', '_')}.col")
        encoded = colstore.apply_plan(table_file, plan, out_path)
        report["plans"][objective_text] = {
            "file_bytes": os.path.getsize(out_path),
            "modeled_scan_ns": _total_modeled_scan(encoded, device),
            "predicted_cost": plan.predicted_cost,
        }
    _emit(report)
    return 0


def _total_modeled_scan(table_file: colstore.TableFile, device: DeviceProfile) -> int:
    total = 0
    for name, _ in table_file.schema:
        m = colstore.scan_column(
            table_file, name, colstore.ColumnScanMode.FROM_STORAGE_MODELED, device=device
        )
        total += m.elapsed_ns
    return total


def cmd_calibrate(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    profile = calibrate_device(sizes, _scratch_dir(args), repeats=args.repeats)
    doc = {
        "latency_ns": profile.latency_ns,
        "throughput_bps": profile.throughput_bps,
        "residual_tolerance": profile.residual_tolerance,
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")
    _emit({"command": "calibrate", **doc})
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="lea", description="learned encoding advisor")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train models on synthetic data")
    p.add_argument("--dtype", choices=sorted(_DTYPE_CHOICES), default="both")
    p.add_argument("--slices", type=int, default=1000, help="size-label slice budget")
    p.add_argument("--rows", type=int, default=65536, help="rows per training slice")
    p.add_argument("--mem-slices", type=int, default=250)
    p.add_argument("--storage-slices", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.add_argument("--phase", choices=["all", "size", "speed"], default="all")
    p.add_argument("--size-artifact", help="size-phase artifact (for --phase speed)")
    p.add_argument("--storage", choices=["auto", "measured", "modeled"], default="modeled")
    p.add_argument("--device", help="device profile JSON from `lea calibrate`")
    p.add_argument("--variant", choices=sorted(_VARIANTS), default="full")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--scratch")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("advise", help="recommend encodings for a table")
    p.add_argument("--table", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--objective", default="size", help="size | latency | mixed:<alpha>")
    p.add_argument("--granularity", choices=["slice", "column"], default="slice")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_advise)

    p = sub.add_parser("encode", help="apply a plan, or ingest a CSV as plain")
    p.add_argument("--table")
    p.add_argument("--plan")
    p.add_argument("--csv")
    p.add_argument("--schema", help='e.g. "a:int,b:string" (with --csv)')
    p.add_argument("--rows-per-slice", type=int, default=65536)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("scan", help="timed full-column scans")
    p.add_argument("--table", required=True)
    p.add_argument("--column", help="default: every column")
    p.add_argument(
        "--mode",
        choices=[m.value for m in colstore.ColumnScanMode],
        default="memory",
    )
    p.add_argument("--device")
    p.add_argument("--model", help="bundle supplying device parameters")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("oracle", help="brute-force optimal plans and gaps")
    p.add_argument("--table", required=True)
    p.add_argument("--objective", default="size")
    p.add_argument("--compare", help="plan file to measure against Optimal")
    p.add_argument("--device")
    p.add_argument("--model")
    p.add_argument("--measured-storage", action="store_true")
    p.add_argument("--scratch")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="size/latency comparison vs plain")
    p.add_argument("--table")
    p.add_argument("--gen-rows", type=int, help="generate the benchmark table")
    p.add_argument("--rows-per-slice", type=int, default=4096)
    p.add_argument("--model", required=True)
    p.add_argument("--objectives", default="size,latency")
    p.add_argument("--granularity", choices=["slice", "column"], default="slice")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scratch")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("calibrate", help="fit the storage device cost model")
    p.add_argument("--sizes", default="1048576,4194304,16777216,67108864")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out")
    p.add_argument("--scratch")
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args) or 0
    except LeaError as exc:
        print(f"lea: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"lea: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
