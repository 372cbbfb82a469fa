"""Acceptance gate: every criterion prints one pass/fail line.

Heavy shared artifacts (the 1,500-slice corpora, the trained bundle, the
two-million-row benchmark table and its measured cost tables) are module
fixtures reused across criteria. Run with ``pytest -m acceptance -s``.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from lea import synthgen
from lea.advisor import (
    Granularity,
    Objective,
    advise,
    brute_force_plan,
    measure_plan,
    measured_cost_table,
    measured_profiler,
    optimality_gap,
)
from lea.benchtable import generate_benchmark_table
from lea.codecs import EncodingKind, applicable_kinds, decode, encode_all
from lea.colstore import TableColumn, TableData
from lea.features import (
    FeatureVariant,
    contiguous_sample,
    sample_profile,
    slice_statistics,
)
from lea.harness import (
    LabeledExample,
    ModelBundle,
    SliceBudget,
    calibrate_device,
    collect_corpus,
    fit_size_models,
    predict_chain,
    train_bundle,
)
from lea.models import ForestHyper, smape
from lea.scan import DEFAULT_DEVICE
from lea.slices import Dtype, Slice

pytestmark = pytest.mark.acceptance

ROWS = 65_536
TRAIN_BUDGET = SliceBudget(rows_per_slice=ROWS, n_size=1500, n_mem=250, n_storage=5)
MASTER_SEED = 42
HYPER = ForestHyper()  # production defaults: 100 trees, depth 16, seed 42

# SMAPE estimates on a finite held-out set carry sampling noise; equality
# comparisons between ablation variants allow this much slack (well below
# every meaningful gap asserted here, and below the 2-point allowance the
# convergence criterion grants explicitly).
SMAPE_NOISE = 0.5


def _verdict(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"\n[acceptance] criterion {num} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} {name}: {detail}"


@pytest.fixture(scope="module")
def timers():
    return {}


@pytest.fixture(scope="module")
def corpus(timers):
    out = {}
    t0 = time.monotonic()
    for dtype in (Dtype.INT64, Dtype.STRING):
        out[dtype] = collect_corpus(
            TRAIN_BUDGET, dtype, MASTER_SEED, storage_mode="modeled"
        )
    timers["corpus"] = time.monotonic() - t0
    return out


@pytest.fixture(scope="module")
def heldout(timers):
    budget = SliceBudget(rows_per_slice=ROWS, n_size=200, n_mem=1, n_storage=1)
    out = {}
    t0 = time.monotonic()
    for dtype in (Dtype.INT64, Dtype.STRING):
        out[dtype] = collect_corpus(budget, dtype, 4242, with_timing=False)
    timers["heldout"] = time.monotonic() - t0
    return out


@pytest.fixture(scope="module")
def size_model_cache():
    return {}


def _size_bundle(examples, variant, cache, key):
    """Size-only bundle (forest + fallback, no timing models)."""
    if key not in cache:
        entries = fit_size_models(examples, HYPER, variant)
        meta = {}
        int_ranges = [e.stats.range_ for e in examples if e.dtype is Dtype.INT64]
        str_lens = [e.stats.mean_length for e in examples if e.dtype is Dtype.STRING]
        if int_ranges:
            meta["max_range"] = float(max(int_ranges))
        if str_lens:
            meta["max_mean_length"] = float(max(str_lens))
        cache[key] = ModelBundle(
            entries=entries, device=DEFAULT_DEVICE, variant=variant, training_meta=meta
        )
    return cache[key]


def _size_smape_by_kind(bundle, heldout_examples, dtype):
    out = {}
    for kind in applicable_kinds(dtype):
        group = [e for e in heldout_examples if e.kind is kind and e.dtype is dtype]
        preds = [
            predict_chain(bundle, dtype, kind, e.stats, e.profile)[0] for e in group
        ]
        out[kind] = smape(preds, [float(e.size_bytes) for e in group])
    return out


@pytest.fixture(scope="module")
def bundle(corpus, timers):
    t0 = time.monotonic()
    examples = corpus[Dtype.INT64] + corpus[Dtype.STRING]
    trained = train_bundle(examples, DEFAULT_DEVICE, HYPER)
    timers["train"] = time.monotonic() - t0
    return trained


@pytest.fixture(scope="module")
def bench_table(timers):
    t0 = time.monotonic()
    data = generate_benchmark_table(32 * ROWS, ROWS, seed=1001)
    timers["table"] = time.monotonic() - t0
    assert len(data.columns) >= 20
    assert all(len(c.slices) >= 32 for c in data.columns)
    return data


@pytest.fixture(scope="module")
def bench_cost_tables(bench_table, timers):
    t0 = time.monotonic()
    with_latency = measured_cost_table(
        bench_table, need_latency=True, device=DEFAULT_DEVICE
    )
    timers["cost_table"] = time.monotonic() - t0
    return with_latency


@pytest.fixture(scope="module")
def small_tables():
    """50 random 4-column tables of 4 slices x 4,096 rows."""
    tables = []
    seeds = np.random.SeedSequence(9000).generate_state(50 * 9, dtype=np.uint32)
    seeds = seeds.reshape(50, 9)
    for t in range(50):
        columns = []
        for c in range(4):
            spec_seed = int(seeds[t, 2 * c])
            gen_seed = int(seeds[t, 2 * c + 1])
            if (t + c) % 3 == 0:
                spec = synthgen.sample_string_spec(spec_seed)
                dtype = Dtype.STRING
            else:
                spec = synthgen.sample_int_spec(spec_seed, rows=4096)
                dtype = Dtype.INT64
            slices = [
                synthgen.make_slice(spec, 4096, gen_seed + si) for si in range(4)
            ]
            columns.append(TableColumn(f"c{c}", dtype, slices))
        tables.append(TableData(columns))
    return tables


@pytest.fixture(scope="module")
def small_cost_tables(small_tables):
    return [
        measured_cost_table(t, need_latency=(i % 5 == 0))
        for i, t in enumerate(small_tables)
    ]


# ---------------------------------------------------------------------------
# criterion 1: codec correctness


def _random_length(rng) -> int:
    r = rng.random()
    if r < 0.02:
        return 0
    if r < 0.04:
        return 65_536
    return int(10 ** rng.uniform(0, math.log10(65_536)))


def test_criterion_1_codec_round_trips():
    t0 = time.monotonic()
    rng = np.random.default_rng(10_001)
    checked = {Dtype.INT64: 0, Dtype.STRING: 0}
    for dtype in (Dtype.INT64, Dtype.STRING):
        for i in range(1000):
            rows = _random_length(rng)
            if rows == 0:
                s = Slice.from_values(dtype, [])
            else:
                seed = int(rng.integers(2**31))
                spec = (
                    synthgen.sample_int_spec(seed, rows=rows)
                    if dtype is Dtype.INT64
                    else synthgen.sample_string_spec(seed)
                )
                s = synthgen.make_slice(spec, rows, seed)
            for kind, enc in encode_all(s).items():
                assert decode(enc) == s, (dtype, i, kind)
            checked[dtype] += 1
    elapsed = time.monotonic() - t0
    ok = all(v == 1000 for v in checked.values()) and elapsed < 300
    _verdict(
        1,
        "codec correctness",
        ok,
        f"1000 slices per dtype, all codecs round-trip exactly, {elapsed:.0f}s < 300s",
    )


# ---------------------------------------------------------------------------
# criterion 2: oracle equivalence


def test_criterion_2_oracle_equivalence(small_tables, small_cost_tables):
    t0 = time.monotonic()
    matches = total = 0
    for i, (table, ct) in enumerate(zip(small_tables, small_cost_tables)):
        objectives = [Objective.parse("size")]
        if i % 5 == 0:
            objectives.append(Objective.parse("latency"))
        stub = measured_profiler(table, ct)
        for objective in objectives:
            for granularity in (Granularity.PER_SLICE, Granularity.PER_COLUMN):
                plan = advise(table, None, objective, granularity, profiler=stub)
                oracle = brute_force_plan(table, objective, granularity, cost_table=ct)
                measure_plan(table, plan, cost_table=ct)
                total += 1
                if (
                    plan.measured_cost == oracle.measured_cost
                    and plan.assignments == oracle.assignments
                ):
                    matches += 1
    elapsed = time.monotonic() - t0
    ok = matches == total and elapsed < 600
    _verdict(
        2,
        "oracle equivalence",
        ok,
        f"{matches}/{total} stubbed plans equal brute force, {elapsed:.0f}s < 600s",
    )


# ---------------------------------------------------------------------------
# criterion 3: within 10% of Optimal


def test_criterion_3_within_ten_percent(
    bundle, bench_table, bench_cost_tables, timers
):
    t0 = time.monotonic()
    gaps = {}
    for objective_text in ("size", "latency"):
        objective = Objective.parse(objective_text)
        plan = advise(bench_table, bundle, objective, Granularity.PER_SLICE)
        optimal = brute_force_plan(
            bench_table, objective, Granularity.PER_SLICE, cost_table=bench_cost_tables
        )
        measure_plan(bench_table, plan, cost_table=bench_cost_tables)
        gaps[objective_text] = optimality_gap(plan, optimal)
    timers["advise"] = time.monotonic() - t0
    runtime = sum(
        timers.get(k, 0.0) for k in ("corpus", "train", "table", "cost_table", "advise")
    )
    hard_ok = gaps["size"] <= 0.15 and gaps["latency"] <= 0.15 and runtime < 3600
    target = "target met" if max(gaps.values()) <= 0.10 else "target 10% missed"
    _verdict(
        3,
        "within 10% of optimal",
        hard_ok,
        f"size gap {gaps['size']:.3f}, modeled-latency gap {gaps['latency']:.3f} "
        f"(hard bound 0.15, {target}), runtime {runtime/60:.1f}min < 60min",
    )


# ---------------------------------------------------------------------------
# criterion 4: training convergence


def test_criterion_4_convergence(corpus, heldout, size_model_cache):
    counts = (100, 250, 500, 1000, 1500)
    problems = []
    summary = []
    for dtype in (Dtype.INT64, Dtype.STRING):
        averages = []
        for count in counts:
            subset = [e for e in corpus[dtype] if e.slice_index < count]
            b = _size_bundle(
                subset, FeatureVariant.FULL, size_model_cache, (dtype, count, "full")
            )
            per_kind = _size_smape_by_kind(b, heldout[dtype], dtype)
            averages.append(float(np.mean(list(per_kind.values()))))
        summary.append(
            f"{dtype.value}: " + " -> ".join(f"{a:.1f}" for a in averages)
        )
        for prev, nxt in zip(averages, averages[1:]):
            if nxt > prev + 2.0:
                problems.append(f"{dtype.value} smape rose {prev:.1f}->{nxt:.1f}")
        if averages[-1] > 15.0:
            problems.append(f"{dtype.value} final smape {averages[-1]:.1f} > 15")
    _verdict(4, "training convergence", not problems, "; ".join(summary + problems))


# ---------------------------------------------------------------------------
# criterion 5: ablations


def _ablation_heldout():
    """High-cardinality, wide-domain integer slices."""
    out = []
    seeds = np.random.SeedSequence(5005).generate_state(3 * 240, dtype=np.uint32)
    seeds = seeds.reshape(-1, 3)
    for i in range(240):
        spec_seed, gen_seed, win_seed = (int(x) for x in seeds[i])
        r = np.random.default_rng(spec_seed)
        u = r.random()
        family = (
            synthgen.IntFamily.DISCRETE_UNIFORM
            if u < 0.5
            else synthgen.IntFamily.SKEW_NORMAL
            if u < 0.85
            else synthgen.IntFamily.RUNS
        )
        spec = synthgen.IntSliceSpec(
            family=family,
            mean=float(r.uniform(-1e6, 1e6)),
            scale=float(10 ** r.uniform(3, 5)),
            skewness=float(r.uniform(-20, 20)),
            cardinality=int(10 ** r.uniform(4, 6)),
            run_length=int(10 ** r.uniform(0, 2)),
            scale_factor=int(10 ** r.uniform(0, 3)),
            sorted=bool(r.random() < 0.25),
            null_fraction=0.0 if r.random() < 0.5 else float(r.uniform(0, 0.2)),
        )
        s = synthgen.make_slice(spec, ROWS, gen_seed)
        stats = slice_statistics(s)
        profile = sample_profile(contiguous_sample(s, 0.01, win_seed))
        for kind, enc in encode_all(s).items():
            out.append(
                LabeledExample(
                    i, Dtype.INT64, spec, ROWS, gen_seed, win_seed,
                    stats, profile, kind, enc.encoded_bytes,
                )
            )
    return out


def test_criterion_5_ablations(corpus, size_model_cache):
    heldout_hc = _ablation_heldout()
    int_corpus = corpus[Dtype.INT64]
    bundles = {
        FeatureVariant.FULL: _size_bundle(
            int_corpus, FeatureVariant.FULL, size_model_cache, (Dtype.INT64, 1500, "full")
        ),
        FeatureVariant.SAMPLE_ONLY: _size_bundle(
            int_corpus, FeatureVariant.SAMPLE_ONLY, size_model_cache, "sample_only"
        ),
        FeatureVariant.STATISTICS_ONLY: _size_bundle(
            int_corpus, FeatureVariant.STATISTICS_ONLY, size_model_cache, "stats_only"
        ),
    }
    scores = {
        variant: _size_smape_by_kind(b, heldout_hc, Dtype.INT64)
        for variant, b in bundles.items()
    }
    problems = []
    for kind in applicable_kinds(Dtype.INT64):
        full = scores[FeatureVariant.FULL][kind]
        sample = scores[FeatureVariant.SAMPLE_ONLY][kind]
        stats = scores[FeatureVariant.STATISTICS_ONLY][kind]
        if full > sample + SMAPE_NOISE:
            problems.append(f"{kind.value}: full {full:.2f} > sample-only {sample:.2f}")
        if full > stats + SMAPE_NOISE:
            problems.append(f"{kind.value}: full {full:.2f} > stats-only {stats:.2f}")
    dict_gap = (
        scores[FeatureVariant.SAMPLE_ONLY][EncodingKind.DICTIONARY]
        - scores[FeatureVariant.FULL][EncodingKind.DICTIONARY]
    )
    for_gap = (
        scores[FeatureVariant.SAMPLE_ONLY][EncodingKind.FRAME_OF_REFERENCE]
        - scores[FeatureVariant.FULL][EncodingKind.FRAME_OF_REFERENCE]
    )
    if dict_gap < 5.0:
        problems.append(f"dictionary gap vs sample-only {dict_gap:.1f} < 5")
    if for_gap < 5.0:
        problems.append(f"for gap vs sample-only {for_gap:.1f} < 5")
    _verdict(
        5,
        "ablations",
        not problems,
        f"dictionary gap {dict_gap:.1f}, for gap {for_gap:.1f}; "
        + ("; ".join(problems) if problems else "full beats both ablations on every encoding"),
    )


# ---------------------------------------------------------------------------
# criterion 6: plan dominance


def _plain_cost(table, ct) -> float:
    total = 0.0
    for ci, column in enumerate(table.columns):
        for si in range(len(column.slices)):
            total += ct[(ci, si)][EncodingKind.PLAIN].size_bytes
    return total


def _has_compressible_slice(table, ct) -> bool:
    for ci, column in enumerate(table.columns):
        for si in range(len(column.slices)):
            entries = ct[(ci, si)]
            plain = entries[EncodingKind.PLAIN].size_bytes
            if any(mc.size_bytes < plain for mc in entries.values()):
                return True
    return False


def test_criterion_6_plan_dominance(
    small_tables, small_cost_tables, bench_table, bench_cost_tables
):
    size = Objective.parse("size")
    problems = []
    cases = list(zip(small_tables, small_cost_tables)) + [
        (bench_table, bench_cost_tables)
    ]
    for idx, (table, ct) in enumerate(cases):
        optimal = brute_force_plan(table, size, Granularity.PER_SLICE, cost_table=ct)
        single = brute_force_plan(table, size, Granularity.PER_COLUMN, cost_table=ct)
        plain = _plain_cost(table, ct)
        if not optimal.measured_cost <= single.measured_cost <= plain:
            problems.append(f"table {idx}: ordering violated")
        if _has_compressible_slice(table, ct):
            if not (optimal.measured_cost < plain and single.measured_cost < plain):
                problems.append(f"table {idx}: no strict improvement over plain")
    # the benchmark table drifts within columns, so slice-level choices must
    # strictly beat the best uniform choice there
    big_optimal = brute_force_plan(
        bench_table, size, Granularity.PER_SLICE, cost_table=bench_cost_tables
    )
    big_single = brute_force_plan(
        bench_table, size, Granularity.PER_COLUMN, cost_table=bench_cost_tables
    )
    if not big_optimal.measured_cost < big_single.measured_cost:
        problems.append("benchmark table: optimal not strictly below single optimal")
    _verdict(
        6,
        "plan dominance",
        not problems,
        "; ".join(problems)
        if problems
        else f"{len(cases)} tables ordered, benchmark strict "
        f"({big_optimal.measured_cost:.3e} < {big_single.measured_cost:.3e})",
    )


# ---------------------------------------------------------------------------
# criterion 7: calibration recovery


def test_criterion_7_calibration_recovery(tmp_path):
    latency_ns = 200_000.0
    throughput = 250 * (1 << 20)

    def read_fn(path, size):
        return latency_ns + size / throughput * 1e9

    profile = calibrate_device(
        [1 << 16, 1 << 18, 1 << 20, 1 << 22, 1 << 24],
        str(tmp_path),
        read_fn=read_fn,
    )
    lat_err = abs(profile.latency_ns - latency_ns) / latency_ns
    thr_err = abs(profile.throughput_bps - throughput) / throughput
    ok = lat_err < 0.01 and thr_err < 0.01
    _verdict(
        7,
        "calibration recovery",
        ok,
        f"latency err {lat_err:.2e}, throughput err {thr_err:.2e} (both < 1%)",
    )


# ---------------------------------------------------------------------------
# criterion 8: determinism


def _run_cli(args, scratch):
    env = dict(os.environ, LEA_SCRATCH=str(scratch))
    return subprocess.run(
        [sys.executable, "-m", "lea.cli", *args],
        capture_output=True,
        text=True,
        env=env,
    )


def test_criterion_8_determinism(tmp_path):
    scratch = tmp_path / "scratch"
    problems = []

    size_args = [
        "train", "--phase", "size", "--dtype", "both", "--slices", "20",
        "--rows", "2048", "--seed", "42", "--trees", "12",
    ]
    a1, a2 = str(tmp_path / "s1.json"), str(tmp_path / "s2.json")
    for out in (a1, a2):
        r = _run_cli(size_args + ["--out", out], scratch)
        if r.returncode != 0:
            problems.append(f"train failed: {r.stderr[-200:]}")
    if not problems and open(a1, "rb").read() != open(a2, "rb").read():
        problems.append("size-phase artifacts differ between runs")

    bundle = str(tmp_path / "bundle.lea")
    table = str(tmp_path / "bench.col")
    r = _run_cli(
        ["train", "--dtype", "both", "--slices", "20", "--rows", "2048",
         "--mem-slices", "8", "--storage-slices", "4", "--seed", "42",
         "--trees", "12", "--out", bundle],
        scratch,
    )
    if r.returncode != 0:
        problems.append(f"full train failed: {r.stderr[-200:]}")
    r = _run_cli(
        ["bench", "--gen-rows", "8192", "--rows-per-slice", "1024",
         "--model", bundle, "--table", table, "--objectives", "size", "--seed", "3"],
        scratch,
    )
    if r.returncode != 0:
        problems.append(f"bench failed: {r.stderr[-200:]}")
    p1, p2 = str(tmp_path / "p1.json"), str(tmp_path / "p2.json")
    for out in (p1, p2):
        r = _run_cli(
            ["advise", "--table", table, "--model", bundle, "--objective", "size",
             "--granularity", "slice", "--seed", "11", "--out", out],
            scratch,
        )
        if r.returncode != 0:
            problems.append(f"advise failed: {r.stderr[-200:]}")
    if not problems and open(p1, "rb").read() != open(p2, "rb").read():
        problems.append("plans differ between runs")

    _verdict(
        8,
        "determinism",
        not problems,
        "; ".join(problems)
        if problems
        else "size-phase artifacts and advise plans byte-identical across runs",
    )
