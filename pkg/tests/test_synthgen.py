import math
from collections import Counter

import numpy as np
import pytest

from lea import synthgen
from lea.errors import IntegerOverflow
from lea.slices import Dtype, Slice
from lea.synthgen import (
    IntFamily,
    IntSliceSpec,
    StringSliceSpec,
    generate_int_slice,
    generate_string_slice,
    make_slice,
    postprocess,
    read_manifest,
    sample_int_spec,
    sample_string_spec,
    write_manifest,
)


def test_spec_sampling_deterministic():
    assert sample_int_spec(99) == sample_int_spec(99)
    assert sample_string_spec(99) == sample_string_spec(99)
    assert sample_int_spec(99) != sample_int_spec(100)


def test_family_frequencies_over_10k_draws():
    fams = Counter(sample_int_spec(seed).family for seed in range(10_000))
    for family in IntFamily:
        assert 0.30 <= fams[family] / 10_000 <= 0.37, fams


def test_cardinality_log_uniform_chi_square():
    # 10 equal bins in log10 space over [1, 1e6]; alpha = 0.001, df = 9
    cards = np.array([sample_int_spec(seed).cardinality for seed in range(10_000)], float)
    counts, _ = np.histogram(np.log10(cards), bins=np.linspace(0, 6, 11))
    expected = len(cards) / 10
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < 27.877, (chi2, counts)  # chi2 critical value, df=9, alpha=0.001


def test_runs_family_full_run_is_constant():
    spec = IntSliceSpec(
        family=IntFamily.RUNS, mean=12.0, scale=100.0, skewness=0.0,
        cardinality=10, run_length=500, scale_factor=1, sorted=False, null_fraction=0.0,
    )
    s = generate_int_slice(spec, 500, rng_seed=1)
    assert len(np.unique(s.values)) == 1


def test_discrete_uniform_cardinality_one_is_constant():
    spec = IntSliceSpec(
        family=IntFamily.DISCRETE_UNIFORM, mean=0.0, scale=1.0, skewness=0.0,
        cardinality=1, run_length=1, scale_factor=1, sorted=False, null_fraction=0.0,
    )
    s = generate_int_slice(spec, 256, rng_seed=2)
    assert len(np.unique(s.values)) == 1


def test_discrete_uniform_sees_full_domain():
    # coupon collector: miss probability <= k * exp(-rows/k) ~ 3e-12 here
    k, rows = 256, 8192
    assert k * math.exp(-rows / k) < 1e-6
    spec = IntSliceSpec(
        family=IntFamily.DISCRETE_UNIFORM, mean=0.0, scale=1.0, skewness=0.0,
        cardinality=k, run_length=1, scale_factor=1, sorted=False, null_fraction=0.0,
    )
    for seed in range(3):
        s = generate_int_slice(spec, rows, rng_seed=seed)
        assert len(np.unique(s.values)) == k


def test_string_slice_cardinality_and_determinism():
    spec = StringSliceSpec(mean_length=12, cardinality=30, sorted=False, null_fraction=0.0)
    a = generate_string_slice(spec, 4096, rng_seed=5)
    b = generate_string_slice(spec, 4096, rng_seed=5)
    assert a == b
    assert len(set(a.values)) == 30  # all pool entries drawn w.h.p. at 4096 rows


def test_string_mean_length_concentration():
    spec = StringSliceSpec(mean_length=16, cardinality=100, sorted=False, null_fraction=0.0)
    s = generate_string_slice(spec, 100_000, rng_seed=3)
    mean_len = float(np.mean([len(v) for v in s.values]))
    assert 14.4 <= mean_len <= 17.6


def test_string_pool_mean_within_10pct():
    for seed in range(40):
        spec = sample_string_spec(seed)
        if spec.mean_length < 8 or spec.cardinality > 500:
            continue
        s = generate_string_slice(spec, spec.cardinality * 60, rng_seed=seed)
        pool = set(s.values)
        if len(pool) < spec.cardinality:
            continue  # not all entries drawn; pool mean unobservable
        mean_len = float(np.mean([len(v) for v in pool]))
        assert abs(mean_len - spec.mean_length) <= 0.1 * spec.mean_length


def test_postprocess_identity_configuration():
    spec = IntSliceSpec(
        family=IntFamily.SKEW_NORMAL, mean=0.0, scale=10.0, skewness=1.0,
        cardinality=1, run_length=1, scale_factor=1, sorted=False, null_fraction=0.0,
    )
    s = generate_int_slice(spec, 1000, rng_seed=4)
    assert postprocess(s, spec, rng_seed=9) == s


def test_postprocess_sorted_nonnull_nondecreasing():
    spec = IntSliceSpec(
        family=IntFamily.SKEW_NORMAL, mean=0.0, scale=1e4, skewness=-3.0,
        cardinality=1, run_length=1, scale_factor=3, sorted=True, null_fraction=0.1,
    )
    s = generate_int_slice(spec, 5000, rng_seed=4)
    out = postprocess(s, spec, rng_seed=9)
    nn = out.nonnull()
    assert np.all(np.diff(nn) >= 0)
    # scaling happened before sorting: all values are multiples of 3
    assert np.all(nn % 3 == 0)


def test_postprocess_null_count_concentration():
    spec = IntSliceSpec(
        family=IntFamily.DISCRETE_UNIFORM, mean=0.0, scale=1.0, skewness=0.0,
        cardinality=50, run_length=1, scale_factor=1, sorted=False, null_fraction=0.1,
    )
    rows = 200_000
    s = generate_int_slice(spec, rows, rng_seed=6)
    out = postprocess(s, spec, rng_seed=7)
    # binomial(rows, 0.1): +-5 sigma is ~ +-670
    assert abs(out.null_count - rows * 0.1) < 5 * math.sqrt(rows * 0.1 * 0.9)


def test_postprocess_overflow_detected():
    spec = IntSliceSpec(
        family=IntFamily.DISCRETE_UNIFORM, mean=0.0, scale=1.0, skewness=0.0,
        cardinality=2, run_length=1, scale_factor=1000, sorted=False, null_fraction=0.0,
    )
    s = Slice(Dtype.INT64, np.array([2**62], dtype=np.int64), np.ones(1, bool))
    with pytest.raises(IntegerOverflow):
        postprocess(s, spec, rng_seed=0)


def test_make_slice_deterministic_bytes():
    spec = sample_int_spec(1234, rows=4096)
    a = make_slice(spec, 4096, rng_seed=77)
    b = make_slice(spec, 4096, rng_seed=77)
    assert a == b
    assert a.values.tobytes() == b.values.tobytes()
    assert np.array_equal(a.validity, b.validity)


def test_family_coverage_over_corpus():
    fams = {sample_int_spec(seed).family for seed in range(300)}
    assert fams == set(IntFamily)


def test_manifest_round_trip_regenerates_identical(tmp_path):
    records = []
    for seed in range(6):
        spec = sample_int_spec(seed, rows=512) if seed % 2 else sample_string_spec(seed)
        records.append((spec, 512, seed * 11))
    path = tmp_path / "manifest.jsonl"
    write_manifest(str(path), records)
    back = read_manifest(str(path))
    assert back == records
    for (spec, rows, seed), (spec2, rows2, seed2) in zip(records, back):
        assert make_slice(spec, rows, seed) == make_slice(spec2, rows2, seed2)


def test_skew_normal_skews_the_right_way():
    base = dict(mean=0.0, scale=1000.0, cardinality=1, run_length=1,
                scale_factor=1, sorted=False, null_fraction=0.0)
    pos = generate_int_slice(
        IntSliceSpec(family=IntFamily.SKEW_NORMAL, skewness=15.0, **base), 50_000, 8
    )
    neg = generate_int_slice(
        IntSliceSpec(family=IntFamily.SKEW_NORMAL, skewness=-15.0, **base), 50_000, 8
    )
    # strong positive shape parameter puts nearly all mass above the location
    assert (pos.values >= 0).mean() > 0.95
    assert (neg.values <= 0).mean() > 0.95
