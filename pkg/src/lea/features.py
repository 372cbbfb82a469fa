"""Slice statistics and per-encoding sample sizes: the model inputs.

Integer statistics are the range, cardinality, and the first three moments
(mean, variance, skewness) of the distance between adjacent non-null values
in stored order; string statistics are cardinality and mean length. All are
exact (no sampling). The sample profile is the encoded size of a contiguous
sample (1% by default) under every applicable encoding.

Feature vector layouts (fixed per dtype; layout ids are versioned):
    int64 stats   [row_count, null_fraction, range, cardinality,
                   adj_mean, adj_variance, adj_skewness]
    string stats  [row_count, null_fraction, cardinality, mean_length]
    full          stats + [sample_encoded_bytes, sample_rows]
    sample_only   [sample_encoded_bytes, sample_rows]
    stats_only    stats
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .codecs import EncodingKind, applicable_kinds, encode_all
from .errors import EmptySlice, LeaError, MissingProfileEntry
from .slices import Dtype, Slice

SAMPLE_FRACTION = 0.01


class FeatureVariant(Enum):
    FULL = "full"
    SAMPLE_ONLY = "sample_only"
    STATISTICS_ONLY = "statistics_only"


@dataclass(frozen=True)
class SliceStatistics:
    dtype: Dtype
    row_count: int
    null_fraction: float
    cardinality: int
    # int64 only (zero for strings)
    range_: int = 0
    adj_mean: float = 0.0
    adj_variance: float = 0.0
    adj_skewness: float = 0.0
    # string only (zero for int64)
    mean_length: float = 0.0

    def stats_fields(self) -> list[float]:
        if self.dtype is Dtype.INT64:
            return [
                float(self.row_count),
                self.null_fraction,
                float(self.range_),
                float(self.cardinality),
                self.adj_mean,
                self.adj_variance,
                self.adj_skewness,
            ]
        return [
            float(self.row_count),
            self.null_fraction,
            float(self.cardinality),
            self.mean_length,
        ]


@dataclass(frozen=True)
class SampleProfile:
    sample_rows: int
    sample_encoded_bytes: dict[EncodingKind, int]


def slice_statistics(slice_: Slice) -> SliceStatistics:
    n = slice_.row_count
    nn = slice_.nonnull()
    m = len(nn)
    null_fraction = 0.0 if n == 0 else (n - m) / n
    if slice_.dtype is Dtype.INT64:
        if m == 0:
            return SliceStatistics(Dtype.INT64, n, null_fraction, 0)
        cardinality = int(len(np.unique(nn)))
        range_ = int(nn.max()) - int(nn.min())
        adj_mean = adj_var = adj_skew = 0.0
        if m >= 2:
            # adjacent distances in two's-complement 64-bit arithmetic,
            # then population moments in float64
            diffs = (nn[1:].view(np.uint64) - nn[:-1].view(np.uint64)).view(np.int64)
            d = diffs.astype(np.float64)
            adj_mean = float(d.mean())
            centered = d - adj_mean
            m2 = float((centered**2).mean())
            adj_var = m2
            if m2 > 0.0:
                m3 = float((centered**3).mean())
                adj_skew = m3 / m2**1.5
        return SliceStatistics(
            Dtype.INT64,
            n,
            null_fraction,
            cardinality,
            range_=range_,
            adj_mean=adj_mean,
            adj_variance=adj_var,
            adj_skewness=adj_skew,
        )
    if m == 0:
        return SliceStatistics(Dtype.STRING, n, null_fraction, 0)
    cardinality = len(set(nn))
    mean_length = float(np.mean([len(s) for s in nn]))
    return SliceStatistics(
        Dtype.STRING, n, null_fraction, cardinality, mean_length=mean_length
    )


def contiguous_sample(slice_: Slice, fraction: float, rng_seed: int) -> Slice:
    """Contiguous window of max(1, floor(fraction * rows)) values; the start
    is drawn uniformly from the seed. Never mutates the source slice."""
    if not 0 < fraction <= 1:
        raise LeaError("fraction must be in (0, 1]")
    n = slice_.row_count
    if n == 0:
        return slice_.window(0, 0)
    length = max(1, int(fraction * n))
    start = int(np.random.default_rng(rng_seed).integers(0, n - length + 1))
    return slice_.window(start, length)


def sample_profile(sample: Slice) -> SampleProfile:
    """Encoded size of the sample under every applicable encoding."""
    if sample.row_count == 0:
        raise EmptySlice("cannot profile an empty sample")
    sizes = {
        kind: enc.encoded_bytes for kind, enc in encode_all(sample).items()
    }
    return SampleProfile(sample_rows=sample.row_count, sample_encoded_bytes=sizes)


def feature_layout_id(dtype: Dtype, variant: FeatureVariant) -> str:
    return f"{dtype.value}/{variant.value}/v1"


def feature_dim(dtype: Dtype, variant: FeatureVariant) -> int:
    stats = 7 if dtype is Dtype.INT64 else 4
    if variant is FeatureVariant.FULL:
        return stats + 2
    if variant is FeatureVariant.SAMPLE_ONLY:
        return 2
    return stats


def feature_vector(
    stats: SliceStatistics,
    profile: Optional[SampleProfile],
    kind: EncodingKind,
    variant: FeatureVariant = FeatureVariant.FULL,
) -> np.ndarray:
    if variant is FeatureVariant.STATISTICS_ONLY:
        return np.array(stats.stats_fields(), dtype=np.float64)
    if profile is None or kind not in profile.sample_encoded_bytes:
        raise MissingProfileEntry(f"no sample size for {kind.value}")
    sample_part = [
        float(profile.sample_encoded_bytes[kind]),
        float(profile.sample_rows),
    ]
    if variant is FeatureVariant.SAMPLE_ONLY:
        return np.array(sample_part, dtype=np.float64)
    return np.array(stats.stats_fields() + sample_part, dtype=np.float64)
