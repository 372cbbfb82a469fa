"""Synthetic training slices.

Integer slices come from one of three families: a skew-normal distribution,
a discrete uniform over a random cardinality, or runs of repeated values.
String slices draw uniformly from a generated pool with chosen cardinality
and mean length. Every slice is post-processed in a fixed order: scale
(integers only), sort, then independent null insertion, so sorting acts on
scaled values and nulls can break runs.

All operations are pure functions of (spec, rows, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Union

import numpy as np

from .errors import IntegerOverflow, LeaError
from .slices import Dtype, Slice

DEFAULT_ROWS_PER_SLICE = 1_000_000

_I64_MAX = (1 << 63) - 1

# Sampler ranges. Chosen to span the regimes that differentiate the codecs:
# low/high cardinality, narrow/wide domains, short/long runs.
CARDINALITY_RANGE = (1, 10**6)
RUN_VALUE_SCALE_RANGE = (1.0, 10**5)
LOCATION_RANGE = (-10**6, 10**6)
SKEWNESS_RANGE = (-20.0, 20.0)
SCALE_FACTOR_RANGE = (1, 10**3)
MEAN_LENGTH_RANGE = (4, 256)
NULL_FRACTION_MAX = 0.2
NULL_PROBABILITY = 0.5  # chance a slice gets any nulls at all
SORTED_PROBABILITY = 0.25

_ALPHABET = np.frombuffer(b"abcdefghijklmnopqrstuvwxyz", dtype=np.uint8)


class IntFamily(Enum):
    SKEW_NORMAL = "skew_normal"
    DISCRETE_UNIFORM = "discrete_uniform"
    RUNS = "runs"


@dataclass(frozen=True)
class IntSliceSpec:
    family: IntFamily
    mean: float
    scale: float
    skewness: float
    cardinality: int
    run_length: int
    scale_factor: int
    sorted: bool
    null_fraction: float

    def __post_init__(self):
        if self.cardinality < 1 or self.run_length < 1:
            raise LeaError("cardinality and run_length must be >= 1")
        if not 0 <= self.null_fraction < 1:
            raise LeaError("null_fraction must be in [0, 1)")


@dataclass(frozen=True)
class StringSliceSpec:
    mean_length: int
    cardinality: int
    sorted: bool
    null_fraction: float

    def __post_init__(self):
        if self.mean_length < 1 or self.cardinality < 1:
            raise LeaError("mean_length and cardinality must be >= 1")
        if not 0 <= self.null_fraction < 1:
            raise LeaError("null_fraction must be in [0, 1)")


SliceSpec = Union[IntSliceSpec, StringSliceSpec]


def _log_uniform_int(rng: np.random.Generator, low: int, high: int) -> int:
    """Integer whose log is ~uniform over [log low, log high]."""
    u = rng.uniform(math.log(low), math.log(high + 1))
    return int(min(high, max(low, math.floor(math.exp(u)))))


def _draw_null_fraction(rng: np.random.Generator) -> float:
    if rng.random() < NULL_PROBABILITY:
        return 0.0
    return float(rng.uniform(0.0, NULL_FRACTION_MAX))


def sample_int_spec(rng_seed: int, rows: int = DEFAULT_ROWS_PER_SLICE) -> IntSliceSpec:
    """Draw a random integer slice spec; deterministic given the seed.

    ``rows`` bounds the run-length range. All fields are drawn even when
    the chosen family ignores them, so specs are reproducible records.
    """
    rng = np.random.default_rng(rng_seed)
    family = list(IntFamily)[int(rng.integers(3))]
    mean = float(rng.uniform(*LOCATION_RANGE))
    scale = float(math.exp(rng.uniform(math.log(RUN_VALUE_SCALE_RANGE[0]),
                                       math.log(RUN_VALUE_SCALE_RANGE[1]))))
    skewness = float(rng.uniform(*SKEWNESS_RANGE))
    cardinality = _log_uniform_int(rng, *CARDINALITY_RANGE)
    run_length = _log_uniform_int(rng, 1, max(1, rows))
    scale_factor = _log_uniform_int(rng, *SCALE_FACTOR_RANGE)
    is_sorted = bool(rng.random() < SORTED_PROBABILITY)
    null_fraction = _draw_null_fraction(rng)
    return IntSliceSpec(
        family=family,
        mean=mean,
        scale=scale,
        skewness=skewness,
        cardinality=cardinality,
        run_length=run_length,
        scale_factor=scale_factor,
        sorted=is_sorted,
        null_fraction=null_fraction,
    )


def sample_string_spec(rng_seed: int) -> StringSliceSpec:
    """Draw a random string slice spec; deterministic given the seed."""
    rng = np.random.default_rng(rng_seed)
    mean_length = _log_uniform_int(rng, *MEAN_LENGTH_RANGE)
    cardinality = _log_uniform_int(rng, *CARDINALITY_RANGE)
    is_sorted = bool(rng.random() < SORTED_PROBABILITY)
    null_fraction = _draw_null_fraction(rng)
    return StringSliceSpec(
        mean_length=mean_length,
        cardinality=cardinality,
        sorted=is_sorted,
        null_fraction=null_fraction,
    )


def _skew_normal(rng: np.random.Generator, shape: float, size: int) -> np.ndarray:
    # Exact construction from two independent standard normals:
    # z = delta*|u0| + sqrt(1-delta^2)*v has skew-normal(shape) law.
    u0 = rng.standard_normal(size)
    v = rng.standard_normal(size)
    delta = shape / math.sqrt(1.0 + shape * shape)
    return delta * np.abs(u0) + math.sqrt(1.0 - delta * delta) * v


def generate_int_slice(spec: IntSliceSpec, rows: int, rng_seed: int) -> Slice:
    """Raw integer slice per the spec's family, before post-processing."""
    if rows < 1:
        raise LeaError("rows must be >= 1")
    rng = np.random.default_rng(rng_seed)
    if spec.family is IntFamily.SKEW_NORMAL:
        z = _skew_normal(rng, spec.skewness, rows)
        values = np.rint(spec.mean + spec.scale * z).astype(np.int64)
    elif spec.family is IntFamily.DISCRETE_UNIFORM:
        values = rng.integers(0, spec.cardinality, size=rows, dtype=np.int64)
    else:
        n_runs = -(-rows // spec.run_length)
        run_values = np.rint(
            spec.mean + spec.scale * rng.standard_normal(n_runs)
        ).astype(np.int64)
        values = np.repeat(run_values, spec.run_length)[:rows]
    return Slice(Dtype.INT64, values, np.ones(rows, dtype=bool))


def _pool_lengths(rng: np.random.Generator, cardinality: int, mean_length: int) -> np.ndarray:
    """Geometric-like lengths rescaled so the pool mean hits the target."""
    lengths = rng.geometric(1.0 / mean_length, size=cardinality)
    actual = lengths.mean()
    if actual > 0:
        lengths = np.maximum(1, np.rint(lengths * (mean_length / actual)))
    return lengths.astype(np.int64)


def generate_string_slice(spec: StringSliceSpec, rows: int, rng_seed: int) -> Slice:
    """String slice drawn uniformly from a pool of ``cardinality`` distinct
    lowercase strings. Pool entries that are never drawn are not
    materialized, which keeps huge-cardinality pools cheap."""
    if rows < 1:
        raise LeaError("rows must be >= 1")
    rng = np.random.default_rng(rng_seed)
    lengths = _pool_lengths(rng, spec.cardinality, spec.mean_length)
    picks = rng.integers(0, spec.cardinality, size=rows)
    used = np.unique(picks)
    used_lengths = lengths[used]
    offsets = np.concatenate(([0], np.cumsum(used_lengths)))
    blob = _ALPHABET[rng.integers(0, 26, size=int(offsets[-1]))].tobytes().decode("ascii")
    seen: set[str] = set()
    pool_used = np.empty(len(used), dtype=object)
    for i in range(len(used)):
        s = blob[offsets[i] : offsets[i + 1]]
        while s in seen:
            # collision: extend until distinct (matters only for tiny lengths)
            s = s + chr(97 + int(rng.integers(26)))
        seen.add(s)
        pool_used[i] = s
    rank = np.searchsorted(used, picks)
    return Slice(Dtype.STRING, pool_used[rank], np.ones(rows, dtype=bool))


def generate_slice(spec: SliceSpec, rows: int, rng_seed: int) -> Slice:
    if isinstance(spec, IntSliceSpec):
        return generate_int_slice(spec, rows, rng_seed)
    return generate_string_slice(spec, rows, rng_seed)


def postprocess(slice_: Slice, spec: SliceSpec, rng_seed: int) -> Slice:
    """Scale (integers) -> sort -> null insertion, in that fixed order."""
    rng = np.random.default_rng(rng_seed)
    values = slice_.values
    validity = slice_.validity.copy()
    n = slice_.row_count

    if slice_.dtype is Dtype.INT64 and isinstance(spec, IntSliceSpec):
        factor = int(spec.scale_factor)
        if factor != 1:
            limit = _I64_MAX // factor
            if n and int(np.abs(values).max()) > limit:
                raise IntegerOverflow(
                    f"scaling by {factor} leaves the signed 64-bit range"
                )
            values = values * np.int64(factor)

    if spec.sorted and n:
        if slice_.dtype is Dtype.INT64:
            nonnull = np.sort(values[validity], kind="stable")
        else:
            nonnull = values[validity][np.argsort(values[validity], kind="stable")]
        new_values = values.copy()
        new_validity = np.zeros(n, dtype=bool)
        new_validity[: len(nonnull)] = True
        new_values[: len(nonnull)] = nonnull
        values, validity = new_values, new_validity

    if spec.null_fraction > 0 and n:
        keep = rng.random(n) >= spec.null_fraction
        validity = validity & keep

    return Slice(slice_.dtype, values, validity)


def make_slice(spec: SliceSpec, rows: int, rng_seed: int) -> Slice:
    """Generate + post-process in one step (the corpus building block)."""
    raw = generate_slice(spec, rows, rng_seed)
    # distinct stream for post-processing so family draws stay aligned
    return postprocess(raw, spec, rng_seed ^ 0x9E3779B97F4A7C15)


# ---------------------------------------------------------------------------
# corpus manifest: line-delimited records, one slice each


def spec_to_doc(spec: SliceSpec) -> dict:
    doc = asdict(spec)
    if isinstance(spec, IntSliceSpec):
        doc["family"] = spec.family.value
        doc["dtype"] = Dtype.INT64.value
    else:
        doc["dtype"] = Dtype.STRING.value
    return doc


def spec_from_doc(doc: dict) -> SliceSpec:
    doc = dict(doc)
    dtype = doc.pop("dtype")
    if dtype == Dtype.INT64.value:
        doc["family"] = IntFamily(doc["family"])
        return IntSliceSpec(**doc)
    return StringSliceSpec(**doc)


def write_manifest(path: str, records: list[tuple[SliceSpec, int, int]]) -> None:
    """Each record is (spec, rows, seed); regeneration must be identical."""
    with open(path, "w", encoding="utf-8") as fh:
        for spec, rows, seed in records:
            doc = spec_to_doc(spec)
            doc["rows"] = rows
            doc["seed"] = seed
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def read_manifest(path: str) -> list[tuple[SliceSpec, int, int]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            rows = doc.pop("rows")
            seed = doc.pop("seed")
            out.append((spec_from_doc(doc), rows, seed))
    return out
