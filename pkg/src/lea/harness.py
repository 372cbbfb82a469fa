"""Two-phase training orchestration.

Phase one (portable): generate budgeted synthetic slices, record exact
encoded sizes plus statistics and sample profiles for every applicable
encoding. Bit-reproducible on any machine from the master seed.

Phase two (in situ): time in-memory scans for the first ``n_mem`` slices
and from-storage scans for the first ``n_storage`` slices, calibrate the
storage device, then fit the full model bundle. The in-memory model
consumes the *predicted* size of the size model it is chained behind, and
the storage model consumes predicted size and predicted scan time, so
inference can run the same chain end to end.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import synthgen
from .codecs import EncodingKind, applicable_kinds, encode_all, serialize_record
from .errors import (
    CacheHookUnavailable,
    DegenerateDesign,
    InsufficientData,
    LeaError,
    MissingCoverage,
    NegativeThroughput,
)
from .features import (
    SAMPLE_FRACTION,
    FeatureVariant,
    SampleProfile,
    SliceStatistics,
    contiguous_sample,
    feature_layout_id,
    feature_vector,
    sample_profile,
    slice_statistics,
)
from .models import (
    ForestHyper,
    ForestModel,
    LinearModel,
    PredictionTarget,
    TrainingSet,
    fit_forest,
    fit_linear,
    model_from_doc,
    model_to_doc,
    predict,
    predict_batch,
    smape,
)
from .scan import (
    DEFAULT_DEVICE,
    DeviceProfile,
    StorageMode,
    get_cache_hook,
    scan_in_memory,
    scan_record_from_storage,
)
from .slices import Dtype, Slice


@dataclass(frozen=True)
class SliceBudget:
    rows_per_slice: int = synthgen.DEFAULT_ROWS_PER_SLICE
    n_size: int = 1000
    n_mem: int = 250
    n_storage: int = 5

    def __post_init__(self):
        if min(self.rows_per_slice, self.n_size, self.n_mem, self.n_storage) < 1:
            raise LeaError("all budget counts must be >= 1")


@dataclass
class LabeledExample:
    slice_index: int
    dtype: Dtype
    spec: synthgen.SliceSpec
    rows: int
    gen_seed: int
    sample_seed: int
    stats: SliceStatistics
    profile: SampleProfile
    kind: EncodingKind
    size_bytes: int
    mem_scan_ns: Optional[int] = None
    storage_scan_ns: Optional[float] = None
    storage_modeled: bool = False


def _slice_seeds(master_seed: int, dtype: Dtype, n: int) -> np.ndarray:
    seq = np.random.SeedSequence([int(master_seed), 0 if dtype is Dtype.INT64 else 1])
    return seq.generate_state(3 * n, dtype=np.uint32).reshape(n, 3)


def _draw_spec(dtype: Dtype, spec_seed: int, rows: int) -> synthgen.SliceSpec:
    if dtype is Dtype.INT64:
        return synthgen.sample_int_spec(spec_seed, rows=rows)
    return synthgen.sample_string_spec(spec_seed)


def collect_corpus(
    budget: SliceBudget,
    dtype: Dtype,
    master_seed: int,
    *,
    with_timing: bool = True,
    device: Optional[DeviceProfile] = None,
    scratch_dir: Optional[str] = None,
    storage_mode: str = "auto",
    sample_fraction: float = SAMPLE_FRACTION,
) -> list[LabeledExample]:
    """Generate and label the training corpus for one data type.

    Size labels are exact and reproducible from the master seed. With
    ``with_timing``, the first ``n_mem`` slices get in-memory scan labels
    and the first ``n_storage`` get from-storage labels (``storage_mode``:
    "auto" prefers measured cold reads when a cache hook exists, "modeled"
    charges the device cost model, "measured" requires the hook).
    """
    device = device or DEFAULT_DEVICE
    seeds = _slice_seeds(master_seed, dtype, budget.n_size)
    examples: list[LabeledExample] = []
    for i in range(budget.n_size):
        spec_seed, gen_seed, sample_seed = (int(s) for s in seeds[i])
        spec = _draw_spec(dtype, spec_seed, budget.rows_per_slice)
        slice_ = synthgen.make_slice(spec, budget.rows_per_slice, gen_seed)
        stats = slice_statistics(slice_)
        profile = sample_profile(contiguous_sample(slice_, sample_fraction, sample_seed))
        want_mem = with_timing and i < budget.n_mem
        want_storage = with_timing and i < budget.n_storage
        encoded = encode_all(slice_)
        for kind in applicable_kinds(dtype):
            enc = encoded[kind]
            ex = LabeledExample(
                slice_index=i,
                dtype=dtype,
                spec=spec,
                rows=budget.rows_per_slice,
                gen_seed=gen_seed,
                sample_seed=sample_seed,
                stats=stats,
                profile=profile,
                kind=kind,
                size_bytes=enc.encoded_bytes,
            )
            mem_ns = None
            if want_mem or want_storage:
                mem_ns = scan_in_memory(enc).elapsed_ns
            if want_mem:
                ex.mem_scan_ns = mem_ns
            if want_storage:
                _label_storage(ex, enc, mem_ns, device, scratch_dir, storage_mode)
            examples.append(ex)
    return examples


def _label_storage(ex, enc, mem_ns, device, scratch_dir, storage_mode) -> None:
    if storage_mode not in ("auto", "measured", "modeled"):
        raise LeaError(f"unknown storage mode: {storage_mode}")
    if storage_mode in ("auto", "measured"):
        try:
            record = serialize_record(enc)
            with tempfile.NamedTemporaryFile(
                dir=scratch_dir, suffix=".slice", delete=False
            ) as fh:
                fh.write(record)
                path = fh.name
            try:
                m = scan_record_from_storage(path, 0, len(record), StorageMode.MEASURED)
                ex.storage_scan_ns = float(m.elapsed_ns)
                ex.storage_modeled = False
                return
            finally:
                os.unlink(path)
        except CacheHookUnavailable:
            if storage_mode == "measured":
                raise
    ex.storage_scan_ns = float(device.io_ns(enc.encoded_bytes) + mem_ns)
    ex.storage_modeled = True


def add_timing_labels(
    examples: list[LabeledExample],
    budget: SliceBudget,
    *,
    device: Optional[DeviceProfile] = None,
    scratch_dir: Optional[str] = None,
    storage_mode: str = "auto",
) -> None:
    """Fill scan labels on a size-phase corpus by regenerating the budgeted
    slices from their recorded specs and seeds (phase two of training)."""
    device = device or DEFAULT_DEVICE
    by_slice: dict[tuple[Dtype, int], list[LabeledExample]] = {}
    for ex in examples:
        by_slice.setdefault((ex.dtype, ex.slice_index), []).append(ex)
    for (dtype, i), group in sorted(
        by_slice.items(), key=lambda kv: (kv[0][0].value, kv[0][1])
    ):
        want_mem = i < budget.n_mem
        want_storage = i < budget.n_storage
        if not (want_mem or want_storage):
            continue
        first = group[0]
        slice_ = synthgen.make_slice(first.spec, first.rows, first.gen_seed)
        encoded = encode_all(slice_)
        for ex in group:
            enc = encoded[ex.kind]
            mem_ns = scan_in_memory(enc).elapsed_ns
            if want_mem:
                ex.mem_scan_ns = mem_ns
            if want_storage:
                _label_storage(ex, enc, mem_ns, device, scratch_dir, storage_mode)


def calibrate_device(
    sizes: Sequence[int],
    path: str,
    *,
    read_fn=None,
    repeats: int = 5,
    hook=None,
) -> DeviceProfile:
    """Fit time = latency + size / throughput from cold reads of scratch
    files (or from an injected ``read_fn(path, size) -> elapsed_ns``)."""
    sizes = [int(s) for s in sizes]
    if len(set(sizes)) < 2:
        raise DegenerateDesign("calibration needs at least 2 distinct sizes")
    hook = hook or get_cache_hook()
    if read_fn is None:
        if not hook.available():
            raise CacheHookUnavailable("cannot calibrate without a cache hook")
        read_fn = _cold_read_fn(hook)
    times = []
    for s in sizes:
        best = min(read_fn(path, s) for _ in range(repeats))
        times.append(float(best))
    data = TrainingSet(
        dtype=Dtype.INT64,
        target=PredictionTarget.STORAGE_SCAN_NS,
        features=np.array(sizes, dtype=np.float64).reshape(-1, 1),
        labels=np.array(times, dtype=np.float64),
        feature_layout_id="device/bytes/v1",
    )
    model = fit_linear(data)
    slope = float(model.weights[0])  # ns per byte
    if slope <= 0:
        raise NegativeThroughput(f"non-physical fit: slope {slope} ns/byte")
    latency = max(0.0, model.intercept)
    fitted = model.intercept + slope * np.asarray(sizes, dtype=np.float64)
    rel = np.abs(fitted - np.asarray(times)) / np.maximum(np.asarray(times), 1.0)
    return DeviceProfile(
        latency_ns=latency,
        throughput_bps=1e9 / slope,
        residual_tolerance=max(0.10, 3.0 * float(rel.max())),
    )


def _cold_read_fn(hook):
    import time as _time

    rng = np.random.default_rng(0)

    def read_fn(path: str, size: int) -> int:
        fname = os.path.join(path, f"calib_{size}.bin")
        if not os.path.exists(fname) or os.path.getsize(fname) != size:
            with open(fname, "wb") as fh:
                fh.write(rng.bytes(size))
        hook.invalidate(fname)
        # single read to match the slice-scan I/O pattern
        t0 = _time.perf_counter_ns()
        with open(fname, "rb") as fh:
            fh.read()
        return _time.perf_counter_ns() - t0

    return read_fn


# ---------------------------------------------------------------------------
# model bundle


@dataclass
class KindModels:
    size_forest: ForestModel
    size_linear: Optional[LinearModel]  # extrapolation fallback
    mem_forest: Optional[ForestModel] = None
    mem_linear: Optional[LinearModel] = None
    storage_linear: Optional[LinearModel] = None


@dataclass
class ModelBundle:
    entries: dict[tuple[Dtype, EncodingKind], KindModels]
    device: DeviceProfile
    variant: FeatureVariant
    training_meta: dict = field(default_factory=dict)

    def models_for(self, dtype: Dtype, kind: EncodingKind) -> KindModels:
        try:
            return self.entries[(dtype, kind)]
        except KeyError:
            raise MissingCoverage(f"no models for ({dtype.value}, {kind.value})") from None

    def covers(self, dtype: Dtype) -> bool:
        return all((dtype, k) in self.entries for k in applicable_kinds(dtype))

    def extrapolation_trigger(self, stats: SliceStatistics) -> bool:
        """True when the slice lies outside the training feature range and
        predictions should route to the linear fallback."""
        if stats.dtype is Dtype.INT64:
            limit = self.training_meta.get("max_range")
            return limit is not None and stats.range_ > limit
        limit = self.training_meta.get("max_mean_length")
        return limit is not None and stats.mean_length > limit


MEM_LAYOUT_PROVENANCE = "pred_size+stats"
STORAGE_LAYOUT_PROVENANCE = "pred_size+pred_mem"


def _size_training_set(
    dtype: Dtype, kind: EncodingKind, group: list[LabeledExample], variant: FeatureVariant
) -> TrainingSet:
    feats = np.stack(
        [feature_vector(ex.stats, ex.profile, kind, variant) for ex in group]
    )
    labels = np.array([ex.size_bytes for ex in group], dtype=np.float64)
    return TrainingSet(
        dtype=dtype,
        target=PredictionTarget.ENCODED_SIZE,
        features=feats,
        labels=labels,
        feature_layout_id=feature_layout_id(dtype, variant) + "/size",
    )


def fit_size_models(
    examples: list[LabeledExample],
    hyper: ForestHyper = ForestHyper(),
    variant: FeatureVariant = FeatureVariant.FULL,
) -> dict[tuple[Dtype, EncodingKind], KindModels]:
    """Fit the portable size predictors (forest plus linear fallback)."""
    groups = _group_examples(examples)
    out = {}
    for (dtype, kind), group in groups.items():
        data = _size_training_set(dtype, kind, group, variant)
        out[(dtype, kind)] = KindModels(
            size_forest=fit_forest(data, hyper),
            size_linear=_try_fit_linear(data),
        )
    return out


def _try_fit_linear(data: TrainingSet) -> Optional[LinearModel]:
    # the linear fallback is optional: skip it when the corpus is too small
    try:
        return fit_linear(data)
    except InsufficientData:
        return None


def _group_examples(examples) -> dict[tuple[Dtype, EncodingKind], list[LabeledExample]]:
    groups: dict[tuple[Dtype, EncodingKind], list[LabeledExample]] = {}
    for ex in examples:
        groups.setdefault((ex.dtype, ex.kind), []).append(ex)
    for dtype in {d for d, _ in groups}:
        for kind in applicable_kinds(dtype):
            if (dtype, kind) not in groups:
                raise MissingCoverage(f"no examples for ({dtype.value}, {kind.value})")
    return groups


def train_bundle(
    examples: list[LabeledExample],
    device: Optional[DeviceProfile] = None,
    hyper: ForestHyper = ForestHyper(),
    variant: FeatureVariant = FeatureVariant.FULL,
    meta: Optional[dict] = None,
) -> ModelBundle:
    """Fit the full prediction chain for every applicable (dtype, kind).

    The scan-time model trains on the size model's predictions (not the
    true sizes) and the storage model on predicted size and predicted scan
    time, matching how the chain runs at inference.
    """
    device = device or DEFAULT_DEVICE
    groups = _group_examples(examples)
    entries = fit_size_models(examples, hyper, variant)
    training_meta = dict(meta or {})
    training_meta.setdefault("feature_variant", variant.value)
    _record_trigger_limits(examples, training_meta)
    storage_modeled = [ex.storage_modeled for ex in examples if ex.storage_scan_ns is not None]
    training_meta["storage_labels_modeled"] = bool(storage_modeled) and all(storage_modeled)

    for (dtype, kind), group in groups.items():
        entry = entries[(dtype, kind)]
        mem_group = [ex for ex in group if ex.mem_scan_ns is not None]
        if not mem_group:
            continue
        size_feats = np.stack(
            [feature_vector(ex.stats, ex.profile, kind, variant) for ex in mem_group]
        )
        size_pred = predict_batch(entry.size_forest, size_feats)
        mem_feats = np.column_stack(
            [size_pred, np.stack([ex.stats.stats_fields() for ex in mem_group])]
        )
        mem_data = TrainingSet(
            dtype=dtype,
            target=PredictionTarget.MEM_SCAN_NS,
            features=mem_feats,
            labels=np.array([ex.mem_scan_ns for ex in mem_group], dtype=np.float64),
            feature_layout_id=f"{dtype.value}/mem/v1:{MEM_LAYOUT_PROVENANCE}",
        )
        entry.mem_forest = fit_forest(mem_data, hyper)
        entry.mem_linear = _try_fit_linear(mem_data)

        sel = [j for j, ex in enumerate(mem_group) if ex.storage_scan_ns is not None]
        storage_group = [mem_group[j] for j in sel]
        if len(storage_group) < 3:
            continue
        mem_pred = predict_batch(entry.mem_forest, mem_feats[sel])
        storage_feats = np.column_stack([size_pred[sel], mem_pred])
        storage_data = TrainingSet(
            dtype=dtype,
            target=PredictionTarget.STORAGE_SCAN_NS,
            features=storage_feats,
            labels=np.array(
                [ex.storage_scan_ns for ex in storage_group], dtype=np.float64
            ),
            feature_layout_id=f"{dtype.value}/storage/v1:{STORAGE_LAYOUT_PROVENANCE}",
        )
        entry.storage_linear = fit_linear(storage_data)

    return ModelBundle(
        entries=entries, device=device, variant=variant, training_meta=training_meta
    )


def _record_trigger_limits(examples, meta: dict) -> None:
    int_ranges = [ex.stats.range_ for ex in examples if ex.dtype is Dtype.INT64]
    str_lengths = [ex.stats.mean_length for ex in examples if ex.dtype is Dtype.STRING]
    if int_ranges:
        meta["max_range"] = float(max(int_ranges))
    if str_lengths:
        meta["max_mean_length"] = float(max(str_lengths))


def predict_chain(
    bundle: ModelBundle,
    dtype: Dtype,
    kind: EncodingKind,
    stats: SliceStatistics,
    profile: Optional[SampleProfile],
) -> tuple[float, float, float]:
    """Run the size -> scan time -> storage time chain for one encoding.

    Returns (size_bytes, mem_ns, storage_ns) predictions, all >= 0. Routes
    to the linear fallback when the slice is outside the training range.
    """
    entry = bundle.models_for(dtype, kind)
    use_linear = bundle.extrapolation_trigger(stats)
    fv = feature_vector(stats, profile, kind, bundle.variant)
    size_model = (
        entry.size_linear
        if (use_linear and entry.size_linear is not None)
        else entry.size_forest
    )
    size_pred = max(0.0, predict(size_model, fv))
    if entry.mem_forest is None and entry.mem_linear is None:
        return size_pred, 0.0, 0.0
    mem_fv = np.concatenate([[size_pred], stats.stats_fields()])
    mem_model = (
        entry.mem_linear
        if (use_linear and entry.mem_linear is not None)
        else entry.mem_forest
    )
    mem_pred = max(0.0, predict(mem_model, mem_fv))
    if entry.storage_linear is None:
        return size_pred, mem_pred, 0.0
    storage_pred = max(0.0, predict(entry.storage_linear, [size_pred, mem_pred]))
    return size_pred, mem_pred, storage_pred


# ---------------------------------------------------------------------------
# evaluation report


@dataclass
class ReportRow:
    dtype: Dtype
    kind: EncodingKind
    target: PredictionTarget
    smape: float
    n: int


@dataclass
class TrainingReport:
    rows: list[ReportRow]

    def value(self, dtype: Dtype, kind: EncodingKind, target: PredictionTarget) -> float:
        for row in self.rows:
            if row.dtype is dtype and row.kind is kind and row.target is target:
                return row.smape
        raise LeaError(f"no report row for ({dtype.value}, {kind.value}, {target.value})")

    def average(self, dtype: Dtype, target: PredictionTarget) -> float:
        vals = [r.smape for r in self.rows if r.dtype is dtype and r.target is target]
        if not vals:
            raise LeaError(f"no rows for ({dtype.value}, {target.value})")
        return float(np.mean(vals))

    def to_doc(self) -> dict:
        return {
            "rows": [
                {
                    "dtype": r.dtype.value,
                    "kind": r.kind.value,
                    "target": r.target.value,
                    "smape": r.smape,
                    "n": r.n,
                }
                for r in self.rows
            ]
        }


def training_report(bundle: ModelBundle, heldout: list[LabeledExample]) -> TrainingReport:
    """Held-out SMAPE per (dtype, kind, target), predictions run end to end
    through the inference chain."""
    groups = {}
    for ex in heldout:
        groups.setdefault((ex.dtype, ex.kind), []).append(ex)
    rows = []
    for (dtype, kind), group in sorted(
        groups.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
    ):
        preds = [predict_chain(bundle, dtype, kind, ex.stats, ex.profile) for ex in group]
        sizes_p = [p[0] for p in preds]
        sizes_a = [float(ex.size_bytes) for ex in group]
        rows.append(
            ReportRow(dtype, kind, PredictionTarget.ENCODED_SIZE, smape(sizes_p, sizes_a), len(group))
        )
        mem_pairs = [
            (p[1], float(ex.mem_scan_ns))
            for p, ex in zip(preds, group)
            if ex.mem_scan_ns is not None
        ]
        if mem_pairs:
            rows.append(
                ReportRow(
                    dtype,
                    kind,
                    PredictionTarget.MEM_SCAN_NS,
                    smape([p for p, _ in mem_pairs], [a for _, a in mem_pairs]),
                    len(mem_pairs),
                )
            )
        storage_pairs = [
            (p[2], float(ex.storage_scan_ns))
            for p, ex in zip(preds, group)
            if ex.storage_scan_ns is not None
        ]
        if storage_pairs:
            rows.append(
                ReportRow(
                    dtype,
                    kind,
                    PredictionTarget.STORAGE_SCAN_NS,
                    smape([p for p, _ in storage_pairs], [a for _, a in storage_pairs]),
                    len(storage_pairs),
                )
            )
    return TrainingReport(rows)


# ---------------------------------------------------------------------------
# file formats

TRAINING_SET_VERSION = 1
BUNDLE_VERSION = 1


def example_to_doc(ex: LabeledExample) -> dict:
    doc = {
        "slice_index": ex.slice_index,
        "dtype": ex.dtype.value,
        "spec": synthgen.spec_to_doc(ex.spec),
        "rows": ex.rows,
        "gen_seed": ex.gen_seed,
        "sample_seed": ex.sample_seed,
        "kind": ex.kind.value,
        "stats": _stats_to_doc(ex.stats),
        "profile": {
            "sample_rows": ex.profile.sample_rows,
            "sample_encoded_bytes": {
                k.value: v for k, v in ex.profile.sample_encoded_bytes.items()
            },
        },
        "size_bytes": ex.size_bytes,
        "mem_scan_ns": ex.mem_scan_ns,
        "storage_scan_ns": ex.storage_scan_ns,
        "storage_modeled": ex.storage_modeled,
    }
    return doc


def example_from_doc(doc: dict) -> LabeledExample:
    dtype = Dtype(doc["dtype"])
    return LabeledExample(
        slice_index=doc["slice_index"],
        dtype=dtype,
        spec=synthgen.spec_from_doc(doc["spec"]),
        rows=doc["rows"],
        gen_seed=doc["gen_seed"],
        sample_seed=doc["sample_seed"],
        stats=_stats_from_doc(doc["stats"]),
        profile=SampleProfile(
            sample_rows=doc["profile"]["sample_rows"],
            sample_encoded_bytes={
                EncodingKind(k): v
                for k, v in doc["profile"]["sample_encoded_bytes"].items()
            },
        ),
        kind=EncodingKind(doc["kind"]),
        size_bytes=doc["size_bytes"],
        mem_scan_ns=doc["mem_scan_ns"],
        storage_scan_ns=doc["storage_scan_ns"],
        storage_modeled=doc["storage_modeled"],
    )


def _stats_to_doc(stats: SliceStatistics) -> dict:
    return {
        "dtype": stats.dtype.value,
        "row_count": stats.row_count,
        "null_fraction": stats.null_fraction,
        "cardinality": stats.cardinality,
        "range": stats.range_,
        "adj_mean": stats.adj_mean,
        "adj_variance": stats.adj_variance,
        "adj_skewness": stats.adj_skewness,
        "mean_length": stats.mean_length,
    }


def _stats_from_doc(doc: dict) -> SliceStatistics:
    return SliceStatistics(
        dtype=Dtype(doc["dtype"]),
        row_count=doc["row_count"],
        null_fraction=doc["null_fraction"],
        cardinality=doc["cardinality"],
        range_=doc["range"],
        adj_mean=doc["adj_mean"],
        adj_variance=doc["adj_variance"],
        adj_skewness=doc["adj_skewness"],
        mean_length=doc["mean_length"],
    )


def write_training_set(path: str, examples: list[LabeledExample]) -> None:
    """Versioned line-delimited records; first line is the header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"training_set_version": TRAINING_SET_VERSION}) + "\n")
        for ex in examples:
            fh.write(json.dumps(example_to_doc(ex), sort_keys=True) + "\n")


def read_training_set(path: str) -> list[LabeledExample]:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("training_set_version") != TRAINING_SET_VERSION:
            raise LeaError("unsupported training set version")
        return [example_from_doc(json.loads(line)) for line in fh if line.strip()]


def _kind_models_to_doc(entry: KindModels) -> dict:
    def opt(m):
        return None if m is None else model_to_doc(m)

    return {
        "size_forest": model_to_doc(entry.size_forest),
        "size_linear": model_to_doc(entry.size_linear),
        "mem_forest": opt(entry.mem_forest),
        "mem_linear": opt(entry.mem_linear),
        "storage_linear": opt(entry.storage_linear),
    }


def _kind_models_from_doc(doc: dict) -> KindModels:
    def opt(d):
        return None if d is None else model_from_doc(d)

    return KindModels(
        size_forest=model_from_doc(doc["size_forest"]),
        size_linear=model_from_doc(doc["size_linear"]),
        mem_forest=opt(doc["mem_forest"]),
        mem_linear=opt(doc["mem_linear"]),
        storage_linear=opt(doc["storage_linear"]),
    )


def bundle_to_doc(bundle: ModelBundle) -> dict:
    return {
        "bundle_version": BUNDLE_VERSION,
        "device": {
            "latency_ns": bundle.device.latency_ns,
            "throughput_bps": bundle.device.throughput_bps,
            "residual_tolerance": bundle.device.residual_tolerance,
        },
        "variant": bundle.variant.value,
        "training_meta": bundle.training_meta,
        "entries": {
            f"{dtype.value}/{kind.value}": _kind_models_to_doc(entry)
            for (dtype, kind), entry in sorted(
                bundle.entries.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
            )
        },
    }


def bundle_from_doc(doc: dict) -> ModelBundle:
    if doc.get("bundle_version") != BUNDLE_VERSION:
        raise LeaError("unsupported bundle version")
    entries = {}
    for key, entry_doc in doc["entries"].items():
        dtype_s, kind_s = key.split("/", 1)
        entries[(Dtype(dtype_s), EncodingKind(kind_s))] = _kind_models_from_doc(entry_doc)
    dev = doc["device"]
    return ModelBundle(
        entries=entries,
        device=DeviceProfile(
            latency_ns=dev["latency_ns"],
            throughput_bps=dev["throughput_bps"],
            residual_tolerance=dev["residual_tolerance"],
        ),
        variant=FeatureVariant(doc["variant"]),
        training_meta=doc["training_meta"],
    )


def save_bundle(path: str, bundle: ModelBundle) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle_to_doc(bundle), fh, sort_keys=True)
        fh.write("\n")


def load_bundle(path: str) -> ModelBundle:
    with open(path, encoding="utf-8") as fh:
        return bundle_from_doc(json.load(fh))
