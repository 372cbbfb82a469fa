"""Encoding selection: per-slice prediction profiles, objective evaluation,
plan construction at column or slice granularity, and the brute-force
oracles used as ground truth.

The model-based path and the brute-force path share one selection routine,
so a profiler that returns true measured costs makes the advisor reproduce
the oracle selection for selection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from .codecs import (
    TIE_BREAK_RANK,
    EncodingKind,
    applicable_kinds,
    encode_all,
    plain_encoded_size,
)
from .errors import EmptyProfile, LeaError, MissingMeasuredCost
from .features import (
    SAMPLE_FRACTION,
    FeatureVariant,
    contiguous_sample,
    sample_profile,
    slice_statistics,
)
from .harness import ModelBundle, predict_chain
from .scan import DEFAULT_DEVICE, DeviceProfile, StorageMode, scan_in_memory
from .slices import Slice


class ObjectiveKind(Enum):
    SIZE = "size"
    LATENCY = "latency"
    MIXED = "mixed"


@dataclass(frozen=True)
class Objective:
    kind: ObjectiveKind
    alpha: float = 0.0  # Mixed only: weight on size, 1-alpha on latency

    def __post_init__(self):
        if self.kind is ObjectiveKind.MIXED and not 0.0 <= self.alpha <= 1.0:
            raise LeaError("mixed objective needs alpha in [0, 1]")

    @classmethod
    def parse(cls, text: str) -> "Objective":
        if text == "size":
            return cls(ObjectiveKind.SIZE)
        if text == "latency":
            return cls(ObjectiveKind.LATENCY)
        if text.startswith("mixed:"):
            return cls(ObjectiveKind.MIXED, alpha=float(text.split(":", 1)[1]))
        raise LeaError(f"unknown objective: {text!r}")

    def spell(self) -> str:
        if self.kind is ObjectiveKind.MIXED:
            return f"mixed:{self.alpha}"
        return self.kind.value


class Granularity(Enum):
    PER_COLUMN = "column"
    PER_SLICE = "slice"


@dataclass(frozen=True)
class PredictedCosts:
    size_bytes: float
    mem_ns: float
    storage_ns: float


@dataclass
class EncodingProfile:
    entries: dict[EncodingKind, PredictedCosts]
    size_norm: Optional[float] = None  # plain record size of the slice
    time_norm: Optional[float] = None  # plain storage time of the slice


@dataclass
class EncodingPlan:
    granularity: Granularity
    objective: Objective
    assignments: dict[str, Union[EncodingKind, list[EncodingKind]]]
    predicted_cost: Optional[float] = None
    measured_cost: Optional[float] = None

    def kinds_for(self, column: str, n_slices: int) -> list[EncodingKind]:
        a = self.assignments[column]
        if isinstance(a, EncodingKind):
            return [a] * n_slices
        if len(a) != n_slices:
            raise LeaError(f"plan for {column!r} covers {len(a)} slices, table has {n_slices}")
        return list(a)


def profile_slice(
    slice_: Slice,
    bundle: ModelBundle,
    variant: Optional[FeatureVariant] = None,
    sample_seed: int = 0,
    sample_fraction: float = SAMPLE_FRACTION,
) -> EncodingProfile:
    """Predict size, scan time, and storage time for every applicable
    encoding of one slice by running the full model chain."""
    variant = variant or bundle.variant
    if variant is not bundle.variant:
        raise LeaError(
            f"bundle was trained for variant {bundle.variant.value}, not {variant.value}"
        )
    stats = slice_statistics(slice_)
    profile = None
    if variant is not FeatureVariant.STATISTICS_ONLY:
        sample = contiguous_sample(slice_, sample_fraction, sample_seed)
        profile = sample_profile(sample)
    entries = {}
    for kind in applicable_kinds(slice_.dtype):
        size_p, mem_p, storage_p = predict_chain(
            bundle, slice_.dtype, kind, stats, profile
        )
        entries[kind] = PredictedCosts(size_p, mem_p, storage_p)
    plain = entries[EncodingKind.PLAIN]
    return EncodingProfile(
        entries=entries,
        size_norm=float(plain_encoded_size(slice_)),
        time_norm=plain.storage_ns,
    )


def _entry_cost(
    costs: PredictedCosts,
    objective: Objective,
    size_norm: Optional[float],
    time_norm: Optional[float],
) -> float:
    if objective.kind is ObjectiveKind.SIZE:
        return costs.size_bytes
    if objective.kind is ObjectiveKind.LATENCY:
        return costs.storage_ns
    if not size_norm or not time_norm:
        raise LeaError("mixed objective requires plain-size and plain-time normalizers")
    return (
        objective.alpha * costs.size_bytes / size_norm
        + (1.0 - objective.alpha) * costs.storage_ns / time_norm
    )


def _argmin_kind(costs: dict[EncodingKind, float]) -> EncodingKind:
    return min(costs.items(), key=lambda kv: (kv[1], TIE_BREAK_RANK[kv[0]]))[0]


def choose_encoding(profile: EncodingProfile, objective: Objective) -> EncodingKind:
    """Best encoding under the objective; ties break by the fixed order
    plain < rle < for < delta < dictionary < lz."""
    if not profile.entries:
        raise EmptyProfile("no encodings to choose from")
    costs = {
        kind: _entry_cost(c, objective, profile.size_norm, profile.time_norm)
        for kind, c in profile.entries.items()
    }
    return _argmin_kind(costs)


# ---------------------------------------------------------------------------
# plan construction (shared by the advisor and the brute-force oracles)


def _select_plan(
    cost_maps: dict[str, list[dict[EncodingKind, float]]],
    objective: Objective,
    granularity: Granularity,
) -> EncodingPlan:
    assignments: dict[str, Union[EncodingKind, list[EncodingKind]]] = {}
    total = 0.0
    for column, slice_costs in cost_maps.items():
        if granularity is Granularity.PER_SLICE:
            chosen = [_argmin_kind(c) for c in slice_costs]
            assignments[column] = chosen
            total += sum(c[k] for c, k in zip(slice_costs, chosen))
        else:
            kinds = list(slice_costs[0].keys())
            sums = {k: sum(c[k] for c in slice_costs) for k in kinds}
            best = _argmin_kind(sums)
            assignments[column] = best
            total += sums[best]
    return EncodingPlan(
        granularity=granularity,
        objective=objective,
        assignments=assignments,
        predicted_cost=total,
    )


Profiler = Callable[[int, int, Slice], EncodingProfile]


def _derived_seed(base: int, column: int, slice_index: int) -> int:
    return int(
        np.random.SeedSequence([int(base), column, slice_index]).generate_state(1)[0]
    )


def advise(
    table,
    bundle: Optional[ModelBundle],
    objective: Objective,
    granularity: Granularity,
    *,
    variant: Optional[FeatureVariant] = None,
    sample_seed: int = 0,
    profiler: Optional[Profiler] = None,
) -> EncodingPlan:
    """Choose encodings for every column of a table (duck-typed: an object
    with ``columns``, each carrying ``name``, ``dtype`` and ``slices``).

    ``profiler`` overrides the model-based profile per slice; tests use it
    to drive the selection with true measured costs.
    """
    if profiler is None:
        if bundle is None:
            raise LeaError("advise needs a model bundle or an explicit profiler")

        def profiler(ci: int, si: int, s: Slice) -> EncodingProfile:
            return profile_slice(
                s, bundle, variant=variant, sample_seed=_derived_seed(sample_seed, ci, si)
            )

    cost_maps: dict[str, list[dict[EncodingKind, float]]] = {}
    for ci, column in enumerate(table.columns):
        per_slice = []
        for si, s in enumerate(column.slices):
            prof = profiler(ci, si, s)
            per_slice.append(
                {
                    kind: _entry_cost(c, objective, prof.size_norm, prof.time_norm)
                    for kind, c in prof.entries.items()
                }
            )
        cost_maps[column.name] = per_slice
    return _select_plan(cost_maps, objective, granularity)


# ---------------------------------------------------------------------------
# measured costs and brute-force oracles


@dataclass(frozen=True)
class MeasuredCosts:
    size_bytes: int
    mem_ns: Optional[int] = None
    storage_ns: Optional[float] = None


CostTable = dict[tuple[int, int], dict[EncodingKind, MeasuredCosts]]


def measured_cost_table(
    table,
    *,
    need_latency: bool = False,
    device: Optional[DeviceProfile] = None,
    latency_mode: StorageMode = StorageMode.MODELED,
    scratch_dir: Optional[str] = None,
) -> CostTable:
    """Encode (and, for latency, scan) every slice under every applicable
    encoding. This is the expensive ground-truth pass."""
    device = device or DEFAULT_DEVICE
    out: CostTable = {}
    for ci, column in enumerate(table.columns):
        for si, s in enumerate(column.slices):
            per_kind = {}
            encoded = encode_all(s)
            for kind in applicable_kinds(column.dtype):
                enc = encoded[kind]
                if not need_latency:
                    per_kind[kind] = MeasuredCosts(size_bytes=enc.encoded_bytes)
                    continue
                if latency_mode is StorageMode.MEASURED:
                    storage_ns, mem_ns = _measured_storage_cost(enc, scratch_dir)
                else:
                    mem_ns = scan_in_memory(enc).elapsed_ns
                    storage_ns = float(device.io_ns(enc.encoded_bytes) + mem_ns)
                per_kind[kind] = MeasuredCosts(
                    size_bytes=enc.encoded_bytes, mem_ns=mem_ns, storage_ns=storage_ns
                )
            out[(ci, si)] = per_kind
    return out


def _measured_storage_cost(enc, scratch_dir):
    import os
    import tempfile

    from .codecs import serialize_record
    from .scan import scan_record_from_storage

    record = serialize_record(enc)
    with tempfile.NamedTemporaryFile(dir=scratch_dir, suffix=".slice", delete=False) as fh:
        fh.write(record)
        path = fh.name
    try:
        m = scan_record_from_storage(path, 0, len(record), StorageMode.MEASURED)
        return float(m.elapsed_ns), m.mem_ns
    finally:
        os.unlink(path)


def _cost_map_from_measured(
    table, cost_table: CostTable, objective: Objective
) -> dict[str, list[dict[EncodingKind, float]]]:
    cost_maps: dict[str, list[dict[EncodingKind, float]]] = {}
    for ci, column in enumerate(table.columns):
        per_slice = []
        for si in range(len(column.slices)):
            entries = cost_table[(ci, si)]
            plain = entries[EncodingKind.PLAIN]
            size_norm = float(plain.size_bytes)
            time_norm = plain.storage_ns
            costs = {}
            for kind, mc in entries.items():
                pc = PredictedCosts(
                    size_bytes=float(mc.size_bytes),
                    mem_ns=float(mc.mem_ns or 0),
                    storage_ns=float(mc.storage_ns or 0),
                )
                costs[kind] = _entry_cost(pc, objective, size_norm, time_norm)
            per_slice.append(costs)
        cost_maps[column.name] = per_slice
    return cost_maps


def measured_profiler(table, cost_table: CostTable) -> Profiler:
    """Profiler that replays true measured costs (the oracle-equivalence
    stub: advise with it must match the brute-force plans exactly)."""

    def profiler(ci: int, si: int, _s: Slice) -> EncodingProfile:
        entries = {
            kind: PredictedCosts(
                size_bytes=float(mc.size_bytes),
                mem_ns=float(mc.mem_ns or 0),
                storage_ns=float(mc.storage_ns or 0),
            )
            for kind, mc in cost_table[(ci, si)].items()
        }
        plain = cost_table[(ci, si)][EncodingKind.PLAIN]
        return EncodingProfile(
            entries=entries,
            size_norm=float(plain.size_bytes),
            time_norm=plain.storage_ns,
        )

    return profiler


def brute_force_plan(
    table,
    objective: Objective,
    granularity: Granularity,
    *,
    device: Optional[DeviceProfile] = None,
    latency_mode: StorageMode = StorageMode.MODELED,
    cost_table: Optional[CostTable] = None,
    scratch_dir: Optional[str] = None,
) -> EncodingPlan:
    """Ground truth: per-slice optimum (PerSlice) or the single best
    encoding per column (PerColumn), by actually encoding everything."""
    if cost_table is None:
        cost_table = measured_cost_table(
            table,
            need_latency=objective.kind is not ObjectiveKind.SIZE,
            device=device,
            latency_mode=latency_mode,
            scratch_dir=scratch_dir,
        )
    cost_maps = _cost_map_from_measured(table, cost_table, objective)
    plan = _select_plan(cost_maps, objective, granularity)
    plan.measured_cost = plan.predicted_cost
    plan.predicted_cost = None
    return plan


def measure_plan(
    table,
    plan: EncodingPlan,
    *,
    device: Optional[DeviceProfile] = None,
    latency_mode: StorageMode = StorageMode.MODELED,
    cost_table: Optional[CostTable] = None,
    scratch_dir: Optional[str] = None,
) -> EncodingPlan:
    """Fill ``measured_cost`` by evaluating the plan's chosen encodings."""
    if cost_table is None:
        cost_table = measured_cost_table(
            table,
            need_latency=plan.objective.kind is not ObjectiveKind.SIZE,
            device=device,
            latency_mode=latency_mode,
            scratch_dir=scratch_dir,
        )
    cost_maps = _cost_map_from_measured(table, cost_table, plan.objective)
    total = 0.0
    for column in table.columns:
        kinds = plan.kinds_for(column.name, len(column.slices))
        for si, kind in enumerate(kinds):
            total += cost_maps[column.name][si][kind]
    plan.measured_cost = total
    return plan


def optimality_gap(plan: EncodingPlan, optimal: EncodingPlan) -> float:
    """(plan cost - optimal cost) / optimal cost, on measured costs."""
    if plan.measured_cost is None or optimal.measured_cost is None:
        raise MissingMeasuredCost("both plans need measured costs")
    if optimal.measured_cost == 0:
        raise LeaError("optimal plan has zero measured cost")
    return (plan.measured_cost - optimal.measured_cost) / optimal.measured_cost


# ---------------------------------------------------------------------------
# plan files

PLAN_VERSION = 1


def plan_to_doc(plan: EncodingPlan) -> dict:
    assignments = {}
    for column, a in plan.assignments.items():
        assignments[column] = a.value if isinstance(a, EncodingKind) else [k.value for k in a]
    return {
        "plan_version": PLAN_VERSION,
        "granularity": plan.granularity.value,
        "objective": plan.objective.spell(),
        "assignments": assignments,
        "predicted_cost": plan.predicted_cost,
        "measured_cost": plan.measured_cost,
    }


def plan_from_doc(doc: dict) -> EncodingPlan:
    if doc.get("plan_version") != PLAN_VERSION:
        raise LeaError("unsupported plan version")
    assignments = {}
    for column, a in doc["assignments"].items():
        assignments[column] = (
            EncodingKind(a) if isinstance(a, str) else [EncodingKind(k) for k in a]
        )
    return EncodingPlan(
        granularity=Granularity(doc["granularity"]),
        objective=Objective.parse(doc["objective"]),
        assignments=assignments,
        predicted_cost=doc.get("predicted_cost"),
        measured_cost=doc.get("measured_cost"),
    )


def save_plan(path: str, plan: EncodingPlan) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_doc(plan), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_plan(path: str) -> EncodingPlan:
    with open(path, encoding="utf-8") as fh:
        return plan_from_doc(json.load(fh))
