"""Learned encoding advisor for a prototype columnar store.

Five lightweight codecs plus plain, per-encoding cost models trained on
synthetic data, and an advisor that picks the encoding minimizing encoded
size, predicted scan latency, or a weighted mix, per column or per slice.
"""

from .advisor import (
    EncodingPlan,
    EncodingProfile,
    Granularity,
    Objective,
    ObjectiveKind,
    advise,
    brute_force_plan,
    choose_encoding,
    measure_plan,
    optimality_gap,
    profile_slice,
)
from .codecs import EncodedSlice, EncodingKind, applicable_kinds, decode, encode
from .features import (
    FeatureVariant,
    SampleProfile,
    SliceStatistics,
    contiguous_sample,
    feature_vector,
    sample_profile,
    slice_statistics,
)
from .harness import (
    LabeledExample,
    ModelBundle,
    SliceBudget,
    calibrate_device,
    collect_corpus,
    load_bundle,
    save_bundle,
    train_bundle,
    training_report,
)
from .models import (
    ForestHyper,
    ForestModel,
    LinearModel,
    TrainingSet,
    fit_forest,
    fit_linear,
    predict,
    smape,
)
from .scan import (
    DEFAULT_DEVICE,
    DeviceProfile,
    ScanMeasurement,
    StorageMode,
    scan_from_storage,
    scan_in_memory,
)
from .slices import Dtype, Slice, int_slice, string_slice
from .synthgen import (
    IntFamily,
    IntSliceSpec,
    StringSliceSpec,
    generate_int_slice,
    generate_string_slice,
    make_slice,
    postprocess,
    sample_int_spec,
    sample_string_spec,
)

__version__ = "0.1.0"
