import numpy as np
import pytest

from lea.harness import SliceBudget, collect_corpus, train_bundle
from lea.models import ForestHyper
from lea.slices import Dtype, Slice


def random_int_slice(rng: np.random.Generator, rows: int | None = None) -> Slice:
    """Mixed-regime random integer slice for round-trip style tests."""
    if rows is None:
        rows = int(10 ** rng.uniform(0, 4.6))
    style = rng.integers(0, 4)
    if style == 0:
        values = rng.integers(-(2**62), 2**62, size=rows, dtype=np.int64)
    elif style == 1:
        values = rng.integers(0, max(2, rng.integers(1, 50)), size=rows, dtype=np.int64)
    elif style == 2:
        run = int(rng.integers(1, max(2, rows)))
        n_runs = -(-rows // run)
        values = np.repeat(rng.integers(-1000, 1000, size=n_runs, dtype=np.int64), run)[:rows]
    else:
        values = (rng.normal(0, 1e6, size=rows)).astype(np.int64)
    if rng.random() < 0.25:
        values = np.sort(values)
    validity = np.ones(rows, dtype=bool)
    if rng.random() < 0.5:
        validity = rng.random(rows) >= rng.uniform(0, 0.2)
    return Slice(Dtype.INT64, values, validity)


def random_string_slice(rng: np.random.Generator, rows: int | None = None) -> Slice:
    if rows is None:
        rows = int(10 ** rng.uniform(0, 3.8))
    card = int(rng.integers(1, max(2, min(rows, 500))))
    letters = "abcdefghijklmnopqrstuvwxyz"
    pool = []
    for i in range(card):
        n = int(rng.integers(0, 40))
        pool.append("".join(letters[j] for j in rng.integers(0, 26, size=n)) + str(i))
    pool = np.array(pool, dtype=object)
    values = pool[rng.integers(0, card, size=rows)]
    if rng.random() < 0.25:
        values = values[np.argsort(values)]
    validity = np.ones(rows, dtype=bool)
    if rng.random() < 0.5:
        validity = rng.random(rows) >= rng.uniform(0, 0.2)
    return Slice(Dtype.STRING, values, validity)


@pytest.fixture(scope="session")
def tiny_bundle():
    """Small but fully trained bundle shared across advisor/CLI tests."""
    budget = SliceBudget(rows_per_slice=2048, n_size=40, n_mem=12, n_storage=5)
    examples = []
    for dtype in (Dtype.INT64, Dtype.STRING):
        examples.extend(
            collect_corpus(budget, dtype, master_seed=7, storage_mode="modeled")
        )
    return train_bundle(examples, hyper=ForestHyper(n_trees=15, rng_seed=3))
