"""Slice: one column's values within one data block.

A slice stores its values densely (``values``) next to a boolean validity
array (``validity``); slot ``i`` is null when ``validity[i]`` is False.
Null slots hold a canonical filler (0 for integers, "" for strings) so that
equal slices are byte-identical, which the determinism contracts rely on.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import LeaError


class Dtype(Enum):
    INT64 = "int64"
    STRING = "string"


_INT_FILL = np.int64(0)
_STR_FILL = ""


class Slice:
    __slots__ = ("dtype", "values", "validity")

    def __init__(self, dtype: Dtype, values: np.ndarray, validity: np.ndarray):
        values = np.asarray(values)
        validity = np.asarray(validity, dtype=bool)
        if values.shape != validity.shape or values.ndim != 1:
            raise LeaError("values and validity must be 1-D arrays of equal length")
        if dtype is Dtype.INT64:
            if values.dtype != np.int64:
                values = values.astype(np.int64)
        else:
            if values.dtype != object:
                values = values.astype(object)
        # canonicalize null slots
        if not validity.all():
            values = values.copy()
            values[~validity] = _INT_FILL if dtype is Dtype.INT64 else _STR_FILL
        self.dtype = dtype
        self.values = values
        self.validity = validity

    @property
    def row_count(self) -> int:
        return len(self.values)

    @property
    def null_count(self) -> int:
        return int(self.row_count - self.validity.sum())

    def nonnull(self) -> np.ndarray:
        """Non-null values in stored order."""
        return self.values[self.validity]

    @classmethod
    def from_values(cls, dtype: Dtype, values: Iterable[Optional[object]]) -> "Slice":
        """Build a slice from a sequence that uses None for nulls."""
        items = list(values)
        validity = np.array([v is not None for v in items], dtype=bool)
        if dtype is Dtype.INT64:
            dense = np.array(
                [0 if v is None else int(v) for v in items], dtype=np.int64
            )
        else:
            dense = np.array(
                ["" if v is None else str(v) for v in items], dtype=object
            )
        return cls(dtype, dense, validity)

    def to_values(self) -> list:
        """Values as a Python list with None at null slots."""
        out = self.values.tolist()
        for i in np.flatnonzero(~self.validity):
            out[i] = None
        return out

    def window(self, start: int, length: int) -> "Slice":
        return Slice(
            self.dtype,
            self.values[start : start + length],
            self.validity[start : start + length],
        )

    def __len__(self) -> int:
        return self.row_count

    def __eq__(self, other) -> bool:
        if not isinstance(other, Slice):
            return NotImplemented
        if self.dtype is not other.dtype or self.row_count != other.row_count:
            return False
        if not np.array_equal(self.validity, other.validity):
            return False
        if self.dtype is Dtype.INT64:
            return bool(np.array_equal(self.values, other.values))
        return all(
            a == b
            for a, b, ok in zip(self.values, other.values, self.validity)
            if ok
        )

    def __repr__(self) -> str:
        return f"Slice({self.dtype.value}, rows={self.row_count}, nulls={self.null_count})"


def int_slice(values: Sequence[int], validity: Optional[Sequence[bool]] = None) -> Slice:
    vals = np.asarray(values, dtype=np.int64)
    mask = np.ones(len(vals), dtype=bool) if validity is None else np.asarray(validity, bool)
    return Slice(Dtype.INT64, vals, mask)


def string_slice(values: Sequence[str], validity: Optional[Sequence[bool]] = None) -> Slice:
    vals = np.array(list(values), dtype=object)
    mask = np.ones(len(vals), dtype=bool) if validity is None else np.asarray(validity, bool)
    return Slice(Dtype.STRING, vals, mask)
