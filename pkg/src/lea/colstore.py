"""Minimal single-file columnar container.

Layout (all integers little-endian):

    0   magic "LEAC"
    4   u32 format version (1)
    8   u64 directory offset (patched after payloads are written)
    16  u64 total rows
    24  u64 rows per slice
    32  u32 column count
    36  schema: per column u8 dtype code, u16 name length, name UTF-8
    ... payload region: slice records in column-major order (see codecs)
    ... directory: per column, per slice
        u64 offset, u64 byte length, u8 encoding kind, u64 row count

Every column has ceil(total_rows / rows_per_slice) slices; the last slice
may be short. Files are immutable once written.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .codecs import (
    EncodedSlice,
    EncodingKind,
    decode,
    encode,
    parse_record,
    serialize_record,
)
from .errors import InvalidTableFile, LeaError, ParseError, SchemaMismatch
from .scan import (
    DeviceProfile,
    ScanMeasurement,
    StorageMode,
    scan_in_memory,
    scan_record_from_storage,
)
from .slices import Dtype, Slice

MAGIC = b"LEAC"
FORMAT_VERSION = 1
_HEADER_FIXED = struct.Struct("<4sIQQQI")
_DIR_ENTRY = struct.Struct("<QQBQ")

_KIND_CODES = {k: i for i, k in enumerate(EncodingKind)}
_KINDS_BY_CODE = {i: k for k, i in _KIND_CODES.items()}
_DTYPE_CODES = {Dtype.INT64: 0, Dtype.STRING: 1}
_DTYPES_BY_CODE = {v: k for k, v in _DTYPE_CODES.items()}

Schema = list[tuple[str, Dtype]]


@dataclass(frozen=True)
class DirectoryEntry:
    offset: int
    length: int
    kind: EncodingKind
    row_count: int


@dataclass(frozen=True)
class SliceLocator:
    path: str
    column: int
    slice_index: int


@dataclass
class TableColumn:
    name: str
    dtype: Dtype
    slices: list[Slice]


@dataclass
class TableData:
    columns: list[TableColumn]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> TableColumn:
        for c in self.columns:
            if c.name == name:
                return c
        raise LeaError(f"no column named {name!r}")


def slice_row_counts(total_rows: int, rows_per_slice: int) -> list[int]:
    n_slices = -(-total_rows // rows_per_slice) if total_rows else 0
    return [
        min(rows_per_slice, total_rows - i * rows_per_slice) for i in range(n_slices)
    ]


class TableFile:
    """Reader for the container format; parses the header and directory
    eagerly and reads slice records on demand."""

    def __init__(self, path: str):
        self.path = path
        with open(path, "rb") as fh:
            data = fh.read()
        self._size = len(data)
        if len(data) < _HEADER_FIXED.size:
            raise InvalidTableFile("file too small for header")
        magic, version, dir_offset, total_rows, rows_per_slice, n_columns = (
            _HEADER_FIXED.unpack_from(data, 0)
        )
        if magic != MAGIC:
            raise InvalidTableFile("bad magic")
        if version != FORMAT_VERSION:
            raise InvalidTableFile(f"unsupported format version {version}")
        self.total_rows = total_rows
        self.rows_per_slice = rows_per_slice
        pos = _HEADER_FIXED.size
        schema: Schema = []
        for _ in range(n_columns):
            if pos + 3 > len(data):
                raise InvalidTableFile("schema truncated")
            dtype_code, name_len = struct.unpack_from("<BH", data, pos)
            pos += 3
            if dtype_code not in _DTYPES_BY_CODE:
                raise InvalidTableFile("unknown dtype in schema")
            name = data[pos : pos + name_len].decode("utf-8")
            pos += name_len
            schema.append((name, _DTYPES_BY_CODE[dtype_code]))
        self.schema = schema
        self.payload_start = pos
        self.n_slices = len(slice_row_counts(total_rows, rows_per_slice))
        entry_count = n_columns * self.n_slices
        if dir_offset + entry_count * _DIR_ENTRY.size > len(data):
            raise InvalidTableFile("directory out of bounds")
        self.directory: list[list[DirectoryEntry]] = []
        pos = dir_offset
        for _ in range(n_columns):
            col_entries = []
            for _ in range(self.n_slices):
                off, length, kind_code, row_count = _DIR_ENTRY.unpack_from(data, pos)
                pos += _DIR_ENTRY.size
                if kind_code not in _KINDS_BY_CODE:
                    raise InvalidTableFile("unknown encoding kind in directory")
                col_entries.append(
                    DirectoryEntry(off, length, _KINDS_BY_CODE[kind_code], row_count)
                )
            self.directory.append(col_entries)
        self.directory_offset = dir_offset

    @property
    def n_columns(self) -> int:
        return len(self.schema)

    def column_index(self, column: Union[int, str]) -> int:
        if isinstance(column, int):
            if not 0 <= column < self.n_columns:
                raise LeaError(f"column index {column} out of range")
            return column
        for i, (name, _) in enumerate(self.schema):
            if name == column:
                return i
        raise LeaError(f"no column named {column!r}")

    def entry(self, column: Union[int, str], slice_index: int) -> DirectoryEntry:
        ci = self.column_index(column)
        if not 0 <= slice_index < self.n_slices:
            raise LeaError(f"slice index {slice_index} out of range")
        return self.directory[ci][slice_index]

    def read_record(self, column: Union[int, str], slice_index: int) -> EncodedSlice:
        e = self.entry(column, slice_index)
        with open(self.path, "rb") as fh:
            fh.seek(e.offset)
            buf = fh.read(e.length)
        encoded, consumed = parse_record(buf)
        if consumed != e.length:
            raise InvalidTableFile("record length disagrees with directory")
        return encoded

    def read_slice(self, column: Union[int, str], slice_index: int) -> Slice:
        return decode(self.read_record(column, slice_index))

    def locator(self, column: Union[int, str], slice_index: int) -> SliceLocator:
        return SliceLocator(self.path, self.column_index(column), slice_index)

    def validate(self, deep: bool = True) -> None:
        """Structural validation: directory bounds, non-overlapping entries,
        expected row counts, and (deep) a decode of every slice."""
        expected_rows = slice_row_counts(self.total_rows, self.rows_per_slice)
        spans = []
        for ci in range(self.n_columns):
            for si, e in enumerate(self.directory[ci]):
                if e.offset < self.payload_start or e.offset + e.length > self._size:
                    raise InvalidTableFile(f"entry ({ci},{si}) out of bounds")
                if e.row_count != expected_rows[si]:
                    raise InvalidTableFile(f"entry ({ci},{si}) has wrong row count")
                spans.append((e.offset, e.offset + e.length))
        spans.sort()
        for (s0, e0), (s1, _) in zip(spans, spans[1:]):
            if s1 < e0:
                raise InvalidTableFile("directory entries overlap")
        if deep:
            for ci in range(self.n_columns):
                dtype = self.schema[ci][1]
                for si in range(self.n_slices):
                    encoded = self.read_record(ci, si)
                    if encoded.dtype is not dtype or encoded.row_count != expected_rows[si]:
                        raise InvalidTableFile(f"record ({ci},{si}) header mismatch")
                    decode(encoded)


def resolve_locator(locator: SliceLocator) -> tuple[int, int]:
    table = TableFile(locator.path)
    e = table.entry(locator.column, locator.slice_index)
    return e.offset, e.length


def write_table(
    path: str,
    schema: Schema,
    rows_per_slice: int,
    encoded_columns: list[list[EncodedSlice]],
    total_rows: int,
) -> TableFile:
    if not schema or len(schema) != len(encoded_columns):
        raise LeaError("schema and encoded columns must align")
    expected_rows = slice_row_counts(total_rows, rows_per_slice)
    for (name, dtype), records in zip(schema, encoded_columns):
        if len(records) != len(expected_rows):
            raise LeaError(f"column {name!r} has {len(records)} slices, expected {len(expected_rows)}")
        for si, rec in enumerate(records):
            if rec.dtype is not dtype:
                raise LeaError(f"column {name!r} slice {si} dtype mismatch")
            if rec.row_count != expected_rows[si]:
                raise LeaError(f"column {name!r} slice {si} row count mismatch")
    with open(path, "wb") as fh:
        fh.write(_HEADER_FIXED.pack(MAGIC, FORMAT_VERSION, 0, total_rows, rows_per_slice, len(schema)))
        for name, dtype in schema:
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<BH", _DTYPE_CODES[dtype], len(name_b)))
            fh.write(name_b)
        directory = []
        for records in encoded_columns:
            col_entries = []
            for rec in records:
                blob = serialize_record(rec)
                offset = fh.tell()
                fh.write(blob)
                col_entries.append((offset, len(blob), _KIND_CODES[rec.kind], rec.row_count))
            directory.append(col_entries)
        dir_offset = fh.tell()
        for col_entries in directory:
            for entry in col_entries:
                fh.write(_DIR_ENTRY.pack(*entry))
        fh.seek(8)
        fh.write(struct.pack("<Q", dir_offset))
    return TableFile(path)


def write_table_data(path: str, data: TableData, rows_per_slice: int) -> TableFile:
    """Plain-encode in-memory table data into a container file."""
    if not data.columns:
        raise LeaError("table needs at least one column")
    total_rows = sum(s.row_count for s in data.columns[0].slices)
    schema = [(c.name, c.dtype) for c in data.columns]
    encoded = [[encode(s, EncodingKind.PLAIN) for s in c.slices] for c in data.columns]
    return write_table(path, schema, rows_per_slice, encoded, total_rows)


def load_table_data(table: TableFile) -> TableData:
    columns = []
    for ci, (name, dtype) in enumerate(table.schema):
        slices = [table.read_slice(ci, si) for si in range(table.n_slices)]
        columns.append(TableColumn(name=name, dtype=dtype, slices=slices))
    return TableData(columns)


def table_data_from_arrays(
    names: Sequence[str],
    dtypes: Sequence[Dtype],
    arrays: Sequence[Sequence],
    rows_per_slice: int,
) -> TableData:
    """Partition whole-column value sequences (None = null) into slices."""
    if not names or len(names) != len(dtypes) or len(names) != len(arrays):
        raise LeaError("names, dtypes and arrays must align")
    total = len(arrays[0])
    for a in arrays:
        if len(a) != total:
            raise LeaError("all columns must have the same length")
    counts = slice_row_counts(total, rows_per_slice)
    columns = []
    for name, dtype, arr in zip(names, dtypes, arrays):
        slices = []
        pos = 0
        for c in counts:
            slices.append(Slice.from_values(dtype, arr[pos : pos + c]))
            pos += c
        columns.append(TableColumn(name=name, dtype=dtype, slices=slices))
    return TableData(columns)


# ---------------------------------------------------------------------------
# CSV ingestion / export


def parse_schema(text: str) -> Schema:
    """Schema grammar: "name:int,other:string" (int|string per column)."""
    out: Schema = []
    for part in text.split(","):
        if ":" not in part:
            raise LeaError(f"bad schema entry {part!r}")
        name, kind = part.rsplit(":", 1)
        kind = kind.strip().lower()
        if kind in ("int", "int64"):
            dtype = Dtype.INT64
        elif kind in ("str", "string"):
            dtype = Dtype.STRING
        else:
            raise LeaError(f"unknown dtype {kind!r} in schema")
        out.append((name.strip(), dtype))
    return out


def ingest_csv(
    csv_path: str, schema: Schema, rows_per_slice: int, out_path: str
) -> TableFile:
    """Load a CSV (header row, empty field = null) into a plain-encoded
    container. Values are partitioned into slices in input order."""
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch("CSV file has no header row") from None
        if header != [name for name, _ in schema]:
            raise SchemaMismatch(
                f"CSV header {header!r} does not match schema {[n for n, _ in schema]!r}"
            )
        columns: list[list] = [[] for _ in schema]
        for row_i, row in enumerate(reader, start=2):  # 1-based incl. header
            if len(row) != len(schema):
                raise ParseError("wrong field count", row_i, len(row) + 1)
            for col_i, field in enumerate(row):
                if field == "":
                    columns[col_i].append(None)
                elif schema[col_i][1] is Dtype.INT64:
                    try:
                        columns[col_i].append(int(field))
                    except ValueError:
                        raise ParseError(
                            f"invalid integer {field!r}", row_i, col_i + 1
                        ) from None
                else:
                    columns[col_i].append(field)
    data = table_data_from_arrays(
        [n for n, _ in schema], [d for _, d in schema], columns, rows_per_slice
    )
    return write_table_data(out_path, data, rows_per_slice)


def export_csv(table: TableFile, out_path: str) -> None:
    """Inverse of ingest_csv modulo canonical integer formatting."""
    data = load_table_data(table)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([name for name, _ in table.schema])
        iters = [
            [v for s in c.slices for v in s.to_values()] for c in data.columns
        ]
        for row in zip(*iters):
            writer.writerow(["" if v is None else str(v) for v in row])


# ---------------------------------------------------------------------------
# plan application and column scans


def apply_plan(table: TableFile, plan, out_path: str) -> TableFile:
    """Re-encode every slice per the plan; logical contents are unchanged."""
    encoded_columns = []
    for ci, (name, _dtype) in enumerate(table.schema):
        if name not in plan.assignments:
            raise LeaError(f"plan does not cover column {name!r}")
        kinds = plan.kinds_for(name, table.n_slices)
        records = []
        for si in range(table.n_slices):
            slice_ = table.read_slice(ci, si)
            records.append(encode(slice_, kinds[si]))
        encoded_columns.append(records)
    return write_table(
        out_path, table.schema, table.rows_per_slice, encoded_columns, table.total_rows
    )


class ColumnScanMode(Enum):
    IN_MEMORY = "memory"
    FROM_STORAGE_MEASURED = "storage-measured"
    FROM_STORAGE_MODELED = "storage-modeled"


_I64_MAX = (1 << 63) - 1
_U64_MOD = 1 << 64


def _wrap_sum(values) -> int:
    total = sum(v % _U64_MOD for v in values) % _U64_MOD
    return total - _U64_MOD if total > _I64_MAX else total


def scan_column(
    table: TableFile,
    column: Union[int, str],
    mode: ColumnScanMode,
    device: Optional[DeviceProfile] = None,
) -> ScanMeasurement:
    """Scan all slices of a column in order; aggregates fold across slices
    and elapsed times sum per the mode's timing contract."""
    ci = table.column_index(column)
    aggregates = []
    elapsed = mem_total = io_total = bytes_read = 0
    for si in range(table.n_slices):
        if mode is ColumnScanMode.IN_MEMORY:
            m = scan_in_memory(table.read_record(ci, si))
        else:
            e = table.entry(ci, si)
            smode = (
                StorageMode.MEASURED
                if mode is ColumnScanMode.FROM_STORAGE_MEASURED
                else StorageMode.MODELED
            )
            m = scan_record_from_storage(
                table.path, e.offset, e.length, smode, device=device
            )
        aggregates.append(m.aggregate)
        elapsed += m.elapsed_ns
        mem_total += m.mem_ns or 0
        io_total += m.io_ns or 0
        bytes_read += m.bytes_read
    return ScanMeasurement(
        aggregate=_wrap_sum(aggregates),
        elapsed_ns=elapsed,
        bytes_read=bytes_read,
        mem_ns=mem_total,
        io_ns=io_total,
    )
