import struct

import numpy as np
import pytest

from conftest import random_int_slice, random_string_slice
from lea.codecs import (
    RECORD_HEADER_LEN,
    EncodedSlice,
    EncodingKind,
    applicable_kinds,
    decode,
    encode,
    encode_all,
    parse_record,
    plain_encoded_size,
    serialize_record,
)
from lea.errors import CorruptPayload, UnsupportedDtype
from lea.slices import Dtype, Slice, int_slice, string_slice

INT_KINDS = applicable_kinds(Dtype.INT64)
STR_KINDS = applicable_kinds(Dtype.STRING)


def test_applicability():
    assert len(INT_KINDS) == 6
    assert len(STR_KINDS) == 4
    assert EncodingKind.DELTA not in STR_KINDS
    assert EncodingKind.FRAME_OF_REFERENCE not in STR_KINDS


def test_unsupported_dtype_raises():
    s = string_slice(["x"])
    with pytest.raises(UnsupportedDtype):
        encode(s, EncodingKind.DELTA)
    with pytest.raises(UnsupportedDtype):
        encode(s, EncodingKind.FRAME_OF_REFERENCE)


def test_rle_constant_run_partition():
    s = int_slice([7, 7, 7, 7])
    e = encode(s, EncodingKind.RUN_LENGTH)
    # one run [(7, 4)]: count varint(1), value 7 as i64, final length implicit
    assert e.payload == b"\x01" + struct.pack("<q", 7)
    assert decode(e) == s


def test_rle_two_runs_layout():
    s = int_slice([7, 7, 7, 9])
    e = encode(s, EncodingKind.RUN_LENGTH)
    # runs [(7, 3), (9, 1)]: only the first run length is stored
    assert e.payload == b"\x02" + struct.pack("<qq", 7, 9) + b"\x03"
    assert decode(e) == s


def test_for_hand_packed_bytes():
    # offsets [0,1,3] from base 1000 packed at width 2 -> single byte 0x34
    s = int_slice([1000, 1001, 1003])
    e = encode(s, EncodingKind.FRAME_OF_REFERENCE)
    assert e.payload == struct.pack("<qB", 1000, 2) + bytes([0x34])
    assert decode(e) == s


def test_delta_constant_slice_zero_diffs():
    s = int_slice([42] * 100)
    e = encode(s, EncodingKind.DELTA)
    # first value verbatim, then width 0: no packed bytes at all
    assert e.payload == struct.pack("<q", 42) + b"\x00"
    assert decode(e) == s


def test_dictionary_first_occurrence_order():
    s = string_slice(["a", "b", "a"])
    e = encode(s, EncodingKind.DICTIONARY)
    # K=2, entries "a","b" in first-occurrence order, codes [0,1,0] at 1 bit
    assert e.payload == b"\x02" + b"\x01a" + b"\x01b" + bytes([0b010])
    assert decode(e) == s


def test_dictionary_code_count_is_exact_cardinality():
    rng = np.random.default_rng(0)
    values = rng.integers(0, 37, size=4096, dtype=np.int64)
    s = Slice(Dtype.INT64, values, np.ones(4096, dtype=bool))
    e = encode(s, EncodingKind.DICTIONARY)
    k, _ = divmod(e.payload[0], 1)  # single-byte varint here
    assert k == len(np.unique(values))


def test_round_trip_spec_examples():
    cases = [
        (Dtype.INT64, [7, 7, 7, 7]),
        (Dtype.INT64, [1000, 1001, 1003]),
        (Dtype.INT64, [5] * 200),
        (Dtype.STRING, ["a", "b", "a"]),
    ]
    for dtype, vals in cases:
        s = Slice.from_values(dtype, vals)
        for kind in applicable_kinds(dtype):
            assert decode(encode(s, kind)) == s


@pytest.mark.parametrize("dtype", [Dtype.INT64, Dtype.STRING])
def test_round_trip_randomized(dtype):
    rng = np.random.default_rng(123 if dtype is Dtype.INT64 else 321)
    gen = random_int_slice if dtype is Dtype.INT64 else random_string_slice
    for trial in range(60):
        s = gen(rng)
        for kind in applicable_kinds(dtype):
            e = encode(s, kind)
            assert e.encoded_bytes > 0
            assert decode(e) == s, (trial, kind)


def test_round_trip_length_zero_and_edges():
    edge_slices = [
        Slice.from_values(Dtype.INT64, []),
        Slice.from_values(Dtype.INT64, [None]),
        Slice.from_values(Dtype.INT64, [None, None, None]),
        Slice.from_values(Dtype.INT64, [2**63 - 1, -(2**63), 0]),
        Slice.from_values(Dtype.STRING, []),
        Slice.from_values(Dtype.STRING, [None, None]),
        Slice.from_values(Dtype.STRING, ["", "", "x"]),
        Slice.from_values(Dtype.STRING, ["éß", "中文"]),
    ]
    for s in edge_slices:
        for kind in applicable_kinds(s.dtype):
            assert decode(encode(s, kind)) == s


def test_encoded_bytes_equals_record_length():
    rng = np.random.default_rng(5)
    for gen in (random_int_slice, random_string_slice):
        s = gen(rng, rows=257)
        for kind in applicable_kinds(s.dtype):
            e = encode(s, kind)
            assert e.encoded_bytes == len(serialize_record(e))
            assert e.encoded_bytes == RECORD_HEADER_LEN + len(e.null_bitmap) + len(e.payload)


def test_truncated_payload_raises_corrupt():
    s = int_slice(list(range(300)))
    for kind in INT_KINDS:
        e = encode(s, kind)
        bad = EncodedSlice(
            kind=e.kind,
            dtype=e.dtype,
            payload=e.payload[:-1],
            row_count=e.row_count,
            null_bitmap=e.null_bitmap,
        )
        with pytest.raises(CorruptPayload) as err:
            decode(bad)
        assert err.value.offset >= 0


def test_trailing_garbage_raises_corrupt():
    s = string_slice(["aa", "bb", "aa", "cc"])
    for kind in STR_KINDS:
        e = encode(s, kind)
        bad = EncodedSlice(
            kind=e.kind,
            dtype=e.dtype,
            payload=e.payload + b"\x00",
            row_count=e.row_count,
            null_bitmap=e.null_bitmap,
        )
        with pytest.raises(CorruptPayload):
            decode(bad)


def test_truncated_string_payloads_raise_corrupt():
    s = string_slice(["alpha", "beta", "alpha", "gamma"] * 16)
    for kind in STR_KINDS:
        e = encode(s, kind)
        bad = EncodedSlice(
            kind=e.kind,
            dtype=e.dtype,
            payload=e.payload[:-1],
            row_count=e.row_count,
            null_bitmap=e.null_bitmap,
        )
        with pytest.raises(CorruptPayload):
            decode(bad)


def test_dictionary_code_out_of_range():
    # cardinality 3 packs codes at 2 bits, so code 3 is representable but bad
    s = int_slice([1, 2, 3, 1])
    e = encode(s, EncodingKind.DICTIONARY)
    payload = bytearray(e.payload)
    payload[-1] = 0xFF
    bad = EncodedSlice(e.kind, e.dtype, bytes(payload), e.row_count, e.null_bitmap)
    with pytest.raises(CorruptPayload):
        decode(bad)


def test_rle_dominates_plain_on_constants():
    for n in (64, 100, 1000):
        s = int_slice([9] * n)
        assert (
            encode(s, EncodingKind.RUN_LENGTH).encoded_bytes
            < encode(s, EncodingKind.PLAIN).encoded_bytes
        )
    s = string_slice(["zz"] * 64)
    assert (
        encode(s, EncodingKind.RUN_LENGTH).encoded_bytes
        < encode(s, EncodingKind.PLAIN).encoded_bytes
    )


def test_for_width_bound_property():
    rng = np.random.default_rng(17)
    for _ in range(40):
        s = random_int_slice(rng, rows=int(rng.integers(1, 2000)))
        nn = s.nonnull()
        if len(nn) == 0:
            continue
        e = encode(s, EncodingKind.FRAME_OF_REFERENCE)
        width = e.payload[8]
        value_range = int(nn.max()) - int(nn.min())
        assert (1 << width) >= value_range + 1
        assert width == 0 or (1 << (width - 1)) <= value_range


def test_plain_encoded_size_formula():
    rng = np.random.default_rng(29)
    for gen in (random_int_slice, random_string_slice):
        for _ in range(10):
            s = gen(rng, rows=int(rng.integers(0, 400)))
            assert plain_encoded_size(s) == encode(s, EncodingKind.PLAIN).encoded_bytes


def test_encode_all_matches_single_encodes():
    rng = np.random.default_rng(31)
    for gen in (random_int_slice, random_string_slice):
        s = gen(rng, rows=333)
        grouped = encode_all(s)
        for kind in applicable_kinds(s.dtype):
            assert grouped[kind].payload == encode(s, kind).payload


def test_record_round_trip_and_corruption():
    s = Slice.from_values(Dtype.INT64, [1, None, 3])
    e = encode(s, EncodingKind.PLAIN)
    record = serialize_record(e)
    back, consumed = parse_record(record)
    assert consumed == len(record)
    assert decode(back) == s
    with pytest.raises(CorruptPayload):
        parse_record(record[:-1])
    with pytest.raises(CorruptPayload):
        parse_record(b"\xff" + record[1:])  # unknown kind code
