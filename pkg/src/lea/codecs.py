"""Lossless slice codecs: plain, delta, dictionary, frame-of-reference,
run-length, and a general LZ compressor (DEFLATE) over the plain bytes.

Wire formats (all integers little-endian, m = non-null value count):

Slice record (the unit stored in container files):
    u8 kind, u8 dtype, u64 row_count, u64 payload_len,
    validity bitmap (ceil(row_count/8) bytes, LSB-first; 1 = present),
    payload.
``encoded_bytes`` of an EncodedSlice is the full record length.

Integer payloads:
    plain       m x i64
    delta       [first i64] [width u8, packed zig-zag diffs]  (sections
                present only when m >= 1 / m >= 2; diffs wrap mod 2^64)
    for         [base=min i64, width u8, packed (v - base)]   (m >= 1)
    rle         [varint #runs][run values i64 x R][run lengths varint x R-1]
                (the final run length is implied by the non-null count)
    dictionary  [varint K][entries i64 x K, first-occurrence order]
                [codes packed at ceil(log2 K) bits]
    lz          DEFLATE(plain payload), default level

String payloads replace fixed i64 items with (varint byte-length + UTF-8
bytes); delta and frame-of-reference do not apply to strings.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import bitpack
from .errors import CorruptPayload, UnsupportedDtype
from .slices import Dtype, Slice


class EncodingKind(Enum):
    PLAIN = "plain"
    DELTA = "delta"
    DICTIONARY = "dictionary"
    FRAME_OF_REFERENCE = "for"
    RUN_LENGTH = "rle"
    GENERAL_LZ = "lz"


INT_KINDS = (
    EncodingKind.PLAIN,
    EncodingKind.DELTA,
    EncodingKind.DICTIONARY,
    EncodingKind.FRAME_OF_REFERENCE,
    EncodingKind.RUN_LENGTH,
    EncodingKind.GENERAL_LZ,
)
STRING_KINDS = (
    EncodingKind.PLAIN,
    EncodingKind.DICTIONARY,
    EncodingKind.RUN_LENGTH,
    EncodingKind.GENERAL_LZ,
)

# Deterministic tie-break for equal predicted/measured costs: cheaper CPU first.
TIE_BREAK_ORDER = (
    EncodingKind.PLAIN,
    EncodingKind.RUN_LENGTH,
    EncodingKind.FRAME_OF_REFERENCE,
    EncodingKind.DELTA,
    EncodingKind.DICTIONARY,
    EncodingKind.GENERAL_LZ,
)
TIE_BREAK_RANK = {k: i for i, k in enumerate(TIE_BREAK_ORDER)}

_KIND_CODES = {k: i for i, k in enumerate(EncodingKind)}
_KINDS_BY_CODE = {i: k for k, i in _KIND_CODES.items()}
_DTYPE_CODES = {Dtype.INT64: 0, Dtype.STRING: 1}
_DTYPES_BY_CODE = {v: k for k, v in _DTYPE_CODES.items()}

RECORD_HEADER_LEN = 18  # kind u8 + dtype u8 + row_count u64 + payload_len u64


def applicable_kinds(dtype: Dtype) -> tuple[EncodingKind, ...]:
    return INT_KINDS if dtype is Dtype.INT64 else STRING_KINDS


def is_applicable(kind: EncodingKind, dtype: Dtype) -> bool:
    return kind in applicable_kinds(dtype)


@dataclass(frozen=True)
class EncodedSlice:
    kind: EncodingKind
    dtype: Dtype
    payload: bytes
    row_count: int
    null_bitmap: bytes  # packed validity bits, LSB-first

    @property
    def encoded_bytes(self) -> int:
        return RECORD_HEADER_LEN + len(self.null_bitmap) + len(self.payload)

    def validity(self) -> np.ndarray:
        return _unpack_bitmap(self.null_bitmap, self.row_count)


def _pack_bitmap(validity: np.ndarray) -> bytes:
    if len(validity) == 0:
        return b""
    return np.packbits(validity.astype(np.uint8), bitorder="little").tobytes()


def _unpack_bitmap(bitmap: bytes, row_count: int) -> np.ndarray:
    if row_count == 0:
        return np.zeros(0, dtype=bool)
    expected = (row_count + 7) // 8
    if len(bitmap) != expected:
        raise CorruptPayload("validity bitmap has wrong length", 0)
    bits = np.unpackbits(np.frombuffer(bitmap, dtype=np.uint8), bitorder="little")
    return bits[:row_count].astype(bool)


def _zigzag(diffs: np.ndarray) -> np.ndarray:
    signed = diffs.view(np.int64)
    return ((signed.view(np.uint64) << np.uint64(1))
            ^ (signed >> np.int64(63)).view(np.uint64))


def _unzigzag(zz: np.ndarray) -> np.ndarray:
    mask = np.uint64(0) - (zz & np.uint64(1))
    return (zz >> np.uint64(1)) ^ mask


def _runs(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run partition of a sequence: (run start indices, run lengths)."""
    m = len(values)
    if m == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    change = np.flatnonzero(values[1:] != values[:-1]) + 1
    starts = np.concatenate(([0], change)).astype(np.int64)
    lengths = np.diff(np.concatenate((starts, [m])))
    return starts, lengths


def _first_occurrence_dictionary(values: np.ndarray):
    """(entries in first-occurrence order, codes) for a non-empty array."""
    uniq, first_idx, inverse = np.unique(
        values, return_index=True, return_inverse=True
    )
    order = np.argsort(first_idx, kind="stable")
    entries = uniq[order]
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    return entries, rank[inverse]


# ---------------------------------------------------------------------------
# integer payloads


def _enc_int_plain(nn: np.ndarray) -> bytes:
    return nn.astype("<i8").tobytes()


def _dec_int_plain(payload: bytes, m: int) -> np.ndarray:
    if len(payload) != 8 * m:
        raise CorruptPayload("plain payload length mismatch", min(len(payload), 8 * m))
    return np.frombuffer(payload, dtype="<i8").astype(np.int64)


def _enc_int_delta(nn: np.ndarray) -> bytes:
    m = len(nn)
    if m == 0:
        return b""
    parts = [struct.pack("<q", int(nn[0]))]
    if m > 1:
        u = nn.view(np.uint64)
        diffs = u[1:] - u[:-1]  # wraps mod 2^64
        zz = _zigzag(diffs)
        width = bitpack.min_width(int(zz.max()))
        parts.append(struct.pack("<B", width))
        parts.append(bitpack.pack_bits(zz, width))
    return b"".join(parts)


def _dec_int_delta(payload: bytes, m: int) -> np.ndarray:
    if m == 0:
        if payload:
            raise CorruptPayload("delta payload should be empty", 0)
        return np.zeros(0, dtype=np.int64)
    if len(payload) < 8:
        raise CorruptPayload("delta payload missing first value", 0)
    first = struct.unpack_from("<q", payload, 0)[0]
    if m == 1:
        if len(payload) != 8:
            raise CorruptPayload("delta payload has trailing bytes", 8)
        return np.array([first], dtype=np.int64)
    if len(payload) < 9:
        raise CorruptPayload("delta payload missing width", 8)
    width = payload[8]
    if width > 64:
        raise CorruptPayload("delta width out of range", 8)
    expected = 9 + bitpack.packed_byte_len(m - 1, width)
    if len(payload) != expected:
        raise CorruptPayload("delta payload length mismatch", min(len(payload), expected))
    zz = bitpack.unpack_bits(payload, m - 1, width, offset=9)
    diffs = _unzigzag(zz)
    out = np.empty(m, dtype=np.uint64)
    out[0] = np.uint64(first % (1 << 64))
    out[1:] = diffs
    return np.cumsum(out, dtype=np.uint64).view(np.int64)


def _enc_int_for(nn: np.ndarray) -> bytes:
    m = len(nn)
    if m == 0:
        return b""
    base = int(nn.min())
    offsets = nn.view(np.uint64) - np.uint64(base % (1 << 64))
    width = bitpack.min_width(int(offsets.max()))
    return (
        struct.pack("<qB", base, width) + bitpack.pack_bits(offsets, width)
    )


def _dec_int_for(payload: bytes, m: int) -> np.ndarray:
    if m == 0:
        if payload:
            raise CorruptPayload("for payload should be empty", 0)
        return np.zeros(0, dtype=np.int64)
    if len(payload) < 9:
        raise CorruptPayload("for payload missing header", 0)
    base, width = struct.unpack_from("<qB", payload, 0)
    if width > 64:
        raise CorruptPayload("for width out of range", 8)
    expected = 9 + bitpack.packed_byte_len(m, width)
    if len(payload) != expected:
        raise CorruptPayload("for payload length mismatch", min(len(payload), expected))
    offsets = bitpack.unpack_bits(payload, m, width, offset=9)
    return (np.uint64(base % (1 << 64)) + offsets).view(np.int64)


def _rle_lengths(payload: bytes, n_runs: int, m: int, pos: int) -> tuple[np.ndarray, int]:
    """Run lengths; the final run's length is implicit (m minus the rest)."""
    stored, pos = bitpack.decode_varints(payload, max(0, n_runs - 1), pos)
    if pos != len(payload):
        raise CorruptPayload("rle payload has trailing bytes", pos)
    if n_runs == 0:
        if m != 0:
            raise CorruptPayload("rle has no runs for a non-empty slice", pos)
        return np.zeros(0, dtype=np.int64), pos
    last = m - int(stored.sum())
    if last < 1 or (len(stored) and int(stored.min()) < 1):
        raise CorruptPayload("rle run lengths inconsistent with row count", pos)
    lengths = np.empty(n_runs, dtype=np.int64)
    lengths[: n_runs - 1] = stored.astype(np.int64)
    lengths[n_runs - 1] = last
    return lengths, pos


def _enc_int_rle(nn: np.ndarray) -> bytes:
    starts, lengths = _runs(nn)
    return b"".join(
        (
            bitpack.encode_varint(len(starts)),
            nn[starts].astype("<i8").tobytes(),
            bitpack.encode_varints(lengths[:-1].astype(np.uint64)),
        )
    )


def _dec_int_rle(payload: bytes, m: int) -> np.ndarray:
    n_runs, pos = bitpack.decode_varint(payload, 0)
    if pos + 8 * n_runs > len(payload):
        raise CorruptPayload("rle run values truncated", pos)
    run_vals = np.frombuffer(payload, dtype="<i8", count=n_runs, offset=pos)
    pos += 8 * n_runs
    lengths, pos = _rle_lengths(payload, n_runs, m, pos)
    return np.repeat(run_vals.astype(np.int64), lengths)


def _dict_width(cardinality: int) -> int:
    return bitpack.min_width(cardinality - 1) if cardinality > 0 else 0


def _enc_int_dict(nn: np.ndarray) -> bytes:
    if len(nn) == 0:
        return bitpack.encode_varint(0)
    entries, codes = _first_occurrence_dictionary(nn)
    width = _dict_width(len(entries))
    return b"".join(
        (
            bitpack.encode_varint(len(entries)),
            entries.astype("<i8").tobytes(),
            bitpack.pack_bits(codes.astype(np.uint64), width),
        )
    )


def _dec_int_dict(payload: bytes, m: int) -> np.ndarray:
    k, pos = bitpack.decode_varint(payload, 0)
    if k == 0:
        if m != 0 or pos != len(payload):
            raise CorruptPayload("empty dictionary for non-empty slice", pos)
        return np.zeros(0, dtype=np.int64)
    if pos + 8 * k > len(payload):
        raise CorruptPayload("dictionary entries truncated", pos)
    entries = np.frombuffer(payload, dtype="<i8", count=k, offset=pos).astype(np.int64)
    pos += 8 * k
    width = _dict_width(k)
    expected = pos + bitpack.packed_byte_len(m, width)
    if len(payload) != expected:
        raise CorruptPayload("dictionary codes length mismatch", min(len(payload), expected))
    codes = bitpack.unpack_bits(payload, m, width, offset=pos).astype(np.int64)
    if m and codes.max() >= k:
        raise CorruptPayload("dictionary code out of range", pos)
    return entries[codes]


# ---------------------------------------------------------------------------
# string payloads


def _enc_str_items(items: list[bytes]) -> bytes:
    out = bytearray()
    varint = bitpack.encode_varint
    for b in items:
        n = len(b)
        if n < 0x80:
            out.append(n)
        else:
            out += varint(n)
        out += b
    return bytes(out)


def _dec_str_items(payload: bytes, count: int, pos: int) -> tuple[list[str], int]:
    out = []
    end = len(payload)
    varint = bitpack.decode_varint
    append = out.append
    for _ in range(count):
        if pos >= end:
            raise CorruptPayload("string length truncated", pos)
        length = payload[pos]
        if length < 0x80:
            pos += 1
        else:
            length, pos = varint(payload, pos)
        if pos + length > end:
            raise CorruptPayload("string bytes truncated", pos)
        try:
            append(payload[pos : pos + length].decode("utf-8"))
        except UnicodeDecodeError:
            raise CorruptPayload("invalid UTF-8 in string payload", pos) from None
        pos += length
    return out, pos


def _utf8_items(nn: np.ndarray) -> list[bytes]:
    return [s.encode("utf-8") for s in nn]


def _enc_str_plain(nn: np.ndarray) -> bytes:
    return _enc_str_items(_utf8_items(nn))


def _dec_str_plain(payload: bytes, m: int) -> np.ndarray:
    items, pos = _dec_str_items(payload, m, 0)
    if pos != len(payload):
        raise CorruptPayload("plain payload has trailing bytes", pos)
    out = np.empty(m, dtype=object)
    out[:] = items
    return out


def _enc_str_rle(nn: np.ndarray) -> bytes:
    starts, lengths = _runs(nn)
    return b"".join(
        (
            bitpack.encode_varint(len(starts)),
            _enc_str_items(_utf8_items(nn[starts])),
            bitpack.encode_varints(lengths[:-1].astype(np.uint64)),
        )
    )


def _dec_str_rle(payload: bytes, m: int) -> np.ndarray:
    n_runs, pos = bitpack.decode_varint(payload, 0)
    run_vals, pos = _dec_str_items(payload, n_runs, pos)
    lengths, pos = _rle_lengths(payload, n_runs, m, pos)
    out = np.empty(m, dtype=object)
    if n_runs:
        out[:] = np.repeat(np.array(run_vals, dtype=object), lengths)
    return out


def _enc_str_dict(nn: np.ndarray) -> bytes:
    if len(nn) == 0:
        return bitpack.encode_varint(0)
    entries, codes = _first_occurrence_dictionary(nn)
    width = _dict_width(len(entries))
    return b"".join(
        (
            bitpack.encode_varint(len(entries)),
            _enc_str_items(_utf8_items(entries)),
            bitpack.pack_bits(codes.astype(np.uint64), width),
        )
    )


def _dec_str_dict(payload: bytes, m: int) -> np.ndarray:
    k, pos = bitpack.decode_varint(payload, 0)
    if k == 0:
        if m != 0 or pos != len(payload):
            raise CorruptPayload("empty dictionary for non-empty slice", pos)
        return np.empty(0, dtype=object)
    entries, pos = _dec_str_items(payload, k, pos)
    width = _dict_width(k)
    expected = pos + bitpack.packed_byte_len(m, width)
    if len(payload) != expected:
        raise CorruptPayload("dictionary codes length mismatch", min(len(payload), expected))
    codes = bitpack.unpack_bits(payload, m, width, offset=pos).astype(np.int64)
    if m and codes.max() >= k:
        raise CorruptPayload("dictionary code out of range", pos)
    out = np.empty(m, dtype=object)
    out[:] = np.array(entries, dtype=object)[codes]
    return out


# ---------------------------------------------------------------------------
# dispatch

_INT_ENCODERS = {
    EncodingKind.PLAIN: _enc_int_plain,
    EncodingKind.DELTA: _enc_int_delta,
    EncodingKind.FRAME_OF_REFERENCE: _enc_int_for,
    EncodingKind.RUN_LENGTH: _enc_int_rle,
    EncodingKind.DICTIONARY: _enc_int_dict,
}
_INT_DECODERS = {
    EncodingKind.PLAIN: _dec_int_plain,
    EncodingKind.DELTA: _dec_int_delta,
    EncodingKind.FRAME_OF_REFERENCE: _dec_int_for,
    EncodingKind.RUN_LENGTH: _dec_int_rle,
    EncodingKind.DICTIONARY: _dec_int_dict,
}
_STR_ENCODERS = {
    EncodingKind.PLAIN: _enc_str_plain,
    EncodingKind.RUN_LENGTH: _enc_str_rle,
    EncodingKind.DICTIONARY: _enc_str_dict,
}
_STR_DECODERS = {
    EncodingKind.PLAIN: _dec_str_plain,
    EncodingKind.RUN_LENGTH: _dec_str_rle,
    EncodingKind.DICTIONARY: _dec_str_dict,
}


def encode_all(
    slice_: Slice, kinds: tuple[EncodingKind, ...] | None = None
) -> dict[EncodingKind, EncodedSlice]:
    """Encode a slice under several kinds at once, sharing the non-null
    pass, the validity bitmap, and the plain serialization that the LZ
    encoding compresses."""
    if kinds is None:
        kinds = applicable_kinds(slice_.dtype)
    for kind in kinds:
        if not is_applicable(kind, slice_.dtype):
            raise UnsupportedDtype(
                f"{kind.value} does not apply to {slice_.dtype.value}"
            )
    nn = slice_.nonnull()
    bitmap = _pack_bitmap(slice_.validity)
    is_int = slice_.dtype is Dtype.INT64
    encoders = _INT_ENCODERS if is_int else _STR_ENCODERS
    plain_enc = _enc_int_plain if is_int else _enc_str_plain
    plain_payload = None

    def plain() -> bytes:
        nonlocal plain_payload
        if plain_payload is None:
            plain_payload = plain_enc(nn)
        return plain_payload

    out = {}
    for kind in kinds:
        if kind is EncodingKind.PLAIN:
            payload = plain()
        elif kind is EncodingKind.GENERAL_LZ:
            payload = zlib.compress(plain())
        else:
            payload = encoders[kind](nn)
        out[kind] = EncodedSlice(
            kind=kind,
            dtype=slice_.dtype,
            payload=payload,
            row_count=slice_.row_count,
            null_bitmap=bitmap,
        )
    return out


def encode(slice_: Slice, kind: EncodingKind) -> EncodedSlice:
    """Encode a slice losslessly; nulls go to the validity bitmap only."""
    return encode_all(slice_, (kind,))[kind]


def decode(encoded: EncodedSlice) -> Slice:
    """Exact reconstruction of the original slice, nulls included."""
    validity = encoded.validity()
    m = int(validity.sum())
    payload = encoded.payload
    kind = encoded.kind
    if encoded.dtype is Dtype.INT64:
        if kind is EncodingKind.GENERAL_LZ:
            payload = _inflate(payload)
            kind = EncodingKind.PLAIN
        nn = _INT_DECODERS[kind](payload, m)
        values = np.zeros(encoded.row_count, dtype=np.int64)
        values[validity] = nn
        return Slice(Dtype.INT64, values, validity)
    if kind is EncodingKind.GENERAL_LZ:
        payload = _inflate(payload)
        kind = EncodingKind.PLAIN
    elif kind not in _STR_DECODERS:
        raise UnsupportedDtype(f"{kind.value} does not apply to strings")
    nn = _STR_DECODERS[kind](payload, m)
    values = np.empty(encoded.row_count, dtype=object)
    values[:] = ""
    values[validity] = nn
    return Slice(Dtype.STRING, values, validity)


def _inflate(payload: bytes) -> bytes:
    d = zlib.decompressobj()
    try:
        out = d.decompress(payload)
        out += d.flush()
    except zlib.error as exc:
        raise CorruptPayload(f"lz stream invalid: {exc}", 0) from None
    if not d.eof or d.unused_data:
        raise CorruptPayload("lz stream truncated or has trailing bytes", len(payload))
    return out


# ---------------------------------------------------------------------------
# slice records (serialization owned by the container format)


def serialize_record(encoded: EncodedSlice) -> bytes:
    header = struct.pack(
        "<BBQQ",
        _KIND_CODES[encoded.kind],
        _DTYPE_CODES[encoded.dtype],
        encoded.row_count,
        len(encoded.payload),
    )
    return header + encoded.null_bitmap + encoded.payload


def parse_record(buf: bytes, offset: int = 0) -> tuple[EncodedSlice, int]:
    if offset + RECORD_HEADER_LEN > len(buf):
        raise CorruptPayload("record header truncated", offset)
    kind_code, dtype_code, row_count, payload_len = struct.unpack_from(
        "<BBQQ", buf, offset
    )
    if kind_code not in _KINDS_BY_CODE:
        raise CorruptPayload("unknown encoding kind", offset)
    if dtype_code not in _DTYPES_BY_CODE:
        raise CorruptPayload("unknown dtype", offset + 1)
    bitmap_len = (row_count + 7) // 8
    end = offset + RECORD_HEADER_LEN + bitmap_len + payload_len
    if end > len(buf):
        raise CorruptPayload("record body truncated", len(buf))
    bitmap_start = offset + RECORD_HEADER_LEN
    encoded = EncodedSlice(
        kind=_KINDS_BY_CODE[kind_code],
        dtype=_DTYPES_BY_CODE[dtype_code],
        payload=bytes(buf[bitmap_start + bitmap_len : end]),
        row_count=row_count,
        null_bitmap=bytes(buf[bitmap_start : bitmap_start + bitmap_len]),
    )
    return encoded, end


def plain_encoded_size(slice_: Slice) -> int:
    """Exact record size of the plain encoding, computed without encoding."""
    n = slice_.row_count
    base = RECORD_HEADER_LEN + (n + 7) // 8
    if slice_.dtype is Dtype.INT64:
        return base + 8 * (n - slice_.null_count)
    total = 0
    for s in slice_.nonnull():
        b = len(s) if s.isascii() else len(s.encode("utf-8"))
        total += (1 if b < 0x80 else len(bitpack.encode_varint(b))) + b
    return base + total
