"""Bit-packing and varint primitives used by the codecs.

Bit layout: value ``i`` occupies stream bits ``[i*width, (i+1)*width)``,
least-significant bit first within each value and within each byte.
Varints are LEB128: 7 payload bits per byte, high bit set on continuation.
"""

from __future__ import annotations

import numpy as np

from .errors import CorruptPayload

_MAX_VARINT_BYTES = 10  # enough for any uint64


def pack_bits(values: np.ndarray, width: int) -> bytes:
    """Pack uint64 values at a fixed bit width (0 <= width <= 64)."""
    if width == 0 or len(values) == 0:
        return b""
    values = np.ascontiguousarray(values, dtype=np.uint64)
    shifts = np.arange(width, dtype=np.uint64)
    bits = ((values[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def packed_byte_len(count: int, width: int) -> int:
    return (count * width + 7) // 8


def unpack_bits(buf: bytes, count: int, width: int, offset: int = 0) -> np.ndarray:
    """Inverse of pack_bits; reads ``count`` values starting at byte ``offset``."""
    if width == 0 or count == 0:
        return np.zeros(count, dtype=np.uint64)
    need = packed_byte_len(count, width)
    if offset + need > len(buf):
        raise CorruptPayload("bit-packed section truncated", len(buf))
    raw = np.frombuffer(buf, dtype=np.uint8, count=need, offset=offset)
    bits = np.unpackbits(raw, bitorder="little")[: count * width]
    bits = bits.reshape(count, width).astype(np.uint64)
    shifts = np.arange(width, dtype=np.uint64)
    return (bits << shifts).sum(axis=1, dtype=np.uint64)


def min_width(max_value: int) -> int:
    """Smallest width w with 2**w > max_value."""
    return int(max_value).bit_length()


def encode_varint(value: int) -> bytes:
    out = bytearray()
    v = int(value)
    while v >= 0x80:
        out.append((v & 0x7F) | 0x80)
        v >>= 7
    out.append(v)
    return bytes(out)


def decode_varint(buf: bytes, offset: int = 0) -> tuple[int, int]:
    """Returns (value, next_offset)."""
    result = 0
    shift = 0
    pos = offset
    while True:
        if pos >= len(buf):
            raise CorruptPayload("varint truncated", pos)
        b = buf[pos]
        result |= (b & 0x7F) << shift
        pos += 1
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift >= 7 * _MAX_VARINT_BYTES:
            raise CorruptPayload("varint too long", offset)


def encode_varints(values: np.ndarray) -> bytes:
    """Vectorized LEB128 encoding of a uint64 array."""
    values = np.ascontiguousarray(values, dtype=np.uint64)
    n = len(values)
    if n == 0:
        return b""
    nbytes = np.ones(n, dtype=np.int64)
    for k in range(1, _MAX_VARINT_BYTES):
        nbytes += values >= np.uint64(1 << (7 * k))
    out = np.zeros(int(nbytes.sum()), dtype=np.uint8)
    starts = np.cumsum(nbytes) - nbytes
    shifted = values.copy()
    for j in range(int(nbytes.max())):
        mask = nbytes > j
        byte = (shifted[mask] & np.uint64(0x7F)).astype(np.uint8)
        cont = (nbytes[mask] - 1 > j).astype(np.uint8) << 7
        out[starts[mask] + j] = byte | cont
        shifted[mask] >>= np.uint64(7)
    return out.tobytes()


def decode_varints(buf: bytes, count: int, offset: int = 0) -> tuple[np.ndarray, int]:
    """Vectorized decode of ``count`` varints; returns (values, next_offset)."""
    if count == 0:
        return np.zeros(0, dtype=np.uint64), offset
    data = np.frombuffer(buf, dtype=np.uint8, count=len(buf) - offset, offset=offset)
    terminators = np.flatnonzero(data < 0x80)
    if len(terminators) < count:
        raise CorruptPayload("varint sequence truncated", len(buf))
    end = int(terminators[count - 1]) + 1
    starts = np.empty(count, dtype=np.int64)
    starts[0] = 0
    starts[1:] = terminators[: count - 1] + 1
    lengths = terminators[:count] - starts + 1
    if int(lengths.max()) > _MAX_VARINT_BYTES:
        bad = int(np.argmax(lengths > _MAX_VARINT_BYTES))
        raise CorruptPayload("varint too long", offset + int(starts[bad]))
    group = np.repeat(np.arange(count), lengths)
    idx = np.arange(end)
    shifts = ((idx - starts[group]) * 7).astype(np.uint64)
    contrib = (data[:end].astype(np.uint64) & np.uint64(0x7F)) << shifts
    values = np.add.reduceat(contrib, starts)
    return values, offset + end
