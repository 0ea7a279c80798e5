"""Page compression codecs over unsigned 32-bit integers.

Raw, VByte, PFor, FastPFor128 and BinaryPacking128 are the
light-weight family; the Brotli slot is the heavy-weight
dictionary+entropy codec. This Python build has no Brotli binding
available, so the slot is filled by LZMA (legacy .lzma container,
LZMA1 filter, preset 6), a general-purpose compressor of comparable
ratio; the slot keeps its wire id and catalog name, and benchmark
output names the actual algorithm (HEAVY_ALGORITHM).

All formats are little-endian and versioned by the column file
header's format-version byte. Wire ids are stable: Raw=0, VByte=1,
PFor=2, FastPFor128=3, BinaryPacking128=4, Brotli=5.

Every codec is a pure function of its input; the only process-global
state is the simd switch choosing between the batch (numpy) and
scalar decoders for the two 128-lane codecs, which both decode the
identical byte format.
"""

from __future__ import annotations

import enum
import lzma

import numpy as np

from . import pfor
from .pfor import BlockDecodeError

HEAVY_ALGORITHM = "lzma"

_LZMA_FILTERS = [{"id": lzma.FILTER_LZMA1, "preset": 6}]


class CodecError(Exception):
    """Compression failed or the input violates the codec contract."""


class DecodeError(Exception):
    """Malformed or truncated compressed input."""

    def __init__(self, codec: "CodecId", offset: int, message: str):
        super().__init__("%s: %s (byte offset %d)" % (codec.name, message, offset))
        self.codec = codec
        self.offset = offset


class CodecId(enum.IntEnum):
    """Codec identifiers; the enum value is the one-byte wire encoding."""

    Raw = 0
    VByte = 1
    PFor = 2
    FastPFor128 = 3
    BinaryPacking128 = 4
    Brotli = 5

    @classmethod
    def from_wire(cls, byte: int) -> "CodecId":
        try:
            return cls(byte)
        except ValueError:
            raise ValueError("unknown codec wire byte %d" % byte) from None


# CLI and catalog names, lowercase.
CODEC_NAMES = {
    "raw": CodecId.Raw,
    "vbyte": CodecId.VByte,
    "pfor": CodecId.PFor,
    "fastpfor128": CodecId.FastPFor128,
    "binpack128": CodecId.BinaryPacking128,
    "brotli": CodecId.Brotli,
}
_NAME_OF = {v: k for k, v in CODEC_NAMES.items()}


def codec_from_name(name: str) -> CodecId:
    try:
        return CODEC_NAMES[name]
    except KeyError:
        raise ValueError(
            "unknown codec %r (valid: %s)" % (name, ", ".join(sorted(CODEC_NAMES)))
        ) from None


def codec_name(codec: CodecId) -> str:
    return _NAME_OF[codec]


def algorithm_name(codec: CodecId) -> str:
    """Actual algorithm behind a codec id; the heavy slot names its backend."""
    return HEAVY_ALGORITHM if codec == CodecId.Brotli else _NAME_OF[codec]


LIGHT_CODECS = (CodecId.VByte, CodecId.PFor, CodecId.FastPFor128, CodecId.BinaryPacking128)

_simd_enabled = True


def set_simd_enabled(enabled: bool) -> None:
    """Select batch (True) or scalar (False) decoders for the 128-lane codecs."""
    global _simd_enabled
    _simd_enabled = bool(enabled)


def simd_enabled() -> bool:
    return _simd_enabled


def _as_u32(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1 and arr.size != 0:
        raise CodecError("values must be one-dimensional")
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint32)
    if not np.issubdtype(arr.dtype, np.integer):
        raise CodecError("values must be integers, got dtype %s" % arr.dtype)
    info_min, info_max = int(arr.min()), int(arr.max())
    if info_min < 0 or info_max > 0xFFFFFFFF:
        raise CodecError("values out of u32 range: [%d, %d]" % (info_min, info_max))
    return arr.astype(np.uint32)


# --- VByte ------------------------------------------------------------------
# Little-endian base-128: each byte carries 7 data bits (low bits
# first); the high bit is the continuation flag (1 = more bytes).


def _vbyte_encode(values: np.ndarray) -> bytes:
    n = len(values)
    if n == 0:
        return b""
    v = values.astype(np.uint64)
    lengths = (
        1
        + (v >= 1 << 7).astype(np.int64)
        + (v >= 1 << 14).astype(np.int64)
        + (v >= 1 << 21).astype(np.int64)
        + (v >= 1 << 28).astype(np.int64)
    )
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    out = np.zeros(int(lengths.sum()), dtype=np.uint8)
    for k in range(5):
        sel = lengths > k
        byte = (v[sel] >> np.uint64(7 * k)) & np.uint64(0x7F)
        byte |= np.where(lengths[sel] > k + 1, np.uint64(0x80), np.uint64(0))
        out[starts[sel] + k] = byte.astype(np.uint8)
    return out.tobytes()


def _vbyte_decode(data: bytes, count: int) -> np.ndarray:
    buf = np.frombuffer(data, dtype=np.uint8)
    ends = np.nonzero(buf < 0x80)[0]
    if count == 0:
        if len(data):
            raise DecodeError(CodecId.VByte, 0, "%d trailing bytes" % len(data))
        return np.zeros(0, dtype=np.uint32)
    if len(ends) < count:
        raise DecodeError(CodecId.VByte, len(data), "truncated: %d of %d values" % (len(ends), count))
    if len(ends) > count or int(ends[count - 1]) + 1 != len(data):
        raise DecodeError(CodecId.VByte, int(ends[count - 1]) + 1, "trailing bytes")
    starts = np.concatenate(([0], ends[:-1] + 1))
    lengths = ends - starts + 1
    too_long = np.nonzero(lengths > 5)[0]
    if len(too_long):
        raise DecodeError(CodecId.VByte, int(starts[too_long[0]]), "value longer than 5 bytes")
    within = np.arange(len(buf), dtype=np.int64) - np.repeat(starts, lengths)
    shifted = (buf & 0x7F).astype(np.uint64) << (7 * within).astype(np.uint64)
    values = np.bitwise_or.reduceat(shifted, starts)
    too_big = np.nonzero(values > 0xFFFFFFFF)[0]
    if len(too_big):
        raise DecodeError(CodecId.VByte, int(starts[too_big[0]]), "value exceeds u32")
    return values.astype(np.uint32)


# --- Brotli slot (LZMA) -----------------------------------------------------


def _heavy_encode(values: np.ndarray) -> bytes:
    if len(values) == 0:
        return b""
    raw = values.astype("<u4").tobytes()
    try:
        return lzma.compress(raw, format=lzma.FORMAT_ALONE, filters=_LZMA_FILTERS)
    except lzma.LZMAError as exc:
        raise CodecError("heavy-weight compressor failed: %s" % exc) from exc


def _heavy_decode(data: bytes, count: int) -> np.ndarray:
    if count == 0:
        if len(data):
            raise DecodeError(CodecId.Brotli, 0, "%d trailing bytes" % len(data))
        return np.zeros(0, dtype=np.uint32)
    try:
        raw = lzma.decompress(data, format=lzma.FORMAT_ALONE)
    except lzma.LZMAError as exc:
        raise DecodeError(CodecId.Brotli, 0, "corrupt stream: %s" % exc) from exc
    if len(raw) != 4 * count:
        raise DecodeError(
            CodecId.Brotli, len(data), "decoded %d bytes, expected %d" % (len(raw), 4 * count)
        )
    return np.frombuffer(raw, dtype="<u4").astype(np.uint32)


# --- dispatch ---------------------------------------------------------------


def compress_values(codec: CodecId, values) -> bytes:
    """Encode a page body. Deterministic; inverse of decompress_values."""
    arr = _as_u32(values)
    if codec == CodecId.Raw:
        return arr.astype("<u4").tobytes()
    if codec == CodecId.VByte:
        return _vbyte_encode(arr)
    if codec == CodecId.PFor:
        return pfor.encode_pfor(arr)
    if codec == CodecId.FastPFor128:
        return pfor.encode_fastpfor(arr)
    if codec == CodecId.BinaryPacking128:
        return pfor.encode_binary_packing(arr)
    if codec == CodecId.Brotli:
        return _heavy_encode(arr)
    raise CodecError("unknown codec %r" % (codec,))


def decompress_values(codec: CodecId, data: bytes, value_count: int) -> np.ndarray:
    """Decode a page body back to exactly value_count u32 values."""
    if value_count < 0:
        raise DecodeError(codec, 0, "negative value count")
    try:
        if codec == CodecId.Raw:
            if len(data) != 4 * value_count:
                raise DecodeError(
                    codec, min(len(data), 4 * value_count), "length %d != 4 x %d" % (len(data), value_count)
                )
            return np.frombuffer(data, dtype="<u4").astype(np.uint32)
        if codec == CodecId.VByte:
            return _vbyte_decode(data, value_count)
        if codec == CodecId.PFor:
            return pfor.decode_pfor(data, value_count, batch=True)
        if codec == CodecId.FastPFor128:
            return pfor.decode_fastpfor(data, value_count, batch=_simd_enabled)
        if codec == CodecId.BinaryPacking128:
            return pfor.decode_binary_packing(data, value_count, batch=_simd_enabled)
        if codec == CodecId.Brotli:
            return _heavy_decode(data, value_count)
    except BlockDecodeError as exc:
        raise DecodeError(codec, exc.offset, exc.message) from None
    raise DecodeError(codec, 0, "unknown codec")


def compressed_size_bound(codec: CodecId, value_count: int) -> int:
    """Upper bound on compress_values output size, tight within a constant."""
    if value_count < 0:
        raise ValueError("negative value count")
    nblocks = -(-value_count // 128)
    if codec == CodecId.Raw:
        return 4 * value_count
    if codec == CodecId.VByte:
        return 5 * value_count
    if codec == CodecId.BinaryPacking128:
        return nblocks * 513  # width byte + 128 values at 32 bits
    if codec in (CodecId.PFor, CodecId.FastPFor128):
        return nblocks * 514  # w=32 is always available: 2 header bytes + 512
    if codec == CodecId.Brotli:
        # stored-chunk expansion plus container headers
        return 4 * value_count + (4 * value_count >> 4) + 1024
    raise ValueError("unknown codec %r" % (codec,))
