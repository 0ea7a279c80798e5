"""Bit-packing primitives shared by the block codecs.

Two layouts are provided:

* sequential: values are packed one after another into a single
  LSB-first bitstream (used by PFor and by exception regions);
* lane-interleaved: a 128-value block is split across 4 lanes
  (value i goes to lane i mod 4, 32 values per lane), each lane is
  packed LSB-first into 32-bit words, and the lanes' words are
  interleaved word-by-word (used by BinaryPacking128/FastPFor128 so
  a batch decoder can process 4 values per step).

All functions treat integers as unsigned 32-bit, little-endian.
"""

from __future__ import annotations

import numpy as np

BLOCK_LEN = 128
LANE_COUNT = 4
LANE_VALUES = BLOCK_LEN // LANE_COUNT  # 32 values per lane

_POW2 = (np.uint64(1) << np.arange(32, dtype=np.uint64)).astype(np.uint64)


def width_of(values: np.ndarray) -> np.ndarray:
    """Per-value bit length (0 for 0, 32 for values >= 2^31)."""
    v = np.asarray(values, dtype=np.uint64)
    return np.searchsorted(_POW2, v, side="right").astype(np.uint8)


def max_width(values: np.ndarray) -> int:
    """Smallest width w such that every value fits in w bits."""
    if len(values) == 0:
        return 0
    return int(width_of(np.asarray([np.asarray(values).max()]))[0])


def pack_sequential(values: np.ndarray, width: int) -> bytes:
    """Pack values at `width` bits each into one LSB-first bitstream.

    The stream is zero-padded to a byte boundary.
    """
    n = len(values)
    if width == 0 or n == 0:
        return b""
    v = np.ascontiguousarray(values, dtype="<u4")
    bits = np.unpackbits(v.view(np.uint8).reshape(n, 4), axis=1, bitorder="little")
    return np.packbits(bits[:, :width].ravel(), bitorder="little").tobytes()


def unpack_sequential(data: bytes, width: int, count: int) -> np.ndarray:
    """Inverse of pack_sequential; `data` may carry trailing padding bits."""
    if width == 0 or count == 0:
        return np.zeros(count, dtype=np.uint32)
    total_bits = count * width
    need = (total_bits + 7) // 8
    if len(data) < need:
        raise ValueError("bitstream too short: need %d bytes, have %d" % (need, len(data)))
    raw = np.frombuffer(data, dtype=np.uint8, count=need)
    bits = np.unpackbits(raw, bitorder="little")[:total_bits].reshape(count, width)
    full = np.zeros((count, 32), dtype=np.uint8)
    full[:, :width] = bits
    return np.packbits(full, axis=1, bitorder="little").view("<u4").ravel().astype(np.uint32)


def sequential_byte_len(width: int, count: int) -> int:
    return (count * width + 7) // 8


# ---------------------------------------------------------------------------
# Lane-interleaved block layout.
#
# A block holds exactly BLOCK_LEN values. Lane l carries values
# l, l+4, ..., l+124 in that order. Each lane's 32 values are packed
# LSB-first at w bits into w little-endian 32-bit words (32 values x w
# bits = w words exactly). Output words are interleaved: for word
# index j, the block emits lane0[j] lane1[j] lane2[j] lane3[j], so the
# byte offset of (lane l, word j) is 16*j + 4*l and a block payload is
# exactly 16*w bytes.
# ---------------------------------------------------------------------------


def pack_lanes_batch(blocks: np.ndarray, width: int) -> np.ndarray:
    """Pack a (G, 128) uint32 matrix; returns (G, 16*width) uint8."""
    g = blocks.shape[0]
    if width == 0:
        return np.zeros((g, 0), dtype=np.uint8)
    lanes = np.ascontiguousarray(
        blocks.reshape(g, LANE_VALUES, LANE_COUNT).transpose(0, 2, 1), dtype="<u4"
    )
    # (G, 4, 32) values -> (G, 4, 32, 32) bits -> keep low `width` bits
    bits = np.unpackbits(
        lanes.view(np.uint8).reshape(g, LANE_COUNT, LANE_VALUES, 4), axis=3, bitorder="little"
    )[:, :, :, :width]
    # per-lane stream: 32*width bits, always a whole number of bytes
    packed = np.packbits(bits.reshape(g, LANE_COUNT, LANE_VALUES * width), axis=2, bitorder="little")
    # (G, 4, 4*width) lane streams -> word-interleaved (G, width, 4, 4)
    words = packed.reshape(g, LANE_COUNT, width, 4).transpose(0, 2, 1, 3)
    return np.ascontiguousarray(words).reshape(g, 16 * width)


def unpack_lanes_batch(payloads: np.ndarray, width: int) -> np.ndarray:
    """Inverse of pack_lanes_batch; (G, 16*width) uint8 -> (G, 128) uint32."""
    g = payloads.shape[0]
    if width == 0:
        return np.zeros((g, BLOCK_LEN), dtype=np.uint32)
    words = payloads.reshape(g, width, LANE_COUNT, 4).transpose(0, 2, 1, 3)
    streams = np.ascontiguousarray(words).reshape(g, LANE_COUNT, 4 * width)
    bits = np.unpackbits(streams, axis=2, bitorder="little").reshape(
        g, LANE_COUNT, LANE_VALUES, width
    )
    full = np.zeros((g, LANE_COUNT, LANE_VALUES, 32), dtype=np.uint8)
    full[:, :, :, :width] = bits
    lanes = np.packbits(full, axis=3, bitorder="little").view("<u4")
    return (
        lanes.reshape(g, LANE_COUNT, LANE_VALUES)
        .transpose(0, 2, 1)
        .reshape(g, BLOCK_LEN)
        .astype(np.uint32)
    )


# Scalar (per-value loop) counterparts, kept deliberately simple. They
# implement the same byte layouts bit by bit and back the runtime
# switch between plain and batch decoders.


def scalar_read_bits(data: bytes, bit_offset: int, width: int) -> int:
    out = 0
    for k in range(width):
        b = bit_offset + k
        if data[b // 8] >> (b % 8) & 1:
            out |= 1 << k
    return out


def scalar_unpack_sequential(data: bytes, width: int, count: int) -> list[int]:
    if width == 0:
        return [0] * count
    need = (count * width + 7) // 8
    if len(data) < need:
        raise ValueError("bitstream too short: need %d bytes, have %d" % (need, len(data)))
    return [scalar_read_bits(data, i * width, width) for i in range(count)]


def scalar_unpack_lanes(payload: bytes, width: int) -> list[int]:
    """Decode one lane-interleaved block payload into 128 values."""
    out = [0] * BLOCK_LEN
    if width == 0:
        return out
    for i in range(BLOCK_LEN):
        lane, slot = i % LANE_COUNT, i // LANE_COUNT
        value = 0
        for k in range(width):
            b = slot * width + k
            word, bit = b // 32, b % 32
            byte = payload[16 * word + 4 * lane + bit // 8]
            if byte >> (bit % 8) & 1:
                value |= 1 << k
        out[i] = value
    return out
