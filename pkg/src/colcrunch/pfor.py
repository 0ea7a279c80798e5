"""Block codecs over 128-value sub-blocks.

Formats (all little-endian, per sub-block; a page encodes its values
as ceil(n/128) consecutive sub-blocks, the last zero-padded to 128):

BinaryPacking128
    width byte w (0..32), then 16*w payload bytes in the
    lane-interleaved layout (bitpack.pack_lanes_batch).

PFor
    width byte w, 16*w payload bytes packed sequentially (not
    interleaved), exception-count byte c, c ascending position bytes,
    then c full 4-byte original values in position order. w is chosen
    per block to minimize 2 + 16*w + 5*c(w) by exhaustive scan; ties
    take the smaller width.

FastPFor128
    width byte w, 16*w payload bytes in the lane-interleaved layout,
    exception-count byte c, c ascending position bytes, then the
    exceptions' high bits (value >> w) packed sequentially at 32-w
    bits, zero-padded to a byte boundary. w minimizes
    2 + 16*w + c(w) + ceil(c(w)*(32-w)/8).

Exceptions are the values whose bit length exceeds w; the payload
keeps their low w bits so decode can OR the high bits back in.
"""

from __future__ import annotations

import numpy as np

from . import bitpack
from .bitpack import BLOCK_LEN


class BlockDecodeError(ValueError):
    """Malformed block-codec input; carries the byte offset."""

    def __init__(self, offset: int, message: str):
        super().__init__("%s (at byte %d)" % (message, offset))
        self.offset = offset
        self.message = message


_WIDTHS = np.arange(33)


def _split_blocks(values: np.ndarray) -> np.ndarray:
    """Zero-pad to a multiple of BLOCK_LEN and reshape to (B, 128)."""
    n = len(values)
    nblocks = -(-n // BLOCK_LEN)
    padded = np.zeros(nblocks * BLOCK_LEN, dtype=np.uint32)
    padded[:n] = values
    return padded.reshape(nblocks, BLOCK_LEN)


def _exceed_counts(bit_lengths: np.ndarray) -> np.ndarray:
    """(B, 128) per-value bit lengths -> (B, 33) count of values wider than w."""
    nblocks = bit_lengths.shape[0]
    hist = np.zeros((nblocks, 34), dtype=np.int64)
    idx = np.repeat(np.arange(nblocks), BLOCK_LEN)
    np.add.at(hist, (idx, bit_lengths.ravel().astype(np.int64)), 1)
    # exceed[w] = number of values with bit length > w
    return BLOCK_LEN - np.cumsum(hist, axis=1)[:, :33]


def _check_remaining(data: bytes, offset: int, need: int, what: str) -> None:
    if offset + need > len(data):
        raise BlockDecodeError(offset, "truncated %s: need %d bytes" % (what, need))


# --- BinaryPacking128 -------------------------------------------------------


def encode_binary_packing(values: np.ndarray) -> bytes:
    blocks = _split_blocks(values)
    widths = np.array([bitpack.max_width(b) for b in blocks], dtype=np.uint8)
    payloads: dict[int, np.ndarray] = {}
    order: dict[int, int] = {}
    for w in np.unique(widths):
        group = blocks[widths == w]
        payloads[int(w)] = bitpack.pack_lanes_batch(group, int(w))
        order[int(w)] = 0
    out = bytearray()
    for b in range(blocks.shape[0]):
        w = int(widths[b])
        out.append(w)
        out += payloads[w][order[w]].tobytes()
        order[w] += 1
    return bytes(out)


def decode_binary_packing(data: bytes, count: int, batch: bool) -> np.ndarray:
    nblocks = -(-count // BLOCK_LEN)
    widths = np.zeros(nblocks, dtype=np.int64)
    offsets = np.zeros(nblocks, dtype=np.int64)
    offset = 0
    for b in range(nblocks):
        _check_remaining(data, offset, 1, "block header")
        w = data[offset]
        if w > 32:
            raise BlockDecodeError(offset, "invalid bit width %d" % w)
        _check_remaining(data, offset + 1, 16 * w, "block payload")
        widths[b], offsets[b] = w, offset + 1
        offset += 1 + 16 * w
    if offset != len(data):
        raise BlockDecodeError(offset, "%d trailing bytes" % (len(data) - offset))
    out = np.empty((nblocks, BLOCK_LEN), dtype=np.uint32)
    if batch:
        buf = np.frombuffer(data, dtype=np.uint8)
        for w in np.unique(widths):
            sel = np.nonzero(widths == w)[0]
            gathered = buf[offsets[sel, None] + np.arange(16 * w)[None, :]]
            out[sel] = bitpack.unpack_lanes_batch(gathered.reshape(len(sel), 16 * int(w)), int(w))
    else:
        for b in range(nblocks):
            payload = data[offsets[b] : offsets[b] + 16 * int(widths[b])]
            out[b] = bitpack.scalar_unpack_lanes(payload, int(widths[b]))
    return out.ravel()[:count]


# --- PFor / FastPFor128 -----------------------------------------------------


def _plan_exceptions(blocks: np.ndarray, sizes_for: str) -> tuple[np.ndarray, np.ndarray]:
    """Pick the per-block width minimizing the block size formula."""
    bit_lengths = bitpack.width_of(blocks.ravel()).reshape(blocks.shape)
    exceed = _exceed_counts(bit_lengths)
    if sizes_for == "pfor":
        sizes = 2 + 16 * _WIDTHS + 5 * exceed
    else:
        sizes = 2 + 16 * _WIDTHS + exceed + (exceed * (32 - _WIDTHS) + 7) // 8
    widths = np.argmin(sizes, axis=1)  # first minimum = smallest width
    return widths, bit_lengths


def _encode_patched(values: np.ndarray, variant: str) -> bytes:
    blocks = _split_blocks(values)
    widths, bit_lengths = _plan_exceptions(blocks, variant)
    payloads: dict[int, np.ndarray] = {}
    order: dict[int, int] = {}
    for w in np.unique(widths):
        group = blocks[widths == w]
        if w == 32:
            base = group
        else:
            base = group & np.uint32((1 << int(w)) - 1)
        if variant == "pfor":
            packed = np.array(
                [np.frombuffer(bitpack.pack_sequential(row, int(w)), dtype=np.uint8) for row in base]
            ).reshape(len(group), 16 * int(w))
        else:
            packed = bitpack.pack_lanes_batch(base, int(w))
        payloads[int(w)] = packed
        order[int(w)] = 0
    out = bytearray()
    for b in range(blocks.shape[0]):
        w = int(widths[b])
        out.append(w)
        out += payloads[w][order[w]].tobytes()
        order[w] += 1
        positions = np.nonzero(bit_lengths[b] > w)[0]
        out.append(len(positions))
        out += positions.astype(np.uint8).tobytes()
        if variant == "pfor":
            out += blocks[b, positions].astype("<u4").tobytes()
        else:
            high = blocks[b, positions].astype(np.uint64) >> np.uint64(w)
            out += bitpack.pack_sequential(high.astype(np.uint32), 32 - w)
    return bytes(out)


def encode_pfor(values: np.ndarray) -> bytes:
    return _encode_patched(values, "pfor")


def encode_fastpfor(values: np.ndarray) -> bytes:
    return _encode_patched(values, "fastpfor")


def _decode_patched(data: bytes, count: int, variant: str, batch: bool) -> np.ndarray:
    nblocks = -(-count // BLOCK_LEN)
    widths = np.zeros(nblocks, dtype=np.int64)
    offsets = np.zeros(nblocks, dtype=np.int64)
    exceptions: list[tuple[int, np.ndarray, np.ndarray]] = []
    offset = 0
    for b in range(nblocks):
        _check_remaining(data, offset, 1, "block header")
        w = data[offset]
        if w > 32:
            raise BlockDecodeError(offset, "invalid bit width %d" % w)
        _check_remaining(data, offset + 1, 16 * w, "block payload")
        widths[b], offsets[b] = w, offset + 1
        offset += 1 + 16 * w
        _check_remaining(data, offset, 1, "exception count")
        nexc = data[offset]
        offset += 1
        if nexc > BLOCK_LEN:
            raise BlockDecodeError(offset - 1, "exception count %d exceeds block" % nexc)
        _check_remaining(data, offset, nexc, "exception positions")
        positions = np.frombuffer(data, dtype=np.uint8, count=nexc, offset=offset).astype(np.int64)
        if nexc and (positions.max() >= BLOCK_LEN or np.any(np.diff(positions) <= 0)):
            raise BlockDecodeError(offset, "exception positions not ascending in 0..127")
        offset += nexc
        if nexc:
            if variant == "pfor":
                _check_remaining(data, offset, 4 * nexc, "exception values")
                values = np.frombuffer(data, dtype="<u4", count=nexc, offset=offset).astype(np.uint64)
                offset += 4 * nexc
            else:
                high_bytes = (nexc * (32 - w) + 7) // 8
                _check_remaining(data, offset, high_bytes, "exception high bits")
                high = bitpack.unpack_sequential(
                    data[offset : offset + high_bytes], 32 - w, nexc
                ).astype(np.uint64)
                values = high << np.uint64(w)
                offset += high_bytes
            exceptions.append((b, positions, values))
    if offset != len(data):
        raise BlockDecodeError(offset, "%d trailing bytes" % (len(data) - offset))
    out = np.empty((nblocks, BLOCK_LEN), dtype=np.uint32)
    if batch:
        buf = np.frombuffer(data, dtype=np.uint8)
        for w in np.unique(widths):
            sel = np.nonzero(widths == w)[0]
            gathered = buf[offsets[sel, None] + np.arange(16 * w)[None, :]]
            if variant == "pfor":
                flat = bitpack.unpack_sequential(gathered.tobytes(), int(w), len(sel) * BLOCK_LEN)
                out[sel] = flat.reshape(len(sel), BLOCK_LEN)
            else:
                out[sel] = bitpack.unpack_lanes_batch(
                    gathered.reshape(len(sel), 16 * int(w)), int(w)
                )
    else:
        for b in range(nblocks):
            payload = data[offsets[b] : offsets[b] + 16 * int(widths[b])]
            if variant == "pfor":
                out[b] = bitpack.scalar_unpack_sequential(payload, int(widths[b]), BLOCK_LEN)
            else:
                out[b] = bitpack.scalar_unpack_lanes(payload, int(widths[b]))
    for b, positions, values in exceptions:
        if variant == "pfor":
            out[b, positions] = values.astype(np.uint32)
        else:
            merged = out[b, positions].astype(np.uint64) | values
            out[b, positions] = merged.astype(np.uint32)
    return out.ravel()[:count]


def decode_pfor(data: bytes, count: int, batch: bool) -> np.ndarray:
    return _decode_patched(data, count, "pfor", batch)


def decode_fastpfor(data: bytes, count: int, batch: bool) -> np.ndarray:
    return _decode_patched(data, count, "fastpfor", batch)
