"""Lossless run-length codecs for RGBA8 image transport.

Wire formats
------------
Container: ``codec id (u8) | original length (u64 LE) | stream count (u8)``
followed by ``length (u64 LE) | bytes`` per stream.

``rle64``: one stream of little-endian 64-bit tokens (two pixels per token).
A token equal to the all-ones marker ``M`` starts a triple
``M, value, count`` with ``1 <= count <= 2**32 - 1``. Other tokens are
literal words. Runs of at least ``RLE64_MIN_RUN`` equal words become
triples; a literal equal to ``M`` is always written as a triple. The
``len % 8`` trailing bytes follow the tokens verbatim.

Per-component: four streams, stream ``i`` holding bytes ``i, i+4, i+8, ...``
(the i-th component of every pixel) encoded with the same scheme at byte
granularity: marker ``0xFF``, ``count`` is one byte.

Swizzled per-component: the bit-interleaving permutation below followed by
the per-component codec.

Worst-case expansion: ``rle64`` grows by at most ``3x`` only for inputs made
entirely of isolated marker words; inputs without marker words never grow
beyond the container overhead. Per-component triples isolated ``0xFF``
bytes, so its worst case is ``3x`` for alternating ``0xFF`` bytes.
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

RLE64_MARKER = np.uint64(0xFFFFFFFFFFFFFFFF)
BYTE_MARKER = np.uint8(0xFF)
RLE64_MIN_RUN = 3
BYTE_MIN_RUN = 4
CHUNKED_FLAG = 0x80
THREADS_ENV = "COMPOUND_RENDER_THREADS"


class CodecError(ValueError):
    pass


class CodecId(IntEnum):
    RLE64 = 1
    PER_COMPONENT = 2
    SWIZZLE_PER_COMPONENT = 3


@dataclass(frozen=True)
class EncodedBuffer:
    codec_id: int
    original_length: int
    streams: tuple[bytes, ...]

    def to_bytes(self) -> bytes:
        parts = [struct.pack("<BQB", self.codec_id, self.original_length, len(self.streams))]
        for s in self.streams:
            parts.append(struct.pack("<Q", len(s)))
            parts.append(bytes(s))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedBuffer":
        if len(data) < 10:
            raise CodecError("truncated container header")
        codec_id, length, count = struct.unpack_from("<BQB", data, 0)
        pos = 10
        streams = []
        for _ in range(count):
            if pos + 8 > len(data):
                raise CodecError("truncated stream length")
            (n,) = struct.unpack_from("<Q", data, pos)
            pos += 8
            if pos + n > len(data):
                raise CodecError("truncated stream")
            streams.append(bytes(data[pos : pos + n]))
            pos += n
        if pos != len(data):
            raise CodecError("trailing bytes after last stream")
        return cls(codec_id, length, tuple(streams))

    @property
    def size(self) -> int:
        return 10 + sum(8 + len(s) for s in self.streams)


def compression_ratio(original_length: int, encoded: EncodedBuffer) -> float:
    """``1 - compressed / original`` with the container overhead included."""
    return 1.0 - encoded.size / original_length


# -- generic run-length scheme -----------------------------------------------


def _rle_encode(values: np.ndarray, marker, max_count: int, min_run: int) -> np.ndarray:
    n = values.size
    if n == 0:
        return values[:0]
    starts = np.flatnonzero(np.concatenate(([True], values[1:] != values[:-1])))
    lengths = np.diff(np.append(starts, n))
    run_vals = values[starts]
    # split runs longer than the count field can hold
    pieces = -(-lengths // max_count)
    if pieces.max() > 1:
        run_vals = np.repeat(run_vals, pieces)
        first = np.cumsum(pieces) - pieces
        within = np.arange(pieces.sum()) - np.repeat(first, pieces)
        total = np.repeat(lengths, pieces)
        lengths = np.minimum(total - within * max_count, max_count)
    as_run = (lengths >= min_run) | (run_vals == marker)
    widths = np.where(as_run, 3, lengths)
    out = np.repeat(run_vals, widths)
    at = (np.cumsum(widths) - widths)[as_run]
    out[at] = marker
    out[at + 2] = lengths[as_run].astype(values.dtype)
    return out


def _rle_decode(tokens: np.ndarray, marker, max_count: int) -> np.ndarray:
    candidates = np.flatnonzero(tokens == marker)
    if candidates.size == 0:
        return tokens.copy()
    triples = []
    skip_to = 0
    for i in candidates.tolist():
        if i < skip_to:
            continue
        if i + 2 >= tokens.size:
            raise CodecError("truncated run triple")
        triples.append(i)
        skip_to = i + 3
    triples = np.asarray(triples, np.int64)
    counts = np.ones(tokens.size, np.int64)
    run_counts = tokens[triples + 2].astype(np.int64)
    if np.any(run_counts < 1) or np.any(run_counts > max_count):
        raise CodecError("run count out of range")
    counts[triples] = run_counts
    counts[triples + 1] = 0
    counts[triples + 2] = 0
    values = tokens.copy()
    values[triples] = tokens[triples + 1]
    return np.repeat(values, counts)


# -- rle64 -------------------------------------------------------------------


def rle64_encode(data: bytes) -> EncodedBuffer:
    buf = np.frombuffer(bytes(data), np.uint8)
    whole = buf.size - buf.size % 8
    words = buf[:whole].view("<u8")
    tokens = _rle_encode(words, RLE64_MARKER, 0xFFFFFFFF, RLE64_MIN_RUN)
    stream = tokens.astype("<u8").tobytes() + buf[whole:].tobytes()
    return EncodedBuffer(CodecId.RLE64, buf.size, (stream,))


def rle64_decode(enc: EncodedBuffer) -> bytes:
    if len(enc.streams) != 1:
        raise CodecError("rle64 expects one stream")
    stream = enc.streams[0]
    tail = enc.original_length % 8
    body = len(stream) - tail
    if body < 0 or body % 8:
        raise CodecError("truncated rle64 stream")
    tokens = np.frombuffer(stream[:body], "<u8")
    words = _rle_decode(tokens, RLE64_MARKER, 0xFFFFFFFF)
    out = words.astype("<u8").tobytes() + stream[body:]
    if len(out) != enc.original_length:
        raise CodecError(f"decoded {len(out)} bytes, expected {enc.original_length}")
    return out


# -- per-component -------------------------------------------------------------


def _plane_encode(plane: np.ndarray) -> bytes:
    return _rle_encode(plane, BYTE_MARKER, 0xFF, BYTE_MIN_RUN).tobytes()


def rle_per_component_encode(data: bytes, codec_id: int = CodecId.PER_COMPONENT) -> EncodedBuffer:
    buf = np.frombuffer(bytes(data), np.uint8)
    return EncodedBuffer(codec_id, buf.size, tuple(_plane_encode(buf[i::4]) for i in range(4)))


def rle_per_component_decode(enc: EncodedBuffer) -> bytes:
    if len(enc.streams) != 4:
        raise CodecError("per-component codec expects four streams")
    n = enc.original_length
    out = np.empty(n, np.uint8)
    for i, s in enumerate(enc.streams):
        plane = _rle_decode(np.frombuffer(s, np.uint8), BYTE_MARKER, 0xFF)
        expected = len(range(i, n, 4))
        if plane.size != expected:
            raise CodecError(f"plane {i} decoded {plane.size} bytes, expected {expected}")
        out[i::4] = plane
    return out.tobytes()


# -- swizzle -------------------------------------------------------------------


def _swizzle_words(px: np.ndarray) -> np.ndarray:
    """``px`` is (n, 4) uint8 RGBA; returns big-endian interleaved uint32 words."""
    out = np.zeros(px.shape[0], np.uint32)
    for bit in range(8):
        for c in range(4):
            b = (px[:, c].astype(np.uint32) >> bit) & 1
            out |= b << np.uint32(bit * 4 + (3 - c))
    return out


def _unswizzle_words(words: np.ndarray) -> np.ndarray:
    px = np.zeros((words.size, 4), np.uint8)
    for bit in range(8):
        for c in range(4):
            b = (words >> np.uint32(bit * 4 + (3 - c))) & 1
            px[:, c] |= (b << bit).astype(np.uint8)
    return px


def swizzle(data: bytes) -> bytes:
    """Regroup bits by significance: bit 31 = R7, G7, B7, A7, R6, ..., bit 0 = A0.

    Words are stored big-endian so the most significant group comes first.
    Trailing bytes that do not form a pixel pass through unchanged.
    """
    buf = np.frombuffer(bytes(data), np.uint8)
    whole = buf.size - buf.size % 4
    words = _swizzle_words(buf[:whole].reshape(-1, 4))
    return words.astype(">u4").tobytes() + buf[whole:].tobytes()


def unswizzle(data: bytes) -> bytes:
    buf = np.frombuffer(bytes(data), np.uint8)
    whole = buf.size - buf.size % 4
    words = buf[:whole].view(">u4").astype(np.uint32)
    return _unswizzle_words(words).tobytes() + buf[whole:].tobytes()


def swizzle_per_component_encode(data: bytes) -> EncodedBuffer:
    return rle_per_component_encode(swizzle(data), CodecId.SWIZZLE_PER_COMPONENT)


def swizzle_per_component_decode(enc: EncodedBuffer) -> bytes:
    return unswizzle(rle_per_component_decode(enc))


# -- registry and chunked wrapper ----------------------------------------------

ENCODERS = {
    CodecId.RLE64: rle64_encode,
    CodecId.PER_COMPONENT: rle_per_component_encode,
    CodecId.SWIZZLE_PER_COMPONENT: swizzle_per_component_encode,
}
DECODERS = {
    CodecId.RLE64: rle64_decode,
    CodecId.PER_COMPONENT: rle_per_component_decode,
    CodecId.SWIZZLE_PER_COMPONENT: swizzle_per_component_decode,
}


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def encode(codec: int, data: bytes) -> EncodedBuffer:
    return ENCODERS[CodecId(codec)](data)


def decode(enc: EncodedBuffer) -> bytes:
    if enc.codec_id & CHUNKED_FLAG:
        return chunked_decode(enc)
    try:
        codec = CodecId(enc.codec_id)
    except ValueError as exc:
        raise CodecError(f"unknown codec id {enc.codec_id}") from exc
    return DECODERS[codec](enc)


def chunk_bounds(length: int, chunk_count: int) -> list[tuple[int, int]]:
    """Contiguous 4-byte aligned chunks; the last one also takes any partial pixel."""
    pixels = length // 4
    per = -(-pixels // chunk_count) if pixels else 0
    bounds = []
    for i in range(chunk_count):
        lo = min(i * per, pixels) * 4
        hi = min((i + 1) * per, pixels) * 4
        if i == chunk_count - 1:
            hi = length
        bounds.append((lo, hi))
    return bounds


def chunked_parallel(codec: int, data: bytes, chunk_count: int, workers: int | None = None) -> EncodedBuffer:
    """Encode ``chunk_count`` sub-buffers independently.

    One chunk returns the plain codec output. Otherwise each stream is the
    serialized container of one chunk. Output bytes do not depend on
    ``workers``.
    """
    if chunk_count < 1:
        raise CodecError("chunk count must be at least 1")
    data = bytes(data)
    if chunk_count == 1:
        return encode(codec, data)
    parts = [data[lo:hi] for lo, hi in chunk_bounds(len(data), chunk_count)]
    workers = default_workers() if workers is None else workers
    if workers <= 1:
        encoded = [encode(codec, p) for p in parts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            encoded = list(pool.map(lambda p: encode(codec, p), parts))
    return EncodedBuffer(CHUNKED_FLAG | int(codec), len(data), tuple(e.to_bytes() for e in encoded))


def chunked_decode(enc: EncodedBuffer) -> bytes:
    out = b"".join(decode(EncodedBuffer.from_bytes(s)) for s in enc.streams)
    if len(out) != enc.original_length:
        raise CodecError(f"decoded {len(out)} bytes, expected {enc.original_length}")
    return out


def radial_gradient(size: int = 512) -> np.ndarray:
    """The reference smooth test image: an (size, size, 4) uint8 radial RGBA gradient.

    With ``r`` the distance from the centre normalized to 1 at the corners:
    ``R = 255(1 - r)``, ``G = 255 r``, ``B = 255 |1 - 2r|``, ``A = 255(1 - r/2)``,
    rounded to nearest.
    """
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2.0
    r = np.hypot(x - c, y - c) / np.hypot(c, c)
    channels = (255.0 * (1.0 - r), 255.0 * r, 255.0 * np.abs(1.0 - 2.0 * r), 255.0 * (1.0 - r / 2.0))
    img = np.empty((size, size, 4), np.uint8)
    for i, ch in enumerate(channels):
        img[..., i] = np.clip(np.round(ch), 0, 255).astype(np.uint8)
    return img
