"""Independent reference implementations used as test oracles.

These are deliberately naive (per-pixel Python loops, scalar integer
arithmetic) and share no code with the package kernels.
"""

from __future__ import annotations

import numpy as np

FAR = 0xFFFFFFFF


def over_pixel(front, back):
    """Premultiplied "over" on one RGBA pixel with round-half-up integer division."""
    fa = int(front[3])
    return tuple(int(f) + (int(b) * (255 - fa) + 127) // 255 for f, b in zip(front, back))


def z_fold(colors, depths):
    """Nearest-depth winner per pixel; ties keep the earlier image."""
    h, w = depths[0].shape
    out_c = np.zeros((h, w, 4), np.uint8)
    out_d = np.full((h, w), FAR, np.uint32)
    for y in range(h):
        for x in range(w):
            best = None
            for c, d in zip(colors, depths):
                if best is None or int(d[y, x]) < best[1]:
                    best = (c[y, x], int(d[y, x]))
            out_c[y, x], out_d[y, x] = best
    return out_c, out_d


def blend_fold(colors):
    """Back-to-front fold: index 0 is the back-most layer."""
    h, w = colors[0].shape[:2]
    out = np.zeros((h, w, 4), np.uint8)
    for y in range(h):
        for x in range(w):
            acc = (0, 0, 0, 0)
            for c in colors:
                acc = over_pixel(c[y, x], acc)
            out[y, x] = acc
    return out


def average(colors):
    """Per-channel mean rounded half up."""
    n = len(colors)
    total = sum(c.astype(np.int64) for c in colors)
    return ((total + n // 2) // n).astype(np.uint8)


def band_edges(height: int, n: int) -> list[int]:
    """Row edges of n equal bands with half-down rounding of k*height/n."""
    import math

    return [math.ceil(k * height / n - 0.5) for k in range(n + 1)]


def stream_latency(t_draw: int, t_readback: int, t_assemble: int, n: int) -> int:
    """Critical path of an n-stage compositing chain."""
    return t_draw + (n - 1) * (t_readback + t_assemble)


def unique_depth_images(rng, n: int, h: int, w: int, coverage: float = 0.7):
    """n random RGBA images with globally unique depths on covered pixels."""
    keys = rng.permutation(n * h * w).astype(np.uint32).reshape(n, h, w) + 1
    colors, depths = [], []
    for i in range(n):
        covered = rng.random((h, w)) < coverage
        c = rng.integers(0, 256, (h, w, 4), dtype=np.uint8)
        c[..., 3] = 255
        c[~covered] = 0
        d = np.where(covered, keys[i], FAR).astype(np.uint32)
        colors.append(c)
        depths.append(d)
    return colors, depths


def premultiplied(rng, h: int, w: int):
    a = rng.integers(0, 256, (h, w), dtype=np.int64)
    rgb = rng.integers(0, 256, (h, w, 3), dtype=np.int64) * a[..., None] // 255
    return np.concatenate([rgb, a[..., None]], axis=-1).astype(np.uint8)


def rle_tokens(values, marker, max_count, min_run):
    """Scalar run-length tokenizer: runs of ``min_run`` or more, and every marker value, become triples."""
    out = []
    i = 0
    while i < len(values):
        j = i
        while j < len(values) and values[j] == values[i] and j - i < max_count:
            j += 1
        n = j - i
        if n >= min_run or values[i] == marker:
            out += [marker, values[i], n]
        else:
            out += [values[i]] * n
        i = j
    return out


def rle64_stream(data: bytes) -> bytes:
    whole = len(data) - len(data) % 8
    words = [int.from_bytes(data[k : k + 8], "little") for k in range(0, whole, 8)]
    tokens = rle_tokens(words, 2**64 - 1, 2**32 - 1, 3)
    return b"".join(t.to_bytes(8, "little") for t in tokens) + data[whole:]


def per_component_streams(data: bytes) -> list[bytes]:
    return [bytes(rle_tokens(list(data[i::4]), 0xFF, 0xFF, 4)) for i in range(4)]


def swizzle_pixel(r, g, b, a) -> int:
    """Bit 31 = R7, then G7, B7, A7, R6, ... down to A0."""
    word = 0
    for bit in range(7, -1, -1):
        for comp in (r, g, b, a):
            word = (word << 1) | ((comp >> bit) & 1)
    return word
