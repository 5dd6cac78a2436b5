"""Deterministic z-buffer rasterizer for :class:`TriangleMesh` scenes.

All sample positions are computed in destination pixel coordinates from the
destination frustum, so a tile, a pixel-kernel slice or a database slice sees
exactly the same floating point values as the full-screen render.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from compound_render.compositing.image import FAR_DEPTH, Image
from compound_render.geometry import PixelViewport
from compound_render.simrender.scene import TriangleMesh
from compound_render.tasking import RenderContext

DEPTH_LEVELS = 65534  # quantized depth occupies the high 16 bits
BATCH_SAMPLES = 1 << 22


@lru_cache(maxsize=64)
def nrooks_offsets(size: int) -> tuple[tuple[float, float], ...]:
    """Per-index sample offsets from the pixel centre on a fixed n-rooks pattern."""
    if size == 1:
        return ((0.0, 0.0),)
    perm = np.random.default_rng(size).permutation(size)
    return tuple(((k + 0.5) / size - 0.5, (int(perm[k]) + 0.5) / size - 0.5) for k in range(size))


def sample_positions(ctx: RenderContext) -> tuple[np.ndarray, np.ndarray]:
    """Destination-space sample coordinates (x along columns, y along rows) of the image ``ctx`` draws."""
    img = ctx.image_pvp()
    jx, jy = nrooks_offsets(ctx.subpixel.size)[ctx.subpixel.index]
    i = np.arange(img.w, dtype=np.float64)
    j = np.arange(img.h, dtype=np.float64)
    if not ctx.pixel.is_identity:
        xs = ctx.pvp.x + ctx.pixel.dx + i * ctx.pixel.w + 0.5 + jx
        ys = ctx.pvp.y + ctx.pixel.dy + j * ctx.pixel.h + 0.5 + jy
    elif ctx.zoomed:
        sx, sy = ctx.pvp.w / img.w, ctx.pvp.h / img.h
        xs = ctx.pvp.x + (i + 0.5 + jx) * sx
        ys = ctx.pvp.y + (j + 0.5 + jy) * sy
    else:
        xs = ctx.pvp.x + i + 0.5 + jx
        ys = ctx.pvp.y + j + 0.5 + jy
    return xs, ys


def project(points_world: np.ndarray, ctx: RenderContext) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World points -> destination pixel x, y and positive eye depth."""
    head = ctx.head_matrix
    eye = points_world @ head[:3, :3].T + head[:3, 3]
    depth = -eye[..., 2]
    f, d = ctx.dest_frustum, ctx.dest_pvp
    with np.errstate(divide="ignore", invalid="ignore"):
        xn = eye[..., 0] * f.near / depth
        yn = eye[..., 1] * f.near / depth
    px = d.x + (xn - f.left) / (f.right - f.left) * d.w
    py = d.y + (f.top - yn) / (f.top - f.bottom) * d.h
    return px, py, depth


def render_triangles(scene: TriangleMesh, ctx: RenderContext) -> Image:
    """Rasterize the triangles of ``ctx.range`` into the image ``ctx`` describes.

    Depth is ``(zq << 16) | triangle_index`` with ``zq`` the 16-bit window
    depth, so every written depth is unique per primitive.
    """
    img = ctx.image_pvp()
    depth_buf = np.full(img.w * img.h, FAR_DEPTH, dtype=np.uint32)
    color = np.zeros((img.h, img.w, 4), np.uint8)
    a, b = scene.span(ctx.range)
    if img.empty or b <= a:
        return Image(img, color, depth_buf.reshape(img.h, img.w), roi=PixelViewport(img.x, img.y, 0, 0))
    xs, ys = sample_positions(ctx)
    near, far = ctx.dest_frustum.near, ctx.dest_frustum.far
    verts = scene.world_vertices(ctx.frame)
    tri = scene.triangles[a:b]
    px, py, dz = project(verts[tri], ctx)  # (T, 3) each
    idx = np.arange(a, b, dtype=np.int64)
    keep = np.all((dz >= near) & (dz <= far), axis=1)
    px, py, dz, idx = px[keep], py[keep], dz[keep], idx[keep]
    if len(idx):
        inv = 1.0 / dz
        zwin = (1.0 / near - inv) / (1.0 / near - 1.0 / far)  # affine in screen space
        area = (px[:, 1] - px[:, 0]) * (py[:, 2] - py[:, 0]) - (px[:, 2] - px[:, 0]) * (py[:, 1] - py[:, 0])
        ok = area != 0
        px, py, zwin, idx, area = px[ok], py[ok], zwin[ok], idx[ok], area[ok]
        c0, c1 = _index_bounds(xs, px.min(axis=1), px.max(axis=1))
        r0, r1 = _index_bounds(ys, py.min(axis=1), py.max(axis=1))
        nx, ny = np.maximum(c1 - c0, 0), np.maximum(r1 - r0, 0)
        counts = nx * ny
        live = counts > 0
        sel = np.nonzero(live)[0]
        start = 0
        while start < len(sel):
            # batch triangles so the candidate sample count stays bounded
            cum = np.cumsum(counts[sel[start:]])
            stop = start + max(1, int(np.searchsorted(cum, BATCH_SAMPLES, side="right")))
            part = sel[start:stop]
            _raster_batch(part, px, py, zwin, idx, area, c0, r0, nx, counts, xs, ys, img.w, depth_buf)
            start = stop
    written = depth_buf != FAR_DEPTH
    flat = color.reshape(-1, 4)
    flat[written] = scene.colors[(depth_buf[written] & 0xFFFF).astype(np.int64)]
    depth = depth_buf.reshape(img.h, img.w)
    return Image(img, color, depth, roi=_written_roi(img, written.reshape(img.h, img.w)))


def _index_bounds(samples: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Half-open index range of sorted ``samples`` lying in [lo, hi]."""
    return np.searchsorted(samples, lo, side="left"), np.searchsorted(samples, hi, side="right")


def _raster_batch(part, px, py, zwin, idx, area, c0, r0, nx, counts, xs, ys, width, depth_buf):
    n = counts[part]
    total = int(n.sum())
    owner = np.repeat(part, n)
    first = np.repeat(np.cumsum(n) - n, n)
    local = np.arange(total, dtype=np.int64) - first
    col = c0[owner] + local % nx[owner]
    row = r0[owner] + local // nx[owner]
    sx, sy = xs[col], ys[row]
    x0, x1, x2 = px[owner, 0], px[owner, 1], px[owner, 2]
    y0, y1, y2 = py[owner, 0], py[owner, 1], py[owner, 2]
    w0 = (x2 - x1) * (sy - y1) - (y2 - y1) * (sx - x1)
    w1 = (x0 - x2) * (sy - y2) - (y0 - y2) * (sx - x2)
    w2 = (x1 - x0) * (sy - y0) - (y1 - y0) * (sx - x0)
    sgn = np.sign(area[owner])
    inside = (w0 * sgn >= 0) & (w1 * sgn >= 0) & (w2 * sgn >= 0)
    if not inside.any():
        return
    owner, col, row = owner[inside], col[inside], row[inside]
    w0, w1, w2 = w0[inside], w1[inside], w2[inside]
    ar = area[owner]
    z = (w0 * zwin[owner, 0] + w1 * zwin[owner, 1] + w2 * zwin[owner, 2]) / ar
    zq = np.clip(np.floor(z * DEPTH_LEVELS), 0, DEPTH_LEVELS).astype(np.uint32)
    key = (zq << np.uint32(16)) | idx[owner].astype(np.uint32)
    np.minimum.at(depth_buf, row * width + col, key)


def _written_roi(pvp: PixelViewport, mask: np.ndarray) -> PixelViewport:
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    if len(rows) == 0:
        return PixelViewport(pvp.x, pvp.y, 0, 0)
    return PixelViewport(
        pvp.x + int(cols[0]), pvp.y + int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1)
    )
