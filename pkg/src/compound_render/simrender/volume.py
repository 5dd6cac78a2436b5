"""Slice-based front-to-back volume renderer with integer compositing."""

from __future__ import annotations

import numpy as np

from compound_render.compositing.image import Image
from compound_render.compositing.kernels import _over
from compound_render.simrender.raster import sample_positions
from compound_render.simrender.scene import VolumeBricks
from compound_render.tasking import RenderContext


def pixel_rays(ctx: RenderContext) -> tuple[np.ndarray, np.ndarray]:
    """World-space ray origin (3,) and per-sample directions (h, w, 3)."""
    xs, ys = sample_positions(ctx)
    f, d = ctx.dest_frustum, ctx.dest_pvp
    xn = f.left + (xs - d.x) / d.w * (f.right - f.left)
    yn = f.top - (ys - d.y) / d.h * (f.top - f.bottom)
    gx, gy = np.meshgrid(xn, yn)
    local = np.stack([gx, gy, np.full_like(gx, -f.near)], axis=-1)
    head = ctx.head_matrix
    rot, trans = head[:3, :3], head[:3, 3]
    origin = -rot.T @ trans
    return origin, local @ rot  # row vectors: v @ R == R^T v


def render_volume(scene: VolumeBricks, ctx: RenderContext) -> Image:
    """Composite the slices of ``ctx.range`` front to back with the integer "over".

    Each slice is a plane of constant world z sampled nearest-voxel along
    every pixel ray. The result carries no depth.
    """
    img = ctx.image_pvp()
    acc = np.zeros((img.h, img.w, 4), np.uint8)
    a, b = scene.slice_span(ctx.range)
    if not img.empty and b > a:
        origin, dirs = pixel_rays(ctx)
        v = scene.resolution
        step = scene.size / v
        x_lo = scene.center[0] - scene.size / 2
        y_hi = scene.center[1] + scene.size / 2
        occupied = scene.voxels[..., 3].reshape(v, -1).any(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            for k in range(a, b):
                if not occupied[k]:
                    continue
                t = (scene.slice_z(k) - origin[2]) / dirs[..., 2]
                x = origin[0] + t * dirs[..., 0]
                y = origin[1] + t * dirs[..., 1]
                ix = np.floor((x - x_lo) / step)
                iy = np.floor((y_hi - y) / step)
                hit = (t > 0) & (ix >= 0) & (ix < v) & (iy >= 0) & (iy < v)
                if not hit.any():
                    continue
                sample = np.zeros_like(acc)
                sample[hit] = scene.voxels[k, iy[hit].astype(np.int64), ix[hit].astype(np.int64)]
                acc = _over(acc, sample)
    out = Image(img, acc, None)
    out.roi = out.written_bounds()
    return out
