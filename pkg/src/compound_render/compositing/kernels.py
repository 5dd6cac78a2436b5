"""Per-pixel recombination kernels.

All kernels return new images and never modify their inputs. Integer
arithmetic is fixed so results are reproducible bit for bit:

* blend: ``out = src + (dst * (255 - src.a) + 127) // 255`` saturating at 255
* box filter and averaging: round half up, ``(sum + n // 2) // n``
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from compound_render.compositing.image import FAR_DEPTH, Image, ImageError
from compound_render.geometry import PixelKernel, PixelViewport

ALL_CHANNELS = (True, True, True, True)


class BlendOrder(Enum):
    BACK_TO_FRONT = "back_to_front"
    FRONT_TO_BACK = "front_to_back"


class CompositeOp(Enum):
    Z_COMPOSITE = "zComposite"
    BLEND_OVER = "blendOver"
    COPY = "copy"
    ACCUMULATE = "accumulate"


def _overlap(dst: Image, src: Image) -> PixelViewport:
    return dst.pvp.intersect(src.roi)


def _merged_roi(dst: Image, region: PixelViewport) -> PixelViewport:
    roi = dst.roi.union(region) if not region.empty else dst.roi
    return dst.pvp.intersect(roi) if not roi.empty else roi


def z_composite(dst: Image, src: Image) -> Image:
    """Keep the nearer fragment per pixel; ties keep ``dst``."""
    if dst.depth is None or src.depth is None:
        raise ImageError("z_composite needs depth on both images")
    out = dst.copy()
    region = _overlap(dst, src)
    if region.empty:
        return out
    d_rows, d_cols = region.slices(dst.pvp)
    s_rows, s_cols = region.slices(src.pvp)
    sd = src.depth[s_rows, s_cols]
    nearer = sd < out.depth[d_rows, d_cols]
    out.depth[d_rows, d_cols] = np.where(nearer, sd, out.depth[d_rows, d_cols])
    out.color[d_rows, d_cols] = np.where(
        nearer[..., None], src.color[s_rows, s_cols], out.color[d_rows, d_cols]
    )
    out.roi = _merged_roi(dst, region)
    return out


def _over(front: np.ndarray, back: np.ndarray) -> np.ndarray:
    f = front.astype(np.uint32)
    b = back.astype(np.uint32)
    inv = 255 - f[..., 3:4]
    out = f + (b * inv + 127) // 255
    return np.minimum(out, 255).astype(np.uint8)


def blend_over(dst: Image, src: Image, order: BlendOrder = BlendOrder.BACK_TO_FRONT) -> Image:
    """Premultiplied "over".

    ``BACK_TO_FRONT``: ``src`` is nearer and goes over ``dst``.
    ``FRONT_TO_BACK``: ``dst`` holds the nearer accumulation and ``src`` goes under it.
    """
    out = dst.copy()
    region = _overlap(dst, src)
    if region.empty:
        return out
    d_rows, d_cols = region.slices(dst.pvp)
    s_rows, s_cols = region.slices(src.pvp)
    a = dst.color[d_rows, d_cols]
    b = src.color[s_rows, s_cols]
    if order is BlendOrder.BACK_TO_FRONT:
        out.color[d_rows, d_cols] = _over(b, a)
    else:
        out.color[d_rows, d_cols] = _over(a, b)
    out.roi = _merged_roi(dst, region)
    return out


def _box_downscale(color: np.ndarray, kx: int, ky: int) -> np.ndarray:
    h, w = color.shape[0] // ky, color.shape[1] // kx
    blocks = color[: h * ky, : w * kx].astype(np.uint32).reshape(h, ky, w, kx, 4)
    n = kx * ky
    return ((blocks.sum(axis=(1, 3)) + n // 2) // n).astype(np.uint8)


def _resample(color: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = color.shape[:2]
    if (out_w, out_h) == (w, h):
        return color.copy()
    if out_w and out_h and w % out_w == 0 and h % out_h == 0:
        return _box_downscale(color, w // out_w, h // out_h)
    cols = np.minimum(((np.arange(out_w) + 0.5) * w / out_w).astype(np.int64), w - 1)
    rows = np.minimum(((np.arange(out_h) + 0.5) * h / out_h).astype(np.int64), h - 1)
    return color[rows][:, cols]


def zoomed_extent(pvp: PixelViewport, zoom: tuple[float, float]) -> tuple[int, int]:
    return max(int(round(pvp.w * zoom[0])), 0), max(int(round(pvp.h * zoom[1])), 0)


def assemble_tile(
    dst: Image,
    src: Image,
    offset: tuple[int, int] = (0, 0),
    zoom: tuple[float, float] = (1.0, 1.0),
    mask: tuple[bool, bool, bool, bool] = ALL_CHANNELS,
) -> Image:
    """Copy ``src`` into ``dst`` at its own position plus ``offset``.

    Unzoomed copies move only the ROI (and depth, when both have it). A zoom
    resamples the whole source: integer downscales use a box filter, other
    factors nearest-neighbour.
    """
    out = dst.copy()
    chans = [i for i in range(4) if mask[i]]
    if zoom == (1.0, 1.0) or zoom == (1, 1):
        if src.roi.empty:
            return out
        target = PixelViewport(src.roi.x + offset[0], src.roi.y + offset[1], src.roi.w, src.roi.h)
        if not dst.pvp.contains(target):
            raise ImageError(f"tile {target} placed outside {dst.pvp}")
        rows, cols = target.slices(dst.pvp)
        s_rows, s_cols = src.roi.slices(src.pvp)
        out.color[rows, cols, chans] = src.color[s_rows, s_cols][..., chans]
        if out.depth is not None and src.depth is not None:
            out.depth[rows, cols] = src.depth[s_rows, s_cols]
        out.roi = _merged_roi(dst, target)
        return out
    w, h = zoomed_extent(src.pvp, zoom)
    target = PixelViewport(src.pvp.x + offset[0], src.pvp.y + offset[1], w, h)
    if not dst.pvp.contains(target):
        raise ImageError(f"zoomed tile {target} placed outside {dst.pvp}")
    if target.empty:
        return out
    rows, cols = target.slices(dst.pvp)
    out.color[rows, cols, chans] = _resample(src.color, w, h)[..., chans]
    out.roi = _merged_roi(dst, target)
    return out


def accumulate_average(images: Sequence[Image]) -> Image:
    """Per channel ``(sum + n // 2) // n`` over images with identical viewports."""
    if not images:
        raise ImageError("accumulate_average needs at least one image")
    pvp = images[0].pvp
    if any(im.pvp != pvp for im in images):
        raise ImageError("accumulate_average needs identical pixel viewports")
    n = len(images)
    total = np.zeros((pvp.h, pvp.w, 4), np.uint32)
    roi = PixelViewport(pvp.x, pvp.y, 0, 0)
    for im in images:
        total += im.color
        roi = roi.union(im.roi)
    color = ((total + n // 2) // n).astype(np.uint8)
    return Image(pvp, color, None, roi)


def pixel_grid(parent: PixelViewport, kernel: PixelKernel) -> tuple[slice, slice, PixelViewport]:
    """Row/col slices of the owned pixels relative to ``parent`` and the reduced viewport."""
    rw = max(0, -(-(parent.w - kernel.dx) // kernel.w))
    rh = max(0, -(-(parent.h - kernel.dy) // kernel.h))
    return (
        slice(kernel.dy, parent.h, kernel.h),
        slice(kernel.dx, parent.w, kernel.w),
        PixelViewport(parent.x, parent.y, rw, rh),
    )


def gather_pixels(src: Image, parent: PixelViewport, kernel: PixelKernel) -> Image:
    """Pack the pixels owned by ``kernel`` into a reduced image."""
    full = src.expand(parent)
    rows, cols, reduced = pixel_grid(parent, kernel)
    depth = None if full.depth is None else full.depth[rows, cols].copy()
    return Image(reduced, full.color[rows, cols].copy(), depth, reduced)


def scatter_pixels(
    dst: Image,
    src: Image,
    parent: PixelViewport,
    kernel: PixelKernel,
    mask: tuple[bool, bool, bool, bool] = ALL_CHANNELS,
) -> Image:
    """Inverse of :func:`gather_pixels`: write a reduced image to its owned pixels."""
    out = dst.copy()
    rows, cols, reduced = pixel_grid(parent, kernel)
    if src.pvp.w != reduced.w or src.pvp.h != reduced.h:
        raise ImageError(f"reduced image {src.pvp} does not match kernel grid {reduced}")
    if not dst.pvp.contains(parent):
        raise ImageError(f"pixel assembly region {parent} outside {dst.pvp}")
    prow, pcol = parent.slices(dst.pvp)
    owned = out.color[prow, pcol][rows, cols]
    owned[...] = np.where(np.array(mask, bool), src.color, owned)
    if out.depth is not None and src.depth is not None:
        out.depth[prow, pcol][rows, cols] = src.depth
    out.roi = _merged_roi(dst, parent)
    return out


def assemble_out_of_order(
    base: Image, pending: Sequence[Image], arrival: Iterable[int], op: CompositeOp
) -> Image:
    """Fold ``pending`` onto ``base`` in arrival order.

    Only order-independent operations are allowed; ordered blending must use
    its configured order instead.
    """
    arrival = list(arrival)
    if sorted(arrival) != list(range(len(pending))):
        raise ValueError("arrival order must be a permutation of the pending inputs")
    if op is CompositeOp.Z_COMPOSITE:
        out = base
        for i in arrival:
            out = z_composite(out, pending[i])
        return out
    if op is CompositeOp.ACCUMULATE:
        return accumulate_average([base] + [pending[i] for i in arrival])
    raise ValueError(f"{op.value} depends on input order and cannot be assembled out of order")


def clear(image: Image, region: PixelViewport | None = None, mask=ALL_CHANNELS) -> Image:
    """Reset color (under ``mask``) and depth to background inside ``region``."""
    out = image.copy()
    region = image.pvp if region is None else image.pvp.intersect(region)
    if region.empty:
        return out
    rows, cols = region.slices(image.pvp)
    chans = [i for i in range(4) if mask[i]]
    out.color[rows, cols, chans] = 0
    if out.depth is not None:
        out.depth[rows, cols] = FAR_DEPTH
    return out
