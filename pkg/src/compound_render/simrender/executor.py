"""Image semantics of clear, draw, readback and assemble tasks.

Every framebuffer lives in destination pixel coordinates, whichever channel
owns it. Region-of-interest bookkeeping runs even when image work is off, so
timing-only simulations transmit the same byte counts as full ones.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from compound_render.compositing.image import Image
from compound_render.compositing.kernels import (
    BlendOrder,
    accumulate_average,
    assemble_tile,
    blend_over,
    clear,
    gather_pixels,
    scatter_pixels,
    z_composite,
)
from compound_render.config.model import DEPTH
from compound_render.geometry import PixelViewport, Range, narrow_frustum
from compound_render.simrender.raster import project, render_triangles
from compound_render.simrender.scene import TriangleMesh, VolumeBricks
from compound_render.simrender.volume import render_volume
from compound_render.tasking import ChunkItem, FrameLink, RenderContext, Task, TileItem, compute_roi

FbKey = tuple[str, str, object]  # (channel, destination, eye or None)


def renderer_for(scene) -> Callable[[object, RenderContext], Image]:
    if isinstance(scene, TriangleMesh):
        return render_triangles
    if isinstance(scene, VolumeBricks):
        return render_volume
    raise TypeError(f"unsupported scene {type(scene).__name__}")


def primitive_count(scene, rng: Range) -> int:
    a, b = scene.span(rng) if isinstance(scene, TriangleMesh) else scene.slice_span(rng)
    return max(b - a, 0)


def render_parallel(scene, ctx: RenderContext, workers: int = 1) -> Image:
    """Render ``ctx``; plain contexts are split into row bands across threads.

    Bands are sort-first sub-renders, which are bit-identical to the
    single-threaded result, so the output does not depend on ``workers``.
    """
    render = renderer_for(scene)
    plain = ctx.pixel.is_identity and not ctx.zoomed
    if workers <= 1 or not plain or ctx.pvp.h < 2 * workers:
        return render(scene, ctx)
    edges = [ctx.pvp.y + (ctx.pvp.h * k) // workers for k in range(workers + 1)]
    bands = [PixelViewport(ctx.pvp.x, edges[k], ctx.pvp.w, edges[k + 1] - edges[k]) for k in range(workers)]
    subs = [replace(ctx, pvp=b, frustum=narrow_frustum(ctx.frustum, ctx.pvp, b)) for b in bands]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: render(scene, c), subs))
    has_depth = parts[0].depth is not None
    out = Image.blank(ctx.pvp, depth=has_depth)
    roi = PixelViewport(ctx.pvp.x, ctx.pvp.y, 0, 0)
    for part in parts:
        rows, cols = part.pvp.slices(ctx.pvp)
        out.color[rows, cols] = part.color
        if has_depth:
            out.depth[rows, cols] = part.depth
        roi = roi.union(part.roi)
    out.roi = roi
    return out


@dataclass
class FrameData:
    """A read-back output frame travelling to its consumers."""

    link: FrameLink
    producer: Task
    kind: str  # "plain", "pixel" or "zoom"
    region: PixelViewport  # destination pixels it covers
    roi: PixelViewport  # transmitted part (reduced coordinates for pixel/zoom)
    cover: tuple[float, float] | None  # database range composited into it
    has_depth: bool
    image: Image | None = None
    zoom: tuple[float, float] = (1.0, 1.0)  # assembly scale
    subpixel: bool = False
    in_fb: bool = True  # a view of the producer's framebuffer (False for queue items)

    @property
    def pixels(self) -> int:
        return self.roi.area

    @property
    def nbytes(self) -> int:
        return self.roi.area * (8 if self.has_depth else 4)


def _union_cover(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return (min(a[0], b[0]), max(a[1], b[1]))


def _z_merge(dst: Image, src: Image, mask) -> Image:
    """Depth-tested write of ``src`` into ``dst`` (same viewport), honouring a color mask."""
    out = dst.copy()
    nearer = src.depth < out.depth
    out.depth = np.where(nearer, src.depth, out.depth)
    m = nearer[..., None] & np.array(mask, bool)
    out.color = np.where(m, src.color, out.color)
    return out


class Executor:
    def __init__(
        self,
        scene,
        anaglyph: bool = False,
        render: bool = True,
        roi: bool = True,
        workers: int = 1,
        dest_channels: frozenset = frozenset(),
    ):
        self.scene = scene
        self.anaglyph = anaglyph
        self.render = render
        self.use_roi = roi
        self.workers = workers
        self.dest_channels = dest_channels
        self.fb: dict[FbKey, Image] = {}
        self.fb_pvp: dict[FbKey, PixelViewport] = {}
        self.fb_roi: dict[FbKey, PixelViewport] = {}
        self.fb_cover: dict[FbKey, tuple[float, float] | None] = {}
        self.fb_subpixel: dict[FbKey, bool] = {}
        self.side: dict[tuple, Image] = {}  # zoomed draws, per compound
        self._cull_cache: dict = {}

    # -- framebuffer plumbing ------------------------------------------------------

    def key(self, task: Task) -> FbKey:
        ctx = task.context
        if self.anaglyph and task.channel in self.dest_channels:
            return (task.channel, ctx.destination, None)
        return (task.channel, ctx.destination, ctx.eye)

    def _ensure(self, key: FbKey, ctx: RenderContext):
        if key not in self.fb_pvp:
            self.fb_pvp[key] = ctx.dest_pvp
            self.fb_roi[key] = PixelViewport(ctx.dest_pvp.x, ctx.dest_pvp.y, 0, 0)
            self.fb_cover[key] = None
            self.fb_subpixel[key] = False
            if self.render:
                self.fb[key] = Image.blank(ctx.dest_pvp)

    def framebuffer(self, channel: str, destination: str, eye) -> Image | None:
        return self.fb.get((channel, destination, eye))

    def draw_roi(self, ctx: RenderContext) -> PixelViewport:
        return compute_roi(self.scene.bounds(ctx.range, ctx.frame), ctx)

    def primitives(self, ctx: RenderContext) -> int:
        """Primitives a draw submits after culling against its own viewport."""
        if not isinstance(self.scene, TriangleMesh):
            return primitive_count(self.scene, ctx.range)
        key = (ctx.frame, ctx.head, ctx.dest_pvp, ctx.dest_frustum)
        boxes = self._cull_cache.get(key)
        if boxes is None:
            px, py, dz = project(self.scene.world_vertices(ctx.frame)[self.scene.triangles], ctx)
            ok = np.all((dz >= ctx.dest_frustum.near) & (dz <= ctx.dest_frustum.far), axis=1)
            boxes = (px.min(axis=1), px.max(axis=1), py.min(axis=1), py.max(axis=1), ok)
            self._cull_cache = {key: boxes}
        x0, x1, y0, y1, ok = boxes
        a, b = self.scene.span(ctx.range)
        p = ctx.pvp
        sl = slice(a, b)
        hit = ok[sl] & (x1[sl] >= p.x) & (x0[sl] <= p.x1) & (y1[sl] >= p.y) & (y0[sl] <= p.y1)
        return int(hit.sum())

    # -- tasks -----------------------------------------------------------------------

    def clear(self, task: Task) -> int:
        key, ctx = self.key(task), task.context
        self._ensure(key, ctx)
        region = ctx.pvp
        if region.contains(self.fb_roi[key]) or self.fb_roi[key].empty:
            self.fb_roi[key] = PixelViewport(self.fb_pvp[key].x, self.fb_pvp[key].y, 0, 0)
        self.fb_cover[key] = None
        self.fb_subpixel[key] = False
        if self.render:
            self.fb[key] = clear(self.fb[key], region, ctx.color_mask)
        return region.area

    def draw(self, task: Task) -> tuple[int, int]:
        """Returns (primitives, fragments) for the cost model."""
        key, ctx = self.key(task), task.context
        self._ensure(key, ctx)
        roi = self.draw_roi(ctx)
        img_pvp = ctx.image_pvp()
        scale = img_pvp.area / ctx.pvp.area if ctx.pvp.area else 0.0
        fragments = int(round(roi.area * scale))
        self.fb_roi[key] = self.fb_roi[key].union(roi) if not roi.empty else self.fb_roi[key]
        self.fb_cover[key] = _union_cover(self.fb_cover[key], (ctx.range.lo, ctx.range.hi))
        if not ctx.subpixel.is_identity:
            self.fb_subpixel[key] = True
        if self.render:
            image = render_parallel(self.scene, ctx, self.workers)
            if ctx.zoomed:
                self.side[key + (task.compound,)] = image
            elif not ctx.pixel.is_identity:
                fb = self.fb[key]
                packed = gather_pixels(fb.crop(ctx.pvp), ctx.pvp, ctx.pixel)
                merged = _z_merge(packed, image, ctx.color_mask) if image.depth is not None else image
                self.fb[key] = scatter_pixels(fb, merged, ctx.pvp, ctx.pixel, ctx.color_mask)
            else:
                fb = self.fb[key]
                if image.depth is not None:
                    part = fb.crop(ctx.pvp)
                    merged = _z_merge(part, image, ctx.color_mask)
                    merged.roi = ctx.pvp
                    self.fb[key] = assemble_tile(fb, merged)
                else:
                    self.fb[key] = blend_over(fb, image, BlendOrder.BACK_TO_FRONT)
        elif ctx.zoomed:
            self.side[key + (task.compound,)] = None
        return self.primitives(ctx), fragments

    def readback(self, task: Task) -> list[FrameData]:
        key, ctx = self.key(task), task.context
        self._ensure(key, ctx)
        out = []
        for link in task.outputs:
            depth = DEPTH in link.buffers
            if ctx.zoomed:
                img_pvp = ctx.image_pvp()
                image = self.side.get(key + (task.compound,)) if self.render else None
                if image is not None and not depth:
                    image = Image(image.pvp, image.color, None, image.pvp)
                zoom = (ctx.pvp.w / img_pvp.w, ctx.pvp.h / img_pvp.h)
                out.append(
                    FrameData(link, task, "zoom", ctx.pvp, img_pvp, self.fb_cover[key], depth, image, zoom,
                              not ctx.subpixel.is_identity)
                )
            elif not ctx.pixel.is_identity:
                img_pvp = ctx.image_pvp()
                image = None
                if self.render:
                    image = gather_pixels(self.fb[key].crop(ctx.pvp), ctx.pvp, ctx.pixel)
                    if not depth:
                        image = Image(image.pvp, image.color, None, image.pvp)
                out.append(FrameData(link, task, "pixel", ctx.pvp, img_pvp, self.fb_cover[key], depth, image))
            else:
                region = link.region
                roi = self.fb_roi[key].intersect(region) if self.use_roi else region
                if roi.empty:
                    roi = PixelViewport(region.x, region.y, 0, 0)
                image = None
                if self.render:
                    image = self.fb[key].crop(region, with_depth=depth)
                    image.roi = roi
                    if link.zoom != (1.0, 1.0):
                        image = _scale_frame(image, link.zoom)
                kind, zoom, tx_roi = "plain", (1.0, 1.0), roi
                if link.zoom != (1.0, 1.0):
                    w = max(1, int(round(region.w * link.zoom[0])))
                    h = max(1, int(round(region.h * link.zoom[1])))
                    kind, zoom = "zoom", (region.w / w, region.h / h)
                    tx_roi = PixelViewport(region.x, region.y, w, h)
                    depth = False
                out.append(
                    FrameData(link, task, kind, region, tx_roi, self.fb_cover[key], depth, image, zoom,
                              not ctx.subpixel.is_identity)
                )
        return out

    def draw_item(self, task: Task, item, index: int) -> tuple[FrameData, int, int]:
        """Render one queue item straight into an output frame."""
        ctx = task.context
        if isinstance(item, TileItem):
            ictx = replace(ctx, pvp=item.pvp, frustum=narrow_frustum(ctx.frustum, ctx.pvp, item.pvp))
        elif isinstance(item, ChunkItem):
            ictx = replace(ctx, range=ctx.range.compose(item.range))
        else:
            raise TypeError(item)
        roi = self.draw_roi(ictx)
        link = task.outputs[0]
        depth = DEPTH in link.buffers
        link = replace(link, name=f"{link.name}#{index}", region=ictx.pvp)
        image = None
        if self.render:
            image = render_parallel(self.scene, ictx, self.workers)
            if not depth:
                image = Image(image.pvp, image.color, None, image.roi)
            image.roi = roi if self.use_roi else ictx.pvp
        tx_roi = roi if self.use_roi else ictx.pvp
        if tx_roi.empty:
            tx_roi = PixelViewport(ictx.pvp.x, ictx.pvp.y, 0, 0)
        item_task = replace(task, context=ictx)
        data = FrameData(
            link, item_task, "plain", ictx.pvp, tx_roi, (ictx.range.lo, ictx.range.hi), depth, image, in_fb=False
        )
        return data, self.primitives(ictx), roi.area

    def is_in_place(self, data: FrameData, consumer: Task) -> bool:
        """Same framebuffer, unscaled and not a subpixel sample: nothing to copy."""
        return (
            data.producer.channel == consumer.channel
            and data.producer.context.destination == consumer.context.destination
            and data.kind != "zoom"
            and not data.subpixel
            and data.in_fb
        )

    def assemble(self, task: Task, inputs: list[FrameData]) -> int:
        """Composite ``inputs`` into the task's framebuffer; returns assembled pixels."""
        key, ctx = self.key(task), task.context
        self._ensure(key, ctx)
        mask = ctx.color_mask
        inputs = [d for d in inputs if not self.is_in_place(d, task)]
        pixels = sum(d.pixels for d in inputs)
        for d in inputs:
            roi = d.region if d.kind != "plain" else d.roi
            if not roi.empty:
                self.fb_roi[key] = self.fb_roi[key].union(roi)
        own_cover = self.fb_cover[key]
        for d in inputs:
            self.fb_cover[key] = _union_cover(self.fb_cover[key], d.cover)
        if not self.render:
            return pixels
        fb = self.fb[key]
        averaged = [d for d in inputs if d.subpixel]
        if averaged:
            region = ctx.pvp
            layers = []
            if self.fb_subpixel[key]:
                layers.append(fb.crop(region, with_depth=False))
            for d in averaged:
                img = d.image
                if d.kind == "zoom":
                    img = assemble_tile(Image.blank(region, depth=False), img, zoom=d.zoom)
                layers.append(img.expand(region))
            avg = accumulate_average([Image(l.pvp, l.color, None, l.roi) for l in layers])
            fb = assemble_tile(fb, Image(avg.pvp, avg.color, None, avg.pvp), mask=mask)
            inputs = [d for d in inputs if not d.subpixel]
        blends = [d for d in inputs if d.image.depth is None and d.kind == "plain" and _partial(d.cover)]
        for d in inputs:
            if d in blends:
                continue
            img = d.image
            if d.kind == "pixel":
                kernel = d.producer.context.pixel
                fb = scatter_pixels(fb, img, d.region, kernel, mask)
            elif d.kind == "zoom":
                fb = assemble_tile(fb, img, zoom=d.zoom, mask=mask)
            elif img.depth is not None and fb.depth is not None:
                fb = z_composite(fb, img)
            else:
                fb = assemble_tile(fb, img, mask=mask)
        if blends:
            fb = self._ordered_blend(fb, ctx.pvp, blends, own_cover, mask)
        self.fb[key] = fb
        return pixels

    @staticmethod
    def _ordered_blend(fb: Image, region: PixelViewport, blends: list[FrameData], own_cover, mask) -> Image:
        """Fold inputs and the framebuffer's own layer back to front over ``region``."""
        layers = [(d.cover[0], i + 1, d.image) for i, d in enumerate(blends)]
        if own_cover is not None:
            own = fb.crop(region, with_depth=False)
            layers.append((own_cover[0], 0, own))
        layers.sort(key=lambda t: (-t[0], t[1]))
        acc = Image.blank(region, depth=False)
        for _, _, img in layers:
            acc = blend_over(acc, img, BlendOrder.BACK_TO_FRONT)
        acc.roi = region
        return assemble_tile(fb, acc, mask=mask)


def _partial(cover) -> bool:
    return cover is not None and not (cover[0] <= 0.0 and cover[1] >= 1.0)


def _scale_frame(image: Image, zoom: tuple[float, float]) -> Image:
    """Resample an output frame by its explicit zoom (color only)."""
    w = max(1, int(round(image.pvp.w * zoom[0])))
    h = max(1, int(round(image.pvp.h * zoom[1])))
    scaled = assemble_tile(
        Image.blank(PixelViewport(image.pvp.x, image.pvp.y, w, h), depth=False),
        Image(image.pvp, image.color, None, image.pvp),
        zoom=(w / image.pvp.w, h / image.pvp.h),
    )
    scaled.roi = scaled.pvp
    return scaled


