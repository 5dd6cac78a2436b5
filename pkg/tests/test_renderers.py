from dataclasses import replace

import numpy as np
import pytest

from compound_render import presets
from compound_render.compositing.image import Image
from compound_render.compositing.kernels import BlendOrder, accumulate_average, blend_over, scatter_pixels, z_composite
from compound_render.config import parse_config
from compound_render.config.model import TaskKind
from compound_render.geometry import PixelKernel, PixelViewport, Range, SubpixelKernel
from compound_render.simrender.raster import nrooks_offsets, render_triangles
from compound_render.simrender.scene import MAX_TRIANGLES, david_like_mesh, procedural_volume, quad_mesh
from compound_render.simrender.volume import render_volume
from compound_render.tasking import compute_roi, generate_tasks, resolve_destination

import oracles


@pytest.fixture(scope="module")
def ctx():
    cfg = parse_config(presets.single(160, 120))
    root = cfg.compounds[0]
    plan = generate_tasks(root, 0, "mono", resolve_destination(cfg, root))
    return next(t.context for t in plan.tasks if t.kind is TaskKind.DRAW)


@pytest.fixture(scope="module")
def small_mesh():
    return david_like_mesh(2000, seed=3, radius=1.4)


def test_render_is_deterministic(small_mesh, ctx):
    a, b = render_triangles(small_mesh, ctx), render_triangles(small_mesh, ctx)
    assert a.same_pixels(b, depth=True)
    assert a.roi == a.written_bounds() and not a.roi.empty


@pytest.mark.parametrize("n", [2, 3, 5])
def test_range_parts_composite_to_full(small_mesh, ctx, n):
    full = render_triangles(small_mesh, ctx)
    parts = [render_triangles(small_mesh, replace(ctx, range=Range(i / n, (i + 1) / n))) for i in range(n)]
    colors = [p.color for p in parts]
    depths = [p.depth for p in parts]
    want_c, want_d = oracles.z_fold(colors, depths)
    assert np.array_equal(want_c, full.color) and np.array_equal(want_d, full.depth)
    acc = parts[0]
    for p in parts[1:]:
        acc = z_composite(acc, p)
    assert acc.same_pixels(full, depth=True)


def test_depth_encodes_triangle_index(small_mesh, ctx):
    rng = Range(0.25, 0.5)
    img = render_triangles(small_mesh, replace(ctx, range=rng))
    lo, hi = small_mesh.span(rng)
    written = img.depth != oracles.FAR
    tri = img.depth[written] & 0xFFFF
    assert tri.min() >= lo and tri.max() < hi
    assert small_mesh.triangle_count <= MAX_TRIANGLES


@pytest.mark.parametrize("kernel", [(2, 1), (2, 2), (3, 1)])
def test_pixel_kernel_parts_assemble_to_full(small_mesh, ctx, kernel):
    full = render_triangles(small_mesh, ctx)
    out = Image.blank(ctx.pvp)
    kw, kh = kernel
    for dy in range(kh):
        for dx in range(kw):
            k = PixelKernel(kw, kh, dx, dy)
            part = render_triangles(small_mesh, replace(ctx, pixel=k))
            out = scatter_pixels(out, part, ctx.pvp, k)
    assert out.same_pixels(full, depth=True)


def test_viewport_parts_tile_full(small_mesh, ctx):
    full = render_triangles(small_mesh, ctx)
    top = render_triangles(small_mesh, replace(ctx, pvp=PixelViewport(0, 0, 160, 50)))
    bottom = render_triangles(small_mesh, replace(ctx, pvp=PixelViewport(0, 50, 160, 70)))
    assert np.array_equal(top.color, full.color[:50]) and np.array_equal(bottom.color, full.color[50:])


def test_nrooks_pattern():
    for n in (2, 4, 8):
        offs = nrooks_offsets(n)
        xs = sorted(round((x + 0.5) * n - 0.5) for x, _ in offs)
        ys = sorted(round((y + 0.5) * n - 0.5) for _, y in offs)
        assert xs == ys == list(range(n))
    assert nrooks_offsets(1) == ((0.0, 0.0),)


def test_subpixel_samples_differ_and_average(small_mesh, ctx):
    samples = [render_triangles(small_mesh, replace(ctx, subpixel=SubpixelKernel(4, i))) for i in range(4)]
    assert not samples[0].same_pixels(samples[1])
    avg = accumulate_average(samples)
    assert np.array_equal(avg.color, oracles.average([s.color for s in samples]))


def test_roi_covers_rendered_pixels(ctx):
    for seed in range(4):
        mesh = david_like_mesh(800, seed=seed, radius=0.6 + 0.3 * seed)
        for rng in (Range(0, 0.5), Range(0.5, 1)):
            c = replace(ctx, range=rng)
            img = render_triangles(mesh, c)
            roi = compute_roi(mesh.bounds(rng, 0), c)
            if not img.roi.empty:
                assert roi.contains(img.roi)


def test_quad_fills_screen(ctx):
    img = render_triangles(quad_mesh(8, 8, -2.0, 4), ctx)
    assert (img.depth != oracles.FAR).all()


# -- volume ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def vol():
    return procedural_volume(32, seed=0)


def test_volume_full_render_deterministic(vol, ctx):
    a, b = render_volume(vol, ctx), render_volume(vol, ctx)
    assert a.same_pixels(b) and a.depth is None
    # premultiplied: no component exceeds alpha
    assert (a.color[..., :3] <= a.color[..., 3:4]).all()


def test_single_slice_slabs_equal_full(vol, ctx):
    # one slice per slab turns slab blending into the renderer's own left fold
    v = vol.resolution
    full = render_volume(vol, ctx)
    acc = None
    for k in range(v):
        s = render_volume(vol, replace(ctx, range=Range(k / v, (k + 1) / v)))
        acc = s if acc is None else blend_over(acc, s, BlendOrder.FRONT_TO_BACK)
    assert acc.same_pixels(full)


@pytest.mark.parametrize("n", [2, 4])
def test_slabs_match_blend_oracle(vol, ctx, n):
    parts = [render_volume(vol, replace(ctx, range=Range(i / n, (i + 1) / n))) for i in range(n)]
    acc = parts[-1]
    for p in reversed(parts[:-1]):
        acc = blend_over(acc, p, BlendOrder.BACK_TO_FRONT)
    # the oracle folds back-most first: low range values are in front
    assert np.array_equal(acc.color, oracles.blend_fold([p.color for p in reversed(parts)]))
    # integer "over" is not associative; thick slabs drift from the full march by a few levels
    full = render_volume(vol, ctx)
    assert np.abs(acc.color.astype(int) - full.color.astype(int)).max() <= 3


def test_empty_bricks_shrink_roi(vol, ctx):
    img = render_volume(vol, ctx)
    assert img.roi.w < ctx.pvp.w and img.roi.h < ctx.pvp.h
    assert img.roi.contains(img.written_bounds())
    # the front slab is empty: nothing written, empty ROI
    front = render_volume(vol, replace(ctx, range=Range(0, 0.2)))
    assert front.roi.empty
