import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from compound_render.geometry import (
    Eye,
    FrustumError,
    FrustumPlanes,
    GeometryError,
    Observer,
    PixelKernel,
    PixelViewport,
    Projection,
    Range,
    SubpixelKernel,
    Viewport,
    Wall,
    apply_dynamic_focus,
    eye_world_position,
    narrow_frustum,
    projection_to_wall,
    round_edge,
    viewport_of,
    wall_to_planes,
)

UNIT_WALL = Wall((-1, -1, -1), (1, -1, -1), (-1, 1, -1))


@pytest.mark.parametrize(
    "value, expected",
    [(511.5, 511), (299.99999999999994, 300), (0.5, 0), (1.5, 1), (-0.5, -1), (2.4999, 2), (2.5001, 3)],
)
def test_round_edge_half_down(value, expected):
    assert round_edge(value) == expected


def test_viewport_of_band():
    # 768 * 0.5 = 384 and 768 * 0.75 = 576
    pvp = viewport_of(PixelViewport(0, 0, 1024, 768), Viewport(0, 0.5, 1, 0.25))
    assert pvp == PixelViewport(0, 384, 1024, 192)


@given(st.lists(st.integers(1, 99), min_size=1, max_size=6), st.integers(1, 2000))
def test_viewport_bands_tile_exactly(cuts, height):
    # any fractional partition of [0,1] maps to abutting pixel bands
    edges = sorted({c / 100 for c in cuts} | {0.0, 1.0})
    parent = PixelViewport(3, 7, 50, height)
    bands = [viewport_of(parent, Viewport(0, a, 1, b - a)) for a, b in zip(edges, edges[1:])]
    assert bands[0].y == parent.y and bands[-1].y1 == parent.y1
    for a, b in zip(bands, bands[1:]):
        assert a.y1 == b.y
    assert sum(b.h for b in bands) == height


def test_viewport_validation():
    with pytest.raises(GeometryError):
        Viewport(0, 0, 0, 1)
    with pytest.raises(GeometryError):
        Viewport(0.5, 0, 0.6, 1)


@given(
    st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0.1, 0.5), st.floats(0.1, 0.5),
    st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0.1, 0.5), st.floats(0.1, 0.5),
)
def test_viewport_compose_is_affine(px, py, pw, ph, cx, cy, cw, ch):
    parent, child = Viewport(px, py, pw, ph), Viewport(cx, cy, cw, ch)
    c = parent.compose(child)
    assert math.isclose(c.x, px + cx * pw) and math.isclose(c.w, cw * pw)
    back = c.relative_to(parent)
    assert math.isclose(back.x, cx, abs_tol=1e-9) and math.isclose(back.h, ch, abs_tol=1e-9)


def test_pixel_viewport_ops():
    a, b = PixelViewport(0, 0, 10, 10), PixelViewport(5, 5, 10, 10)
    assert a.intersect(b) == PixelViewport(5, 5, 5, 5)
    assert a.union(b) == PixelViewport(0, 0, 15, 15)
    assert a.intersect(PixelViewport(20, 20, 1, 1)).empty
    assert a.union(PixelViewport(3, 3, 0, 0)) == a
    assert a.contains(PixelViewport(2, 2, 3, 3)) and not a.contains(b)
    assert b.slices(a) == (slice(5, 15), slice(5, 15))


def test_range_compose_and_span():
    assert Range(0.5, 1.0).compose(Range(0.0, 0.5)) == Range(0.5, 0.75)
    # [floor(lo*n), floor(hi*n))
    assert Range(0.0, 0.5).index_span(5) == (0, 2)
    assert Range(0.5, 1.0).index_span(5) == (2, 5)
    with pytest.raises(GeometryError):
        Range(0.6, 0.5)


@given(st.integers(1, 50), st.integers(1, 4))
def test_range_halves_partition_indices(n, parts):
    spans = [Range(k / parts, (k + 1) / parts).index_span(n) for k in range(parts)]
    assert spans[0][0] == 0 and spans[-1][1] == n
    assert all(a[1] == b[0] for a, b in zip(spans, spans[1:]))


def test_kernel_compose():
    assert PixelKernel(2, 1, 1, 0).compose(PixelKernel(2, 1, 1, 0)) == PixelKernel(4, 1, 3, 0)
    assert SubpixelKernel(2, 1).compose(SubpixelKernel(2, 1)) == SubpixelKernel(4, 3)
    with pytest.raises(GeometryError):
        PixelKernel(2, 1, 2, 0)


def test_unit_wall_gives_ninety_degree_frustum():
    # eye at the origin, wall 2 x 2 at distance 1: edges at +-near
    planes, head = wall_to_planes(UNIT_WALL, (0, 0, 0), 0.1, 100)
    assert planes.as_tuple() == pytest.approx((-0.1, 0.1, -0.1, 0.1, 0.1, 100))
    assert np.allclose(head, np.eye(4))


def test_off_axis_frustum():
    # eye shifted right by 0.5: the wall spans [-1.5, 0.5] relative to it
    planes, head = wall_to_planes(UNIT_WALL, (0.5, 0, 0), 0.1, 100)
    assert planes.left == pytest.approx(-0.15) and planes.right == pytest.approx(0.05)
    assert head[0, 3] == pytest.approx(-0.5)


def test_eye_behind_wall_rejected():
    with pytest.raises(FrustumError):
        wall_to_planes(UNIT_WALL, (0, 0, -2), 0.1, 100)


def test_projection_wall_matches_fov():
    # fov half-angle 45 degrees at distance 2 -> wall half-width 2
    wall = projection_to_wall(Projection((0, 0, 0), (0, 0, 0), (math.radians(45), math.radians(45)), 2.0))
    assert wall.width == pytest.approx(4.0) and wall.height == pytest.approx(4.0)
    assert wall.bottom_left[2] == pytest.approx(-2.0)


def test_sub_wall_measures_y_from_top():
    top = UNIT_WALL.sub_wall(Viewport(0, 0, 1, 0.5))
    assert top.bottom_left[1] == pytest.approx(0.0) and top.top_left[1] == pytest.approx(1.0)


@given(st.integers(1, 639), st.integers(1, 479))
def test_narrow_frustum_children_share_planes(cx, cy):
    planes = FrustumPlanes(-0.1, 0.1, -0.075, 0.075, 0.1, 100)
    parent = PixelViewport(0, 0, 640, 480)
    left = narrow_frustum(planes, parent, PixelViewport(0, 0, cx, 480))
    right = narrow_frustum(planes, parent, PixelViewport(cx, 0, 640 - cx, 480))
    assert left.right == right.left
    top = narrow_frustum(planes, parent, PixelViewport(0, 0, 640, cy))
    bottom = narrow_frustum(planes, parent, PixelViewport(0, cy, 640, 480 - cy))
    assert top.bottom == bottom.top and top.top == planes.top


def test_stereo_eye_positions_follow_head():
    head = ((1, 0, 0, 2), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))
    obs = Observer(head_matrix=head)
    assert eye_world_position(obs, Eye.LEFT) == pytest.approx([2 - 0.032, 0, 0])
    assert eye_world_position(obs, Eye.RIGHT) == pytest.approx([2 + 0.032, 0, 0])


def test_observer_rejects_scaling_head():
    with pytest.raises(GeometryError):
        Observer(head_matrix=((2, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)))


@given(st.floats(0.2, 10.0))
def test_dynamic_focus_leaves_cyclop_unchanged(focus):
    planes = FrustumPlanes(-0.1, 0.1, -0.1, 0.1, 0.1, 100)
    out = apply_dynamic_focus(planes, 1.0, focus, (0.0, 0.0, 0.0))
    assert out.as_tuple() == pytest.approx(planes.as_tuple())


def test_dynamic_focus_moves_zero_parallax_plane():
    # a right eye at +e sees the focal point straight ahead shifted by -e on the focal plane
    e = 0.032
    planes, _ = wall_to_planes(UNIT_WALL, (e, 0, 0), 0.1, 100)
    refocused = apply_dynamic_focus(planes, 1.0, 2.0, (e, 0, 0))
    # a point on the cyclop axis at distance 2 projects to x_near = -e * near / 2
    centre = -e * 0.1 / 2
    # the wall centre (ratio 2 scaling) lands at the refocused frustum's centre
    assert (refocused.left + refocused.right) / 2 == pytest.approx(centre, abs=1e-12)
