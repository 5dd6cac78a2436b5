import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compound_render.equalizers import (
    UNIT_BOX,
    EqualizerParams,
    LoadGrid,
    Resource,
    SplitMode,
    box_area,
    build_split_tree,
    destination_usage,
    dfr_update,
    framerate_limit,
    leaf_regions,
    load_balance,
    monitor_update,
    tree_balance,
    view_balance,
)
from compound_render.geometry import PixelViewport

VERT = EqualizerParams(SplitMode.VERTICAL, damping=1.0, extent=(3000, 3000))


def regions(tree, active=None):
    r = leaf_regions(tree, active)
    return [r[i] for i in sorted(r)]


def assert_partition(boxes, total=1.0):
    live = [b for b in boxes if b is not None]
    assert sum(box_area(b) for b in live) == pytest.approx(total, abs=1e-12)
    for i, a in enumerate(live):
        for b in live[i + 1 :]:
            ox = min(a[0][1], b[0][1]) - max(a[0][0], b[0][0])
            oy = min(a[1][1], b[1][1]) - max(a[1][0], b[1][0])
            assert ox <= 1e-12 or oy <= 1e-12


def test_equal_times_keep_split():
    tree = build_split_tree(2, SplitMode.VERTICAL)
    new = load_balance(tree, regions(tree), [10.0, 10.0], VERT)
    assert new.fraction == 0.5


def test_load_balance_hand_integral():
    # density 20 on [0, .5], 60 on [.5, 1]; half of 40 is reached at 10 + 60 (x - .5) = 20
    tree = build_split_tree(2, SplitMode.VERTICAL)
    new = load_balance(tree, regions(tree), [10.0, 30.0], VERT)
    assert new.fraction == pytest.approx(2 / 3)


def test_damping_zero_never_moves():
    tree = build_split_tree(2, SplitMode.VERTICAL)
    params = EqualizerParams(SplitMode.VERTICAL, damping=0.0, extent=(100, 100))
    assert load_balance(tree, regions(tree), [1.0, 99.0], params).fraction == 0.5
    assert tree_balance(tree, regions(tree), [1.0, 99.0], params).fraction == 0.5


def test_tree_balance_normalization():
    # throughputs 0.5/10 : 0.5/30 = 3 : 1
    tree = build_split_tree(2, SplitMode.VERTICAL)
    new = tree_balance(tree, regions(tree), [10.0, 30.0], VERT)
    assert new.fraction == pytest.approx(0.75)
    assert tree_balance(tree, regions(tree), [7.0, 7.0], VERT).fraction == 0.5


def test_usage_zero_deactivates_child():
    tree = build_split_tree(2, SplitMode.VERTICAL)
    new = tree_balance(tree, regions(tree), [10.0, 10.0], VERT, usage=[1.0, 0.0])
    boxes = regions(new, active=[True, False])
    assert boxes == [UNIT_BOX, None]


def test_usage_weights_scale_target_integral():
    # uniform load, usage 3:1 -> the left side gets three quarters
    tree = build_split_tree(2, SplitMode.VERTICAL)
    new = load_balance(tree, regions(tree), [10.0, 10.0], VERT, usage=[0.75, 0.25])
    assert new.fraction == pytest.approx(0.75)


def test_resistance_suppresses_small_moves():
    tree = build_split_tree(2, SplitMode.VERTICAL)
    params = EqualizerParams(SplitMode.VERTICAL, damping=1.0, resistance=10, extent=(100, 100))
    # the target moves by ~0.5 pixel
    assert load_balance(tree, regions(tree), [10.0, 10.2], params).fraction == 0.5


def test_boundary_snaps_split():
    tree = build_split_tree(2, SplitMode.VERTICAL)
    params = EqualizerParams(SplitMode.VERTICAL, damping=1.0, boundary=16, extent=(640, 480))
    new = load_balance(tree, regions(tree), [10.0, 30.0], params)
    # 2/3 of 640 = 426.7 px snaps to 432 = 27 * 16
    assert new.fraction * 640 == pytest.approx(432)


@pytest.mark.parametrize("mode", [SplitMode.VERTICAL, SplitMode.DB])
def test_tiny_boundary_does_not_divide_by_zero(mode):
    tree = build_split_tree(2, mode)
    params = EqualizerParams(mode, damping=1.0, boundary=5e-324, extent=(640, 480))
    new = load_balance(tree, regions(tree), [10.0, 30.0], params)
    assert 0.5 < new.fraction < 1


def test_scale_invariance():
    tree = build_split_tree(4, SplitMode.TWO_D)
    params = EqualizerParams(SplitMode.TWO_D, damping=1.0, extent=(640, 480))
    times = [3.0, 5.0, 11.0, 2.0]
    a = regions(load_balance(tree, regions(tree), times, params))
    b = regions(load_balance(tree, regions(tree), [t * 7.5 for t in times], params))
    assert a == b


@given(
    st.integers(2, 7),
    st.sampled_from([SplitMode.VERTICAL, SplitMode.HORIZONTAL, SplitMode.TWO_D, SplitMode.DB]),
    st.floats(0, 1),
    st.floats(0, 20),
    st.floats(0, 20),
    st.lists(st.floats(0.01, 100), min_size=7, max_size=7),
    st.booleans(),
)
@settings(max_examples=150, deadline=None)
def test_splits_always_partition(n, mode, damping, resistance, boundary, times, use_tree):
    params = EqualizerParams(mode, damping, resistance, boundary if mode is not SplitMode.DB else boundary / 100, (640, 480))
    tree = build_split_tree(n, mode)
    for _ in range(4):
        prev = regions(tree)
        fn = tree_balance if use_tree else load_balance
        tree = fn(tree, prev, times[:n], params)
        assert_partition(regions(tree))


@given(st.integers(2, 9))
@settings(deadline=None)
def test_converges_on_uniform_load_in_two_frames(n):
    # true cost is uniform over the screen: each child's time is its area
    params = EqualizerParams(SplitMode.VERTICAL, damping=1.0, extent=(100_000, 1))
    tree = build_split_tree(n, SplitMode.VERTICAL)
    for _ in range(2):
        boxes = regions(tree)
        tree = load_balance(tree, boxes, [box_area(b) for b in boxes], params)
    areas = [box_area(b) for b in regions(tree)]
    assert max(areas) - min(areas) <= 2 / 100_000


def test_load_grid_uses_roi():
    grid = LoadGrid.from_stats([((0, 1), (0, 1))], [8.0], [((0, 0.5), (0, 1))])
    assert grid.integral(((0, 0.5), (0, 1))) == pytest.approx(8.0)
    assert grid.integral(((0.5, 1), (0, 1))) == 0.0
    # the empty half still gets a tiny floor so the split stays unique
    assert grid.split_position(UNIT_BOX, 0, 0.5) == pytest.approx(0.25, abs=1e-5)


# -- view balance ----------------------------------------------------------------


def test_view_balance_proportional_oracle():
    alloc = view_balance([0.75, 0.25], [Resource("g1", 0), Resource("g2", 1)])
    assert alloc[0] == {0: 1.0}
    assert alloc[1] == pytest.approx({1: 0.5, 0: 0.5})
    assert destination_usage(alloc, 0) == pytest.approx([1.0, 0.5])
    assert destination_usage(alloc, 1) == pytest.approx([0.0, 0.5])


def test_equal_demands_identity():
    alloc = view_balance([1, 1, 1], [Resource(f"g{i}", i) for i in range(3)])
    assert alloc == [{0: 1.0}, {1: 1.0}, {2: 1.0}]


def test_zero_demand_destination():
    alloc = view_balance([1.0, 0.0], [Resource("a", 0), Resource("b", 1)])
    assert alloc == [{0: 1.0}, {0: 1.0}]


@given(st.lists(st.floats(0, 50), min_size=1, max_size=8), st.integers(1, 20), st.data())
def test_view_balance_constraints(demands, m, data):
    homes = data.draw(st.lists(st.none() | st.integers(0, len(demands) - 1), min_size=m, max_size=m))
    alloc = view_balance(demands, [Resource(f"r{i}", h) for i, h in enumerate(homes)])
    for a in alloc:
        assert sum(a.values()) <= 1 + 1e-9
        assert len(a) <= 2
        assert all(v >= 0 for v in a.values())
    if sum(demands) > 0:
        # capacity is never handed to a destination without demand
        for a in alloc:
            assert all(demands[d] > 0 for d in a)


# -- DFR, framerate, monitor ------------------------------------------------------


def test_dfr_examples():
    assert dfr_update(16.5, 16.5, 0.8).scale == 0.8
    assert dfr_update(33.0, 16.5, 1.0).scale == pytest.approx(math.sqrt(0.5))
    assert dfr_update(0.1, 16.5, 1.0).scale == 2.0
    assert dfr_update(1e6, 16.5, 1.0).scale == 0.25
    assert dfr_update(33.0, 16.5, 1.0).zoom == pytest.approx(1 / math.sqrt(0.5))


@given(st.floats(0.3, 1.9), st.floats(1.0, 50.0))
def test_dfr_closed_loop(scale0, k):
    # time = k * scale**2; the fixed point is sqrt(target / k)
    target = 16.6
    s = scale0
    for _ in range(10):
        s = dfr_update(k * s * s, target, s, damping=0.5).scale
    fixed = min(max(math.sqrt(target / k), 0.25), 2.0)
    if fixed == math.sqrt(target / k):
        assert abs(k * s * s - target) / target <= 0.1
    assert dfr_update(k * fixed**2, target, fixed, damping=0.5).scale == pytest.approx(fixed)


def test_framerate_limit():
    assert framerate_limit(0.0, 0.05, 10.0) == pytest.approx(0.1)
    assert framerate_limit(0.0, 0.25, 10.0) == 0.25
    with pytest.raises(ValueError):
        framerate_limit(0, 0, 0)


def test_monitor_same_size():
    segs = [PixelViewport(0, 0, 100, 50), PixelViewport(100, 0, 100, 50)]
    out = monitor_update(segs, PixelViewport(0, 0, 200, 50))
    assert [(p.offset, p.zoom) for p in out] == [((0, 0), 1.0), ((100, 0), 1.0)]


def test_monitor_half_size():
    segs = [PixelViewport(0, 0, 1024, 1024), PixelViewport(1024, 0, 1024, 1024)]
    out = monitor_update(segs, PixelViewport(0, 0, 1024, 512))
    assert [(p.offset, p.zoom) for p in out] == [((0, 0), 0.5), ((512, 0), 0.5)]


def test_monitor_resize_keeps_uniform_scale():
    segs = [PixelViewport(0, 0, 1024, 1024), PixelViewport(1024, 0, 1024, 1024)]
    out = monitor_update(segs, PixelViewport(0, 0, 700, 700))
    assert {p.zoom for p in out} == {700 / 2048}
