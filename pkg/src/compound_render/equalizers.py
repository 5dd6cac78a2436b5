"""Runtime compound adaptation from per-frame statistics.

Every equalizer here is a pure function of (previous state, statistics,
parameters). The simulator calls them once per frame before generating tasks,
using the statistics of the newest complete frame.

Regions are boxes ``((x0, x1), (y0, y1))`` in fractions of the root area.
Range (database) decompositions use the x interval and keep ``y = (0, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from compound_render.geometry import PixelViewport, Range, Viewport

Box = tuple[tuple[float, float], tuple[float, float]]
UNIT_BOX: Box = ((0.0, 1.0), (0.0, 1.0))


class SplitMode(Enum):
    VERTICAL = "VERTICAL"  # columns: splits along x
    HORIZONTAL = "HORIZONTAL"  # rows: splits along y
    TWO_D = "2D"  # alternate x then y by tree depth
    DB = "DB"  # database range, split along the range


@dataclass(frozen=True)
class EqualizerParams:
    mode: SplitMode = SplitMode.TWO_D
    damping: float = 0.5
    resistance: float = 0.0  # pixels (range fraction for DB)
    boundary: float = 0.0  # pixels (range fraction for DB); 0 disables snapping
    extent: tuple[int, int] = (1, 1)  # destination pixel size, converts pixels to fractions

    def __post_init__(self):
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError(f"damping {self.damping} outside [0, 1]")
        if self.resistance < 0 or self.boundary < 0:
            raise ValueError("resistance and boundary must be non-negative")


@dataclass
class SplitNode:
    """Binary kD node. Leaves carry a child index, inner nodes a relative split."""

    leaf: int | None = None
    axis: int = 0
    fraction: float = 0.5
    left: "SplitNode | None" = None
    right: "SplitNode | None" = None

    def leaves(self) -> list[int]:
        if self.leaf is not None:
            return [self.leaf]
        return self.left.leaves() + self.right.leaves()

    def copy(self) -> "SplitNode":
        if self.leaf is not None:
            return SplitNode(leaf=self.leaf)
        return SplitNode(None, self.axis, self.fraction, self.left.copy(), self.right.copy())


def build_split_tree(count: int, mode: SplitMode, weights: Sequence[float] | None = None) -> SplitNode:
    """Balanced tree over children ``0..count-1`` with splits proportional to leaf counts."""

    def build(lo: int, hi: int, depth: int) -> SplitNode:
        if hi - lo == 1:
            return SplitNode(leaf=lo)
        mid = lo + (hi - lo) // 2
        if mode is SplitMode.HORIZONTAL:
            axis = 1
        elif mode is SplitMode.TWO_D:
            axis = depth % 2
        else:
            axis = 0
        return SplitNode(None, axis, (mid - lo) / (hi - lo), build(lo, mid, depth + 1), build(mid, hi, depth + 1))

    if count < 1:
        raise ValueError("split tree needs at least one child")
    return build(0, count, 0)


def _sub(box: Box, axis: int, lo: float, hi: float) -> Box:
    return ((lo, hi), box[1]) if axis == 0 else (box[0], (lo, hi))


def leaf_regions(tree: SplitNode, active: Sequence[bool] | None = None, root: Box = UNIT_BOX) -> dict[int, Box | None]:
    """Boxes per child. A subtree without active leaves yields its area to its sibling."""
    out: dict[int, Box | None] = {}

    def any_active(node: SplitNode) -> bool:
        return active is None or any(active[i] for i in node.leaves())

    def walk(node: SplitNode, box: Box | None):
        if node.leaf is not None:
            out[node.leaf] = box if (box is not None and any_active(node)) else None
            return
        if box is None:
            walk(node.left, None)
            walk(node.right, None)
            return
        la, ra = any_active(node.left), any_active(node.right)
        if la and not ra:
            walk(node.left, box)
            walk(node.right, None)
            return
        if ra and not la:
            walk(node.left, None)
            walk(node.right, box)
            return
        lo, hi = box[node.axis]
        cut = lo + node.fraction * (hi - lo)
        walk(node.left, _sub(box, node.axis, lo, cut) if cut > lo else None)
        walk(node.right, _sub(box, node.axis, cut, hi) if hi > cut else None)

    walk(tree, root)
    return out


def box_area(box: Box) -> float:
    return (box[0][1] - box[0][0]) * (box[1][1] - box[1][0])


def box_to_viewport(box: Box) -> Viewport:
    (x0, x1), (y0, y1) = box
    return Viewport(x0, y0, x1 - x0, y1 - y0)


def box_to_range(box: Box) -> Range:
    return Range(box[0][0], box[0][1])


def viewport_to_box(vp: Viewport) -> Box:
    return ((vp.x, vp.x + vp.w), (vp.y, vp.y + vp.h))


def range_to_box(r: Range) -> Box:
    return ((r.lo, r.hi), (0.0, 1.0))


# -- load grid -----------------------------------------------------------------


@dataclass(frozen=True)
class LoadGrid:
    """Piecewise-constant cost density: non-overlapping boxes with time/area values."""

    cells: tuple[tuple[Box, float], ...]

    @classmethod
    def from_stats(
        cls,
        regions: Sequence[Box | None],
        times: Sequence[float],
        rois: Sequence[Box | None] | None = None,
    ) -> "LoadGrid":
        """Spread each child's time over its ROI within its region (or the whole region)."""
        cells = []
        for i, (box, t) in enumerate(zip(regions, times)):
            if box is None or box_area(box) <= 0:
                continue
            roi = rois[i] if rois is not None else None
            target = box
            if roi is not None:
                clipped = _intersect(box, roi)
                if clipped is not None and box_area(clipped) > 0:
                    target = clipped
            cells.append((target, max(float(t), 0.0) / box_area(target)))
        return cls(tuple(cells))

    def total(self) -> float:
        return sum(d * box_area(b) for b, d in self.cells)

    def integral(self, box: Box) -> float:
        acc = 0.0
        for b, d in self.cells:
            inter = _intersect(b, box)
            if inter is not None:
                acc += d * box_area(inter)
        return acc

    def split_position(self, box: Box, axis: int, fraction: float) -> float:
        """Position along ``axis`` where the integral over ``box`` reaches ``fraction``.

        The cumulative integral is piecewise linear, so it is inverted exactly.
        A density floor of 1e-6 of the mean keeps the inverse unique over empty areas.
        """
        lo, hi = box[axis]
        edges = {lo, hi}
        pieces = []
        for b, d in self.cells:
            inter = _intersect(b, box)
            if inter is None:
                continue
            span = inter[1 - axis][1] - inter[1 - axis][0]
            a0, a1 = inter[axis]
            edges.update((a0, a1))
            pieces.append((a0, a1, d * span))
        edges = np.array(sorted(e for e in edges if lo <= e <= hi))
        mids = (edges[:-1] + edges[1:]) / 2
        marginal = np.zeros(mids.size)
        for a0, a1, m in pieces:
            marginal[(mids >= a0) & (mids < a1)] += m
        width = np.diff(edges)
        total = float((marginal * width).sum())
        marginal = marginal + 1e-6 * (total / (hi - lo) if total > 0 else 1.0)
        cumulative = np.concatenate(([0.0], np.cumsum(marginal * width)))
        goal = fraction * cumulative[-1]
        k = int(np.searchsorted(cumulative, goal, side="left"))
        if k == 0:
            return lo
        if k >= cumulative.size:
            return hi
        return float(edges[k - 1] + (goal - cumulative[k - 1]) / marginal[k - 1])


def _intersect(a: Box, b: Box) -> Box | None:
    x0, x1 = max(a[0][0], b[0][0]), min(a[0][1], b[0][1])
    y0, y1 = max(a[1][0], b[1][0]), min(a[1][1], b[1][1])
    if x1 <= x0 or y1 <= y0:
        return None
    return ((x0, x1), (y0, y1))


# -- damping / resistance / boundary -------------------------------------------


def _quantum(params: EqualizerParams, axis: int) -> float:
    """One pixel along ``axis`` as a root fraction (1 for DB, where params are fractions)."""
    if params.mode is SplitMode.DB:
        return 1.0
    return 1.0 / params.extent[axis]


def _settle(old_abs: float, target_abs: float, lo: float, hi: float, axis: int, params: EqualizerParams) -> float:
    new = old_abs + params.damping * (target_abs - old_abs)
    q = _quantum(params, axis)
    if abs(new - old_abs) < params.resistance * q or new == old_abs:
        return old_abs
    if params.boundary > 0:
        # splits are whole pixels anyway; a sub-pixel boundary snaps to pixels
        step = params.boundary * q if params.mode is SplitMode.DB else max(params.boundary * q, q)
        if step > 0 and math.isfinite(new / step):
            new = round(new / step) * step
    elif params.mode is not SplitMode.DB:
        new = round(new / q) * q
    return min(max(new, lo), hi)


def _apply(
    tree: SplitNode,
    params: EqualizerParams,
    weights: Sequence[float],
    target_fraction,
) -> SplitNode:
    """Walk ``tree`` top-down, moving each split toward ``target_fraction(node, box, wl, wr)``."""
    new_tree = tree.copy()

    def weight(node: SplitNode) -> float:
        return sum(weights[i] for i in node.leaves())

    def walk(node: SplitNode, old: SplitNode, box: Box):
        if node.leaf is not None:
            return
        wl, wr = weight(node.left), weight(node.right)
        lo, hi = box[node.axis]
        if wl > 0 and wr > 0 and hi > lo:
            old_abs = lo + old.fraction * (hi - lo)
            target_abs = target_fraction(node, box, wl, wr)
            new_abs = _settle(old_abs, target_abs, lo, hi, node.axis, params)
            node.fraction = (new_abs - lo) / (hi - lo)
        cut = lo + node.fraction * (hi - lo)
        if wl > 0 and wr > 0:
            walk(node.left, old.left, _sub(box, node.axis, lo, cut))
            walk(node.right, old.right, _sub(box, node.axis, cut, hi))
        else:
            walk(node.left, old.left, box)
            walk(node.right, old.right, box)

    walk(new_tree, tree, UNIT_BOX)
    return new_tree


def load_balance(
    tree: SplitNode,
    regions: Sequence[Box | None],
    times: Sequence[float],
    params: EqualizerParams,
    usage: Sequence[float] | None = None,
    rois: Sequence[Box | None] | None = None,
) -> SplitNode:
    """Equalize the cost integral on both sides of every split.

    ``regions``/``times``/``rois`` describe the previous frame per child. With
    usage weights each side's target integral is proportional to the summed
    usage of its leaves; usage 0 removes a child.
    """
    n = len(regions)
    weights = list(usage) if usage is not None else [1.0] * n
    grid = LoadGrid.from_stats(regions, times, rois)
    if grid.total() <= 0:
        return tree.copy()

    def target(node: SplitNode, box: Box, wl: float, wr: float) -> float:
        return grid.split_position(box, node.axis, wl / (wl + wr))

    return _apply(tree, params, weights, target)


def tree_balance(
    tree: SplitNode,
    regions: Sequence[Box | None],
    times: Sequence[float],
    params: EqualizerParams,
    usage: Sequence[float] | None = None,
) -> SplitNode:
    """Resize subtrees so predicted times match, assuming time proportional to size.

    Each leaf's throughput is ``usage * size / time``; a subtree's share of its
    parent is its summed throughput over both subtrees' sum.
    """
    n = len(regions)
    weights = list(usage) if usage is not None else [1.0] * n
    if any(regions[i] is not None and times[i] <= 0 for i in range(n)):
        return tree.copy()
    power = []
    for i in range(n):
        box = regions[i]
        if box is None or weights[i] <= 0:
            power.append(0.0)
            continue
        size = box[0][1] - box[0][0] if params.mode is SplitMode.DB else box_area(box)
        power.append(weights[i] * size / times[i])

    def subtotal(node: SplitNode) -> float:
        return sum(power[i] for i in node.leaves())

    def target(node: SplitNode, box: Box, wl: float, wr: float) -> float:
        pl, pr = subtotal(node.left), subtotal(node.right)
        lo, hi = box[node.axis]
        if pl + pr <= 0:
            return lo + node.fraction * (hi - lo)
        if pl <= 0 or pr <= 0:
            # a leaf that had no region last frame gets the uniform share of its weight
            return lo + wl / (wl + wr) * (hi - lo)
        return lo + pl / (pl + pr) * (hi - lo)

    return _apply(tree, params, weights, target)


# -- cross-segment load balancing ---------------------------------------------


@dataclass(frozen=True)
class Resource:
    name: str
    home: int | None  # destination index whose output channel this resource drives


def view_balance(demands: Sequence[float], resources: Sequence[Resource]) -> list[dict[int, float]]:
    """Per-resource usage per destination.

    Destinations receive capacity in proportion to demand. Each resource
    first serves its home destination, then leftover capacity goes to the
    destination with the largest unmet share. A resource serves at most two
    destinations.
    """
    m = len(resources)
    total = float(sum(demands))
    if total <= 0:
        return [{r.home: 1.0} if r.home is not None else {} for r in resources]
    need = [m * d / total for d in demands]
    alloc: list[dict[int, float]] = [dict() for _ in resources]
    left = [1.0] * m
    eps = 1e-12
    for i, r in enumerate(resources):
        if r.home is not None and need[r.home] > eps:
            give = min(left[i], need[r.home])
            alloc[i][r.home] = give
            left[i] -= give
            need[r.home] -= give
    order = sorted(range(m), key=lambda i: (-left[i], i))
    for i in order:
        while left[i] > eps and len(alloc[i]) < 2:
            candidates = [d for d in range(len(need)) if need[d] > eps and d not in alloc[i]]
            if not candidates:
                break
            d = max(candidates, key=lambda k: (need[k], -k))
            give = min(left[i], need[d])
            alloc[i][d] = give
            left[i] -= give
            need[d] -= give
    return alloc


def destination_usage(alloc: Sequence[Mapping[int, float]], destination: int) -> list[float]:
    """Usage vector over all resources for one destination's child equalizer."""
    return [a.get(destination, 0.0) for a in alloc]


# -- frame-rate oriented equalizers --------------------------------------------


@dataclass(frozen=True)
class DFRState:
    scale: float = 1.0

    @property
    def zoom(self) -> float:
        return 1.0 / self.scale


def dfr_update(
    measured: float,
    target: float,
    scale: float,
    damping: float = 1.0,
    min_scale: float = 0.25,
    max_scale: float = 2.0,
) -> DFRState:
    """Fill-bound model ``time ~ scale**2``: move toward ``scale * sqrt(target / measured)``."""
    if measured <= 0:
        raw = max_scale
    else:
        raw = scale * math.sqrt(target / measured)
    new = scale + damping * (raw - scale)
    return DFRState(min(max(new, min_scale), max_scale))


def framerate_limit(last_swap: float, now: float, target_fps: float) -> float:
    if target_fps <= 0:
        raise ValueError("target framerate must be positive")
    return max(now, last_swap + 1.0 / target_fps)


@dataclass(frozen=True)
class MonitorPlacement:
    offset: tuple[int, int]
    zoom: float


def monitor_update(segments: Sequence[PixelViewport], monitor: PixelViewport) -> list[MonitorPlacement]:
    """Uniformly scale the wall's bounding box onto the monitor channel."""
    wall = segments[0]
    for s in segments[1:]:
        wall = wall.union(s)
    zoom = min(monitor.w / wall.w, monitor.h / wall.h)
    return [
        MonitorPlacement(
            (int(math.floor((s.x - wall.x) * zoom)), int(math.floor((s.y - wall.y) * zoom))), zoom
        )
        for s in segments
    ]
