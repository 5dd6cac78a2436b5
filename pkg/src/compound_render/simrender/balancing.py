"""Runs the configured equalizers between frames by mutating compounds in place."""

from __future__ import annotations

from dataclasses import dataclass, field

from compound_render.config.model import Compound, EqualizerKind, EqualizerSpec
from compound_render.equalizers import (
    Box,
    EqualizerParams,
    Resource,
    SplitMode,
    SplitNode,
    box_to_range,
    box_to_viewport,
    build_split_tree,
    destination_usage,
    dfr_update,
    leaf_regions,
    load_balance,
    tree_balance,
    view_balance,
)
from compound_render.geometry import PixelViewport, viewport_of

DEFAULT_DAMPING = 0.5


@dataclass
class FrameStats:
    """What the equalizers see of one finished frame of one root."""

    duration_ns: int
    draw_ns: dict[tuple[int, ...], int]  # per compound path
    draw_roi: dict[tuple[int, ...], PixelViewport]  # union of draw ROIs per compound path

    def subtree_draw(self, path: tuple[int, ...]) -> int:
        n = len(path)
        return sum(t for p, t in self.draw_ns.items() if p[:n] == path)

    def subtree_roi(self, path: tuple[int, ...]) -> PixelViewport | None:
        n = len(path)
        roi = None
        for p, r in self.draw_roi.items():
            if p[:n] == path and not r.empty:
                roi = r if roi is None else roi.union(r)
        return roi

    @property
    def total_draw(self) -> int:
        return sum(self.draw_ns.values())


def _mode(spec: EqualizerSpec) -> SplitMode:
    if spec.mode is None:
        return SplitMode.TWO_D
    return SplitMode(spec.mode.upper())


def compound_pvp(root: Compound, path: tuple[int, ...], dest: PixelViewport) -> PixelViewport:
    pvp, node = dest, root
    if node.viewport is not None:
        pvp = viewport_of(pvp, node.viewport)
    for i in path:
        node = node.children[i]
        if node.viewport is not None:
            pvp = viewport_of(pvp, node.viewport)
    return pvp


def _to_box(roi: PixelViewport, area: PixelViewport) -> Box:
    return (
        ((roi.x - area.x) / area.w, (roi.x1 - area.x) / area.w),
        ((roi.y - area.y) / area.h, (roi.y1 - area.y) / area.h),
    )


@dataclass
class SplitState:
    """A load or tree equalizer attached to one compound."""

    root: int
    path: tuple[int, ...]
    compound: Compound
    spec: EqualizerSpec
    params: EqualizerParams
    tree: SplitNode
    origin: tuple[int, int] = (0, 0)  # compound pixel viewport origin in destination pixels
    child_channels: list[str] = field(default_factory=list)
    dest_channel: str | None = None
    history: dict[int, list[Box | None]] = field(default_factory=dict)
    failed: set[int] = field(default_factory=set)  # child indices removed for good

    def usage(self) -> list[float]:
        out = []
        for i, c in enumerate(self.compound.children):
            u = 1.0 if c.usage is None else c.usage
            out.append(0.0 if i in self.failed else u)
        return out

    def active(self) -> list[bool]:
        return [u > 0 for u in self.usage()]

    def apply(self, frame: int):
        regions = leaf_regions(self.tree, self.active())
        boxes = [regions.get(i) for i in range(len(self.compound.children))]
        for i, child in enumerate(self.compound.children):
            box = boxes[i]
            if box is None:
                child.active = False
                continue
            child.active = True
            if self.params.mode is SplitMode.DB:
                child.range = box_to_range(box)
            else:
                child.viewport = box_to_viewport(box)
                ext = self.params.extent
                if viewport_of(PixelViewport(0, 0, ext[0], ext[1]), child.viewport).empty:
                    child.active = False  # rounds to zero pixels
                    boxes[i] = None
        self.history[frame] = boxes


@dataclass
class DFRRuntime:
    root: int
    compound: Compound
    target_ns: float
    damping: float
    scale: float = 1.0
    history: list[float] = field(default_factory=list)

    def apply(self):
        for child in self.compound.children:
            child.zoom = (self.scale, self.scale)


class EqualizerRuntime:
    """Owns equalizer state across frames for all roots of a simulation."""

    def __init__(
        self,
        roots: list[Compound],
        dest_pvps: list[PixelViewport],
        dest_channels: list[str],
        groups: list[tuple[Compound, list[int]]],
    ):
        self.roots = roots
        self.splits: list[SplitState] = []
        self.dfr: list[DFRRuntime] = []
        self.framerate: dict[int, float] = {}
        self.view_groups: list[tuple[Compound, list[int]]] = []
        self.allocations: dict[int, list[dict[int, float]]] = {}
        for r, root in enumerate(roots):
            for path, c, channel in _walk(root, (), dest_channels[r]):
                for spec in c.equalizers:
                    if spec.kind in (EqualizerKind.LOAD, EqualizerKind.TREE) and c.children:
                        mode = _mode(spec)
                        pvp = compound_pvp(root, path, dest_pvps[r])
                        params = EqualizerParams(
                            mode,
                            DEFAULT_DAMPING if spec.damping is None else spec.damping,
                            spec.resistance or 0.0,
                            spec.boundary or 0.0,
                            (max(pvp.w, 1), max(pvp.h, 1)),
                        )
                        tree = build_split_tree(len(c.children), mode)
                        kids = [child.channel or channel for child in c.children]
                        self.splits.append(
                            SplitState(r, path, c, spec, params, tree, (pvp.x, pvp.y), kids, dest_channels[r])
                        )
                    elif spec.kind is EqualizerKind.DFR:
                        target = spec.target if spec.target is not None else 1000.0 / (spec.framerate or 60.0)
                        damping = DEFAULT_DAMPING if spec.damping is None else spec.damping
                        self.dfr.append(DFRRuntime(r, c, target * 1e6, damping))
                    elif spec.kind is EqualizerKind.FRAMERATE and path == ():
                        self.framerate[r] = spec.framerate or 60.0
                    elif spec.kind is EqualizerKind.TILE and c.output_queue is not None and spec.tilesize:
                        c.output_queue.tilesize = tuple(spec.tilesize)
        for group, members in groups:
            if any(s.kind is EqualizerKind.VIEW for s in group.equalizers):
                self.view_groups.append((group, members))

    def split_for(self, root: int) -> list[SplitState]:
        return [s for s in self.splits if s.root == root]

    def fail_channels(self, dead: set[str]) -> None:
        for s in self.splits:
            for i, ch in enumerate(s.child_channels):
                if ch in dead:
                    s.failed.add(i)

    def before_frame(self, frame: int, stats_frame: int | None, stats: dict[int, FrameStats] | None) -> None:
        """Update compounds for ``frame`` from the per-root ``stats`` of ``stats_frame``.

        Both are None until the first frame has finished.
        """
        if stats is not None:
            self._view(frame, stats)
        for s in self.splits:
            if stats is not None and s.root in stats and stats_frame in s.history:
                self._balance(s, stats[s.root], s.history[stats_frame])
            s.apply(frame)
        for d in self.dfr:
            if stats is not None and d.root in stats:
                st = dfr_update(stats[d.root].duration_ns, d.target_ns, d.scale, d.damping)
                d.scale = st.scale
            d.history.append(d.scale)
            d.apply()

    def _balance(self, s: SplitState, st: FrameStats, regions: list[Box | None]):
        n = len(s.compound.children)
        area = PixelViewport(0, 0, *s.params.extent)
        times, rois = [], []
        for i in range(n):
            path = s.path + (i,)
            times.append(float(st.subtree_draw(path)))
            roi = st.subtree_roi(path)
            if roi is None or s.params.mode is SplitMode.DB or regions[i] is None:
                rois.append(None)
            else:
                local = PixelViewport(roi.x - s.origin[0], roi.y - s.origin[1], roi.w, roi.h)
                rois.append(_to_box(local, area))
        live = [regions[i] if s.usage()[i] > 0 else None for i in range(n)]
        if all(r is None for r in live):
            return
        if s.spec.kind is EqualizerKind.LOAD:
            s.tree = load_balance(s.tree, live, times, s.params, s.usage(), rois)
        else:
            s.tree = tree_balance(s.tree, live, times, s.params, s.usage())

    def _view(self, frame: int, stats: dict[int, FrameStats]):
        for group, members in self.view_groups:
            splits = [next((s for s in self.split_for(r)), None) for r in members]
            if any(s is None for s in splits):
                continue
            names: list[str] = []
            for s in splits:
                for ch in s.child_channels:
                    if ch not in names:
                        names.append(ch)
            homes = {s.dest_channel: d for d, s in enumerate(splits)}
            resources = [Resource(n, homes.get(n)) for n in names]
            demands = [float(stats[r].total_draw) if r in stats else 0.0 for r in members]
            alloc = view_balance(demands, resources)
            self.allocations[frame] = alloc
            for d, s in enumerate(splits):
                usage = destination_usage(alloc, d)
                by_name = dict(zip(names, usage))
                for i, child in enumerate(s.compound.children):
                    child.usage = by_name.get(s.child_channels[i], 0.0)


def _walk(c: Compound, path: tuple[int, ...], channel: str):
    channel = c.channel or channel
    yield path, c, channel
    for i, child in enumerate(c.children):
        yield from _walk(child, path + (i,), channel)
