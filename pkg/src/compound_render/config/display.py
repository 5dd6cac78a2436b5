"""Destination channels: the intersections of active views with canvas segments."""

from __future__ import annotations

from dataclasses import dataclass

from compound_render.config.model import OFF, Canvas, Config, ProjectionSpec, Segment, View
from compound_render.geometry import (
    PixelViewport,
    Viewport,
    Wall,
    projection_to_wall,
    viewport_of,
)

FULL = Viewport()


@dataclass(frozen=True)
class DestinationChannel:
    canvas: str
    segment: str
    view: str
    channel: str | None
    area: Viewport  # canvas fraction covered by this destination
    pvp: PixelViewport  # pixels within the segment's channel
    wall: Wall | None  # projection surface of exactly this area
    observer: str | None
    model_unit: float
    swapbarrier: str | None


def _surface(wall: Wall | None, projection: ProjectionSpec | None) -> Wall | None:
    if wall is not None:
        return wall
    if projection is not None:
        return projection_to_wall(projection.projection())
    return None


def channel_pvp(cfg: Config, channel: str) -> PixelViewport:
    """A channel's pixel viewport within its window."""
    _, window, ch = cfg.channels()[channel]
    _, _, w, h = window.viewport
    base = PixelViewport(0, 0, w, h)
    return viewport_of(base, ch.viewport) if ch.viewport is not None else base


def active_views(cfg: Config, canvas: Canvas) -> list[View]:
    if canvas.active_layout == OFF or not canvas.layouts:
        return []
    name = canvas.active_layout or canvas.layouts[0]
    return list(cfg.layout(name).views)


def _destination(cfg: Config, canvas: Canvas, seg: Segment, view: View) -> DestinationChannel | None:
    seg_vp = seg.viewport or FULL
    view_vp = view.viewport or FULL
    area = seg_vp.intersect(view_vp)
    if area is None:
        return None
    in_segment = area.relative_to(seg_vp)
    pvp = PixelViewport(0, 0, 0, 0)
    if seg.channel is not None:
        pvp = viewport_of(channel_pvp(cfg, seg.channel), in_segment)
        if pvp.empty:
            return None
    # precedence: view override, then segment, then canvas
    wall = None
    surface = _surface(view.wall, view.projection)
    if surface is not None:
        wall = surface.sub_wall(area.relative_to(view_vp))
    else:
        surface = _surface(seg.wall, seg.projection)
        if surface is not None:
            wall = surface.sub_wall(in_segment)
        else:
            surface = _surface(canvas.wall, canvas.projection)
            if surface is not None:
                wall = surface.sub_wall(area)
    if wall is not None and view.model_unit != 1.0:
        wall = wall.scaled(view.model_unit)
    return DestinationChannel(
        canvas.name,
        seg.name,
        view.name,
        seg.channel,
        area,
        pvp,
        wall,
        view.observer,
        view.model_unit,
        seg.swapbarrier,
    )


def derive_destination_channels(cfg: Config) -> list[DestinationChannel]:
    """One destination per (active view, overlapping segment), in canvas/view/segment order."""
    out = []
    for canvas in cfg.canvases:
        for view in active_views(cfg, canvas):
            for seg in canvas.segments:
                dest = _destination(cfg, canvas, seg, view)
                if dest is not None:
                    out.append(dest)
    return out


def find_destination(cfg: Config, segment: str, view: str) -> DestinationChannel:
    for d in derive_destination_channels(cfg):
        if d.segment == segment and d.view == view:
            return d
    raise KeyError((segment, view))
