"""Static checks over a parsed configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

from compound_render.config.model import OFF, Compound, Config


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    message: str
    line: int | None = None


def _lcm(values) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


def dplex_coverage(children: list[Compound]) -> tuple[list[int], list[int]]:
    """Frames in one lcm cycle drawn by no child and by more than one child."""
    periods = [c.period or 1 for c in children]
    cycle = _lcm(periods)
    uncovered, doubled = [], []
    for f in range(cycle):
        hits = sum(1 for c, p in zip(children, periods) if f % p == (c.phase or 0))
        if hits == 0:
            uncovered.append(f)
        elif hits > 1:
            doubled.append(f)
    return uncovered, doubled


def _resolve_pixel(c: Compound, parent_pixel) -> object:
    return c.pixel if c.pixel is not None else parent_pixel


def validate(cfg: Config) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def error(msg, line=None):
        diags.append(Diagnostic("error", msg, line))

    def warning(msg, line=None):
        diags.append(Diagnostic("warning", msg, line))

    # resources
    seen = set()
    for node in cfg.nodes:
        if not node.name:
            error("node without a name")
        for pipe in node.pipes:
            for win in pipe.windows:
                for ch in win.channels:
                    if not ch.name:
                        error("channel without a name")
                    elif ch.name in seen:
                        error(f"duplicate channel name {ch.name!r}")
                    seen.add(ch.name)
    channels = cfg.channels()
    if cfg.latency < 0:
        error("latency must be non-negative")
    if cfg.stereo_mode not in ("QUAD", "ANAGLYPH"):
        error(f"unknown stereo mode {cfg.stereo_mode}")

    # display model
    observers = {o.name for o in cfg.observers}
    layouts = {l.name: l for l in cfg.layouts}
    segments: dict[str, object] = {}
    for canvas in cfg.canvases:
        for name in canvas.layouts:
            if name not in layouts:
                error(f"canvas {canvas.name!r} references unknown layout {name!r}")
        if canvas.active_layout not in (None, OFF) and canvas.active_layout not in canvas.layouts:
            error(f"active layout {canvas.active_layout!r} is not a layout of canvas {canvas.name!r}")
        for seg in canvas.segments:
            segments[seg.name] = seg
            if seg.channel is not None and seg.channel not in channels:
                error(f"segment {seg.name!r} references unknown channel {seg.channel!r}")
            if seg.wall is not None and seg.projection is not None:
                error(f"segment {seg.name!r} defines both wall and projection")
    views = {}
    for layout in cfg.layouts:
        for v in layout.views:
            views[v.name] = v
            if v.observer is not None and v.observer not in observers:
                error(f"view {v.name!r} references unknown observer {v.observer!r}")
            if v.model_unit <= 0:
                error(f"view {v.name!r} needs a positive model unit")

    # compounds
    used_channels = set()
    for root in cfg.compounds:
        outputs: dict[str, int] = {}
        queue_frames: dict[str, str] = {}  # frame name -> input queue of its producers
        out_queues: set[str] = set()
        inputs: list[tuple[str, int]] = []
        in_queues: list[tuple[str, int]] = []

        def visit(c: Compound, pixel, zoom):
            if c.channel is not None:
                used_channels.add(c.channel)
                if c.channel not in channels:
                    error(f"unresolved channel reference {c.channel!r}", c.line)
            if c.destination is not None:
                seg = segments.get(c.destination.segment)
                if seg is None or c.destination.view not in views:
                    error(
                        f"unresolved destination ({c.destination.segment!r}, {c.destination.view!r})", c.line
                    )
                elif seg.channel is not None:
                    used_channels.add(seg.channel)
            if c is root and c.channel is None and c.destination is None:
                warning("root compound without a channel only groups its children", c.line)
            if c.phase is not None and c.phase >= (c.period or 1):
                error(f"phase {c.phase} must be smaller than period {c.period or 1}", c.line)
            pixel = c.pixel if c.pixel is not None else pixel
            zoom = c.zoom if c.zoom is not None else zoom
            if pixel is not None and not pixel.is_identity and zoom is not None and tuple(zoom) != (1.0, 1.0):
                error("zoom cannot be combined with a pixel kernel", c.line)
            for f in c.output_frames:
                # queue drainers share one frame name; each item becomes its own frame
                shared = c.input_queue is not None and queue_frames.get(f.name) == c.input_queue
                if f.name in outputs and not shared:
                    error(f"duplicate output frame name {f.name!r}", c.line)
                outputs[f.name] = c.line
                if c.input_queue is not None:
                    queue_frames.setdefault(f.name, c.input_queue)
            inputs.extend((name, c.line) for name in c.input_frames)
            if c.output_queue is not None:
                if c.output_queue.name in out_queues:
                    error(f"duplicate queue name {c.output_queue.name!r}", c.line)
                out_queues.add(c.output_queue.name)
            if c.input_queue is not None:
                in_queues.append((c.input_queue, c.line))
                if c.viewport is not None or c.range is not None:
                    error("a compound with an input queue cannot set its own viewport or range", c.line)
            if any(ch.period is not None for ch in c.children):
                uncovered, doubled = dplex_coverage(c.children)
                if uncovered:
                    error("DPlex frame(s) " + ", ".join(map(str, uncovered)) + " uncovered", c.line)
                if doubled:
                    error("DPlex frame(s) " + ", ".join(map(str, doubled)) + " double-covered", c.line)
            for child in c.children:
                visit(child, pixel, zoom)

        visit(root, None, None)
        for name, line in inputs:
            if name not in outputs:
                error(f"unconnected frame {name!r}", line)
        for name, line in in_queues:
            if name not in out_queues:
                error(f"unconnected queue {name!r}", line)

    for name in channels:
        if name not in used_channels:
            warning(f"channel {name!r} is not used by any compound")
    return diags
