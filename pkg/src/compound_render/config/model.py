"""Configuration data model: resources, display model and compound trees."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

from compound_render.geometry import (
    Observer,
    PixelKernel,
    Projection,
    Range,
    SubpixelKernel,
    Viewport,
    Wall,
)

COLOR = "COLOR"
DEPTH = "DEPTH"


class TaskKind(Enum):
    CLEAR = "CLEAR"
    DRAW = "DRAW"
    ASSEMBLE = "ASSEMBLE"
    READBACK = "READBACK"


LEAF_TASKS = frozenset(TaskKind)
INNER_TASKS = frozenset({TaskKind.CLEAR, TaskKind.ASSEMBLE, TaskKind.READBACK})


class EqualizerKind(Enum):
    LOAD = "load_equalizer"
    TREE = "tree_equalizer"
    VIEW = "view_equalizer"
    TILE = "tile_equalizer"
    DFR = "DFR_equalizer"
    FRAMERATE = "framerate_equalizer"
    MONITOR = "monitor_equalizer"


# -- resources -------------------------------------------------------------------


@dataclass
class Channel:
    name: str
    viewport: Viewport | None = None  # fraction of the window


@dataclass
class Window:
    name: str | None
    viewport: tuple[int, int, int, int] = (0, 0, 1024, 768)  # pixels
    channels: list[Channel] = field(default_factory=list)


@dataclass
class Pipe:
    name: str | None
    windows: list[Window] = field(default_factory=list)


@dataclass
class Node:
    name: str
    pipes: list[Pipe] = field(default_factory=list)


# -- display model ---------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionSpec:
    """A projection as written in the file: angles in degrees."""

    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    distance: float = 1.0
    fov_deg: tuple[float, float] = (90.0, 90.0)  # full horizontal/vertical angles
    hpr_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def projection(self) -> Projection:
        return Projection(
            self.origin,
            tuple(math.radians(a) for a in self.hpr_deg),
            (math.radians(self.fov_deg[0]) / 2.0, math.radians(self.fov_deg[1]) / 2.0),
            self.distance,
        )


@dataclass
class Segment:
    name: str
    viewport: Viewport | None = None
    channel: str | None = None
    wall: Wall | None = None
    projection: ProjectionSpec | None = None
    swapbarrier: str | None = None


@dataclass
class View:
    name: str
    viewport: Viewport | None = None
    observer: str | None = None
    wall: Wall | None = None
    projection: ProjectionSpec | None = None
    model_unit: float = 1.0


@dataclass
class Layout:
    name: str
    views: list[View] = field(default_factory=list)


OFF = "OFF"


@dataclass
class Canvas:
    name: str
    wall: Wall | None = None
    projection: ProjectionSpec | None = None
    segments: list[Segment] = field(default_factory=list)
    layouts: list[str] = field(default_factory=list)
    active_layout: str | None = None  # None -> first layout; OFF -> none


# -- compounds -------------------------------------------------------------------


@dataclass
class FrameSpec:
    name: str
    buffers: frozenset | None = None  # None: inherit the compound's buffers
    viewport: Viewport | None = None
    zoom: tuple[float, float] | None = None
    type: str = "MEMORY"  # or TEXTURE


@dataclass
class QueueSpec:
    name: str
    tilesize: tuple[int, int] | None = None
    chunksize: float | None = None
    prefetch: int = 1


@dataclass
class EqualizerSpec:
    kind: EqualizerKind
    mode: str | None = None
    damping: float | None = None
    resistance: float | None = None
    boundary: float | None = None
    tilesize: tuple[int, int] | None = None
    framerate: float | None = None
    target: float | None = None


@dataclass
class DestinationRef:
    segment: str
    view: str


@dataclass
class Compound:
    channel: str | None = None
    destination: DestinationRef | None = None
    name: str | None = None
    children: list["Compound"] = field(default_factory=list)
    tasks: frozenset | None = None
    buffers: frozenset | None = None
    viewport: Viewport | None = None
    range: Range | None = None
    pixel: PixelKernel | None = None
    subpixel: SubpixelKernel | None = None
    eyes: frozenset | None = None
    period: int | None = None
    phase: int | None = None
    zoom: tuple[float, float] | None = None
    usage: float | None = None
    wall: Wall | None = None
    projection: ProjectionSpec | None = None
    output_frames: list[FrameSpec] = field(default_factory=list)
    input_frames: list[str] = field(default_factory=list)
    output_queue: QueueSpec | None = None
    input_queue: str | None = None
    equalizers: list[EqualizerSpec] = field(default_factory=list)
    line: int = 0
    active: bool = True  # runtime switch used by equalizers and failure handling

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["Compound"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def effective_tasks(self) -> frozenset:
        if self.tasks is not None:
            return self.tasks
        return LEAF_TASKS if self.is_leaf else INNER_TASKS


@dataclass
class Config:
    nodes: list[Node] = field(default_factory=list)
    observers: list[Observer] = field(default_factory=list)
    layouts: list[Layout] = field(default_factory=list)
    canvases: list[Canvas] = field(default_factory=list)
    compounds: list[Compound] = field(default_factory=list)
    latency: int = 1
    stereo_mode: str = "QUAD"  # or ANAGLYPH

    def channels(self) -> dict[str, tuple[Node, Window, Channel]]:
        out = {}
        for node in self.nodes:
            for pipe in node.pipes:
                for window in pipe.windows:
                    for ch in window.channels:
                        out[ch.name] = (node, window, ch)
        return out

    def node_of(self, channel: str) -> str:
        return self.channels()[channel][0].name

    def layout(self, name: str) -> Layout:
        for layout in self.layouts:
            if layout.name == name:
                return layout
        raise KeyError(name)

    def observer(self, name: str) -> Observer:
        for o in self.observers:
            if o.name == name:
                return o
        raise KeyError(name)
