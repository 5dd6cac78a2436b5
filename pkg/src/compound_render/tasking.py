"""Per-frame expansion of compound trees into render, assemble and readback tasks."""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from compound_render.config.display import channel_pvp, find_destination
from compound_render.config.model import COLOR, DEPTH, Compound, Config, TaskKind
from compound_render.geometry import (
    Eye,
    FocusMode,
    FrustumPlanes,
    Observer,
    PixelKernel,
    PixelViewport,
    Range,
    SubpixelKernel,
    Wall,
    apply_dynamic_focus,
    eye_world_position,
    narrow_frustum,
    viewport_of,
    wall_to_planes,
)

ALL_MASK = (True, True, True, True)
ANAGLYPH_MASKS = {
    Eye.LEFT: (True, False, False, False),
    Eye.RIGHT: (False, True, True, True),
    Eye.CYCLOP: ALL_MASK,
}
DEFAULT_NEAR = 0.1
DEFAULT_FAR = 100.0
NO_ZOOM = (1.0, 1.0)


@dataclass(frozen=True)
class RenderContext:
    destination: str
    channel: str
    pvp: PixelViewport
    frustum: FrustumPlanes
    dest_pvp: PixelViewport
    dest_frustum: FrustumPlanes
    head: tuple[tuple[float, ...], ...]
    range: Range = Range(0.0, 1.0)
    pixel: PixelKernel = PixelKernel()
    subpixel: SubpixelKernel = SubpixelKernel()
    eye: Eye = Eye.CYCLOP
    zoom: tuple[float, float] = NO_ZOOM
    buffers: frozenset = frozenset({COLOR, DEPTH})
    color_mask: tuple[bool, bool, bool, bool] = ALL_MASK
    view: str | None = None
    frame: int = 0

    @property
    def head_matrix(self) -> np.ndarray:
        return np.asarray(self.head, dtype=float)

    @property
    def zoomed(self) -> bool:
        return tuple(self.zoom) != NO_ZOOM

    def image_pvp(self) -> PixelViewport:
        """Pixel viewport of the image this context draws (reduced for kernels and zoom)."""
        if not self.pixel.is_identity:
            rw = max(0, -(-(self.pvp.w - self.pixel.dx) // self.pixel.w))
            rh = max(0, -(-(self.pvp.h - self.pixel.dy) // self.pixel.h))
            return PixelViewport(self.pvp.x, self.pvp.y, rw, rh)
        if self.zoomed:
            return PixelViewport(self.pvp.x, self.pvp.y, *zoomed_size(self.pvp, self.zoom))
        return self.pvp


def zoomed_size(pvp: PixelViewport, zoom) -> tuple[int, int]:
    return max(1, int(round(pvp.w * zoom[0]))), max(1, int(round(pvp.h * zoom[1])))


@dataclass(frozen=True)
class FrameLink:
    """A resolved output frame of one task."""

    name: str  # frame key, with "#k" for queue items
    eye: Eye
    buffers: frozenset
    region: PixelViewport  # destination pixels covered when assembled
    zoom: tuple[float, float] = NO_ZOOM  # explicit output frame zoom
    transport: str = "MEMORY"


@dataclass
class Task:
    kind: TaskKind
    channel: str
    context: RenderContext
    compound: tuple[int, ...]  # child-index path from the root
    inputs: tuple[tuple[str, Eye], ...] = ()
    outputs: tuple[FrameLink, ...] = ()
    queue: str | None = None  # draws fed by a work queue
    seq: int = 0

    @property
    def frame(self) -> int:
        return self.context.frame


@dataclass(frozen=True)
class TileItem:
    pvp: PixelViewport


@dataclass(frozen=True)
class ChunkItem:
    range: Range


class WorkQueue:
    """Server-side queue polled by clients; removal is atomic."""

    def __init__(self, name: str, items: Sequence[TileItem | ChunkItem], prefetch: int = 1):
        self.name = name
        self.items = tuple(items)
        self.prefetch = prefetch
        self._pending = deque(enumerate(self.items))
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._pending)

    def poll(self, client: str, count: int = 1) -> list[tuple[int, TileItem | ChunkItem]]:
        with self._lock:
            out = []
            while self._pending and len(out) < count:
                out.append(self._pending.popleft())
            return out


def fill_queue(
    name: str,
    pvp: PixelViewport | None = None,
    tile_size: tuple[int, int] | None = None,
    chunk_size: float | None = None,
    prefetch: int = 1,
) -> WorkQueue:
    """Row-major tiles over ``pvp`` (last row/column clipped) or contiguous chunks of [0,1]."""
    items: list = []
    if tile_size is not None:
        tw, th = tile_size
        if tw < 1 or th < 1:
            raise ValueError("tile size must be positive")
        for y in range(pvp.y, pvp.y1, th):
            for x in range(pvp.x, pvp.x1, tw):
                items.append(TileItem(PixelViewport(x, y, min(tw, pvp.x1 - x), min(th, pvp.y1 - y))))
    elif chunk_size is not None:
        if not 0 < chunk_size <= 1:
            raise ValueError("chunk size must lie in (0, 1]")
        count = max(1, int(round(1.0 / chunk_size)))
        if abs(count * chunk_size - 1.0) > 1e-9:
            count = int(np.ceil(1.0 / chunk_size))
        for i in range(count):
            lo = min(i * chunk_size, 1.0)
            hi = 1.0 if i == count - 1 else min((i + 1) * chunk_size, 1.0)
            items.append(ChunkItem(Range(lo, hi)))
    else:
        raise ValueError("need a tile size or a chunk size")
    return WorkQueue(name, items, prefetch)


def poll_queue(queue: WorkQueue, client: str, prefetch_count: int = 1):
    return queue.poll(client, prefetch_count)


def expand_pixel_kernel(pvp: PixelViewport, k: PixelKernel):
    """Ownership predicate over destination pixels and the reduced viewport."""

    def owns(x: int, y: int) -> bool:
        return (x - pvp.x) % k.w == k.dx and (y - pvp.y) % k.h == k.dy

    rw = max(0, -(-(pvp.w - k.dx) // k.w))
    rh = max(0, -(-(pvp.h - k.dy) // k.h))
    return owns, PixelViewport(pvp.x, pvp.y, rw, rh)


# -- region of interest -----------------------------------------------------------

_BOX_EDGES = [
    (a, b)
    for a in range(8)
    for b in range(a + 1, 8)
    if bin(a ^ b).count("1") == 1
]


def compute_roi(bounds: tuple[Sequence[float], Sequence[float]] | None, ctx: RenderContext) -> PixelViewport:
    """Pixels possibly covered by the world-space box ``bounds`` in ``ctx``.

    The box is clipped to the near plane, projected with the destination
    frustum, rounded outward and intersected with the context viewport.
    """
    empty = PixelViewport(ctx.pvp.x, ctx.pvp.y, 0, 0)
    if bounds is None:
        return empty
    lo, hi = np.asarray(bounds[0], float), np.asarray(bounds[1], float)
    corners = np.array([[(hi if (i >> k) & 1 else lo)[k] for k in range(3)] for i in range(8)])
    head = ctx.head_matrix
    eye_pts = corners @ head[:3, :3].T + head[:3, 3]
    near = ctx.dest_frustum.near
    depth = -eye_pts[:, 2]
    pts = [eye_pts[i] for i in range(8) if depth[i] >= near]
    for a, b in _BOX_EDGES:
        da, db = depth[a] - near, depth[b] - near
        if (da < 0) != (db < 0):
            t = da / (da - db)
            pts.append(eye_pts[a] + t * (eye_pts[b] - eye_pts[a]))
    if not pts:
        return empty
    pts = np.array(pts)
    f = ctx.dest_frustum
    d = ctx.dest_pvp
    xn = pts[:, 0] * near / -pts[:, 2]
    yn = pts[:, 1] * near / -pts[:, 2]
    px = d.x + (xn - f.left) / (f.right - f.left) * d.w
    py = d.y + (f.top - yn) / (f.top - f.bottom) * d.h
    x0, x1 = int(np.floor(px.min())), int(np.ceil(px.max()))
    y0, y1 = int(np.floor(py.min())), int(np.ceil(py.max()))
    x0, y0 = max(x0, -(1 << 30)), max(y0, -(1 << 30))
    x1, y1 = min(x1, 1 << 30), min(y1, 1 << 30)
    if x1 <= x0 or y1 <= y0:
        return empty
    return ctx.pvp.intersect(PixelViewport(x0, y0, x1 - x0, y1 - y0))


# -- destination setup --------------------------------------------------------------


@dataclass(frozen=True)
class Destination:
    """Everything needed to build the root context of one compound tree."""

    name: str
    channel: str
    pvp: PixelViewport
    wall: Wall
    observer: Observer
    view: str | None
    swapbarrier: str | None = None
    near: float = DEFAULT_NEAR
    far: float = DEFAULT_FAR

    def eye_context(self, eye: Eye, frame: int, buffers: frozenset, anaglyph: bool) -> RenderContext:
        eye_pos = eye_world_position(self.observer, eye)
        planes, head = wall_to_planes(self.wall, eye_pos, self.near, self.far)
        if self.observer.focus_mode is FocusMode.DYNAMIC and eye is not Eye.CYCLOP:
            cyclop = eye_world_position(self.observer, Eye.CYCLOP)
            u, v, n = self.wall.basis()
            bl = np.asarray(self.wall.bottom_left)
            wall_distance = float(np.dot(cyclop - bl, n))
            delta = eye_pos - cyclop
            offset = (float(delta @ u), float(delta @ v), float(delta @ n))
            planes = apply_dynamic_focus(planes, wall_distance, self.observer.focus_distance, offset)
        mask = ANAGLYPH_MASKS[eye] if anaglyph else ALL_MASK
        return RenderContext(
            destination=self.name,
            channel=self.channel,
            pvp=self.pvp,
            frustum=planes,
            dest_pvp=self.pvp,
            dest_frustum=planes,
            head=tuple(tuple(float(c) for c in row) for row in head),
            eye=eye,
            buffers=buffers,
            color_mask=mask,
            view=self.view,
            frame=frame,
        )


def default_wall(pvp: PixelViewport) -> Wall:
    """A wall one unit in front of the origin, two units wide, matching the pixel aspect."""
    h = pvp.h / pvp.w
    return Wall((-1.0, -h, -1.0), (1.0, -h, -1.0), (-1.0, h, -1.0))


def resolve_destination(cfg: Config, root: Compound) -> Destination:
    if root.destination is not None:
        d = find_destination(cfg, root.destination.segment, root.destination.view)
        observer = cfg.observer(d.observer) if d.observer else Observer()
        wall = d.wall if d.wall is not None else default_wall(d.pvp)
        return Destination(f"{d.segment}.{d.view}", d.channel, d.pvp, wall, observer, d.view, d.swapbarrier)
    if root.channel is None:
        raise ValueError("root compound needs a channel or destination")
    pvp = channel_pvp(cfg, root.channel)
    wall = root.wall
    if wall is None and root.projection is not None:
        from compound_render.geometry import projection_to_wall

        wall = projection_to_wall(root.projection.projection())
    if wall is None:
        wall = default_wall(pvp)
    return Destination(root.channel, root.channel, pvp, wall, Observer(), None)


# -- task generation -------------------------------------------------------------------


@dataclass
class FramePlan:
    frame: int
    destination: Destination
    tasks: list[Task] = field(default_factory=list)
    queues: dict[str, WorkQueue] = field(default_factory=dict)
    # frame names produced per queue: consumers expand "name" into "name#k"
    queue_frames: dict[str, str] = field(default_factory=dict)

    def tasks_for(self, channel: str) -> list[Task]:
        return [t for t in self.tasks if t.channel == channel]


def active_eyes(eye_mode: str) -> tuple[Eye, ...]:
    if eye_mode == "mono":
        return (Eye.CYCLOP,)
    if eye_mode == "stereo":
        return (Eye.LEFT, Eye.RIGHT)
    raise ValueError(f"unknown eye mode {eye_mode!r}")


def _is_active(c: Compound, frame: int) -> bool:
    if not c.active:
        return False
    period = c.period or 1
    return frame % period == (c.phase or 0)


def generate_tasks(
    root: Compound,
    frame: int,
    eye_mode: str,
    destination: Destination,
    anaglyph: bool = False,
) -> FramePlan:
    """Expand ``root`` for one frame.

    Eye passes are the outer loop. Within a pass the traversal is depth
    first: a compound's clear and draw come before its children, its
    assemble and readback after them.
    """
    plan = FramePlan(frame, destination)
    seq = [0]

    def emit(task: Task):
        task.seq = seq[0]
        seq[0] += 1
        plan.tasks.append(task)

    root_buffers = root.buffers or frozenset({COLOR, DEPTH})
    # queues and queue-fed frame names are fixed per frame before traversal
    producers: dict[str, str] = {}
    for c in root.walk():
        if c.input_queue is not None:
            for f in c.output_frames:
                producers[f.name] = c.input_queue
    plan.queue_frames = producers

    for eye in active_eyes(eye_mode):
        ctx0 = destination.eye_context(eye, frame, root_buffers, anaglyph)
        _visit(root, (), ctx0, root.eyes, root.channel or destination.channel, plan, emit, anaglyph, eye)
    return plan


def _visit(c: Compound, path, parent: RenderContext, eyes, channel, plan: FramePlan, emit, anaglyph, eye):
    if not _is_active(c, parent.frame):
        return
    eyes = c.eyes if c.eyes is not None else eyes
    if eyes is not None and eye not in eyes:
        return
    channel = c.channel or channel
    ctx = _narrow(c, parent, channel, plan.destination, anaglyph)
    if ctx is None:
        return
    tasks = c.effective_tasks()
    if c.output_queue is not None and c.output_queue.name not in plan.queues:
        q = c.output_queue
        plan.queues[q.name] = fill_queue(q.name, ctx.pvp, q.tilesize, q.chunksize, q.prefetch)
    if TaskKind.CLEAR in tasks:
        emit(Task(TaskKind.CLEAR, channel, ctx, path))
    outputs = tuple(_frame_link(f, ctx, eye) for f in c.output_frames)
    if TaskKind.DRAW in tasks:
        if c.input_queue is not None:
            emit(Task(TaskKind.DRAW, channel, ctx, path, outputs=outputs, queue=c.input_queue))
        else:
            emit(Task(TaskKind.DRAW, channel, ctx, path))
    for i, child in enumerate(c.children):
        _visit(child, path + (i,), ctx, eyes, channel, plan, emit, anaglyph, eye)
    if TaskKind.ASSEMBLE in tasks and c.input_frames:
        inputs = []
        for name in c.input_frames:
            qname = plan.queue_frames.get(name)
            if qname is not None and qname in plan.queues:
                inputs.extend((f"{name}#{k}", eye) for k in range(len(plan.queues[qname].items)))
            else:
                inputs.append((name, eye))
        emit(Task(TaskKind.ASSEMBLE, channel, ctx, path, inputs=tuple(inputs)))
    if TaskKind.READBACK in tasks and outputs and c.input_queue is None:
        emit(Task(TaskKind.READBACK, channel, ctx, path, outputs=outputs))


def _narrow(c: Compound, parent: RenderContext, channel: str, dest: Destination, anaglyph: bool):
    pvp, frustum = parent.pvp, parent.frustum
    if c.viewport is not None and not c.viewport.is_full:
        pvp = viewport_of(parent.pvp, c.viewport)
        if pvp.empty:
            return None
        frustum = narrow_frustum(parent.frustum, parent.pvp, pvp)
    rng = parent.range.compose(c.range) if c.range is not None else parent.range
    pixel = parent.pixel.compose(c.pixel) if c.pixel is not None else parent.pixel
    sub = parent.subpixel.compose(c.subpixel) if c.subpixel is not None else parent.subpixel
    zoom = parent.zoom
    if c.zoom is not None:
        zoom = (zoom[0] * c.zoom[0], zoom[1] * c.zoom[1])
    mask = parent.color_mask
    if anaglyph and channel != dest.channel:
        mask = ALL_MASK  # sources render full color; the mask applies on the destination
    elif anaglyph:
        mask = ANAGLYPH_MASKS[parent.eye]
    return replace(
        parent,
        channel=channel,
        pvp=pvp,
        frustum=frustum,
        range=rng,
        pixel=pixel,
        subpixel=sub,
        zoom=zoom,
        buffers=c.buffers or parent.buffers,
        color_mask=mask,
    )


def _frame_link(f, ctx: RenderContext, eye: Eye) -> FrameLink:
    region = ctx.pvp if f.viewport is None else viewport_of(ctx.pvp, f.viewport)
    return FrameLink(
        f.name,
        eye,
        f.buffers or ctx.buffers,
        region,
        tuple(f.zoom) if f.zoom is not None else NO_ZOOM,
        f.type,
    )


def frame_producers(plan: FramePlan) -> dict[tuple[str, Eye], Task]:
    """Static producers (readbacks) of each frame key in a plan."""
    out = {}
    for t in plan.tasks:
        if t.kind is TaskKind.READBACK:
            for link in t.outputs:
                out[(link.name, link.eye)] = t
    return out


class DependencyCycle(RuntimeError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("cyclic frame dependency: " + " -> ".join(cycle))


def _describe(t: Task) -> str:
    return f"{t.kind.value}@{t.channel}#{t.seq}"


def dependency_order(plan: FramePlan) -> list[Task]:
    """A topological order of the plan's tasks.

    Edges: consecutive tasks of one channel, and each readback to the
    assembles consuming its frames. Queue-fed frames are produced by the
    queue draw tasks. Raises :class:`DependencyCycle` naming the cycle.
    """
    tasks = plan.tasks
    edges: dict[int, set[int]] = {t.seq: set() for t in tasks}
    last: dict[str, int] = {}
    for t in tasks:
        if t.channel in last:
            edges[last[t.channel]].add(t.seq)
        last[t.channel] = t.seq
    producers: dict[tuple[str, Eye], list[int]] = {}
    for t in tasks:
        if t.kind is TaskKind.READBACK or (t.kind is TaskKind.DRAW and t.queue is not None):
            for link in t.outputs:
                producers.setdefault((link.name, link.eye), []).append(t.seq)
    for t in tasks:
        if t.kind is not TaskKind.ASSEMBLE:
            continue
        for name, eye in t.inputs:
            base = name.split("#", 1)[0]
            for p in producers.get((name, eye), []) + (producers.get((base, eye), []) if "#" in name else []):
                if p != t.seq:
                    edges[p].add(t.seq)
    by_seq = {t.seq: t for t in tasks}
    state: dict[int, int] = {}
    order: list[int] = []
    stack_path: list[int] = []

    def dfs(u: int):
        state[u] = 1
        stack_path.append(u)
        for v in sorted(edges[u]):
            if state.get(v) == 1:
                cyc = stack_path[stack_path.index(v):] + [v]
                raise DependencyCycle([_describe(by_seq[k]) for k in cyc])
            if v not in state:
                dfs(v)
        stack_path.pop()
        state[u] = 2
        order.append(u)

    for t in tasks:
        if t.seq not in state:
            dfs(t.seq)
    return [by_seq[k] for k in reversed(order)]
