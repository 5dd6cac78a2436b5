"""Discrete-event simulation of the asynchronous execution model.

Every channel is an in-order lane executing its tasks across frames; every
node owns one transmit lane. Frame ``f`` is released once frame
``f - latency - 1`` has been swapped on all destinations. Time is integer
nanoseconds and events are ordered by (time, lane), so runs are reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from compound_render import codecs
from compound_render.compositing.image import Image
from compound_render.config.model import Compound, Config, TaskKind
from compound_render.geometry import Eye, PixelViewport
from compound_render.simrender.balancing import EqualizerRuntime, FrameStats
from compound_render.simrender.executor import Executor, FrameData
from compound_render.tasking import (
    Destination,
    FramePlan,
    RenderContext,
    Task,
    active_eyes,
    dependency_order,
    generate_tasks,
    resolve_destination,
)

MS = 1_000_000


class SimulationError(RuntimeError):
    pass


def codec_id(name: str) -> codecs.CodecId:
    """Codec by enum name, case and dash insensitive (``rle64``, ``swizzle-per-component``)."""
    try:
        return codecs.CodecId[name.upper().replace("-", "_")]
    except KeyError:
        raise ValueError(f"unknown codec {name!r}") from None


@dataclass
class CostModel:
    """Stage costs in nanoseconds. ``node_speed`` divides all times of a node."""

    per_triangle: float = 50.0
    per_fragment: float = 2.0
    per_pixel_readback: float = 1.0
    per_byte_transmit: float = 1.0
    per_pixel_assemble: float = 1.0
    fixed_per_task: float = 2_000.0
    draw_fixed: float = 10_000.0
    readback_fixed: float = 5_000.0
    assemble_fixed: float = 5_000.0
    swap_fixed: float = 0.0
    node_speed: dict[str, float] = field(default_factory=dict)
    # hook returning a draw time in ns (or None for the default model)
    draw_override: Callable[[str, int, RenderContext], float | None] | None = None

    def __post_init__(self):
        for name in (
            "per_triangle",
            "per_fragment",
            "per_pixel_readback",
            "per_byte_transmit",
            "per_pixel_assemble",
            "fixed_per_task",
            "draw_fixed",
            "readback_fixed",
            "assemble_fixed",
            "swap_fixed",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"cost {name} must be non-negative")

    def scale(self, node: str, ns: float) -> int:
        return int(round(ns / self.node_speed.get(node, 1.0)))

    @classmethod
    def from_overrides(cls, pairs: list[str]) -> "CostModel":
        cost = cls()
        for pair in pairs:
            key, _, value = pair.partition("=")
            key = key.strip()
            if not hasattr(cost, key) or key in ("node_speed", "draw_override"):
                if key.startswith("speed."):
                    cost.node_speed[key[6:]] = float(value)
                    continue
                raise ValueError(f"unknown cost key {key!r}")
            setattr(cost, key, float(value))
        cost.__post_init__()
        return cost


@dataclass
class SimConfig:
    frames: int = 1
    latency: int | None = None  # None: take the configuration's latency
    eye_mode: str = "mono"
    render: bool = True
    roi: bool = True
    workers: int = 1
    codec: str | None = None  # compress transmitted frames with this codec
    chunks: int = 1
    failures: dict[str, int] = field(default_factory=dict)  # node -> frame it dies at
    t1_ns: int = 20 * MS  # silence before a ping
    t2_ns: int = 10 * MS  # ping reply timeout
    swap_barriers: dict[str, list[str]] = field(default_factory=dict)  # name -> destinations

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("need at least one frame")
        if self.latency is not None and self.latency < 0:
            raise ValueError("latency must be non-negative")


@dataclass
class FrameRecord:
    frame: int
    release_ns: int
    finish_ns: int | None = None
    swaps: dict[str, int] = field(default_factory=dict)

    @property
    def duration_ns(self) -> int:
        return self.finish_ns - self.release_ns


@dataclass
class SimResult:
    frames: list[FrameRecord]
    images: dict[int, dict[str, Image]]
    stats: list[dict]
    timeline: list[dict]
    failed: dict[str, int]
    encoded: list[str]  # digests of compressed transmissions, in order
    allocations: dict[int, list[dict[int, float]]]
    dfr_scales: list[list[float]]

    def finish_times(self) -> list[int]:
        return [f.finish_ns for f in self.frames]

    def throughput_fps(self, warmup: int = 0) -> float:
        t = self.finish_times()[warmup:]
        if len(t) < 2 or t[-1] == t[0]:
            return 0.0
        return (len(t) - 1) * 1e9 / (t[-1] - t[0])

    def mean_frame_interval_ns(self, warmup: int = 0) -> float:
        t = self.finish_times()[warmup:]
        return (t[-1] - t[0]) / (len(t) - 1)

    def draw_times(self, frame: int) -> dict[str, int]:
        out: dict[str, int] = {}
        for row in self.stats:
            if row["frame"] == frame and row["task"] == "DRAW":
                out[row["channel"]] = out.get(row["channel"], 0) + row["end_ns"] - row["start_ns"]
        return out

    def transmitted_bytes(self) -> int:
        return sum(row["bytes"] for row in self.stats if row["task"] == "TRANSMIT")

    def image(self, frame: int, destination: str | None = None) -> Image:
        imgs = self.images[frame]
        if destination is None:
            return next(iter(imgs.values()))
        return imgs[destination]


# -- runtime structures ----------------------------------------------------------------


@dataclass
class Job:
    kind: str  # "task", "queue", "transmit", "swap"
    lane: str
    frame: int
    root: int
    task: Task | None = None
    key: tuple | None = None  # transmit: (frame key, eye)
    dest_node: str | None = None
    state: str = "pending"  # pending, running, done, cancelled
    start: int | None = None
    end: int | None = None
    outputs: list[FrameData] = field(default_factory=list)
    polled: list = field(default_factory=list)
    cost: dict = field(default_factory=dict)


@dataclass
class Lane:
    name: str
    node: str
    rank: int
    jobs: deque = field(default_factory=deque)
    busy: Job | None = None
    dead: bool = False


@dataclass
class FrameRun:
    frame: int
    root: int
    plan: FramePlan
    release: int
    jobs: list[Job] = field(default_factory=list)
    producers: dict[tuple, list[Job]] = field(default_factory=dict)
    data: dict[tuple, FrameData] = field(default_factory=dict)
    arrived: dict[tuple, FrameData] = field(default_factory=dict)  # (name, eye, node)
    lost: set = field(default_factory=set)  # (name, eye, node) that will never arrive
    consumers: dict[tuple, set[str]] = field(default_factory=dict)  # (name, eye) -> nodes
    queue_items: dict[str, dict[int, str]] = field(default_factory=dict)  # queue -> item -> state
    swapped: bool = False
    swap_job: Job | None = None


@dataclass
class RootInfo:
    compound: Compound
    destination: Destination
    barrier: str | None


def collect_roots(cfg: Config) -> tuple[list[Compound], list[tuple[Compound, list[int]]]]:
    """Compounds bound to a destination, and channel-less grouping compounds over them."""
    roots: list[Compound] = []
    groups: list[tuple[Compound, list[int]]] = []

    def visit(c: Compound):
        if c.channel is not None or c.destination is not None:
            roots.append(c)
            return [len(roots) - 1]
        members = []
        for child in c.children:
            members += visit(child)
        groups.append((c, members))
        return members

    for c in cfg.compounds:
        visit(c)
    return roots, groups


class Simulator:
    def __init__(self, cfg: Config, scene, cost: CostModel | None = None, sim: SimConfig | None = None):
        self.cfg = cfg
        self.scene = scene
        self.cost = cost or CostModel()
        self.sim = sim or SimConfig()
        self.latency = cfg.latency if self.sim.latency is None else self.sim.latency
        self.anaglyph = cfg.stereo_mode == "ANAGLYPH"
        if self.anaglyph and self.sim.eye_mode != "stereo":
            self.anaglyph = False
        compounds, groups = collect_roots(cfg)
        if not compounds:
            raise SimulationError("configuration has no compounds")
        self.roots = [RootInfo(c, resolve_destination(cfg, c), None) for c in compounds]
        barriers = {}
        known = {r.destination.name for r in self.roots}
        for name, members in self.sim.swap_barriers.items():
            for m in members:
                if m not in known:
                    raise SimulationError(f"swap barrier {name!r} names unknown destination {m!r}")
                barriers[m] = name
        for r in self.roots:
            r.barrier = barriers.get(r.destination.name, r.destination.swapbarrier)
        channels = cfg.channels()
        self.channel_node = {ch: info[0].name for ch, info in channels.items()}
        self.lanes: dict[str, Lane] = {}
        for i, ch in enumerate(sorted(channels)):
            self.lanes[ch] = Lane(ch, self.channel_node[ch], i)
        for j, node in enumerate(sorted({n.name for n in cfg.nodes})):
            name = f"xmit:{node}"
            self.lanes[name] = Lane(name, node, len(channels) + j)
        self.lane_list = sorted(self.lanes.values(), key=lambda l: l.rank)
        self.executor = Executor(
            scene,
            anaglyph=self.anaglyph,
            render=self.sim.render,
            roi=self.sim.roi,
            workers=self.sim.workers,
            dest_channels=frozenset(r.destination.channel for r in self.roots),
        )
        self.equalizers = EqualizerRuntime(
            [r.compound for r in self.roots],
            [r.destination.pvp for r in self.roots],
            [r.compound.channel or r.destination.channel for r in self.roots],
            groups,
        )
        self.now = 0
        self._heap: list = []
        self._counter = 0
        self.runs: dict[tuple[int, int], FrameRun] = {}
        self.records: dict[int, FrameRecord] = {}
        self.images: dict[int, dict[str, Image]] = {}
        self.stats: list[dict] = []
        self.timeline: list[dict] = []
        self.encoded: list[str] = []
        self.frame_stats: dict[int, dict[int, FrameStats]] = {}
        self.dead_nodes: dict[str, int] = {}  # node -> time of death
        self.orphans: dict[str, list[Job]] = {}  # jobs running on a node when it died
        self.failed: dict[str, int] = {}  # node -> detection time
        self.last_seen: dict[str, int] = {}
        self.last_swap: dict[int, int] = {}
        self.released = 0

    # -- event plumbing ----------------------------------------------------------------

    def _at(self, time: int, rank: int, fn: Callable[[], None]):
        self._counter += 1
        heapq.heappush(self._heap, (time, rank, self._counter, fn))

    def _log(self, event: str, channel: str, frame: int, time: int | None = None):
        self.timeline.append(
            {"event": event, "time_ns": self.now if time is None else time, "channel": channel, "frame": frame}
        )

    # -- top level --------------------------------------------------------------------------

    def run(self) -> SimResult:
        for f in range(min(self.latency + 1, self.sim.frames)):
            self._release(f)
        self._dispatch()
        while self._heap:
            time, _, _, fn = heapq.heappop(self._heap)
            self.now = time
            fn()
            self._dispatch()
        unfinished = [f for f in range(self.sim.frames) if self.records.get(f) is None or self.records[f].finish_ns is None]
        if unfinished:
            stuck = [
                f"{l.name}: {l.jobs[0].kind} {l.jobs[0].task.kind.value if l.jobs[0].task else ''} frame {l.jobs[0].frame}"
                for l in self.lane_list
                if l.jobs and not l.dead
            ]
            raise SimulationError(f"deadlock: frames {unfinished} never finished; blocked lanes: {stuck}")
        self.timeline.sort(key=lambda e: (e["time_ns"], self._rank(e["channel"])))
        return SimResult(
            [self.records[f] for f in range(self.sim.frames)],
            self.images,
            self.stats,
            self.timeline,
            dict(self.failed),
            self.encoded,
            dict(self.equalizers.allocations),
            [d.history for d in self.equalizers.dfr],
        )

    def _rank(self, lane: str) -> int:
        lane_obj = self.lanes.get(lane)
        return lane_obj.rank if lane_obj else -1

    # -- frame release -------------------------------------------------------------------

    def _release(self, frame: int):
        self.released = frame + 1
        self.records[frame] = FrameRecord(frame, self.now)
        self._log("release", "server", frame)
        for node, at in self.sim.failures.items():
            if at == frame and node not in self.dead_nodes:
                self._kill(node)
        g = frame - self.latency - 1
        stats = self.frame_stats.get(g) if g >= 0 else None
        self.equalizers.before_frame(frame, g if stats is not None else None, stats)
        for r, info in enumerate(self.roots):
            plan = generate_tasks(info.compound, frame, self.sim.eye_mode, info.destination, self.anaglyph)
            dependency_order(plan)  # raises DependencyCycle
            self._enqueue(frame, r, plan)

    def _enqueue(self, frame: int, r: int, plan: FramePlan):
        run = FrameRun(frame, r, plan, self.now)
        self.runs[(frame, r)] = run
        readbacks = []
        for task in plan.tasks:
            kind = "queue" if task.queue is not None else "task"
            job = Job(kind, task.channel, frame, r, task)
            run.jobs.append(job)
            if task.kind is TaskKind.READBACK:
                readbacks.append(job)
                for link in task.outputs:
                    run.producers.setdefault((link.name, link.eye), []).append(job)
            if kind == "queue":
                for link in task.outputs:
                    run.producers.setdefault((link.name, link.eye), []).append(job)
                qname = task.queue
                run.queue_items.setdefault(qname, {k: "pending" for k in range(len(plan.queues[qname].items))})
            if task.kind is TaskKind.ASSEMBLE:
                node = self.channel_node[task.channel]
                for name, eye in task.inputs:
                    run.consumers.setdefault((name, eye), set()).add(node)
                    base = name.split("#", 1)[0]
                    if base != name:
                        run.consumers.setdefault((base, eye), set()).add(node)
        for job in run.jobs:
            self.lanes[job.lane].jobs.append(job)
            if job.task.kind is TaskKind.READBACK:
                # transmit slots are fixed at release so each lane keeps (frame, seq) order
                src = self.channel_node[job.lane]
                for link in job.task.outputs:
                    for node in sorted(run.consumers.get((link.name, link.eye), ())):
                        if node != src:
                            tx = Job("transmit", f"xmit:{src}", frame, r, key=(link.name, link.eye), dest_node=node)
                            self.lanes[tx.lane].jobs.append(tx)
                            job.cost.setdefault("transmits", []).append(tx)
        dest = self.roots[r].destination.channel
        run.swap_job = Job("swap", dest, frame, r)
        self.lanes[dest].jobs.append(run.swap_job)

    # -- dispatch ---------------------------------------------------------------------------

    def _dispatch(self):
        progress = True
        while progress:
            progress = False
            for lane in self.lane_list:
                if lane.busy is not None or lane.dead or not lane.jobs:
                    continue
                job = lane.jobs[0]
                if job.state == "cancelled":
                    lane.jobs.popleft()
                    progress = True
                    continue
                if self._ready(job):
                    lane.jobs.popleft()
                    self._start(lane, job)
                    progress = True

    def _ready(self, job: Job) -> bool:
        run = self.runs[(job.frame, job.root)]
        if job.kind == "transmit":
            return job.key in run.data
        if job.kind == "swap":
            return self._swap_ready(run)
        if job.task.kind is TaskKind.ASSEMBLE:
            node = self.channel_node[job.lane]
            return all(self._input_state(run, name, eye, node) != "wait" for name, eye in job.task.inputs)
        return True

    def _input_state(self, run: FrameRun, name: str, eye: Eye, node: str) -> str:
        if (name, eye, node) in run.arrived:
            return "ready"
        if (name, eye, node) in run.lost:
            return "skip"
        base, _, item = name.partition("#")
        if item:
            qname = run.plan.queue_frames.get(base)
            state = run.queue_items.get(qname, {}).get(int(item))
            return "skip" if state in (None, "lost") else "wait"
        producers = run.producers.get((name, eye), [])
        if not producers or all(p.state == "cancelled" for p in producers):
            return "skip"
        return "wait"

    def _swap_ready(self, run: FrameRun) -> bool:
        members = [run]
        barrier = self.roots[run.root].barrier
        if barrier is not None:
            members = [
                self.runs[(run.frame, r)]
                for r, info in enumerate(self.roots)
                if info.barrier == barrier and (run.frame, r) in self.runs
            ]
        for m in members:
            if any(j.state not in ("done", "cancelled") for j in m.jobs):
                return False
        fps = self.equalizers.framerate.get(run.root)
        if fps is not None and run.root in self.last_swap:
            earliest = self.last_swap[run.root] + int(round(1e9 / fps))
            if self.now < earliest:
                if not run.swap_job.cost.get("wake"):
                    run.swap_job.cost["wake"] = True
                    self._at(earliest, self._rank(run.swap_job.lane), lambda: None)
                return False
        return True

    # -- job execution -----------------------------------------------------------------------

    def _start(self, lane: Lane, job: Job):
        lane.busy = job
        job.state = "running"
        job.start = self.now
        run = self.runs[(job.frame, job.root)]
        node = lane.node
        if job.kind == "transmit":
            data = run.data[job.key]
            nbytes = self._transmit_bytes(data)
            job.cost["bytes"] = nbytes
            duration = self.cost.scale(node, self.cost.per_byte_transmit * nbytes)
            self._log("transmit_start", lane.name, job.frame)
            self._finish_at(lane, job, duration)
            return
        if job.kind == "swap":
            self._log("swap_start", lane.name, job.frame)
            self._finish_at(lane, job, self.cost.scale(node, self.cost.swap_fixed))
            return
        task = job.task
        self._log(f"{task.kind.value.lower()}_start", lane.name, job.frame)
        if job.kind == "queue":
            self._queue_batch(lane, job)
            return
        c = self.cost
        if task.kind is TaskKind.CLEAR:
            self.executor.clear(task)
            duration = c.fixed_per_task
        elif task.kind is TaskKind.DRAW:
            prims, frags = self.executor.draw(task)
            job.cost["pixels"] = frags
            job.cost["roi"] = self.executor.draw_roi(task.context)
            duration = self._draw_time(task, task.context, prims, frags)
        elif task.kind is TaskKind.READBACK:
            outputs = self.executor.readback(task)
            job.outputs = outputs
            remote = [d for d in outputs if not self._all_in_place(run, d)]
            pixels = sum(d.pixels for d in remote)
            job.cost["pixels"] = pixels
            duration = c.fixed_per_task + (c.readback_fixed + c.per_pixel_readback * pixels if remote else 0.0)
        elif task.kind is TaskKind.ASSEMBLE:
            node_name = self.channel_node[task.channel]
            inputs = []
            for name, eye in task.inputs:
                d = run.arrived.get((name, eye, node_name))
                if d is not None:
                    inputs.append(d)
            pixels = self.executor.assemble(task, inputs)
            job.cost["pixels"] = pixels
            work = any(not self.executor.is_in_place(d, task) for d in inputs)
            duration = c.fixed_per_task + (c.assemble_fixed + c.per_pixel_assemble * pixels if work else 0.0)
        else:  # pragma: no cover
            raise SimulationError(f"unknown task {task.kind}")
        self._finish_at(lane, job, self.cost.scale(node, duration))

    def _draw_time(self, task: Task, ctx: RenderContext, prims: int, frags: int) -> float:
        c = self.cost
        if c.draw_override is not None:
            t = c.draw_override(task.channel, ctx.frame, ctx)
            if t is not None:
                return float(t)
        return c.fixed_per_task + c.draw_fixed + c.per_triangle * prims + c.per_fragment * frags

    def _all_in_place(self, run: FrameRun, data: FrameData) -> bool:
        """True when every consumer assembles on the producing channel without a copy."""
        consumers = [
            j.task
            for j in run.jobs
            if j.task is not None
            and j.task.kind is TaskKind.ASSEMBLE
            and (data.link.name, data.link.eye) in j.task.inputs
        ]
        return bool(consumers) and all(self.executor.is_in_place(data, t) for t in consumers)

    def _finish_at(self, lane: Lane, job: Job, duration: int):
        self._at(self.now + int(duration), lane.rank, lambda: self._finish(lane, job))

    def _finish(self, lane: Lane, job: Job):
        if job.state != "running" or lane.busy is not job:
            return  # lost with a dead node
        job.state = "done"
        job.end = self.now
        lane.busy = None
        self.last_seen[lane.node] = self.now
        run = self.runs[(job.frame, job.root)]
        kind = job.kind if job.kind in ("transmit", "swap") else job.task.kind.value.lower()
        self._log(f"{kind}_end", lane.name, job.frame)
        self._record(run, job)
        if job.kind == "transmit":
            run.arrived[job.key + (job.dest_node,)] = run.data[job.key]
        elif job.kind == "swap":
            self._swap(run)
        elif job.task.kind is TaskKind.READBACK:
            for d in job.outputs:
                self._publish(run, d, lane.node)

    def _publish(self, run: FrameRun, data: FrameData, src_node: str):
        key = (data.link.name, data.link.eye)
        run.data[key] = data
        if src_node in run.consumers.get(key, ()):
            run.arrived[key + (src_node,)] = data

    def _transmit_bytes(self, data: FrameData) -> int:
        if self.sim.codec is None or data.link.transport == "TEXTURE" or data.image is None:
            return data.nbytes
        img = data.image
        roi = img.roi if data.kind == "plain" else img.pvp
        if roi.empty:
            return 0
        part = img.crop(roi, with_depth=data.has_depth)
        raw = part.color.tobytes() + (part.depth.tobytes() if part.depth is not None else b"")
        enc = codecs.chunked_parallel(codec_id(self.sim.codec), raw, self.sim.chunks, self.sim.workers)
        blob = enc.to_bytes()
        if codecs.decode(enc) != raw:
            raise SimulationError("codec round trip failed")
        self.encoded.append(hashlib.sha256(blob).hexdigest())
        return len(blob)

    def _record(self, run: FrameRun, job: Job):
        task = job.task
        self.stats.append(
            {
                "frame": job.frame,
                "destination": self.roots[job.root].destination.name,
                "channel": job.lane,
                "node": self.lanes[job.lane].node,
                "compound": ".".join(map(str, task.compound)) if task else "",
                "task": job.kind.upper() if task is None else ("QUEUE_DRAW" if job.kind == "queue" else task.kind.value),
                "eye": task.context.eye.value if task else "",
                "start_ns": job.start,
                "end_ns": job.end,
                "pixels": int(job.cost.get("pixels", 0)),
                "bytes": int(job.cost.get("bytes", 0)),
            }
        )

    # -- queues ------------------------------------------------------------------------------

    def _queue_batch(self, lane: Lane, job: Job):
        run = self.runs[(job.frame, job.root)]
        task = job.task
        queue = run.plan.queues[task.queue]
        items = queue.poll(task.channel, queue.prefetch)
        job.polled = items
        if not items:
            self._finish_at(lane, job, self.cost.scale(lane.node, self.cost.fixed_per_task))
            return
        c = self.cost
        duration = 0.0
        outputs = []
        for k, item in items:
            run.queue_items[task.queue][k] = "running"
            data, prims, frags = self.executor.draw_item(task, item, k)
            outputs.append((k, data))
            duration += self._draw_time(task, data.producer.context, prims, frags)
            duration += c.readback_fixed + c.per_pixel_readback * data.pixels
            job.cost["pixels"] = job.cost.get("pixels", 0) + frags
        self._at(
            self.now + self.cost.scale(lane.node, duration),
            lane.rank,
            lambda: self._queue_batch_done(lane, job, outputs),
        )

    def _queue_batch_done(self, lane: Lane, job: Job, outputs):
        if job.state != "running" or lane.busy is not job:
            return
        run = self.runs[(job.frame, job.root)]
        self.last_seen[lane.node] = self.now
        for k, data in outputs:
            run.queue_items[job.task.queue][k] = "done"
            key = (data.link.name, data.link.eye)
            run.data[key] = data
            base_consumers = run.consumers.get((data.link.name.split("#")[0], data.link.eye), set())
            for node in sorted(base_consumers):
                if node == lane.node:
                    run.arrived[key + (node,)] = data
                else:
                    tx = Job("transmit", f"xmit:{lane.node}", job.frame, job.root, key=key, dest_node=node)
                    self.lanes[tx.lane].jobs.append(tx)
        job.polled = []
        self._queue_batch(lane, job)

    # -- swap and frame completion ------------------------------------------------------------

    def _swap(self, run: FrameRun):
        run.swapped = True
        info = self.roots[run.root]
        self.last_swap[run.root] = self.now
        rec = self.records[run.frame]
        rec.swaps[info.destination.name] = self.now
        if self.sim.render:
            out = self.images.setdefault(run.frame, {})
            dest = info.destination
            if self.anaglyph:
                fb = self.executor.framebuffer(dest.channel, dest.name, None)
                out[dest.name] = fb.copy() if fb is not None else Image.blank(dest.pvp)
            else:
                eyes = active_eyes(self.sim.eye_mode)
                for eye in eyes:
                    fb = self.executor.framebuffer(dest.channel, dest.name, eye)
                    label = dest.name if len(eyes) == 1 else f"{dest.name}.{eye.value}"
                    out[label] = fb.copy() if fb is not None else Image.blank(dest.pvp)
        self._collect_stats(run)
        if all(self.runs[(run.frame, r)].swapped for r in range(len(self.roots))):
            rec.finish_ns = self.now
            self._log("frame_end", "server", run.frame)
            nxt = run.frame + self.latency + 1
            if nxt < self.sim.frames and nxt >= self.released:
                self._release(nxt)

    def _collect_stats(self, run: FrameRun):
        draw: dict[tuple, int] = {}
        rois: dict[tuple, PixelViewport] = {}
        for j in run.jobs:
            if j.state == "done" and j.task.kind is TaskKind.DRAW:
                p = j.task.compound
                draw[p] = draw.get(p, 0) + (j.end - j.start)
                roi = j.cost.get("roi")
                if roi is not None and not roi.empty:
                    rois[p] = rois[p].union(roi) if p in rois else roi
        self.frame_stats.setdefault(run.frame, {})[run.root] = FrameStats(self.now - run.release, draw, rois)

    # -- failures ---------------------------------------------------------------------------------

    def _kill(self, node: str):
        self.dead_nodes[node] = self.now
        self._log("node_down", node, self.released - 1)
        for lane in self.lane_list:
            if lane.node == node:
                lane.dead = True
                if lane.busy is not None:
                    self.orphans.setdefault(node, []).append(lane.busy)
                lane.busy = None  # the running job never completes
        seen = self.last_seen.get(node, 0)
        ping = max(seen + self.sim.t1_ns, self.now)
        self._at(ping, -1, lambda: self._ping(node))

    def _ping(self, node: str):
        self._log("ping", node, self.released - 1)
        self._at(self.now + self.sim.t2_ns, -1, lambda: self._declare_failed(node))

    def _declare_failed(self, node: str):
        self.failed[node] = self.now
        self._log("failed", node, self.released - 1)
        dead_channels = {ch for ch, n in self.channel_node.items() if n == node}
        if any(r.destination.channel in dead_channels for r in self.roots):
            raise SimulationError(f"node {node} drives a destination channel")
        for run in self.runs.values():
            for job in run.jobs:
                if self.lanes[job.lane].node == node and job.state in ("pending", "running"):
                    self._cancel(run, job)
        # transmits are not part of run.jobs
        for job in self.orphans.pop(node, []):
            if job.state == "running":
                self._cancel(self.runs[(job.frame, job.root)], job)
        for lane in self.lane_list:
            if lane.node != node:
                continue
            for job in lane.jobs:
                if job.state in ("pending", "running"):
                    run = self.runs[(job.frame, job.root)]
                    self._cancel(run, job)
            lane.jobs.clear()
        # later frames drop the node's compounds; equalized siblings take over its area
        self.equalizers.fail_channels(dead_channels)
        for info in self.roots:
            self._deactivate(info.compound, info.compound.channel or info.destination.channel, dead_channels)

    def _deactivate(self, c: Compound, channel: str, dead: set[str]):
        channel = c.channel or channel
        if c.channel is not None and c.channel in dead:
            c.active = False
            c.usage = 0.0
            return
        for child in c.children:
            self._deactivate(child, channel, dead)

    def _cancel(self, run: FrameRun, job: Job):
        job.state = "cancelled"
        self._log("cancel", job.lane, job.frame)
        if job.kind == "transmit":
            run.lost.add(job.key + (job.dest_node,))
            return
        if job.kind == "queue":
            for k, _ in job.polled:
                run.queue_items[job.task.queue][k] = "lost"
            live = [
                j for j in run.jobs if j.kind == "queue" and j.task.queue == job.task.queue and j.state != "cancelled"
            ]
            if all(j.state == "done" for j in live):
                items = run.queue_items[job.task.queue]
                for k, state in items.items():
                    if state == "pending":
                        items[k] = "lost"
            return
        if job.task is not None and job.task.kind is TaskKind.READBACK:
            for tx in job.cost.get("transmits", []):
                if tx.state == "pending":
                    tx.state = "cancelled"
                    run.lost.add(tx.key + (tx.dest_node,))


def simulate(cfg: Config, scene, cost: CostModel | None = None, sim: SimConfig | None = None) -> SimResult:
    return Simulator(cfg, scene, cost, sim).run()


# -- export -----------------------------------------------------------------------------------------

STATS_FIELDS = ["frame", "destination", "channel", "node", "compound", "task", "eye", "start_ns", "end_ns", "pixels", "bytes"]


def write_stats_csv(result: SimResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=STATS_FIELDS)
        writer.writeheader()
        for row in sorted(result.stats, key=lambda r: (r["frame"], r["start_ns"], r["channel"], r["task"])):
            writer.writerow(row)


def write_timeline(result: SimResult, path) -> None:
    with open(path, "w") as fh:
        for event in result.timeline:
            fh.write(json.dumps(event, sort_keys=True) + "\n")


def swap_jitter_ns(result: SimResult, warmup: int = 0) -> float:
    t = np.diff(np.array(result.finish_times()[warmup:], dtype=np.float64))
    return float(t.std()) if len(t) else 0.0


__all__ = [
    "CostModel",
    "FrameRecord",
    "MS",
    "SimConfig",
    "SimResult",
    "SimulationError",
    "Simulator",
    "collect_roots",
    "simulate",
    "swap_jitter_ns",
    "write_stats_csv",
    "write_timeline",
]
