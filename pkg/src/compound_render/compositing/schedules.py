"""Parallel compositing schedules and a round-based executor.

A schedule is a list of transfer steps. Each step moves one region of the
sender's current image to the receiver, which combines it with ``op``.
Regions are full-width horizontal bands of the destination image.

For ordered blending the channel order is depth order: index 0 is the
farthest (back-most) contribution.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from compound_render.compositing.image import FAR_DEPTH, Image
from compound_render.compositing.kernels import (
    BlendOrder,
    CompositeOp,
    assemble_tile,
    blend_over,
    z_composite,
)
from compound_render.geometry import PixelViewport

COLOR = "color"
DEPTH = "depth"


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    round: int
    sender: str
    receiver: str
    region: PixelViewport
    buffers: frozenset
    op: CompositeOp


@dataclass
class CompositeSchedule:
    algorithm: str
    channels: tuple[str, ...]
    destination: str
    pvp: PixelViewport
    steps: list[Step] = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return 1 + max((s.round for s in self.steps), default=-1)

    def steps_in_round(self, r: int) -> list[Step]:
        return [s for s in self.steps if s.round == r]

    def message_count(self) -> int:
        return len(self.steps)


def _band(pvp: PixelViewport, y0: int, y1: int) -> PixelViewport:
    return PixelViewport(pvp.x, y0, pvp.w, max(y1 - y0, 0))


def _split_rows(y0: int, y1: int, n: int) -> list[tuple[int, int]]:
    """``n`` bands of ``ceil(height / n)`` rows; the last one is clipped."""
    size = -(-(y1 - y0) // n)
    return [(min(y0 + i * size, y1), min(y0 + (i + 1) * size, y1)) for i in range(n)]


def _reduce_op(blend: bool) -> CompositeOp:
    return CompositeOp.BLEND_OVER if blend else CompositeOp.Z_COMPOSITE


def _reduce_buffers(blend: bool) -> frozenset:
    return frozenset({COLOR}) if blend else frozenset({COLOR, DEPTH})


def _gather(sched: CompositeSchedule, owned: Mapping[str, tuple[int, int]], rnd: int) -> None:
    for c in sched.channels:
        if c == sched.destination:
            continue
        y0, y1 = owned[c]
        if y1 > y0:
            sched.steps.append(
                Step(rnd, c, sched.destination, _band(sched.pvp, y0, y1), frozenset({COLOR}), CompositeOp.COPY)
            )


def build_direct_send(
    channels: Sequence[str], destination: str, pvp: PixelViewport, blend: bool = False
) -> CompositeSchedule:
    """Each of n channels composites one of n bands, then the bands are gathered."""
    channels = tuple(channels)
    if len(channels) < 2:
        raise ScheduleError("direct send needs at least two channels")
    sched = CompositeSchedule("direct_send", channels, destination, pvp)
    bands = _split_rows(pvp.y, pvp.y1, len(channels))
    for i, sender in enumerate(channels):
        for j, receiver in enumerate(channels):
            y0, y1 = bands[j]
            if i != j and y1 > y0:
                sched.steps.append(
                    Step(0, sender, receiver, _band(pvp, y0, y1), _reduce_buffers(blend), _reduce_op(blend))
                )
    _gather(sched, dict(zip(channels, bands)), 1)
    return sched


def build_binary_swap(
    channels: Sequence[str], destination: str, pvp: PixelViewport, blend: bool = False
) -> CompositeSchedule:
    """log2(n) pairwise half-swaps followed by a gather of the n owned regions."""
    channels = tuple(channels)
    n = len(channels)
    if n < 1 or n & (n - 1):
        raise ScheduleError(f"binary swap needs a power-of-two channel count, got {n}")
    sched = CompositeSchedule("binary_swap", channels, destination, pvp)
    if n == 1:
        return sched
    owned = {c: (pvp.y, pvp.y1) for c in channels}
    rounds = int(math.log2(n))
    for r in range(rounds):
        bit = 1 << r
        new_owned = dict(owned)
        for i, c in enumerate(channels):
            partner = channels[i ^ bit]
            y0, y1 = owned[c]
            mid = y0 + (y1 - y0) // 2
            keep, give = ((y0, mid), (mid, y1)) if not i & bit else ((mid, y1), (y0, mid))
            new_owned[c] = keep
            if give[1] > give[0]:
                sched.steps.append(
                    Step(r, c, partner, _band(pvp, *give), _reduce_buffers(blend), _reduce_op(blend))
                )
        owned = new_owned
    _gather(sched, owned, rounds)
    return sched


def group_23(count: int) -> list[list[int]]:
    """Consecutive groups of two, with a single group of three taking the odd remainder."""
    if count <= 1:
        return [list(range(count))]
    groups = []
    i = 0
    pairs = count // 2 - (1 if count % 2 else 0)
    for _ in range(pairs):
        groups.append([i, i + 1])
        i += 2
    if count % 2:
        groups.append([i, i + 1, i + 2])
    return groups


def build_23_swap(
    channels: Sequence[str], destination: str, pvp: PixelViewport, blend: bool = False
) -> CompositeSchedule:
    """Swap compositing for any n >= 2 using groups of two or three.

    Groups of equal-sized units with identical partitions exchange like radix-k
    swap (for powers of two this is binary swap). Otherwise the group's image
    is re-split into one band per member and every member sends the part of
    its region overlapping each band.
    """
    channels = tuple(channels)
    if len(channels) < 2:
        raise ScheduleError("2-3 swap needs at least two channels")
    sched = CompositeSchedule("23_swap", channels, destination, pvp)
    owned = {c: (pvp.y, pvp.y1) for c in channels}
    units = [[c] for c in channels]
    rnd = 0
    op, bufs = _reduce_op(blend), _reduce_buffers(blend)
    while len(units) > 1:
        next_units = []
        new_owned = dict(owned)
        for group in group_23(len(units)):
            members = [units[i] for i in group]
            first = members[0]
            aligned = all(len(u) == len(first) for u in members) and all(
                owned[u[j]] == owned[first[j]] for u in members for j in range(len(first))
            )
            if aligned:
                for j in range(len(first)):
                    peers = [u[j] for u in members]
                    bands = _split_rows(*owned[peers[0]], len(peers))
                    for s in peers:
                        for k, recv in enumerate(peers):
                            if recv != s and bands[k][1] > bands[k][0]:
                                sched.steps.append(Step(rnd, s, recv, _band(pvp, *bands[k]), bufs, op))
                    for k, recv in enumerate(peers):
                        new_owned[recv] = bands[k]
            else:
                flat = [c for u in members for c in u]
                bands = _split_rows(pvp.y, pvp.y1, len(flat))
                for s in flat:
                    sy0, sy1 = owned[s]
                    for k, recv in enumerate(flat):
                        y0, y1 = max(sy0, bands[k][0]), min(sy1, bands[k][1])
                        if recv != s and y1 > y0:
                            sched.steps.append(Step(rnd, s, recv, _band(pvp, y0, y1), bufs, op))
                for k, recv in enumerate(flat):
                    new_owned[recv] = bands[k]
            next_units.append([c for u in members for c in u])
        owned = new_owned
        units = next_units
        rnd += 1
    _gather(sched, owned, rnd)
    return sched


def build_stream_chain(
    channels: Sequence[str], destination: str, pvp: PixelViewport, blend: bool = False
) -> CompositeSchedule:
    """Channel i forwards its accumulated image to channel i + 1; the destination is last."""
    channels = tuple(channels)
    if len(channels) < 2:
        raise ScheduleError("a stream chain needs at least two channels")
    if channels[-1] != destination:
        raise ScheduleError("the destination must be the last channel of the chain")
    sched = CompositeSchedule("stream", channels, destination, pvp)
    for i in range(len(channels) - 1):
        sched.steps.append(
            Step(i, channels[i], channels[i + 1], pvp, _reduce_buffers(blend), _reduce_op(blend))
        )
    return sched


# -- execution ---------------------------------------------------------------


@dataclass
class _Held:
    image: Image
    mask: np.ndarray  # pixels holding valid partial results
    ranks: tuple[int, int] | None


def _masked(image: Image, mask: np.ndarray) -> Image:
    out = image.copy()
    out.color[~mask] = 0
    if out.depth is not None:
        out.depth[~mask] = FAR_DEPTH
    return out


def execute_schedule(schedule: CompositeSchedule, images: Mapping[str, Image]) -> Image:
    """Run ``schedule`` on full-frame images and return the destination's image.

    Steps of one round read the senders' state from before the round, so any
    interleaving of a round's steps gives the same result. Blend folds follow
    channel (depth) order regardless of step order.
    """
    pvp = schedule.pvp
    state: dict[str, _Held] = {}
    for rank, c in enumerate(schedule.channels):
        im = images[c].expand(pvp)
        state[c] = _Held(im, np.ones((pvp.h, pvp.w), bool), (rank, rank))
    if schedule.destination not in state:
        state[schedule.destination] = _Held(
            Image.blank(pvp, depth=False), np.zeros((pvp.h, pvp.w), bool), None
        )

    for r in range(schedule.rounds):
        steps = schedule.steps_in_round(r)
        incoming: dict[str, list[tuple[Step, Image, tuple[int, int] | None]]] = defaultdict(list)
        sent: dict[str, np.ndarray] = {}
        for st in steps:
            src = state[st.sender]
            piece = _masked(src.image, src.mask).crop(st.region, with_depth=DEPTH in st.buffers)
            incoming[st.receiver].append((st, piece, src.ranks))
            rows, cols = st.region.slices(pvp)
            m = sent.setdefault(st.sender, np.zeros((pvp.h, pvp.w), bool))
            if st.op is not CompositeOp.COPY:
                m[rows, cols] = True
        nothing = np.zeros((pvp.h, pvp.w), bool)
        new_state = {}
        for c, held in state.items():
            kept = held.mask & ~sent.get(c, nothing)
            if c in incoming:
                image, received, ranks = _receive(held, incoming[c], pvp)
                new_state[c] = _Held(image, kept | received, ranks)
            else:
                new_state[c] = _Held(held.image, kept, held.ranks)
        state = new_state

    dest = state[schedule.destination]
    return _masked(dest.image, dest.mask)


def _receive(held: _Held, pieces, pvp: PixelViewport):
    recv_mask = np.zeros((pvp.h, pvp.w), bool)
    for st, _, _ in pieces:
        rows, cols = st.region.slices(pvp)
        recv_mask[rows, cols] = True
    base = _masked(held.image, held.mask)
    ops = {st.op for st, _, _ in pieces}
    if len(ops) != 1:
        raise ScheduleError(f"mixed operations in one round: {ops}")
    op = ops.pop()
    ranks = [held.ranks] if held.ranks is not None else []
    ranks += [rk for _, _, rk in pieces if rk is not None]
    hull = (min(r[0] for r in ranks), max(r[1] for r in ranks)) if ranks else None

    if op is CompositeOp.Z_COMPOSITE:
        out = base
        for _, piece, _ in pieces:
            out = z_composite(out, piece)
    elif op is CompositeOp.COPY:
        out = base
        for _, piece, _ in pieces:
            out = assemble_tile(out, piece)
    elif op is CompositeOp.BLEND_OVER:
        layers = []
        if held.ranks is not None and held.mask.any():
            layers.append((held.ranks, base))
        layers += [(rk, piece) for _, piece, rk in pieces]
        layers.sort(key=lambda item: item[0][0])
        out = Image.blank(pvp, depth=base.depth is not None)
        for _, layer in layers:
            out = blend_over(out, layer, BlendOrder.BACK_TO_FRONT)
    else:
        raise ScheduleError(f"unsupported schedule op {op}")
    return out, recv_mask, hull


def sequential_composite(images: Sequence[Image], blend: bool = False) -> Image:
    """Reference fold over full images in channel order (index 0 back-most for blends)."""
    acc = images[0]
    for im in images[1:]:
        acc = blend_over(acc, im, BlendOrder.BACK_TO_FRONT) if blend else z_composite(acc, im)
    return acc
