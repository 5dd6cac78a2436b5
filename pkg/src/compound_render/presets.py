"""Configuration text for the standard decomposition modes.

Every generator returns config source, so presets double as parser input
and as documentation of the format. Channel ``c{i}`` lives on node
``node{i}`` unless noted; ``c0`` is the destination channel.
"""

from __future__ import annotations

from fractions import Fraction


def _num(v) -> str:
    f = float(v)
    return str(int(f)) if f == int(f) else repr(f)


def _vec(*vals) -> str:
    return "[ " + " ".join(_num(v) for v in vals) + " ]"


def resources(channels: list[str], width: int = 320, height: int = 240, nodes: list[str] | None = None) -> str:
    """One node, pipe and full-window channel per name (or per ``nodes`` entry)."""
    nodes = nodes or [f"node{i}" for i in range(len(channels))]
    out = []
    for node, ch in zip(nodes, channels):
        out.append(
            f'node {{ name "{node}" pipe {{ window {{ viewport [ 0 0 {width} {height} ] '
            f'channel {{ name "{ch}" }} }} }} }}'
        )
    return "\n".join(out) + "\n"


def _header(n: int, width: int, height: int, latency: int, extra: str = "") -> str:
    return f"latency {latency}\n{extra}" + resources([f"c{i}" for i in range(n)], width, height)


def _band(i: int, n: int) -> str:
    lo, hi = Fraction(i, n), Fraction(i + 1, n)
    return _vec(0, lo, 1, hi - lo)


def _range(i: int, n: int) -> str:
    return _vec(Fraction(i, n), Fraction(i + 1, n))


def single(width: int = 320, height: int = 240, latency: int = 1) -> str:
    """The single-channel baseline."""
    return _header(1, width, height, latency) + 'compound { channel "c0" buffer [ COLOR DEPTH ] }\n'


def sort_first(n: int, width: int = 320, height: int = 240, latency: int = 1) -> str:
    """Horizontal screen bands; band 0 renders in place on the destination."""
    kids = []
    for i in range(n):
        frame = "" if i == 0 else f' outputframe {{ name "band.c{i}" buffer [ COLOR ] }}'
        kids.append(f'  compound {{ channel "c{i}" viewport {_band(i, n)}{frame} }}')
    inputs = " ".join(f'inputframe {{ name "band.c{i}" }}' for i in range(1, n))
    return (
        _header(n, width, height, latency)
        + 'compound { channel "c0" buffer [ COLOR DEPTH ]\n'
        + "\n".join(kids)
        + f"\n  {inputs}\n}}\n"
    )


def sort_last(n: int, width: int = 320, height: int = 240, latency: int = 1, volume: bool = False) -> str:
    """Database ranges composited on the destination (depth for meshes, ordered blend for volumes)."""
    buf = "[ COLOR ]" if volume else "[ COLOR DEPTH ]"
    kids = []
    for i in range(n):
        frame = "" if i == 0 else f' outputframe {{ name "db.c{i}" buffer {buf} }}'
        kids.append(f'  compound {{ channel "c{i}" range {_range(i, n)}{frame} }}')
    inputs = " ".join(f'inputframe {{ name "db.c{i}" }}' for i in range(1, n))
    return (
        _header(n, width, height, latency)
        + f'compound {{ channel "c0" buffer {buf}\n'
        + "\n".join(kids)
        + f"\n  {inputs}\n}}\n"
    )


def direct_send(n: int, width: int = 320, height: int = 240, latency: int = 1) -> str:
    """Sort-last with parallel compositing: channel i composites band i from all others."""
    groups = []
    for i in range(n):
        outs = " ".join(
            f'outputframe {{ name "t{j}.c{i}" viewport {_band(j, n)} }}' for j in range(n) if j != i
        )
        ins = " ".join(f'inputframe {{ name "t{i}.c{k}" }}' for k in range(n) if k != i)
        ret = "" if i == 0 else f' outputframe {{ name "f.c{i}" buffer [ COLOR ] }}'
        groups.append(
            f'  compound {{ channel "c{i}"\n'
            f"    compound {{ range {_range(i, n)} {outs} }}\n"
            f"    compound {{ viewport {_band(i, n)} task [ ASSEMBLE READBACK ] {ins}{ret} }}\n"
            f"  }}"
        )
    inputs = " ".join(f'inputframe {{ name "f.c{i}" }}' for i in range(1, n))
    return (
        _header(n, width, height, latency)
        + 'compound { channel "c0" buffer [ COLOR DEPTH ]\n'
        + "\n".join(groups)
        + f"\n  {inputs}\n}}\n"
    )


def stream(n: int, width: int = 320, height: int = 240, latency: int = 1, volume: bool = False) -> str:
    """A compositing chain ``c0 -> c1 -> ... -> c{n-1}``; the last channel is the destination.

    Volumes put the back slab at the head of the chain so each link blends
    a nearer slab over what it received.
    """
    buf = "[ COLOR ]" if volume else "[ COLOR DEPTH ]"
    dest = f"c{n - 1}"
    kids = []
    for k in range(n):
        slab = n - 1 - k if volume else k
        parts = [f'channel "c{k}"', f"range {_range(slab, n)}"]
        if k == n - 1:
            parts.append("task [ CLEAR DRAW ]")
        else:
            parts.append("task [ CLEAR DRAW ASSEMBLE READBACK ]")
            if k > 0:
                parts.append(f'inputframe {{ name "s{k - 1}" }}')
            parts.append(f'outputframe {{ name "s{k}" buffer {buf} }}')
        kids.append("  compound { " + " ".join(parts) + " }")
    nodes = [f"node{i}" for i in range(n)]
    return (
        f"latency {latency}\n"
        + resources([f"c{i}" for i in range(n)], width, height, nodes)
        + f'compound {{ channel "{dest}" buffer {buf}\n'
        + "\n".join(kids)
        + (f'\n  inputframe {{ name "s{n - 2}" }}\n}}\n' if n > 1 else "\n}\n")
    )


def pixel(kx: int, ky: int, width: int = 320, height: int = 240, latency: int = 1) -> str:
    """Interleaved pixel ownership over ``kx * ky`` channels."""
    n = kx * ky
    kids = []
    for i in range(n):
        dx, dy = i % kx, i // kx
        frame = "" if i == 0 else f' outputframe {{ name "px.c{i}" buffer [ COLOR ] }}'
        kids.append(f'  compound {{ channel "c{i}" pixel [ {kx} {ky} {dx} {dy} ]{frame} }}')
    inputs = " ".join(f'inputframe {{ name "px.c{i}" }}' for i in range(1, n))
    return (
        _header(n, width, height, latency)
        + 'compound { channel "c0" buffer [ COLOR DEPTH ]\n'
        + "\n".join(kids)
        + f"\n  {inputs}\n}}\n"
    )


def subpixel(n: int, width: int = 320, height: int = 240, latency: int = 1) -> str:
    """``n`` jittered full-frame samples averaged on the destination."""
    kids = []
    for i in range(n):
        frame = "" if i == 0 else f' outputframe {{ name "sp.c{i}" buffer [ COLOR ] }}'
        kids.append(f'  compound {{ channel "c{i}" subpixel [ {i} {n} ]{frame} }}')
    inputs = " ".join(f'inputframe {{ name "sp.c{i}" }}' for i in range(1, n))
    return (
        _header(n, width, height, latency)
        + 'compound { channel "c0" buffer [ COLOR DEPTH ]\n'
        + "\n".join(kids)
        + f"\n  {inputs}\n}}\n"
    )


def subpixel_single(index: int, n: int, width: int = 320, height: int = 240) -> str:
    """One jittered sample rendered alone, for the averaging oracle."""
    return _header(1, width, height, 1) + f'compound {{ channel "c0" buffer [ COLOR DEPTH ] subpixel [ {index} {n} ] }}\n'


def dplex(n: int, width: int = 320, height: int = 240, latency: int | None = None) -> str:
    """Time multiplex: source ``i`` renders whole frames ``f`` with ``f % n == i``."""
    latency = n - 1 if latency is None else latency
    kids = []
    for i in range(n):
        frame = "" if i == 0 else f' outputframe {{ name "dp.c{i}" buffer [ COLOR ] }}'
        kids.append(f'  compound {{ channel "c{i}" period {n} phase {i}{frame} }}')
    inputs = " ".join(f'inputframe {{ name "dp.c{i}" }}' for i in range(1, n))
    return (
        _header(n, width, height, latency)
        + 'compound { channel "c0" buffer [ COLOR DEPTH ]\n'
        + "\n".join(kids)
        + f"\n  {inputs}\n}}\n"
    )


def stereo_anaglyph(width: int = 320, height: int = 240, latency: int = 1, split: bool = True) -> str:
    """Left eye on c1, right eye on c2, recombined with color masks on c0."""
    if not split:
        return _header(1, width, height, latency, "stereo_mode ANAGLYPH\n") + 'compound { channel "c0" }\n'
    return (
        _header(3, width, height, latency, "stereo_mode ANAGLYPH\n")
        + 'compound { channel "c0" buffer [ COLOR DEPTH ]\n'
        + '  compound { channel "c1" eye [ LEFT ] outputframe { name "left" buffer [ COLOR ] } }\n'
        + '  compound { channel "c2" eye [ RIGHT ] outputframe { name "right" buffer [ COLOR ] } }\n'
        + '  inputframe { name "left" } inputframe { name "right" }\n}\n'
    )


def tiles(n: int, tile: int, width: int = 320, height: int = 240, latency: int = 1, prefetch: int = 1) -> str:
    """A tile queue on the destination drained by ``n`` channels."""
    kids = "\n".join(
        f'  compound {{ channel "c{i}" inputqueue {{ name "tiles" }} outputframe {{ name "tile" buffer [ COLOR ] }} }}'
        for i in range(n)
    )
    return (
        _header(n, width, height, latency)
        + 'compound { channel "c0" buffer [ COLOR DEPTH ]\n'
        + f'  outputqueue {{ name "tiles" tilesize [ {tile} {tile} ] prefetch {prefetch} }}\n'
        + kids
        + '\n  inputframe { name "tile" }\n}\n'
    )


def chunks(n: int, chunk: float, width: int = 320, height: int = 240, latency: int = 1) -> str:
    """A database chunk queue drained by ``n`` channels and z-composited."""
    kids = "\n".join(
        f'  compound {{ channel "c{i}" inputqueue {{ name "chunks" }} outputframe {{ name "chunk" buffer [ COLOR DEPTH ] }} }}'
        for i in range(n)
    )
    return (
        _header(n, width, height, latency)
        + 'compound { channel "c0" buffer [ COLOR DEPTH ]\n'
        + f'  outputqueue {{ name "chunks" chunksize {_num(chunk)} }}\n'
        + kids
        + '\n  inputframe { name "chunk" }\n}\n'
    )


def load_balanced(
    n: int,
    width: int = 320,
    height: int = 240,
    latency: int = 1,
    kind: str = "load_equalizer",
    mode: str = "2D",
    damping: float = 0.5,
) -> str:
    """Sort-first (or DB) with an adaptive split over ``n`` channels."""
    buf = "[ COLOR DEPTH ]" if mode == "DB" else "[ COLOR ]"
    kids = []
    for i in range(n):
        frame = "" if i == 0 else f' outputframe {{ name "lb.c{i}" buffer {buf} }}'
        kids.append(f'  compound {{ channel "c{i}"{frame} }}')
    inputs = " ".join(f'inputframe {{ name "lb.c{i}" }}' for i in range(1, n))
    return (
        _header(n, width, height, latency)
        + 'compound { channel "c0" buffer [ COLOR DEPTH ]\n'
        + f"  {kind} {{ mode {mode} damping {_num(damping)} }}\n"
        + "\n".join(kids)
        + f"\n  {inputs}\n}}\n"
    )


def alternating_pair(width: int = 320, height: int = 240, latency: int = 1) -> str:
    """Two sort-first sources feeding a separate assemble-only destination ``c0``."""
    return (
        _header(3, width, height, latency)
        + 'compound { channel "c0" buffer [ COLOR ]\n'
        + f'  compound {{ channel "c1" viewport {_band(0, 2)} outputframe {{ name "a" }} }}\n'
        + f'  compound {{ channel "c2" viewport {_band(1, 2)} outputframe {{ name "b" }} }}\n'
        + '  inputframe { name "a" } inputframe { name "b" }\n}\n'
    )


def cslb_wall(
    segments: int = 6,
    gpus: int = 12,
    width: int = 160,
    height: int = 120,
    latency: int = 1,
    view_equalizer: bool = True,
) -> str:
    """A display wall of ``segments`` destinations sharing ``gpus`` channels.

    Segment ``s`` is displayed by ``g{2s}`` and statically paired with
    ``g{2s+1}``. With the view equalizer every segment may use every GPU;
    without it each segment load-balances over its own pair.
    """
    text = f"latency {latency}\n" + resources([f"g{i}" for i in range(gpus)], width, height)
    per = gpus // segments
    roots = []
    for s in range(segments):
        home = per * s
        pool = range(gpus) if view_equalizer else range(home, home + per)
        kids = []
        for g in pool:
            usage = "" if not view_equalizer else f" usage {_num(1 if g == home else 0)}"
            frame = "" if g == home else f' outputframe {{ name "s{s}.g{g}" buffer [ COLOR ] }}'
            kids.append(f'    compound {{ channel "g{g}"{usage}{frame} }}')
        inputs = " ".join(f'inputframe {{ name "s{s}.g{g}" }}' for g in pool if g != home)
        roots.append(
            f'  compound {{ channel "g{home}" buffer [ COLOR DEPTH ]\n'
            f"    load_equalizer {{ mode 2D damping 0.5 }}\n" + "\n".join(kids) + f"\n    {inputs}\n  }}"
        )
    if view_equalizer:
        return text + "compound {\n  view_equalizer { }\n" + "\n".join(roots) + "\n}\n"
    return text + "\n".join(r.strip() for r in roots) + "\n"


def dfr(width: int = 320, height: int = 240, latency: int = 1, target_ms: float = 16.6, damping: float = 0.5) -> str:
    """Dynamic frame resolution: a zoomed draw on c0 upscaled into its own framebuffer."""
    return (
        _header(1, width, height, latency)
        + 'compound { channel "c0" buffer [ COLOR ]\n'
        + f"  DFR_equalizer {{ target {_num(target_ms)} damping {_num(damping)} }}\n"
        + '  compound { outputframe { name "dfr" buffer [ COLOR ] } }\n'
        + '  inputframe { name "dfr" }\n}\n'
    )


MODES = {
    "sort-first": sort_first,
    "sort-last": sort_last,
    "direct-send": direct_send,
    "stream": stream,
    "dplex": dplex,
    "subpixel": subpixel,
    "tiles": lambda n, **kw: tiles(n, 128, **kw),
    "load-balanced": load_balanced,
}
